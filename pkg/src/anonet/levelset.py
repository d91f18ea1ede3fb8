'''
 Text format for level-set specs.

   # comment
   alphabet 4
   output "<= half": p1 <= 1/2
   output 2: p1 <= p2 <= p3 & p4 < p3
   output other: true

 Repeated labels add clauses to the same output. Clauses are conjunctions
 joined by '&' of comparison chains over linear expressions such as
 `3/4 p1 - p2 + 1/2`. p0 may appear and stands for 1 - p1 - ... - pK.
'''
import re
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Tuple

from anonet.compiler import (Clause, LevelSetError, LevelSetSpec, RationalInequality,
                             abstain_majority_spec, majority_spec, second_most_popular_spec,
                             weighted_majority_spec)

_TOKEN = re.compile(r'\s*(?:(?P<num>\d+(?:/\d+)?)|(?P<var>p\d+)|(?P<op>[-+*]))')
_COMPARISON = re.compile(r'(<=|>=|<|>|=)')
_OUTPUT = re.compile(r'output\s+(?:"(?P<quoted>[^"]*)"|(?P<bare>[^\s:]+))\s*:(?P<body>.*)$')

BUILTIN_SPECS = {
    'majority': majority_spec,
    'weighted_majority': weighted_majority_spec,
    'abstain_majority': abstain_majority_spec,
    'second_most_popular': second_most_popular_spec,
}


def _tokens(text: str, line_no: int) -> List[Tuple[str, str]]:
    tokens = []
    position = 0
    text = text.rstrip()
    while position < len(text):
        match = _TOKEN.match(text, position)
        if not match or match.end() == position:
            raise LevelSetError(f'line {line_no}: cannot read {text[position:].strip()!r}')
        kind = match.lastgroup
        tokens.append((kind, match.group(kind)))
        position = match.end()
    return tokens


def _parse_expression(text: str, K: int, line_no: int) -> Tuple[List[Fraction], Fraction]:
    """Returns (coefficients of p1..pK, constant)."""
    tokens = _tokens(text, line_no)
    if not tokens:
        raise LevelSetError(f'line {line_no}: empty side in comparison')
    coefficients = [Fraction(0)] * (K + 1)
    constant = Fraction(0)
    i = 0
    while i < len(tokens):
        sign = 1
        while i < len(tokens) and tokens[i][1] in '+-':
            sign = -sign if tokens[i][1] == '-' else sign
            i += 1
        coefficient, variable = None, None
        if i < len(tokens) and tokens[i][0] == 'num':
            coefficient = Fraction(tokens[i][1])
            i += 1
            if i < len(tokens) and tokens[i][1] == '*':
                i += 1
        if i < len(tokens) and tokens[i][0] == 'var':
            variable = int(tokens[i][1][1:])
            i += 1
        if coefficient is None and variable is None:
            raise LevelSetError(f'line {line_no}: expected a term in {text.strip()!r}')
        value = sign * (coefficient if coefficient is not None else 1)
        if variable is None:
            constant += value
        elif variable > K:
            raise LevelSetError(f'line {line_no}: p{variable} outside alphabet 0..{K}')
        else:
            coefficients[variable] += value
        if i < len(tokens) and tokens[i][1] not in '+-':
            raise LevelSetError(f'line {line_no}: unexpected {tokens[i][1]!r} in {text.strip()!r}')
    # p0 = 1 - p1 - ... - pK
    p0 = coefficients[0]
    return [c - p0 for c in coefficients[1:]], constant + p0


def _comparison(lhs, op, rhs) -> List[RationalInequality]:
    coefficients = [a - b for a, b in zip(lhs[0], rhs[0])]
    threshold = rhs[1] - lhs[1]
    if op == '<=':
        return [RationalInequality.leq(coefficients, threshold)]
    if op == '<':
        return [RationalInequality.less(coefficients, threshold)]
    if op == '>=':
        return [RationalInequality.geq(coefficients, threshold)]
    if op == '>':
        return [RationalInequality.greater(coefficients, threshold)]
    return [RationalInequality.leq(coefficients, threshold), RationalInequality.geq(coefficients, threshold)]


def parse_clause(text: str, K: int, line_no: int = 0) -> Clause:
    text = text.strip()
    if text == 'true':
        return ()
    inequalities = []
    for chain in text.split('&'):
        parts = _COMPARISON.split(chain)
        if len(parts) < 3:
            raise LevelSetError(f'line {line_no}: no comparison in {chain.strip()!r}')
        sides = [_parse_expression(part, K, line_no) for part in parts[0::2]]
        for lhs, op, rhs in zip(sides, parts[1::2], sides[1:]):
            inequalities.extend(_comparison(lhs, op, rhs))
    return tuple(inequalities)


def parse_level_set(text: str) -> LevelSetSpec:
    K = None
    entries: Dict[str, List[Clause]] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if line.startswith('alphabet'):
            try:
                K = int(line.split()[1])
            except (IndexError, ValueError) as exc:
                raise LevelSetError(f'line {line_no}: expected "alphabet <K>"') from exc
            if K < 1:
                raise LevelSetError(f'line {line_no}: alphabet needs K >= 1')
            continue
        match = _OUTPUT.match(line)
        if not match:
            raise LevelSetError(f'line {line_no}: expected "output <label>: <clause>"')
        if K is None:
            raise LevelSetError(f'line {line_no}: "alphabet" must come before the outputs')
        label = match.group('quoted') if match.group('quoted') is not None else match.group('bare')
        entries.setdefault(label, []).append(parse_clause(match.group('body'), K, line_no))
    if K is None or not entries:
        raise LevelSetError('spec needs an alphabet line and at least one output')
    return LevelSetSpec(K, tuple((label, tuple(clauses)) for label, clauses in entries.items()))


def load_level_set(source) -> LevelSetSpec:
    """Reads a .lvl file, or returns a bundled spec for 'builtin:<name>'."""
    if isinstance(source, str) and source.startswith('builtin:'):
        name = source.split(':', 1)[1]
        if name not in BUILTIN_SPECS:
            raise LevelSetError(f'unknown bundled spec {name!r}')
        return BUILTIN_SPECS[name]()
    path = Path(source)
    if not path.exists():
        raise LevelSetError(f'spec file not found: {path}')
    return parse_level_set(path.read_text())
