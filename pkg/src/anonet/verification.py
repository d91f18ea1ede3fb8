'''
 Centralized oracles and run audits.

 The oracles evaluate with exact rationals. The checks replay a protocol on
 relabeled and replicated graphs and compare node states round by round.
'''
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Hashable, Iterator, List, Optional, Sequence

import numpy as np

from anonet.averaging import IntervalValue, pebbles_held, pebbles_in_flight
from anonet.compiler import CoverageError, LevelSetSpec, ProportionVector
from anonet.engine import EMPTY, Configuration, Protocol, ProtocolViolation, simulate
from anonet.extrema import pointer_chain
from anonet.graph import PortLabeledGraph, apply_isomorphism, ring

# Audit findings that mean the protocol itself misbehaved, not that it answered wrongly.
INVARIANT_CODES = ('conservation', 'spread', 'pointer')


@dataclass
class OracleReport:
    """
    Attributes:
        expected: Oracle value.
        observed: Value produced by the distributed run.
        agree: True iff expected == observed and no violation was logged.
        violations: One line per breached invariant, first breach first.
    """
    expected: Any
    observed: Any
    agree: bool = False
    violations: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.agree = self.expected == self.observed and not self.violations

    def add(self, violation: str):
        self.violations.append(violation)
        self.agree = False

    def raise_for_disagreement(self, what: str = 'run'):
        if not self.agree:
            raise OracleDisagreement(what, self)

    def raise_for_breach(self, codes: Sequence[str] = INVARIANT_CODES, round_index: Optional[int] = None):
        """Raises the first violation whose code is in `codes` as a ProtocolViolation."""
        for violation in self.violations:
            code = violation.split(':', 1)[0]
            if code in codes:
                raise ProtocolViolation(code, violation, round_index=round_index)


def _check_values(x: Sequence[int], K: int):
    if not x:
        raise ValueError('need at least one value')
    bad = [v for v in x if not 0 <= v <= K]
    if bad:
        raise ValueError(f'values {bad} outside 0..{K}')


def oracle_average(x: Sequence[int], K: int) -> IntervalValue:
    """Member of {0}, (0,1), ..., {K} containing the exact mean of x."""
    _check_values(x, K)
    return IntervalValue.containing(Fraction(sum(x), len(x)))


def oracle_proportions(x: Sequence[int], K: int) -> ProportionVector:
    _check_values(x, K)
    return ProportionVector.from_counts([sum(1 for v in x if v == k) for k in range(K + 1)])


def oracle_evaluate(spec: LevelSetSpec, p: ProportionVector) -> Hashable:
    """Output of the first clause that holds at p."""
    for y, clauses in spec.entries:
        if any(all(ineq.holds(p) for ineq in clause) for clause in clauses):
            return y
    raise CoverageError(p)


def oracle_extreme(x: Sequence[int], kind: str = 'max') -> int:
    if not x:
        raise ValueError('need at least one value')
    return max(x) if kind == 'max' else min(x)


def exhaustive_inputs(n: int, K: int) -> Iterator[tuple]:
    """Every x in {0..K}^n."""
    return itertools.product(range(K + 1), repeat=n)


def random_inputs(rng: np.random.Generator, n: int, K: int) -> List[int]:
    return [int(v) for v in rng.integers(0, K + 1, size=n)]


def _first_divergence(left: List[Configuration], right: List[Configuration], pairs) -> Optional[str]:
    for t, (a, b) in enumerate(zip(left, right)):
        for i, j in pairs:
            if a.states[i] != b.states[j]:
                return f'round {t}: node {i} and node {j} differ'
    return None


def check_equivariance(protocol: Protocol, graph: PortLabeledGraph, x: Sequence[Any],
                       permutation: Sequence[int], rounds: int = 60) -> OracleReport:
    """
    Runs (G, x) and (pi(G), pi(x)) for `rounds` rounds and compares the state
    of node i in the first run with node pi(i) in the second at every round.
    """
    relabeled = apply_isomorphism(graph, permutation)
    moved = [None] * len(x)
    for i, value in enumerate(x):
        moved[permutation[i]] = value
    original = simulate(graph, protocol, x, rounds)
    permuted = simulate(relabeled, protocol, moved, rounds)
    divergence = _first_divergence(original, permuted, [(i, permutation[i]) for i in range(graph.n)])
    report = OracleReport('equivariant', 'equivariant' if divergence is None else 'diverged')
    if divergence:
        report.add(divergence)
    return report


def check_replication(protocol: Protocol, x: Sequence[Any], k: int, rounds: int = 60) -> OracleReport:
    """
    Runs ring(m) on x and ring(k*m) on x repeated k times, and compares node
    i of the small ring with nodes i, i+m, ..., i+(k-1)m at every round.
    """
    m = len(x)
    if m < 2 or k < 1:
        raise ValueError(f'replication needs m >= 2 and k >= 1, got m={m}, k={k}')
    small = simulate(ring(m), protocol, list(x), rounds)
    large = simulate(ring(k * m), protocol, list(x) * k, rounds)
    divergence = _first_divergence(small, large, [(j % m, j) for j in range(k * m)])
    report = OracleReport(small[-1].outputs() * k, large[-1].outputs())
    if divergence:
        report.add(divergence)
    return report


class AveragingMonitor:
    """
    Round observer for averaging runs. Counts held plus in-flight pebbles at
    every round and checks the spread of the last configuration seen.
    """

    def __init__(self, x: Sequence[int]):
        self.total = sum(x)
        self.report = OracleReport(self.total, self.total)
        self.last: Optional[Configuration] = None

    def __call__(self, config: Configuration):
        self.last = config
        if self.report.violations:
            return
        counted = sum(pebbles_held(config)) + pebbles_in_flight(config)
        if counted != self.total:
            self.report.observed = counted
            self.report.add(f'conservation: round {config.round} counts {counted} pebbles, expected {self.total}')

    def finish(self) -> OracleReport:
        held = pebbles_held(self.last)
        if max(held) - min(held) > 1:
            self.report.add(f'spread: round {self.last.round} values range over {min(held)}..{max(held)}')
        return self.report


def averaging_audit(trace: Sequence[Configuration], x: Sequence[int]) -> OracleReport:
    """
    Checks that held plus in-flight pebbles equal sum(x) at every round and
    that values differ by at most 1 at the last round.
    """
    monitor = AveragingMonitor(x)
    for config in trace:
        monitor(config)
    return monitor.finish()


def tracker_audit(graph: PortLabeledGraph, config: Configuration, inputs: Sequence[int],
                  kind: str = 'max') -> OracleReport:
    """
    At a quiescent configuration of an ExtremaProtocol run, checks that every
    output is the true extreme of `inputs` and that every pointer chain ends
    at a node holding it.
    """
    expected = oracle_extreme(inputs, kind)
    outputs = config.outputs()
    report = OracleReport(expected, expected)
    wrong = [i for i, y in enumerate(outputs) if y != expected]
    if wrong:
        report.observed = outputs[wrong[0]]
        report.add(f'estimate: node {wrong[0]} reports {outputs[wrong[0]]}, true {kind} is {expected}')
        return report
    snapshot = [state.z for state in config.states]
    if any(z is EMPTY for z in snapshot):
        report.add('tracker has not run yet')
        return report
    for start in range(graph.n):
        try:
            end = pointer_chain(snapshot, graph, start)
        except ProtocolViolation as exc:
            report.add(f'pointer: {exc}')
            break
        if inputs[end] != expected:
            report.add(f'pointer: chain from node {start} ends at node {end} holding {inputs[end]}')
            break
    return report


class OracleDisagreement(AssertionError):
    """
    A distributed result differs from its oracle.
    """

    def __init__(self, what, report: OracleReport):
        self.report = report
        first = report.violations[0] if report.violations else 'no invariant breached'
        super(OracleDisagreement, self).__init__(
            f'{what}: expected {report.expected}, observed {report.observed} ({first})')
