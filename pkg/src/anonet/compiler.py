'''
 Compilation of proportion-based functions into banks of averaging instances.

 A function h on the proportion set D is given by its level sets, each a
 union of clauses and each clause an intersection of rational linear
 inequalities in p_1..p_K. Every inequality is cleared of denominators into
 an integer comparison (1/n) sum q_i <= q* (or <) whose left side an
 averaging instance computes on the locally encoded values q_i. All
 arithmetic is exact.
'''
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import partial
from typing import Any, Callable, Dict, FrozenSet, Hashable, Iterable, Iterator, List, Optional, Sequence, Tuple

from loguru import logger

from anonet.averaging import AveragingProtocol, IntervalValue
from anonet.engine import EMPTY, ProductProtocol
from anonet.extrema import DEFAULT_H_MAX

DEFAULT_COVERAGE_BOUND = 12
# Largest number of proportion vectors enumerated by the coverage check.
GRID_LIMIT = 60000


def as_fraction(value) -> Fraction:
    """Parses 'num/den' strings, ints and Fractions. Floats are taken exactly."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value.strip())
    return Fraction(value)


@dataclass(frozen=True)
class ProportionVector:
    """
    Frequencies of the values 0..K.

    Attributes:
        frequencies: p_0, p_1, ..., p_K as exact rationals summing to 1.
    """
    frequencies: Tuple[Fraction, ...]

    def __post_init__(self):
        values = tuple(Fraction(p) for p in self.frequencies)
        object.__setattr__(self, 'frequencies', values)
        if any(p < 0 for p in values):
            raise ValueError(f'negative frequency in {values}')
        if sum(values) != 1:
            raise ValueError(f'frequencies sum to {sum(values)}, not 1')

    @classmethod
    def from_counts(cls, counts: Sequence[int]) -> 'ProportionVector':
        total = sum(counts)
        if total <= 0:
            raise ValueError('counts must contain at least one node')
        return cls(tuple(Fraction(c, total) for c in counts))

    @classmethod
    def from_tail(cls, tail: Sequence) -> 'ProportionVector':
        """Builds the vector from p_1..p_K, with p_0 = 1 - sum."""
        tail = tuple(as_fraction(p) for p in tail)
        return cls((1 - sum(tail),) + tail)

    @property
    def K(self) -> int:
        return len(self.frequencies) - 1

    def p(self, k: int) -> Fraction:
        return self.frequencies[k]

    def tail(self) -> Tuple[Fraction, ...]:
        """p_1..p_K."""
        return self.frequencies[1:]

    def __str__(self):
        return ' '.join(f'{p.numerator}/{p.denominator}' for p in self.frequencies)


@dataclass(frozen=True)
class RationalInequality:
    """
    alpha_1 p_1 + ... + alpha_K p_K <= alpha (or < alpha when strict).
    """
    coefficients: Tuple[Fraction, ...]
    threshold: Fraction
    strict: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'coefficients', tuple(as_fraction(c) for c in self.coefficients))
        object.__setattr__(self, 'threshold', as_fraction(self.threshold))

    @classmethod
    def leq(cls, coefficients, threshold) -> 'RationalInequality':
        return cls(tuple(coefficients), threshold, False)

    @classmethod
    def less(cls, coefficients, threshold) -> 'RationalInequality':
        return cls(tuple(coefficients), threshold, True)

    @classmethod
    def geq(cls, coefficients, threshold) -> 'RationalInequality':
        return cls(tuple(-as_fraction(c) for c in coefficients), -as_fraction(threshold), False)

    @classmethod
    def greater(cls, coefficients, threshold) -> 'RationalInequality':
        return cls(tuple(-as_fraction(c) for c in coefficients), -as_fraction(threshold), True)

    @property
    def K(self) -> int:
        return len(self.coefficients)

    def negated(self) -> 'RationalInequality':
        """The complement: a.p <= t becomes -a.p < -t and vice versa."""
        return RationalInequality(tuple(-c for c in self.coefficients), -self.threshold, not self.strict)

    def value(self, p: ProportionVector) -> Fraction:
        return sum((c * q for c, q in zip(self.coefficients, p.tail())), Fraction(0))

    def holds(self, p: ProportionVector) -> bool:
        lhs = self.value(p)
        return lhs < self.threshold if self.strict else lhs <= self.threshold

    def __str__(self):
        terms = ' '.join(f"{'+' if c > 0 else ''}{c}p{k}" for k, c in enumerate(self.coefficients, start=1) if c)
        return f"{terms or '0'} {'<' if self.strict else '<='} {self.threshold}"


@dataclass(frozen=True)
class IntegerComparison:
    """
    (1/n) sum_i q_i <= q* (or <), with q_i computed locally from x_i.

    Attributes:
        positive: Indices k with a positive cleared coefficient (the set P).
        beta: |cleared coefficient| for k = 1..K.
        q_star: Cleared threshold plus the beta of every negative index.
        strict: Whether the comparison is strict.
    """
    positive: FrozenSet[int]
    beta: Tuple[int, ...]
    q_star: int
    strict: bool = False

    @property
    def cap(self) -> int:
        """Upper bound of the q_i alphabet."""
        return sum(self.beta)

    @property
    def encoding(self) -> Tuple[Tuple[int, ...], FrozenSet[int]]:
        """What the averaging instance depends on; strictness only affects the decision."""
        return self.beta, self.positive


def normalize_inequality(ineq: RationalInequality) -> IntegerComparison:
    """
    Clears denominators and splits indices by coefficient sign.

    Args:
        ineq (RationalInequality): The rational inequality.

    Returns:
        IntegerComparison: beta_k = |scale * alpha_k|, P = {k : alpha_k > 0},
        q* = scale * alpha + sum of beta_k over negative indices.
    """
    scale = math.lcm(*(c.denominator for c in ineq.coefficients), ineq.threshold.denominator)
    cleared = [int(c * scale) for c in ineq.coefficients]
    threshold = int(ineq.threshold * scale)
    positive = frozenset(k for k, c in enumerate(cleared, start=1) if c > 0)
    beta = tuple(abs(c) for c in cleared)
    q_star = threshold + sum(b for c, b in zip(cleared, beta) if c < 0)
    return IntegerComparison(positive, beta, q_star, ineq.strict)


def encode_local(x: int, cmp: IntegerComparison) -> int:
    """q_i = sum_{k in P} beta_k chi_k(i) + sum_{k in P^c} beta_k (1 - chi_k(i))."""
    q = 0
    for k, b in enumerate(cmp.beta, start=1):
        if not b:
            continue
        if k in cmp.positive:
            q += b if x == k else 0
        else:
            q += 0 if x == k else b
    return q


def decide_comparison(avg, cmp: IntegerComparison) -> Optional[bool]:
    """
    Decides the comparison from the averaging output; None while undecided.

    An open interval (v, v+1) never contains the integer q*, so the average
    is <= q* (and < q*) exactly when v + 1 <= q*.
    """
    if avg is EMPTY or avg is None:
        return None
    if avg.open:
        return avg.lower + 1 <= cmp.q_star
    return avg.lower < cmp.q_star if cmp.strict else avg.lower <= cmp.q_star


Clause = Tuple[RationalInequality, ...]


@dataclass(frozen=True)
class LevelSetSpec:
    """
    A function on D given by its level sets.

    Attributes:
        K: Largest value of the input alphabet {0..K}.
        entries: (y, clauses) in priority order; y is taken where some clause
                 (a conjunction of inequalities) holds. An empty clause always holds.
    """
    K: int
    entries: Tuple[Tuple[Hashable, Tuple[Clause, ...]], ...]

    def __post_init__(self):
        entries = tuple((y, tuple(tuple(clause) for clause in clauses)) for y, clauses in self.entries)
        object.__setattr__(self, 'entries', entries)
        for y, clauses in entries:
            for clause in clauses:
                for ineq in clause:
                    if ineq.K != self.K:
                        raise LevelSetError(f'inequality {ineq} has {ineq.K} coefficients, alphabet K={self.K}')

    @property
    def outputs(self) -> Tuple[Hashable, ...]:
        return tuple(y for y, _ in self.entries)

    def inequalities(self) -> Iterator[RationalInequality]:
        for _, clauses in self.entries:
            for clause in clauses:
                yield from clause

    def matches(self, p: ProportionVector) -> List[Hashable]:
        """Every y with a clause that holds at p, in priority order."""
        return [y for y, clauses in self.entries
                if any(all(ineq.holds(p) for ineq in clause) for clause in clauses)]


def proportion_grid(K: int, bound: int, limit: int = GRID_LIMIT) -> Iterator[ProportionVector]:
    """
    Yields every proportion vector over 0..K whose denominator divides some
    n <= bound, each once. The bound is lowered until the grid has at most
    `limit` points.
    """
    requested = bound
    while bound > 1 and sum(math.comb(n + K, K) for n in range(1, bound + 1)) > limit:
        bound -= 1
    if bound < requested:
        logger.warning(f'proportion grid over K={K} lowered from denominator {requested} to {bound} '
                       f'to stay within {limit} points')
    seen = set()
    for n in range(1, bound + 1):
        for bars in itertools.combinations(range(n + K), K):
            counts, previous = [], -1
            for bar in bars:
                counts.append(bar - previous - 1)
                previous = bar
            counts.append(n + K - 1 - previous)
            vector = tuple(Fraction(c, n) for c in counts)
            if vector not in seen:
                seen.add(vector)
                yield ProportionVector(vector)


def validate_level_set(spec: LevelSetSpec, bound: int = DEFAULT_COVERAGE_BOUND) -> dict:
    """
    Checks coverage and disjointness on every proportion vector with
    denominator at most `bound`. Uncovered points are rejected; overlaps are
    resolved by priority order and only reported.
    """
    checked = overlaps = 0
    for p in proportion_grid(spec.K, bound):
        checked += 1
        hits = spec.matches(p)
        if not hits:
            raise CoverageError(p)
        if len(set(hits)) > 1:
            overlaps += 1
    if overlaps:
        logger.warning(f'{overlaps} of {checked} grid points match several outputs; first match wins')
    logger.debug(f'level set over K={spec.K} covers {checked} grid points')
    return {'checked': checked, 'overlaps': overlaps}


class CompiledProtocol(ProductProtocol):
    """
    One averaging instance per distinct comparison encoding, run in lock-step.
    A node outputs the y of the first clause whose comparisons all hold, and
    EMPTY while any comparison is undecided.

    Attributes:
        spec: The compiled LevelSetSpec.
        comparisons: Cleared comparison of every inequality.
        bank: Encoding of each averaging instance, in bank order.
    """
    name = 'compiled'

    def __init__(self, spec: LevelSetSpec, h_max: int = DEFAULT_H_MAX):
        self.spec = spec
        self.comparisons: Dict[RationalInequality, IntegerComparison] = {}
        slots: Dict[Any, int] = {}
        bank: List[IntegerComparison] = []
        for ineq in spec.inequalities():
            cmp = normalize_inequality(ineq)
            self.comparisons[ineq] = cmp
            if cmp.encoding not in slots:
                slots[cmp.encoding] = len(bank)
                bank.append(cmp)
        self.slots = slots
        self.bank = tuple(cmp.encoding for cmp in bank)
        components = [AveragingProtocol(cap=cmp.cap, h_max=h_max) for cmp in bank]
        encoders = [partial(encode_local, cmp=cmp) for cmp in bank]
        super().__init__(components, encoders, self.decide)
        logger.debug(f'compiled {len(self.comparisons)} inequalities into {len(bank)} averaging instances')

    def decide(self, averages: Tuple[Any, ...]):
        if any(avg is EMPTY for avg in averages):
            return EMPTY
        for y, clauses in self.spec.entries:
            for clause in clauses:
                if all(decide_comparison(averages[self.slots[self.comparisons[ineq].encoding]],
                                         self.comparisons[ineq]) for ineq in clause):
                    return y
        return EMPTY


def compile_level_set(spec: LevelSetSpec, h_max: int = DEFAULT_H_MAX,
                      coverage_bound: int = DEFAULT_COVERAGE_BOUND) -> CompiledProtocol:
    """Validates coverage, then builds the composed protocol."""
    validate_level_set(spec, coverage_bound)
    return CompiledProtocol(spec, h_max)


def _unit(K: int, k: int, scale=1) -> Tuple[Fraction, ...]:
    return tuple(Fraction(scale) if j == k else Fraction(0) for j in range(1, K + 1))


def majority_spec() -> LevelSetSpec:
    """Binary majority: is p_1 <= 1/2?"""
    le_half = RationalInequality.leq(_unit(1, 1), Fraction(1, 2))
    return LevelSetSpec(1, (('<= half', ((le_half,),)), ('> half', ((le_half.negated(),),))))


def weighted_majority_spec(threshold=Fraction(3, 4)) -> LevelSetSpec:
    """Weighted vote: is p_1 >= threshold, i.e. sum x_i >= threshold * n?"""
    at_least = RationalInequality.geq(_unit(1, 1), threshold)
    return LevelSetSpec(1, (('yes', ((at_least,),)), ('no', ((at_least.negated(),),))))


def abstain_majority_spec() -> LevelSetSpec:
    """
    Votes 1 and 2, value 3 abstains: does 1 get at least as many votes as 2
    (p_2 - p_1 <= 0)?
    """
    ones_hold = RationalInequality.leq((-1, 1, 0), 0)
    return LevelSetSpec(3, (('1', ((ones_hold,),)), ('2', ((ones_hold.negated(),),))))


def _ranks_before(a: int, b: int, K: int) -> RationalInequality:
    """Value a ranks ahead of b: p_a >= p_b when a < b, p_a > p_b otherwise."""
    coefficients = [Fraction(0)] * K
    coefficients[a - 1] -= 1
    coefficients[b - 1] += 1
    return RationalInequality(tuple(coefficients), Fraction(0), a > b)


def ranking_spec(K: int, position: int) -> LevelSetSpec:
    """
    Value ranked `position` (1 = most popular) among 1..K, ties broken toward
    the smaller value. Value 0 is not ranked.
    """
    entries: Dict[int, List[Clause]] = {v: [] for v in range(1, K + 1)}
    for order in itertools.permutations(range(1, K + 1)):
        clause = tuple(_ranks_before(a, b, K) for a, b in zip(order, order[1:]))
        entries[order[position - 1]].append(clause)
    return LevelSetSpec(K, tuple((str(v), tuple(clauses)) for v, clauses in entries.items()))


def second_most_popular_spec(K: int = 4) -> LevelSetSpec:
    return ranking_spec(K, 2)


def set_comparison_spec(K: int, first: Iterable[int], second: Iterable[int]) -> LevelSetSpec:
    """Do more (or as many) nodes hold a value in `first` than in `second`?"""
    coefficients = [Fraction(0)] * K
    for k in first:
        coefficients[k - 1] -= 1
    for k in second:
        coefficients[k - 1] += 1
    first_wins = RationalInequality.leq(coefficients, 0)
    return LevelSetSpec(K, (('yes', ((first_wins,),)), ('no', ((first_wins.negated(),),))))


def average_membership_spec(K: int) -> LevelSetSpec:
    """The member of {0}, (0,1), ..., {K} containing sum_k k p_k."""
    mean = tuple(Fraction(k) for k in range(1, K + 1))
    entries = []
    for v in range(K + 1):
        entries.append((IntervalValue.singleton(v),
                        ((RationalInequality.leq(mean, v), RationalInequality.geq(mean, v)),)))
        if v < K:
            entries.append((IntervalValue.interval(v),
                            ((RationalInequality.greater(mean, v), RationalInequality.less(mean, v + 1)),)))
    return LevelSetSpec(K, tuple(entries))


def _half_up(value: Fraction) -> int:
    return math.floor(value + Fraction(1, 2))


def quantize_continuous(sampler: Callable[[ProportionVector], Any], lower, upper, epsilon, grid: int,
                        K: int = 1) -> LevelSetSpec:
    """
    Approximates a continuous h: D -> [lower, upper] by a function taking
    values in {lower, lower + epsilon, ..., upper} that is constant on the
    cells of a grid of side 1/grid.

    Each half-open cell is evaluated at its center (pulled back into D when
    the center falls outside) and rounded to the nearest level. The sup
    error bound holds only when the grid is fine enough for h's modulus of
    continuity, which is left to the caller.

    Args:
        sampler: Evaluates h at a ProportionVector.
        lower, upper: Range of h.
        epsilon: Level spacing.
        grid (int): Cells per unit along each p_k.
        K (int): Number of free coordinates p_1..p_K.

    Returns:
        LevelSetSpec: One output per level, one clause per cell.
    """
    if grid < 1:
        raise LevelSetError(f'grid resolution must be positive, got {grid}')
    lower, upper, epsilon = as_fraction(lower), as_fraction(upper), as_fraction(epsilon)
    if epsilon <= 0 or upper < lower:
        raise LevelSetError('need epsilon > 0 and lower <= upper')
    levels: Dict[Fraction, List[Clause]] = {}
    half = Fraction(1, 2 * grid)
    for corner in itertools.product(range(grid), repeat=K):
        if sum(corner) > grid:
            continue
        base = [Fraction(a, grid) for a in corner]
        slack = 1 - sum(base)
        shift = min(Fraction(1), slack / (K * half)) if K else Fraction(0)
        point = ProportionVector.from_tail([b + shift * half for b in base])
        raw = as_fraction(sampler(point))
        level = lower + epsilon * _half_up((raw - lower) / epsilon)
        level = min(max(level, lower), upper)
        clause = []
        for k, a in enumerate(corner, start=1):
            if a > 0:
                clause.append(RationalInequality.geq(_unit(K, k), Fraction(a, grid)))
            if a < grid - 1:
                clause.append(RationalInequality.less(_unit(K, k), Fraction(a + 1, grid)))
        levels.setdefault(level, []).append(tuple(clause))
    logger.debug(f'quantized h on a {grid}-grid into {len(levels)} levels')
    return LevelSetSpec(K, tuple((level, tuple(clauses)) for level, clauses in sorted(levels.items())))


@dataclass(frozen=True)
class RationalBox:
    """The open box prod_k (low_k, high_k) with rational corners."""
    low: Tuple[Fraction, ...]
    high: Tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, 'low', tuple(as_fraction(v) for v in self.low))
        object.__setattr__(self, 'high', tuple(as_fraction(v) for v in self.high))

    def contains(self, p: ProportionVector) -> bool:
        return all(a < q < b for a, q, b in zip(self.low, p.tail(), self.high))

    def inside(self) -> Clause:
        K = len(self.low)
        return tuple(itertools.chain.from_iterable(
            (RationalInequality.greater(_unit(K, k), a), RationalInequality.less(_unit(K, k), b))
            for k, (a, b) in enumerate(zip(self.low, self.high), start=1)))

    def outside(self) -> Tuple[RationalInequality, ...]:
        """Disjuncts whose union is the complement of the box."""
        K = len(self.low)
        return tuple(itertools.chain.from_iterable(
            (RationalInequality.leq(_unit(K, k), a), RationalInequality.geq(_unit(K, k), b))
            for k, (a, b) in enumerate(zip(self.low, self.high), start=1)))


def box_function_spec(K: int, boxes: Sequence[Tuple[Any, RationalBox]]) -> LevelSetSpec:
    """
    Level sets of h = sum_i w_i 1_{B_i} for rational open boxes B_i: one
    clause per membership pattern and choice of violated side for each box
    the point lies outside of.
    """
    levels: Dict[Fraction, List[Clause]] = {}
    for pattern in itertools.product((True, False), repeat=len(boxes)):
        value = sum((as_fraction(w) for (w, _), inside in zip(boxes, pattern) if inside), Fraction(0))
        inside_part = tuple(itertools.chain.from_iterable(
            box.inside() for (_, box), inside in zip(boxes, pattern) if inside))
        outside_choices = [box.outside() for (_, box), inside in zip(boxes, pattern) if not inside]
        for picks in itertools.product(*outside_choices):
            levels.setdefault(value, []).append(inside_part + tuple(picks))
    return LevelSetSpec(K, tuple((value, tuple(clauses)) for value, clauses in sorted(levels.items())))


class LevelSetError(ValueError):
    """
    A level-set description that cannot be compiled.
    """


class CoverageError(LevelSetError):
    """
    Some proportion vector lies in no level set.
    """

    def __init__(self, point: ProportionVector):
        self.point = point
        super(CoverageError, self).__init__(f'no output covers the proportion vector ({point})')
