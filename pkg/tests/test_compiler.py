import itertools
from fractions import Fraction
from functools import lru_cache, partial

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anonet.averaging import IntervalValue
from anonet.compiler import (CoverageError, LevelSetError, LevelSetSpec, ProportionVector, RationalBox,
                             RationalInequality, abstain_majority_spec, average_membership_spec, box_function_spec,
                             compile_level_set, decide_comparison, encode_local, majority_spec, normalize_inequality,
                             proportion_grid, quantize_continuous, second_most_popular_spec,
                             set_comparison_spec, validate_level_set, weighted_majority_spec)
from anonet.engine import EMPTY, run_until_quiescent
from anonet.graph import complete, path, random_connected, ring
from anonet.levelset import load_level_set
from anonet.verification import oracle_evaluate, oracle_proportions, random_inputs


def test_proportion_vector():
    p = ProportionVector.from_counts([1, 1, 2])
    assert p.K == 2
    assert p.tail() == (Fraction(1, 4), Fraction(1, 2))
    assert str(p) == '1/4 1/4 1/2'
    assert ProportionVector.from_tail(['1/3']) == ProportionVector((Fraction(2, 3), Fraction(1, 3)))
    with pytest.raises(ValueError):
        ProportionVector((Fraction(1, 2), Fraction(1, 3)))
    with pytest.raises(ValueError):
        ProportionVector.from_counts([0, 0])


def test_negation_is_the_complement():
    ineq = RationalInequality.leq((1, -2), Fraction(1, 3))
    for p in proportion_grid(2, 6):
        assert ineq.holds(p) != ineq.negated().holds(p)


def test_normalize_majority():
    cmp = normalize_inequality(RationalInequality.leq((1,), Fraction(1, 2)))
    assert cmp.positive == {1}
    assert cmp.beta == (2,)
    assert cmp.q_star == 1
    assert not cmp.strict
    assert [encode_local(x, cmp) for x in (0, 1)] == [0, 2]


def test_normalize_negative_coefficient():
    cmp = normalize_inequality(RationalInequality.geq((1,), Fraction(3, 4)))
    assert cmp.positive == frozenset()
    assert cmp.beta == (4,)
    assert cmp.q_star == 1
    assert [encode_local(x, cmp) for x in (0, 1)] == [4, 0]


def test_normalize_abstain_majority():
    cmp = normalize_inequality(RationalInequality.leq((-1, 1, 0), 0))
    assert cmp.positive == {2}
    assert cmp.beta == (1, 1, 0)
    assert cmp.q_star == 1
    assert cmp.cap == 2
    assert [encode_local(x, cmp) for x in range(4)] == [1, 0, 2, 1]


def test_decide_comparison():
    cmp = normalize_inequality(RationalInequality.leq((1,), Fraction(1, 2)))
    strict = normalize_inequality(RationalInequality.less((1,), Fraction(1, 2)))
    assert decide_comparison(IntervalValue.interval(0), cmp) is True
    assert decide_comparison(IntervalValue.interval(1), cmp) is False
    assert decide_comparison(IntervalValue.singleton(1), cmp) is True
    assert decide_comparison(IntervalValue.singleton(1), strict) is False
    assert decide_comparison(IntervalValue.singleton(0), strict) is True
    assert decide_comparison(EMPTY, cmp) is None


fractions = st.builds(Fraction, st.integers(-3, 3), st.integers(1, 4))


@settings(max_examples=60, deadline=None)
@given(K=st.integers(1, 3), data=st.data())
def test_cleared_comparison_decides_the_inequality(K, data):
    coefficients = data.draw(st.lists(fractions, min_size=K, max_size=K))
    ineq = RationalInequality(tuple(coefficients), data.draw(fractions), data.draw(st.booleans()))
    cmp = normalize_inequality(ineq)
    for p in proportion_grid(K, 8):
        mean = sum((p.p(k) * encode_local(k, cmp) for k in range(K + 1)), Fraction(0))
        assert decide_comparison(IntervalValue.containing(mean), cmp) == ineq.holds(p), (ineq, p)


def test_inequality_width_must_match_alphabet():
    with pytest.raises(LevelSetError):
        LevelSetSpec(2, (('a', ((RationalInequality.leq((1,), 0),),)),))


def test_uncovered_point_is_rejected():
    spec = LevelSetSpec(1, (('low', ((RationalInequality.less((1,), Fraction(1, 2)),),)),))
    with pytest.raises(CoverageError) as info:
        validate_level_set(spec, 4)
    assert info.value.point.p(1) >= Fraction(1, 2)
    with pytest.raises(CoverageError):
        compile_level_set(spec)


def test_overlaps_are_counted_and_first_match_wins():
    spec = LevelSetSpec(1, (('a', ((RationalInequality.leq((1,), Fraction(1, 2)),),)),
                            ('b', ((RationalInequality.geq((1,), Fraction(1, 2)),),))))
    assert validate_level_set(spec, 4) == {'checked': 7, 'overlaps': 1}
    assert oracle_evaluate(spec, ProportionVector.from_counts([1, 1])) == 'a'


def test_grid_has_each_vector_once():
    points = list(proportion_grid(2, 4))
    assert len(points) == len(set(points))
    assert ProportionVector.from_counts([1, 1, 2]) in points


def test_oracle_examples():
    spec = majority_spec()
    assert oracle_evaluate(spec, ProportionVector.from_counts([3, 2])) == '<= half'
    assert oracle_evaluate(spec, ProportionVector.from_counts([1, 1])) == '<= half'
    assert oracle_evaluate(spec, ProportionVector.from_counts([1, 2])) == '> half'
    assert oracle_evaluate(second_most_popular_spec(), ProportionVector.from_counts([0, 4, 3, 2, 1])) == '2'
    assert oracle_evaluate(second_most_popular_spec(), ProportionVector.from_counts([5, 2, 2, 1, 1])) == '2'
    assert oracle_evaluate(abstain_majority_spec(), ProportionVector.from_counts([0, 2, 2, 1])) == '1'
    assert oracle_evaluate(weighted_majority_spec(), ProportionVector.from_counts([1, 3])) == 'yes'
    assert oracle_evaluate(set_comparison_spec(3, [1, 2], [3]), ProportionVector.from_counts([1, 1, 0, 2])) == 'no'


@pytest.mark.parametrize('spec', [majority_spec(), weighted_majority_spec(), abstain_majority_spec(),
                                  second_most_popular_spec(), set_comparison_spec(3, [1], [2, 3])],
                         ids=['majority', 'weighted', 'abstain', 'second', 'sets'])
def test_bundled_specs_cover_without_overlap(spec):
    assert validate_level_set(spec)['overlaps'] == 0


def test_one_instance_per_ordered_pair_of_values():
    compiled = compile_level_set(second_most_popular_spec(), h_max=4)
    assert len(compiled.bank) == 12


def test_instances_are_shared_between_inequalities():
    compiled = compile_level_set(average_membership_spec(2), h_max=4)
    assert len(compiled.comparisons) == 10
    assert len(compiled.bank) == 2


def test_majority_on_complete_graph():
    spec = majority_spec()
    result = run_until_quiescent(complete(5), compile_level_set(spec, h_max=5), [1, 1, 0, 0, 0], 5000)
    assert result.quiescent
    assert set(result.outputs) == {'<= half'}


def test_majority_on_every_small_complete_graph():
    spec = majority_spec()
    for n in range(1, 7):
        protocol = compile_level_set(spec, h_max=n)
        for x in itertools.product(range(2), repeat=n):
            result = run_until_quiescent(complete(n), protocol, list(x), 5000)
            assert result.quiescent, x
            assert set(result.outputs) == {oracle_evaluate(spec, oracle_proportions(x, 1))}, x


def test_second_most_popular_runs():
    protocol = compile_level_set(second_most_popular_spec(), h_max=10)
    x = [1, 1, 1, 1, 2, 2, 2, 3, 3, 4]
    result = run_until_quiescent(complete(10), protocol, x, 20000)
    assert result.quiescent
    assert set(result.outputs) == {'2'}


def test_abstain_majority_on_a_ring():
    spec = abstain_majority_spec()
    x = [1, 2, 3, 2, 1, 3]
    result = run_until_quiescent(ring(6), compile_level_set(spec, h_max=6), x, 20000)
    assert set(result.outputs) == {oracle_evaluate(spec, oracle_proportions(x, 3))} == {'1'}




SPECS = {
    'majority': majority_spec,
    'weighted': weighted_majority_spec,
    'abstain': abstain_majority_spec,
    'second': second_most_popular_spec,
    'sets': partial(set_comparison_spec, 3, [1, 2], [3]),
}


@lru_cache(maxsize=None)
def _compiled(name, h_max):
    return compile_level_set(SPECS[name](), h_max=h_max)


def _settled_output(graph, protocol, x, max_rounds=50_000):
    result = run_until_quiescent(graph, protocol, list(x), max_rounds)
    assert result.quiescent, x
    outputs = set(result.outputs)
    assert len(outputs) == 1, (x, outputs)
    return outputs.pop()


@pytest.mark.parametrize('name', ['weighted', 'abstain', 'second', 'sets'])
def test_every_small_input_on_complete_graphs(name):
    # Every node of a complete graph sees the same neighbourhood, so multisets cover all orders.
    protocol = _compiled(name, 6)
    spec = protocol.spec
    for n in range(1, 7):
        for x in itertools.combinations_with_replacement(range(spec.K + 1), n):
            assert _settled_output(complete(n), protocol, x) == oracle_evaluate(spec, oracle_proportions(x, spec.K))


@pytest.mark.parametrize('seed', range(100))
def test_random_instances(seed):
    name = sorted(SPECS)[seed % len(SPECS)]
    protocol = _compiled(name, 25)
    rng = np.random.default_rng(seed)
    n = 2 + seed % 24
    graph = random_connected(n, int(rng.integers(0, n)), seed)
    x = random_inputs(rng, n, protocol.spec.K)
    assert _settled_output(graph, protocol, x) == oracle_evaluate(protocol.spec, oracle_proportions(x, protocol.spec.K))


@pytest.mark.parametrize('seed', range(20))
def test_equal_proportions_give_equal_outputs(seed):
    name = sorted(SPECS)[seed % len(SPECS)]
    protocol = _compiled(name, 25)
    rng = np.random.default_rng(100 + seed)
    n, k = int(rng.integers(2, 6)), int(rng.integers(2, 4))
    x = random_inputs(rng, n, protocol.spec.K)
    repeated = [x[i] for i in rng.permutation(k * n) % n]
    small = _settled_output(random_connected(n, int(rng.integers(0, n)), seed), protocol, x)
    large = _settled_output(random_connected(k * n, int(rng.integers(0, k * n)), seed + 1), protocol, repeated)
    assert small == large == oracle_evaluate(protocol.spec, oracle_proportions(x, protocol.spec.K))


def test_equivalent_set_comparisons_agree_on_every_run(specs_dir):
    builtin = _compiled('sets', 8)
    loaded = compile_level_set(load_level_set(str(specs_dir / 'i_vs_i_prime.lvl')), h_max=8)
    for n, graph in ((4, ring(4)), (6, path(6)), (8, random_connected(8, 3, 2))):
        for x in itertools.combinations_with_replacement(range(4), n):
            assert _settled_output(graph, builtin, x) == _settled_output(graph, loaded, x), x


def test_quantized_identity_is_within_the_error_bound():
    epsilon, grid = Fraction(1, 4), 8
    spec = quantize_continuous(lambda p: p.p(1), 0, 1, epsilon, grid)
    assert validate_level_set(spec)['overlaps'] == 0
    assert set(spec.outputs) <= {Fraction(k, 4) for k in range(5)}
    rng = np.random.default_rng(8)
    for den in rng.integers(1, 1000, size=10_000):
        p = ProportionVector.from_tail([Fraction(int(rng.integers(0, den + 1)), int(den))])
        assert abs(oracle_evaluate(spec, p) - p.p(1)) <= epsilon / 2 + Fraction(1, 2 * grid), p


def test_finer_grid_quantizes_a_threshold_better():
    def indicator(p):
        return 1 if p.p(1) * p.p(2) <= Fraction(1, 8) else 0

    def disagreements(grid):
        spec = quantize_continuous(indicator, 0, 1, 1, grid, K=2)
        return sum(oracle_evaluate(spec, p) != indicator(p) for p in proportion_grid(2, 12))

    assert disagreements(16) < disagreements(2)


def test_quantization_rejects_bad_parameters():
    with pytest.raises(LevelSetError):
        quantize_continuous(lambda p: 0, 0, 1, Fraction(1, 4), 0)
    with pytest.raises(LevelSetError):
        quantize_continuous(lambda p: 0, 1, 0, Fraction(1, 4), 4)


def test_single_box():
    spec = box_function_spec(1, [(1, RationalBox((Fraction(1, 4),), (Fraction(3, 4),)))])
    assert oracle_evaluate(spec, ProportionVector.from_tail(['1/2'])) == 1
    assert oracle_evaluate(spec, ProportionVector.from_tail(['1/4'])) == 0
    assert oracle_evaluate(spec, ProportionVector.from_tail(['1'])) == 0


@pytest.mark.parametrize('p1, expected', [('3/8', 3), ('1/8', 1), ('3/4', 2), ('1/2', 2), ('1/4', 1),
                                          ('0', 0), ('1', 0)])
def test_overlapping_boxes_add_their_weights(p1, expected):
    spec = box_function_spec(1, [(1, RationalBox((0,), (Fraction(1, 2),))),
                                 (2, RationalBox((Fraction(1, 4),), (1,)))])
    assert oracle_evaluate(spec, ProportionVector.from_tail([p1])) == expected


def test_box_function_compiles():
    spec = box_function_spec(1, [(1, RationalBox((0,), (Fraction(1, 2),))),
                                 (2, RationalBox((Fraction(1, 4),), (1,)))])
    assert validate_level_set(spec)['overlaps'] == 0
    result = run_until_quiescent(ring(8), compile_level_set(spec, h_max=8), [1, 1, 1, 0, 0, 0, 0, 0], 20000)
    assert set(result.outputs) == {3}


def test_box_function_adds_the_weights_of_the_boxes_holding_the_point():
    boxes = [(1, RationalBox((0, Fraction(1, 4)), (Fraction(1, 2), Fraction(3, 4)))),
             (2, RationalBox((Fraction(1, 4), 0), (1, Fraction(1, 2))))]
    spec = box_function_spec(2, boxes)
    for p in proportion_grid(2, 10):
        assert oracle_evaluate(spec, p) == sum(w for w, box in boxes if box.contains(p)), p


def test_lowered_grid_bound_is_logged(warnings_logged):
    points = list(proportion_grid(4, 12, limit=100))
    assert len(points) <= 55
    assert all(max(q.denominator for q in p.frequencies) <= 3 for p in points)
    assert any('lowered from denominator 12 to 3' in message for message in warnings_logged)


def test_grid_within_its_limit_logs_nothing(warnings_logged):
    list(proportion_grid(1, 12))
    assert warnings_logged == []
