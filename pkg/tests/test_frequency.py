import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anonet.averaging import IntervalValue
from anonet.compiler import ProportionVector
from anonet.engine import EMPTY, run_until_quiescent
from anonet.frequency import (DEFAULT, FrequencyProtocol, InstanceState, InterleavedState, ProportionProtocol,
                              frequency_transition, instance_outputs, readout, schedule_index)
from anonet.graph import complete, path, random_connected, ring, star
from anonet.verification import check_equivariance, oracle_proportions, random_inputs


@pytest.mark.parametrize('t, m', [(0, 1), (1, 1), (2, 2), (3, 1), (5, 3), (6, 1), (9, 4)])
def test_schedule_index(t, m):
    assert schedule_index(t) == m


def test_schedule_rejects_negative_clock():
    with pytest.raises(ValueError):
        schedule_index(-1)


def test_schedule_visits_every_instance_in_each_block():
    blocks = [schedule_index(t) for t in range(15)]
    assert blocks == [1, 1, 2, 1, 2, 3, 1, 2, 3, 4, 1, 2, 3, 4, 5]


def test_readout_takes_the_smallest_singleton():
    state = InterleavedState(clock=3, instances=(
        InstanceState(EMPTY, IntervalValue.interval(0), ()),
        InstanceState(EMPTY, IntervalValue.singleton(1), ()),
        InstanceState(EMPTY, IntervalValue.singleton(3), ())))
    assert readout(state) == (Fraction(1, 2), 2)
    assert readout(InterleavedState(clock=0, instances=())) == (DEFAULT, None)


def test_transition_advances_only_the_scheduled_instance():
    protocol = FrequencyProtocol(m_max=3)
    state = InterleavedState(clock=0, instances=())
    for _ in range(2):
        state, _ = frequency_transition(state, 1, (EMPTY,), 1, protocol)
    assert len(state.instances) == 1
    before = state.instances[0]
    state, outbox = frequency_transition(state, 1, (EMPTY,), 1, protocol)
    assert state.clock == 3
    assert len(state.instances) == 2
    assert state.instances[0] == before
    # Instance 1 keeps offering its latest message while instance 2 runs.
    assert outbox[0][0] == before.out[0]
    assert len(outbox[0]) == 2


def test_quiescence_window_spans_a_full_pass():
    protocol = FrequencyProtocol(m_max=3)
    assert protocol.quiescence_window(1) == 2
    assert protocol.quiescence_window(10) == 4


def test_m_max_must_be_positive():
    with pytest.raises(ValueError):
        FrequencyProtocol(m_max=0)


@pytest.mark.parametrize('graph, x, expected, witness', [
    (ring(4), [1, 0, 1, 0], Fraction(1, 2), 2),
    (complete(3), [1, 1, 1], Fraction(1), 1),
    (ring(2), [0, 0], Fraction(0), 1),
    (path(6), [1, 0, 0, 1, 0, 1], Fraction(1, 2), 2),
])
def test_exact_frequency(graph, x, expected, witness):
    result = run_until_quiescent(graph, FrequencyProtocol(m_max=graph.n, h_max=graph.n), x, 20000)
    assert result.quiescent
    assert set(result.outputs) == {expected}
    assert {state.z.witness for state in result.final.states} == {witness}


def _assert_exact_frequency(graph, x, protocol):
    result = run_until_quiescent(graph, protocol, list(x), 100_000)
    assert result.quiescent, x
    p = Fraction(sum(x), len(x))
    assert set(result.outputs) == {p}, x
    # The witness is the least m with m * p integral.
    assert {state.z.witness for state in result.final.states} == {p.denominator}, x


@pytest.mark.parametrize('n', range(2, 9))
def test_every_binary_input_on_rings(n):
    # Rotations of x are rotations of the run, so one input per rotation class suffices.
    protocol = FrequencyProtocol(m_max=n, h_max=n)
    for x in itertools.product(range(2), repeat=n):
        if x == min(x[i:] + x[:i] for i in range(n)):
            _assert_exact_frequency(ring(n), x, protocol)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 100_000), n=st.integers(2, 14))
def test_random_graphs_count_exactly(seed, n):
    rng = np.random.default_rng(seed)
    graph = random_connected(n, int(rng.integers(0, n)), seed)
    _assert_exact_frequency(graph, random_inputs(rng, n, 1), FrequencyProtocol(m_max=n, h_max=n))


def test_target_value_is_configurable():
    result = run_until_quiescent(ring(3), FrequencyProtocol(m_max=3, target=2, h_max=3), [2, 0, 1], 20000)
    assert set(result.outputs) == {Fraction(1, 3)}


def test_instances_report_their_own_outputs():
    result = run_until_quiescent(ring(4), FrequencyProtocol(m_max=4, h_max=4), [1, 0, 1, 0], 20000)
    outputs = instance_outputs(result.final.states[0])
    assert outputs[0] == IntervalValue.interval(0)
    assert outputs[1] == IntervalValue.singleton(1)


def test_undersized_m_max_never_reads_out(warnings_logged):
    result = run_until_quiescent(ring(3), FrequencyProtocol(m_max=1, h_max=3), [1, 0, 1], 2000)
    assert set(result.outputs) == {DEFAULT}
    assert all(state.z.skipped for state in result.final.states)
    skips = [message for message in warnings_logged if 'above m_max=1' in message]
    assert skips == ['frequency schedule reached Q_2 above m_max=1; it is skipped']


def test_proportions_of_every_value():
    result = run_until_quiescent(path(4), ProportionProtocol(K=2, m_max=4, h_max=4), [2, 0, 2, 1], 50000)
    assert result.quiescent
    expected = ProportionVector((Fraction(1, 4), Fraction(1, 4), Fraction(1, 2)))
    assert set(result.outputs) == {expected}


@pytest.mark.parametrize('graph, K', [(ring(3), 1), (star(4), 2), (complete(5), 3), (path(5), 2),
                                      (random_connected(6, 2, 9), 2), (random_connected(7, 4, 3), 1)])
def test_proportions_match_the_oracle(graph, K):
    x = random_inputs(np.random.default_rng(graph.n), graph.n, K)
    protocol = ProportionProtocol(K=K, m_max=graph.n, h_max=graph.n)
    result = run_until_quiescent(graph, protocol, x, 100_000)
    assert result.quiescent
    assert set(result.outputs) == {oracle_proportions(x, K)}


def test_frequency_is_equivariant_under_rotation():
    report = check_equivariance(FrequencyProtocol(m_max=4, h_max=4), ring(4), [1, 0, 0, 1], [1, 2, 3, 0])
    assert report.agree, report.violations
