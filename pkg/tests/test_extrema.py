import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anonet.engine import EMPTY, InputSchedule, ProtocolViolation, run_until_quiescent
from anonet.extrema import (SELF, ExtremaProtocol, TrackerMessage, TrackerState, pointer_chain,
                            state_bits, state_size_audit, tracker_init, tracker_transition)
from anonet.graph import path, random_connected, ring, star
from anonet.verification import tracker_audit


def test_own_input_wins_ties_at_hop_zero():
    state = tracker_init(2, 5)
    new, out = tracker_transition(state, 5, [TrackerMessage(5, 0), EMPTY], h_max=8)
    assert (new.M, new.P, new.h) == (5, SELF, 0)
    assert out == (TrackerMessage(5, 0), TrackerMessage(5, 0))


def test_largest_value_then_fewest_hops_then_smallest_port():
    state = tracker_init(3, 1)
    new, _ = tracker_transition(state, 1, [TrackerMessage(5, 2), TrackerMessage(5, 1), TrackerMessage(5, 1)], 8)
    assert (new.M, new.P, new.h) == (5, 2, 2)
    new, _ = tracker_transition(state, 1, [TrackerMessage(4, 0), TrackerMessage(6, 5), EMPTY], 8)
    assert (new.M, new.P, new.h) == (6, 2, 6)


def test_candidates_past_the_hop_cap_are_dropped():
    state = TrackerState(u=2, M=9, P=1, h=3)
    new, _ = tracker_transition(state, 2, [TrackerMessage(9, 3)], h_max=3)
    assert (new.M, new.P, new.h) == (2, SELF, 0)


def test_report_above_the_hop_cap_is_a_violation():
    with pytest.raises(ProtocolViolation) as info:
        tracker_transition(tracker_init(1, 0), 0, [TrackerMessage(9, 4)], h_max=3)
    assert info.value.code == 'hop-bound'


def test_stale_maximum_decays_after_its_source_leaves():
    # Node 0 starts with 9 and drops to 1 at round 5.
    graph = path(3)
    schedule = InputSchedule((9, 0, 0), ((5, 0, 1),))
    result = run_until_quiescent(graph, ExtremaProtocol(h_max=3), [9, 0, 0], 200, schedule=schedule)
    assert result.quiescent
    assert result.outputs == (1, 1, 1)
    assert tracker_audit(graph, result.final, schedule.final()).agree


def test_min_tracker_is_max_tracker_on_complement():
    graph = star(5)
    x = [4, 2, 7, 2, 9]
    low = run_until_quiescent(graph, ExtremaProtocol(h_max=5, kind='min', cap=9), x, 100)
    high = run_until_quiescent(graph, ExtremaProtocol(h_max=5), [9 - v for v in x], 100)
    assert low.outputs == (2,) * 5
    assert [s.z for s in low.final.states] == [s.z for s in high.final.states]
    assert tracker_audit(graph, low.final, x, kind='min').agree


def test_min_tracker_needs_a_cap():
    with pytest.raises(ValueError):
        ExtremaProtocol(kind='min')


def test_pointer_chain_ends_at_a_maximum():
    graph = ring(6)
    x = [1, 3, 8, 2, 8, 0]
    result = run_until_quiescent(graph, ExtremaProtocol(h_max=6), x, 100)
    snapshot = [s.z for s in result.final.states]
    for start in range(graph.n):
        assert x[pointer_chain(snapshot, graph, start)] == 8


def test_pointer_cycle_is_detected():
    graph = ring(3)
    snapshot = [TrackerState(0, 5, 2, 1), TrackerState(0, 5, 2, 1), TrackerState(0, 5, 2, 1)]
    with pytest.raises(ProtocolViolation) as info:
        pointer_chain(snapshot, graph, 0)
    assert info.value.code in ('pointer-hop', 'pointer-cycle')


def test_undersized_hop_cap_leaves_far_nodes_behind():
    graph = path(5)
    result = run_until_quiescent(graph, ExtremaProtocol(h_max=1), [9, 0, 0, 0, 0], 100)
    assert result.quiescent
    assert result.outputs == (9, 9, 0, 0, 0)
    report = tracker_audit(graph, result.final, [9, 0, 0, 0, 0])
    assert not report.agree
    assert report.violations[0].startswith('estimate')


def test_state_size_audit_grows_with_hop_cap_only_logarithmically():
    small = state_size_audit(ring(5), universe_size=10, h_max=5)
    large = state_size_audit(ring(5), universe_size=10, h_max=5000)
    assert small['max_state_bits'] < large['max_state_bits'] <= small['max_state_bits'] + 10
    assert large['constant'] <= 3


def _schedule(rng, n, K, last_round):
    changes = []
    for _ in range(int(rng.integers(1, 6))):
        changes.append((int(rng.integers(1, last_round + 1)), int(rng.integers(0, n)), int(rng.integers(0, K + 1))))
    return InputSchedule(tuple(int(v) for v in rng.integers(0, K + 1, size=n)), tuple(changes))


def _complement(schedule, cap):
    return InputSchedule(tuple(cap - v for v in schedule.initial),
                         tuple((r, node, cap - v) for r, node, v in schedule.changes))


def _every_round(graph, protocol, schedule):
    rounds = []
    result = run_until_quiescent(graph, protocol, list(schedule.initial), 5000, schedule=schedule,
                                 observer=rounds.append)
    return result, rounds


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 100_000), n=st.integers(2, 20))
def test_tracking_settles_on_the_final_extremes(seed, n):
    rng = np.random.default_rng(seed)
    graph = random_connected(n, int(rng.integers(0, n)), seed)
    schedule = _schedule(rng, n, 9, 30)
    high, high_rounds = _every_round(graph, ExtremaProtocol(h_max=64), schedule)
    low, low_rounds = _every_round(graph, ExtremaProtocol(h_max=64, kind='min', cap=9), schedule)
    for result, kind in ((high, 'max'), (low, 'min')):
        assert result.quiescent
        report = tracker_audit(graph, result.final, schedule.final(), kind=kind)
        assert report.agree, report.violations
    # The max tracker on 9 - u walks through the min tracker's states round for round.
    _, mirror_rounds = _every_round(graph, ExtremaProtocol(h_max=64), _complement(schedule, 9))
    assert len(mirror_rounds) == len(low_rounds)
    for low_config, mirror_config in zip(low_rounds, mirror_rounds):
        assert [s.z for s in low_config.states] == [s.z for s in mirror_config.states], low_config.round
        assert [y if y is EMPTY else 9 - y for y in low_config.outputs()] == list(mirror_config.outputs())


def test_state_bits_count_every_field():
    # u and M over 10 values: 4 bits each; hop 0..8: 4 bits; pointer 0..3: 2 bits.
    assert state_bits(3, 10, 8) == 14
    assert state_bits(1, 2, 1) == 4
