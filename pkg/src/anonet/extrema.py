'''
 Distributed tracking of the maximum (and minimum) of time-varying node inputs.

 Every node keeps an estimate M and a pointer P to itself or to one of its
 ports, chosen so that following pointers from any node ends at a node
 holding the maximum. Candidates carry a hop count capped at H_max: a value
 whose source has disappeared keeps gaining hops until it exceeds the cap and
 is dropped.
'''
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from anonet.engine import EMPTY, Automaton, Protocol, ProtocolViolation
from anonet.graph import PortLabeledGraph

# Pointer value meaning "this node" (ports are numbered from 1).
SELF = 0

DEFAULT_H_MAX = 2 ** 16


@dataclass(frozen=True)
class TrackerState:
    """
    Attributes:
        u: Current input.
        M: Estimated maximum.
        P: SELF or the port leading to the neighbor the estimate came from.
        h: Hops from this node to the source of the estimate along pointers.
    """
    u: int
    M: int
    P: int
    h: int


@dataclass(frozen=True)
class TrackerMessage:
    M: int
    h: int


def tracker_init(degree: int, u0: int) -> TrackerState:
    if degree < 0:
        raise ValueError(f'negative degree {degree}')
    return TrackerState(u=u0, M=u0, P=SELF, h=0)


def tracker_broadcast(state: TrackerState, degree: int) -> Tuple[TrackerMessage, ...]:
    return (TrackerMessage(state.M, state.h),) * degree


def tracker_transition(state: TrackerState, new_input: int, incoming: Sequence,
                       h_max: int = DEFAULT_H_MAX) -> Tuple[TrackerState, Tuple[TrackerMessage, ...]]:
    """
    One round of maximum tracking.

    The node's own input is a candidate at hop 0; every report (M_k, h_k) on
    port k is a candidate (M_k, h_k + 1) unless that exceeds h_max. The
    largest M wins, then the smallest hop, then the smallest port, with the
    node itself ahead of every port.

    Args:
        state (TrackerState): State after the previous round.
        new_input (int): Input in effect for this round.
        incoming: TrackerMessage or EMPTY per port.
        h_max (int): Hop cap.

    Returns:
        Tuple[TrackerState, Tuple[TrackerMessage, ...]]: The new state and the
        report sent on every port.
    """
    best_m, best_h, best_p = new_input, 0, SELF
    for port, message in enumerate(incoming, start=1):
        if message is EMPTY:
            continue
        if message.h > h_max:
            raise ProtocolViolation('hop-bound', f'report with hop {message.h} > H_max={h_max} on port {port}')
        hop = message.h + 1
        if hop > h_max:
            continue
        if message.M > best_m or (message.M == best_m and hop < best_h):
            best_m, best_h, best_p = message.M, hop, port
    adopted = TrackerState(u=new_input, M=best_m, P=best_p, h=best_h)
    return adopted, tracker_broadcast(adopted, len(incoming))


class ExtremaAutomaton(Automaton):

    def __init__(self, degree, h_max, sign, cap):
        super().__init__(degree)
        self.h_max = h_max
        self.sign = sign
        self.cap = cap

    def encode(self, value):
        return value if self.sign > 0 else self.cap - value

    def transition(self, x, z, y, inbox, u=None):
        state = z if z is not EMPTY else tracker_init(self.degree, self.encode(x))
        current = x if u is None else u
        state, outbox = tracker_transition(state, self.encode(current), inbox, self.h_max)
        return state, self.encode(state.M), outbox


class ExtremaProtocol(Protocol):
    """
    Maximum tracking (kind='max') or minimum tracking (kind='min').

    The minimum tracker is the maximum tracker run on cap - u; its memory
    holds the conjugated TrackerState and its output is cap - M.

    Attributes:
        h_max: Hop cap, must be at least the node count for correctness.
        kind: 'max' or 'min'.
        cap: Largest input value; required for kind='min'.
    """

    def __init__(self, h_max: int = DEFAULT_H_MAX, kind: str = 'max', cap: Optional[int] = None):
        super().__init__()
        if kind not in ('max', 'min'):
            raise ValueError(f"kind must be 'max' or 'min', got {kind!r}")
        if kind == 'min' and cap is None:
            raise ValueError('minimum tracking needs the input cap')
        if h_max < 1:
            raise ValueError(f'h_max must be positive, got {h_max}')
        self.h_max = h_max
        self.kind = kind
        self.cap = cap
        self.name = f'{kind}_track'

    def build_automaton(self, degree):
        return ExtremaAutomaton(degree, self.h_max, 1 if self.kind == 'max' else -1, self.cap)


def pointer_chain(snapshot: Sequence[TrackerState], graph: PortLabeledGraph, start: int) -> int:
    """
    Follows pointers from `start` to the node that points to itself.

    Args:
        snapshot: TrackerState of every node, taken at a quiescent round.
        graph (PortLabeledGraph): Resolves ports to neighbors.
        start (int): Node to start from.

    Returns:
        int: The node at the end of the chain.
    """
    node = start
    for _ in range(len(snapshot)):
        state = snapshot[node]
        if state.P == SELF:
            return node
        following = graph.neighbor(node, state.P)
        if snapshot[following].h >= state.h:
            raise ProtocolViolation(
                'pointer-hop', f'hop does not decrease from {state.h} to {snapshot[following].h} '
                f'along port {state.P}', node=node)
        node = following
    if snapshot[node].P == SELF:
        return node
    raise ProtocolViolation('pointer-cycle', f'pointer chain from node {start} longer than n', node=start)


def _bits(count: int) -> int:
    return max(1, math.ceil(math.log2(count))) if count > 1 else 1


def state_bits(degree: int, universe_size: int, h_max: int) -> int:
    """Bits of a fixed-width TrackerState encoding: u and M, hop, pointer."""
    return 2 * _bits(universe_size) + _bits(h_max + 1) + _bits(degree + 1)


def state_size_audit(graph: PortLabeledGraph, universe_size: int, h_max: int) -> dict:
    """
    Measures the constant C in bits <= C * (log2|U| + log2 H_max + log2(d+1))
    over all nodes of the graph. The log2 H_max term is the price of the hop
    counter and is absent from the finite-automaton bound C(log|U| + d).
    """
    worst = 0.0
    widest = 0
    for degree in set(graph.degrees()):
        bits = state_bits(degree, universe_size, h_max)
        terms = math.log2(max(universe_size, 2)) + math.log2(max(h_max, 2)) + math.log2(degree + 1)
        worst = max(worst, bits / terms)
        widest = max(widest, bits)
    return {'max_state_bits': widest, 'constant': round(worst, 4),
            'universe_size': universe_size, 'h_max': h_max}
