'''
 Pebble-exchange averaging.

 Node values u_i start at x_i and move between nodes in request/accept
 transactions routed along the maximum tracker's pointers, until every value
 is within 1 of every other. The sum is conserved, so the max and min
 trackers then locate the exact average inside the interval alphabet
 {0}, (0,1), {1}, ..., {K}.
'''
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Any, Sequence, Tuple, Union

from anonet.engine import EMPTY, Automaton, Configuration, Protocol, ProtocolViolation
from anonet.extrema import (DEFAULT_H_MAX, SELF, TrackerMessage, TrackerState,
                            tracker_init, tracker_transition)


@dataclass(frozen=True, order=True)
class IntervalValue:
    """
    A member of Y = {{0}, (0,1), {1}, ..., (K-1,K), {K}}.

    Attributes:
        lower: v for the singleton {v} or the open interval (v, v+1).
        open: True for the open interval.
    """
    lower: int
    open: bool = False

    @classmethod
    def singleton(cls, v: int) -> 'IntervalValue':
        return cls(v, False)

    @classmethod
    def interval(cls, v: int) -> 'IntervalValue':
        return cls(v, True)

    @classmethod
    def containing(cls, value: Fraction) -> 'IntervalValue':
        """The unique member of Y that contains `value`."""
        value = Fraction(value)
        if value.denominator == 1:
            return cls.singleton(value.numerator)
        return cls.interval(value.numerator // value.denominator)

    @classmethod
    def parse(cls, text: str) -> 'IntervalValue':
        text = text.strip()
        if text.startswith('{') and text.endswith('}'):
            return cls.singleton(int(text[1:-1]))
        if text.startswith('(') and text.endswith(')'):
            low, high = (int(part) for part in text[1:-1].split(','))
            if high != low + 1:
                raise ValueError(f'interval {text} does not have unit width')
            return cls.interval(low)
        raise ValueError(f'not an interval value: {text!r}')

    def contains(self, value: Fraction) -> bool:
        if self.open:
            return self.lower < value < self.lower + 1
        return value == self.lower

    def __str__(self):
        return f'({self.lower},{self.lower + 1})' if self.open else f'{{{self.lower}}}'


class Mode(Enum):
    FREE = 'free'
    BLOCKED = 'blocked'


@dataclass(frozen=True)
class Request:
    """Request for pebbles; r is the requester's pebble count when it asked."""
    r: int


@dataclass(frozen=True)
class Accept:
    """Transfer of w pebbles to the requester; w = 0 is a denial."""
    w: int


@dataclass(frozen=True)
class AvgPacket:
    """
    Everything a node sends on one port in one round: the tracker reports and
    at most one Request and one Accept.
    """
    max: TrackerMessage
    min: TrackerMessage
    request: Union[Request, Any] = EMPTY
    accept: Union[Accept, Any] = EMPTY


@dataclass(frozen=True)
class AvgNodeState:
    """
    Attributes:
        u: Current pebble count.
        mode: BLOCKED while the node originated or forwards a request.
        rin: SELF if this node originated the outstanding request, otherwise
             the port the request came from; EMPTY when free.
        rout: Port the outstanding request went out on; EMPTY when free.
        pending: True while this node's own request awaits its answer.
        max_tracker: Maximum tracker over u.
        min_tracker: Maximum tracker over cap - u.
        y: Decoded output.
    """
    u: int
    mode: Mode
    rin: Any
    rout: Any
    pending: bool
    max_tracker: TrackerState
    min_tracker: TrackerState
    y: Any = EMPTY


def avg_init(degree: int, x: int, cap: int) -> AvgNodeState:
    if not 0 <= x <= cap:
        raise ValueError(f'initial value {x} outside 0..{cap}')
    return AvgNodeState(u=x, mode=Mode.FREE, rin=EMPTY, rout=EMPTY, pending=False,
                        max_tracker=tracker_init(degree, x),
                        min_tracker=tracker_init(degree, cap - x))


def decode_output(u: int, M, m) -> Any:
    """
    Maps the tracker estimates to a member of Y, or EMPTY while the spread
    M - m is still above 1.
    """
    if M is EMPTY or m is EMPTY or M is None or m is None:
        return EMPTY
    if M == m:
        return IntervalValue.singleton(M)
    if M == m + 1:
        return IntervalValue.interval(m)
    return EMPTY


def avg_transition(state: AvgNodeState, inbox: Sequence[Any], cap: int,
                   h_max: int = DEFAULT_H_MAX) -> Tuple[AvgNodeState, Tuple[AvgPacket, ...]]:
    """
    One round of pebble exchange.

    Order within the round: update both trackers with the current u; serve
    the first incoming Request (accept, forward along the max pointer, or
    deny) and deny the others; settle an incoming Accept (keep the pebbles if
    this node asked, otherwise relay them back toward the requester);
    originate a Request if free and a node with at least u + 2 pebbles is
    believed to exist; decode the output.

    Args:
        state (AvgNodeState): State after the previous round.
        inbox: AvgPacket or EMPTY per port.
        cap (int): Largest possible pebble count.
        h_max (int): Hop cap of the embedded trackers.

    Returns:
        Tuple[AvgNodeState, Tuple[AvgPacket, ...]]: New state and one packet per port.
    """
    degree = len(inbox)
    u = state.u
    max_tracker, max_out = tracker_transition(
        state.max_tracker, u, [EMPTY if p is EMPTY else p.max for p in inbox], h_max)
    min_tracker, min_out = tracker_transition(
        state.min_tracker, cap - u, [EMPTY if p is EMPTY else p.min for p in inbox], h_max)
    M, m, P = max_tracker.M, cap - min_tracker.M, max_tracker.P

    requests = [(port, p.request.r) for port, p in enumerate(inbox, start=1)
                if p is not EMPTY and p.request is not EMPTY]
    accepts = [(port, p.accept.w) for port, p in enumerate(inbox, start=1)
               if p is not EMPTY and p.accept is not EMPTY]
    out_request = [EMPTY] * degree
    out_accept = [EMPTY] * degree
    mode, rin, rout = state.mode, state.rin, state.rout

    if requests:
        (port, r), others = requests[0], requests[1:]
        for other_port, _ in others:
            out_accept[other_port - 1] = Accept(0)
        if u >= r + 2:
            w = (u - r) // 2
            u -= w
            out_accept[port - 1] = Accept(w)
        elif mode is Mode.FREE and M > r + 1 and P != SELF and P != port:
            out_request[P - 1] = Request(r)
            mode, rin, rout = Mode.BLOCKED, port, P
        else:
            out_accept[port - 1] = Accept(0)

    for port, w in accepts:
        if state.mode is not Mode.BLOCKED:
            raise ProtocolViolation('accept-while-free', f'Accept({w}) on port {port} while free')
        if port != state.rout:
            raise ProtocolViolation('accept-wrong-port',
                                    f'Accept({w}) on port {port}, outstanding request left on port {state.rout}')
        if state.rin == SELF:
            u += w
        else:
            if out_accept[state.rin - 1] is not EMPTY:
                raise ProtocolViolation('accept-collision', f'two Accepts due on port {state.rin}')
            out_accept[state.rin - 1] = Accept(w)
        mode, rin, rout = Mode.FREE, EMPTY, EMPTY

    if mode is Mode.FREE and M >= u + 2 and P != SELF:
        out_request[P - 1] = Request(u)
        mode, rin, rout = Mode.BLOCKED, SELF, P

    new_state = AvgNodeState(u=u, mode=mode, rin=rin, rout=rout, pending=(rin == SELF),
                             max_tracker=max_tracker, min_tracker=min_tracker,
                             y=decode_output(u, M, m))
    outbox = tuple(AvgPacket(max_out[k], min_out[k], out_request[k], out_accept[k])
                   for k in range(degree))
    return new_state, outbox


class AveragingAutomaton(Automaton):

    def __init__(self, degree, cap, h_max):
        super().__init__(degree)
        self.cap = cap
        self.h_max = h_max

    def transition(self, x, z, y, inbox, u=None):
        state = z if z is not EMPTY else avg_init(self.degree, x, self.cap)
        state, outbox = avg_transition(state, inbox, self.cap, self.h_max)
        return state, state.y, outbox


class AveragingProtocol(Protocol):
    """
    Computes the member of {0}, (0,1), ..., {cap} containing the average of
    the initial values.

    Attributes:
        cap: Largest initial value (K for plain averaging).
        h_max: Hop cap of the embedded trackers.
    """
    name = 'average'

    def __init__(self, cap: int, h_max: int = DEFAULT_H_MAX):
        super().__init__()
        if cap < 0:
            raise ValueError(f'cap must be nonnegative, got {cap}')
        self.cap = cap
        self.h_max = h_max

    def build_automaton(self, degree):
        return AveragingAutomaton(degree, self.cap, self.h_max)


def pebbles_held(config: Configuration) -> Tuple[int, ...]:
    """u of every node (x before the first round)."""
    return tuple(state.x if state.z is EMPTY else state.z.u for state in config.states)


def pebbles_in_flight(config: Configuration) -> int:
    """Pebbles inside Accept messages emitted at this round and not yet delivered."""
    return sum(packet.accept.w for state in config.states for packet in state.m
               if packet is not EMPTY and packet.accept is not EMPTY)
