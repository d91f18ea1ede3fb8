'''
 Exact frequencies with unbounded memory.

 Averaging instances Q_1, Q_2, ... are run interleaved along the triangular
 schedule Q_1; Q_1, Q_2; Q_1, Q_2, Q_3; ... Instance m averages x_{i,m} = m
 if x_i holds the target value, 0 otherwise, so its output is a singleton
 exactly when m * p is an integer. The smallest such m gives p exactly.
'''
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, Optional, Sequence, Tuple

from loguru import logger

from anonet.averaging import AveragingProtocol
from anonet.compiler import ProportionVector
from anonet.engine import EMPTY, Automaton, AutomatonState, ProductProtocol, Protocol
from anonet.extrema import DEFAULT_H_MAX


class _Default(Enum):
    DEFAULT = 'default'

    def __repr__(self):
        return 'default'

    def __str__(self):
        return 'default'


# Readout before any instance has produced a singleton.
DEFAULT = _Default.DEFAULT


def schedule_index(t: int) -> int:
    """Instance run at clock t: block b = 1, 2, ... runs Q_1..Q_b."""
    if t < 0:
        raise ValueError(f'clock must be nonnegative, got {t}')
    completed = (math.isqrt(8 * t + 1) - 1) // 2
    return t - completed * (completed + 1) // 2 + 1


@dataclass(frozen=True)
class InstanceState:
    """Memory, output and latest outgoing messages of one averaging instance."""
    z: Any
    y: Any
    out: Tuple[Any, ...]


@dataclass(frozen=True)
class InterleavedState:
    """
    Attributes:
        clock: Rounds executed by this node. Every node's clock agrees.
        instances: State of Q_1..Q_len, created on their first schedule hit.
        readout: v/m for the smallest m whose output is the singleton {v}, or DEFAULT.
        witness: That m, or None.
        skipped: True once the schedule asked for an instance above M_max.
    """
    clock: int
    instances: Tuple[InstanceState, ...]
    readout: Any = DEFAULT
    witness: Optional[int] = None
    skipped: bool = False


def readout(state: InterleavedState) -> Tuple[Any, Optional[int]]:
    """Returns (v/m, m) for the smallest instance m with a singleton output {v}."""
    for m, instance in enumerate(state.instances, start=1):
        y = instance.y
        if y is not EMPTY and not y.open:
            return Fraction(y.lower, m), m
    return DEFAULT, None


def frequency_transition(state: InterleavedState, x: int, inbox: Sequence[Any], degree: int,
                         protocol: 'FrequencyProtocol') -> Tuple[InterleavedState, Tuple[Any, ...]]:
    """
    Advances only Q_m for m = schedule_index(clock), creating it on first
    use, then recomputes the readout. Every other instance keeps its state
    and re-sends its latest messages.

    Args:
        state (InterleavedState): Current node state.
        x (int): The node's initial value.
        inbox: Per-port tuples holding each instance's latest message.
        degree (int): Node degree.
        protocol (FrequencyProtocol): Supplies target, m_max and the instances.

    Returns:
        Tuple[InterleavedState, tuple]: New state and the per-port message tuples.
    """
    m = schedule_index(state.clock)
    instances = list(state.instances)
    skipped = state.skipped
    if m > protocol.m_max:
        if not skipped:
            protocol.note_skip(m)
        skipped = True
    else:
        if m > len(instances):
            instances.append(InstanceState(EMPTY, EMPTY, (EMPTY,) * degree))
        current = instances[m - 1]
        inbox_m = tuple(EMPTY if msg is EMPTY or len(msg) < m else msg[m - 1] for msg in inbox)
        x_m = m if x == protocol.target else 0
        automaton = protocol.instance(m).automaton(degree)
        z_m, y_m, out_m = automaton.transition(x_m, current.z, current.y, inbox_m)
        instances[m - 1] = InstanceState(z_m, y_m, tuple(out_m))
    new_state = InterleavedState(state.clock + 1, tuple(instances), skipped=skipped)
    value, witness = readout(new_state)
    new_state = InterleavedState(new_state.clock, new_state.instances, value, witness, skipped)
    outbox = tuple(tuple(instance.out[k] for instance in instances) for k in range(degree))
    return new_state, outbox


class FrequencyAutomaton(Automaton):

    def __init__(self, degree, protocol):
        super().__init__(degree)
        self.protocol = protocol

    def transition(self, x, z, y, inbox, u=None):
        state = z if z is not EMPTY else InterleavedState(clock=0, instances=())
        state, outbox = frequency_transition(state, x, inbox, self.degree, self.protocol)
        return state, state.readout, outbox


class FrequencyProtocol(Protocol):
    """
    Computes the exact frequency of `target` among the initial values.

    Attributes:
        target: The counted value.
        m_max: Largest instance ever created; the run settles correctly once
               m_max >= n.
        h_max: Hop cap of every averaging instance.
    """
    name = 'frequency'

    def __init__(self, m_max: int, target: int = 1, h_max: int = DEFAULT_H_MAX):
        super().__init__()
        if m_max < 1:
            raise ValueError(f'm_max must be positive, got {m_max}')
        self.m_max = m_max
        self.target = target
        self.h_max = h_max
        self._instances: Dict[int, AveragingProtocol] = {}
        self._skip_logged = False

    def instance(self, m: int) -> AveragingProtocol:
        if m not in self._instances:
            self._instances[m] = AveragingProtocol(cap=m, h_max=self.h_max)
        return self._instances[m]

    def note_skip(self, m: int):
        if not self._skip_logged:
            logger.warning(f'frequency schedule reached Q_{m} above m_max={self.m_max}; it is skipped')
            self._skip_logged = True

    def build_automaton(self, degree):
        return FrequencyAutomaton(degree, self)

    def quiescence_key(self, state: AutomatonState):
        if state.z is EMPTY:
            return state
        return state.z.instances, state.z.readout, state.z.skipped

    def quiescence_window(self, round_index):
        """
        Rounds needed for every instance up to m_max to have stepped once,
        counting back from the step that produced `round_index`.
        """
        pending = set(range(1, self.m_max + 1))
        for clock in range(round_index - 1, -1, -1):
            pending.discard(schedule_index(clock))
            if not pending:
                return round_index - clock
        return round_index + 1


def instance_outputs(state: AutomatonState) -> Tuple[Any, ...]:
    """Output of every instantiated Q_m at one node."""
    if state.z is EMPTY:
        return ()
    return tuple(instance.y for instance in state.z.instances)


class ProportionProtocol(ProductProtocol):
    """
    One frequency protocol per value 0..K; outputs the ProportionVector once
    every readout is available and the readouts form a distribution.
    """
    name = 'proportions'

    def __init__(self, K: int, m_max: int, h_max: int = DEFAULT_H_MAX):
        self.K = K
        super().__init__([FrequencyProtocol(m_max, target=k, h_max=h_max) for k in range(K + 1)],
                         combine=_as_proportions)


def _as_proportions(readouts):
    if any(value is DEFAULT for value in readouts):
        return EMPTY
    if sum(readouts) != 1:
        return EMPTY
    return ProportionVector(tuple(readouts))
