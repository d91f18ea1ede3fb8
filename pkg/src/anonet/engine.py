'''
 Synchronous execution of anonymous automata on a port-labeled graph.

 Every node of degree d runs the automaton the protocol builds for d. At each
 round a node reads the messages its neighbors emitted into the ports leading
 to it during the previous round and produces a new memory state, output and
 one outgoing message per port. All transitions of a round read the same
 snapshot.
'''
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Hashable, List, Optional, Sequence, Tuple

from loguru import logger

from anonet.graph import PortLabeledGraph


class _Empty(Enum):
    EMPTY = 'empty'

    def __repr__(self):
        return '∅'

    def __str__(self):
        return '∅'


# Distinguished member of every message, memory and output alphabet.
EMPTY = _Empty.EMPTY


@dataclass(frozen=True)
class AutomatonState:
    """
    The tuple (x, z, y, m_1..m_d) held by one node.

    Attributes:
        x: The initial value. Never changes.
        z: The memory state, opaque to the engine.
        y: The current output.
        m: The outgoing messages, one per port.
    """
    x: Any
    z: Any = EMPTY
    y: Any = EMPTY
    m: Tuple[Any, ...] = ()

    @classmethod
    def initial(cls, x, degree: int) -> 'AutomatonState':
        return cls(x, EMPTY, EMPTY, (EMPTY,) * degree)


class Automaton(ABC):
    """
    The transition law of every node with a given degree.

    Subclasses are built from the degree and from protocol parameters shared
    by all nodes; nothing in the construction or the transition can observe
    a node identifier.
    """

    def __init__(self, degree: int):
        self.degree = degree

    @abstractmethod
    def transition(self, x, z, y, inbox: Tuple[Any, ...], u=None) -> Tuple[Any, Any, Sequence[Any]]:
        """
        Maps (x, z, y, incoming messages) to (z', y', outgoing messages).

        Args:
            x: The node's initial value.
            z: Memory state (EMPTY at round 0).
            y: Current output (EMPTY at round 0).
            inbox: Message received on each port, port 1 first.
            u: Exogenous input for the new round when the run is driven by an
               InputSchedule, otherwise None.
        """


class Protocol(ABC):
    """
    A family of automata indexed by degree.
    """
    name = 'protocol'

    def __init__(self):
        self._automata: Dict[int, Automaton] = {}

    def automaton(self, degree: int) -> Automaton:
        if degree not in self._automata:
            self._automata[degree] = self.build_automaton(degree)
        return self._automata[degree]

    @abstractmethod
    def build_automaton(self, degree: int) -> Automaton:
        pass

    def quiescence_key(self, state: AutomatonState) -> Hashable:
        """The part of a node state compared when looking for a fixed point."""
        return state

    def quiescence_window(self, round_index: int) -> int:
        """Consecutive unchanged rounds required before declaring quiescence."""
        return 1


@dataclass(frozen=True)
class Configuration:
    """
    Global state at one round. The messages in flight are the outgoing
    messages stored in each node state; the message arriving at node i on
    port k is the one its port-k neighbor emitted on the port leading to i.
    """
    round: int
    states: Tuple[AutomatonState, ...]

    def inbox(self, graph: PortLabeledGraph, node: int) -> Tuple[Any, ...]:
        return tuple(self.states[j].m[r - 1] for j, r in graph.adjacency[node])

    def outputs(self) -> Tuple[Any, ...]:
        return tuple(state.y for state in self.states)


@dataclass
class RunResult:
    """
    Outcome of run_until_quiescent.

    Attributes:
        outputs: Final output of every node.
        quiescent: True if the run reached a fixed point before max_rounds.
        rounds: Rounds elapsed.
        final: The last Configuration.
        trace: Every Configuration from round 0, if recorded.
    """
    outputs: Tuple[Any, ...]
    quiescent: bool
    rounds: int
    final: Configuration
    trace: Optional[List[Configuration]] = None


@dataclass(frozen=True)
class InputSchedule:
    """
    Exogenous time-varying node inputs.

    Attributes:
        initial: Input of every node at round 0.
        changes: (round, node, value) triples; from `round` on, `node` holds `value`.
    """
    initial: Tuple[Any, ...]
    changes: Tuple[Tuple[int, int, Any], ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, 'initial', tuple(self.initial))
        object.__setattr__(self, 'changes', tuple(sorted(
            (int(r), int(node), value) for r, node, value in self.changes)))

    @property
    def last_change(self) -> int:
        return self.changes[-1][0] if self.changes else 0

    def at(self, round_index: int) -> Tuple[Any, ...]:
        values = list(self.initial)
        for r, node, value in self.changes:
            if r > round_index:
                break
            values[node] = value
        return tuple(values)

    def final(self) -> Tuple[Any, ...]:
        return self.at(self.last_change)

    def permuted(self, permutation: Sequence[int]) -> 'InputSchedule':
        initial = [None] * len(self.initial)
        for i, value in enumerate(self.initial):
            initial[permutation[i]] = value
        return InputSchedule(tuple(initial),
                             tuple((r, permutation[node], value) for r, node, value in self.changes))


def initial_configuration(graph: PortLabeledGraph, x: Sequence[Any]) -> Configuration:
    if len(x) != graph.n:
        raise ValueError(f'{len(x)} initial values for a graph with {graph.n} nodes')
    return Configuration(0, tuple(AutomatonState.initial(value, graph.degree(i))
                                  for i, value in enumerate(x)))


def step(config: Configuration, graph: PortLabeledGraph, protocol: Protocol,
         inputs: Optional[Sequence[Any]] = None) -> Configuration:
    """
    Advances every node by one synchronous round.

    Args:
        config (Configuration): The round-t configuration.
        graph (PortLabeledGraph): The communication graph.
        protocol (Protocol): Supplies the automaton for each degree.
        inputs: Exogenous input of every node for round t+1, if any.

    Returns:
        Configuration: The round-t+1 configuration, computed from round-t
        values only.
    """
    new_states = []
    for node, state in enumerate(config.states):
        automaton = protocol.automaton(graph.degree(node))
        inbox = config.inbox(graph, node)
        u = None if inputs is None else inputs[node]
        try:
            z, y, outbox = automaton.transition(state.x, state.z, state.y, inbox, u)
        except ProtocolViolation as exc:
            exc.locate(node, config.round)
            raise
        outbox = tuple(outbox)
        if len(outbox) != automaton.degree:
            raise ProtocolViolation(
                'arity', f'automaton emitted {len(outbox)} messages for degree {automaton.degree}',
                node=node, round_index=config.round)
        new_states.append(AutomatonState(state.x, z, y, outbox))
    return Configuration(config.round + 1, tuple(new_states))


def _keys(protocol: Protocol, config: Configuration):
    return [protocol.quiescence_key(state) for state in config.states]


def run_until_quiescent(graph: PortLabeledGraph, protocol: Protocol, x: Sequence[Any],
                        max_rounds: int, schedule: Optional[InputSchedule] = None,
                        record_trace: bool = False,
                        observer: Optional[Callable[[Configuration], None]] = None) -> RunResult:
    """
    Iterates step until the configuration stops changing or max_rounds is hit.

    Running out of rounds is not an error; it is reported through
    RunResult.quiescent.
    """
    if max_rounds < 1:
        raise ValueError(f'max_rounds must be at least 1, got {max_rounds}')
    config = initial_configuration(graph, x)
    trace = [config] if record_trace else None
    if observer:
        observer(config)
    stable = 0
    quiescent = False
    while config.round < max_rounds:
        inputs = schedule.at(config.round + 1) if schedule else None
        following = step(config, graph, protocol, inputs)
        if trace is not None:
            trace.append(following)
        if observer:
            observer(following)
        inputs_settled = schedule is None or following.round >= schedule.last_change
        if inputs_settled and _keys(protocol, following) == _keys(protocol, config):
            stable += 1
        else:
            stable = 0
        config = following
        if stable >= protocol.quiescence_window(config.round):
            quiescent = True
            break
    logger.debug(f'{protocol.name} on n={graph.n}: quiescent={quiescent} after {config.round} rounds')
    return RunResult(config.outputs(), quiescent, config.round, config, trace)


def simulate(graph: PortLabeledGraph, protocol: Protocol, x: Sequence[Any], rounds: int,
             schedule: Optional[InputSchedule] = None) -> List[Configuration]:
    """Runs exactly `rounds` rounds and returns all rounds+1 configurations."""
    config = initial_configuration(graph, x)
    trace = [config]
    for _ in range(rounds):
        inputs = schedule.at(config.round + 1) if schedule else None
        config = step(config, graph, protocol, inputs)
        trace.append(config)
    return trace


class ProductAutomaton(Automaton):
    """
    Runs several automata of the same degree in lock-step inside one node.
    Memory is the tuple of component (z, y) pairs and the message on each
    port is the tuple of component messages.
    """

    def __init__(self, degree, parts, encoders, combine):
        super().__init__(degree)
        self.parts = parts
        self.encoders = encoders
        self.combine = combine

    def transition(self, x, z, y, inbox, u=None):
        subs = z if z is not EMPTY else ((EMPTY, EMPTY),) * len(self.parts)
        new_subs = []
        outboxes = []
        for c, (automaton, encode) in enumerate(zip(self.parts, self.encoders)):
            inbox_c = tuple(EMPTY if msg is EMPTY else msg[c] for msg in inbox)
            z_c, y_c = subs[c]
            z_c, y_c, out_c = automaton.transition(encode(x), z_c, y_c, inbox_c, u)
            out_c = tuple(out_c)
            if len(out_c) != self.degree:
                raise ProtocolViolation(
                    'arity', f'component {c} emitted {len(out_c)} messages for degree {self.degree}')
            new_subs.append((z_c, y_c))
            outboxes.append(out_c)
        outbox = tuple(tuple(out_c[k] for out_c in outboxes) for k in range(self.degree))
        return tuple(new_subs), self.combine(tuple(y_c for _, y_c in new_subs)), outbox


def _identity(value):
    return value


class ProductProtocol(Protocol):
    """
    Lock-step composition of several protocols.

    Attributes:
        components: The composed protocols.
        encoders: Maps the node's initial value to each component's initial value.
        combine: Maps the tuple of component outputs to the node output.
    """
    name = 'product'

    def __init__(self, components: Sequence[Protocol],
                 encoders: Optional[Sequence[Callable[[Any], Any]]] = None,
                 combine: Optional[Callable[[Tuple[Any, ...]], Any]] = None):
        super().__init__()
        self.components = tuple(components)
        self.encoders = tuple(encoders) if encoders else (_identity,) * len(self.components)
        if len(self.encoders) != len(self.components):
            raise ValueError('one encoder per component is required')
        self.combine = combine or _identity

    def build_automaton(self, degree):
        return ProductAutomaton(degree, [c.automaton(degree) for c in self.components],
                                self.encoders, self.combine)

    def component_state(self, state: AutomatonState, index: int) -> AutomatonState:
        """Projects a product node state onto one component."""
        if state.z is EMPTY:
            return AutomatonState.initial(self.encoders[index](state.x), len(state.m))
        z_c, y_c = state.z[index]
        m_c = tuple(EMPTY if msg is EMPTY else msg[index] for msg in state.m)
        return AutomatonState(self.encoders[index](state.x), z_c, y_c, m_c)

    def quiescence_key(self, state):
        return tuple(component.quiescence_key(self.component_state(state, c))
                     for c, component in enumerate(self.components))

    def quiescence_window(self, round_index):
        return max(component.quiescence_window(round_index) for component in self.components)


class ProtocolViolation(RuntimeError):
    """
    An automaton or run broke a protocol invariant. Indicates a bug, never a
    legal runtime event.

    Attributes:
        code: Short name of the violated invariant.
        node: Harness index of the offending node, when known.
        round: Round at which the violation was detected, when known.
    """

    def __init__(self, code, message, node=None, round_index=None):
        self.code = code
        self.detail = message
        self.node = node
        self.round = round_index
        super(ProtocolViolation, self).__init__(message)

    def locate(self, node, round_index):
        if self.node is None:
            self.node = node
        if self.round is None:
            self.round = round_index

    def __str__(self):
        where = []
        if self.node is not None:
            where.append(f'node {self.node}')
        if self.round is not None:
            where.append(f'round {self.round}')
        suffix = f" at {', '.join(where)}" if where else ''
        return f'[{self.code}] {self.detail}{suffix}'
