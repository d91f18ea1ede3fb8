'''
 Port-labeled communication graphs.

 Nodes are numbered 0..n-1 inside the simulator harness only. Ports are
 numbered 1..degree(i) at every node, and a node can tell its neighbors
 apart only through these private port numbers.
'''
from dataclasses import dataclass
from typing import Iterator, Sequence, Tuple

import networkx as nx
import numpy as np
import pandas as pd
from loguru import logger


@dataclass(frozen=True)
class PortLabeledGraph:
    """
    A connected bidirectional graph with a port numbering at every node.

    Attributes:
        adjacency: One tuple per node. Entry k-1 of node i's tuple is the
                   (neighbor, reverse_port) pair reached through port k, where
                   reverse_port is the number the same edge carries at the
                   neighbor. Parallel edges are allowed (the two-node ring).
    """
    adjacency: Tuple[Tuple[Tuple[int, int], ...], ...]

    def __post_init__(self):
        _validate(self.adjacency)

    @property
    def n(self) -> int:
        return len(self.adjacency)

    def degree(self, node: int) -> int:
        return len(self.adjacency[node])

    def degrees(self) -> Tuple[int, ...]:
        return tuple(len(ports) for ports in self.adjacency)

    def neighbor(self, node: int, port: int) -> int:
        """Returns the node reached from `node` through `port` (1-based)."""
        return self.adjacency[node][port - 1][0]

    def reverse_port(self, node: int, port: int) -> int:
        return self.adjacency[node][port - 1][1]

    def edges(self) -> Iterator[Tuple[int, int, int, int]]:
        """
        Yields every undirected edge once as (i, port_at_i, j, port_at_j).
        """
        for i, ports in enumerate(self.adjacency):
            for k, (j, r) in enumerate(ports, start=1):
                if (i, k) < (j, r):
                    yield i, k, j, r

    def to_networkx(self) -> nx.MultiGraph:
        multigraph = nx.MultiGraph()
        multigraph.add_nodes_from(range(self.n))
        multigraph.add_edges_from((i, j) for i, _, j, _ in self.edges())
        return multigraph

    def diameter(self) -> int:
        if self.n == 1:
            return 0
        return nx.diameter(nx.Graph(self.to_networkx()))

    def port_table(self) -> pd.DataFrame:
        """
        Returns the port assignment as a table with one row per (node, port).
        """
        rows = [{'node': i, 'port': k, 'neighbor': j, 'reverse_port': r}
                for i, ports in enumerate(self.adjacency)
                for k, (j, r) in enumerate(ports, start=1)]
        return pd.DataFrame(rows, columns=['node', 'port', 'neighbor', 'reverse_port'])


def _validate(adjacency):
    n = len(adjacency)
    if n == 0:
        raise GraphSpecError('graph has no nodes')
    for i, ports in enumerate(adjacency):
        if n > 1 and not ports:
            raise GraphSpecError('isolated node', node=i)
        for k, entry in enumerate(ports, start=1):
            j, r = entry
            if not 0 <= j < n:
                raise GraphSpecError(f'port leads to unknown node {j}', node=i, port=k)
            if j == i:
                raise GraphSpecError('self-loop', node=i, port=k)
            if not 1 <= r <= len(adjacency[j]):
                raise GraphSpecError(
                    f'reverse port {r} outside 1..{len(adjacency[j])} at node {j}', node=i, port=k)
            if tuple(adjacency[j][r - 1]) != (i, k):
                raise GraphSpecError(
                    f'reverse port mismatch: node {j} port {r} does not lead back', node=i, port=k)
    multigraph = nx.MultiGraph()
    multigraph.add_nodes_from(range(n))
    multigraph.add_edges_from((i, j) for i, ports in enumerate(adjacency) for j, _ in ports)
    if not nx.is_connected(multigraph):
        components = sorted(min(c) for c in nx.connected_components(multigraph))
        raise GraphSpecError(f'graph is disconnected ({len(components)} components)',
                             node=components[1])


def _freeze(adjacency) -> Tuple[Tuple[Tuple[int, int], ...], ...]:
    return tuple(tuple((int(j), int(r)) for j, r in ports) for ports in adjacency)


def from_edges(n: int, edges: Sequence[Sequence[int]]) -> PortLabeledGraph:
    """
    Builds a graph from an edge list.

    Args:
        n (int): Number of nodes.
        edges: Either all (u, v) pairs, in which case each node numbers its
               ports in ascending neighbor order, or all (u, v, port_at_u,
               port_at_v) quadruples giving the numbering explicitly.

    Returns:
        PortLabeledGraph: The validated graph.
    """
    if n < 1:
        raise GraphSpecError(f'node count must be positive, got {n}')
    lengths = {len(edge) for edge in edges}
    if lengths - {2, 4} or len(lengths) > 1:
        raise GraphSpecError('edges must be all (u, v) pairs or all (u, v, pu, pv) quadruples')

    if lengths == {4}:
        slots = [dict() for _ in range(n)]
        for u, v, pu, pv in edges:
            for node, port, other, other_port in ((u, pu, v, pv), (v, pv, u, pu)):
                if not 0 <= node < n:
                    raise GraphSpecError(f'unknown node {node}')
                if port in slots[node]:
                    raise GraphSpecError('port assigned twice', node=node, port=port)
                slots[node][port] = (other, other_port)
        adjacency = []
        for node, ports in enumerate(slots):
            if sorted(ports) != list(range(1, len(ports) + 1)):
                missing = sorted(set(range(1, len(ports) + 1)) - set(ports))
                bad_port = missing[0] if missing else max(ports)
                raise GraphSpecError('ports are not numbered 1..degree', node=node, port=bad_port)
            adjacency.append([ports[k] for k in range(1, len(ports) + 1)])
        return PortLabeledGraph(_freeze(adjacency))

    neighbors = [set() for _ in range(n)]
    for u, v in edges:
        if not (0 <= u < n and 0 <= v < n):
            raise GraphSpecError(f'edge ({u}, {v}) names an unknown node')
        if u == v:
            raise GraphSpecError('self-loop', node=u)
        if v in neighbors[u]:
            raise GraphSpecError(f'duplicate edge ({u}, {v})', node=u)
        neighbors[u].add(v)
        neighbors[v].add(u)
    ordered = [sorted(nbrs) for nbrs in neighbors]
    port_of = [{j: k for k, j in enumerate(nbrs, start=1)} for nbrs in ordered]
    adjacency = [[(j, port_of[j][i]) for j in nbrs] for i, nbrs in enumerate(ordered)]
    return PortLabeledGraph(_freeze(adjacency))


def ring(n: int) -> PortLabeledGraph:
    """
    Ring with nodes numbered clockwise. Port 1 leads to the predecessor
    (the counterclockwise, "left" neighbor) and port 2 to the successor.
    For n = 2 the two nodes are joined by two parallel edges.
    """
    if n < 2:
        raise GraphSpecError(f'ring needs at least 2 nodes, got {n}')
    return PortLabeledGraph(_freeze([((i - 1) % n, 2), ((i + 1) % n, 1)] for i in range(n)))


def complete(n: int) -> PortLabeledGraph:
    if n < 1:
        raise GraphSpecError(f'complete graph needs at least 1 node, got {n}')
    return from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def path(n: int) -> PortLabeledGraph:
    return from_edges(n, [(i, i + 1) for i in range(n - 1)])


def star(n: int) -> PortLabeledGraph:
    """Star with center 0 and leaves 1..n-1."""
    return from_edges(n, [(0, leaf) for leaf in range(1, n)])


def random_connected(n: int, extra_edges: int, seed: int) -> PortLabeledGraph:
    """
    Random spanning tree plus `extra_edges` distinct chords, fully determined
    by `seed`.
    """
    if n < 1:
        raise GraphSpecError(f'node count must be positive, got {n}')
    rng = np.random.default_rng(seed)
    edges = set()
    for v in range(1, n):
        u = int(rng.integers(0, v))
        edges.add((u, v))
    chords = [(u, v) for u in range(n) for v in range(u + 1, n) if (u, v) not in edges]
    count = min(max(extra_edges, 0), len(chords))
    if count:
        for index in sorted(rng.choice(len(chords), size=count, replace=False)):
            edges.add(chords[int(index)])
    logger.debug(f'random_connected(n={n}, extra={count}, seed={seed}): {len(edges)} edges')
    return from_edges(n, sorted(edges))


_BUILDERS = {
    'ring': (ring, 1),
    'complete': (complete, 1),
    'path': (path, 1),
    'star': (star, 1),
    'random': (random_connected, 3),
}


def build_graph(spec) -> PortLabeledGraph:
    """
    Builds a graph from a description.

    Args:
        spec: A PortLabeledGraph (returned as is), a string such as
              'ring:5', 'complete:4', 'path:3', 'star:4' or
              'random:<n>:<extra_edges>:<seed>', or a mapping
              {'kind': 'explicit', 'n': ..., 'edges': [...]} / {'kind': 'ring', 'n': 5}.

    Returns:
        PortLabeledGraph: The validated graph.
    """
    if isinstance(spec, PortLabeledGraph):
        return spec
    if isinstance(spec, str):
        kind, *args = spec.strip().split(':')
        builder, arity = _BUILDERS.get(kind, (None, 0))
        if builder is None:
            raise GraphSpecError(f'unknown graph kind {kind!r}')
        if len(args) != arity:
            raise GraphSpecError(f'{kind} takes {arity} parameter(s), got {len(args)}')
        try:
            values = [int(a) for a in args]
        except ValueError as exc:
            raise GraphSpecError(f'non-integer graph parameter in {spec!r}') from exc
        return builder(*values)
    if isinstance(spec, dict):
        kind = spec.get('kind')
        if kind == 'explicit':
            edges = spec.get('edges') or []
            n = spec.get('n', 1 + max((max(e[0], e[1]) for e in edges), default=0))
            return from_edges(int(n), [tuple(int(v) for v in e) for e in edges])
        if kind == 'random':
            return random_connected(int(spec['n']), int(spec.get('extra_edges', 0)),
                                    int(spec.get('seed', 0)))
        if kind in _BUILDERS:
            return _BUILDERS[kind][0](int(spec['n']))
        raise GraphSpecError(f'unknown graph kind {kind!r}')
    raise GraphSpecError(f'cannot build a graph from {type(spec).__name__}')


def graph_family(spec) -> str:
    """Returns the kind of a string or mapping graph description."""
    if isinstance(spec, str):
        return spec.split(':')[0]
    if isinstance(spec, dict):
        return spec.get('kind', 'explicit')
    return 'explicit'


def resize(spec, n: int) -> str:
    """Returns the same graph family at size n (explicit graphs cannot be resized)."""
    kind = graph_family(spec)
    if kind == 'explicit':
        raise GraphSpecError('explicit graphs cannot be resized')
    if kind == 'random':
        _, _, extra, seed = spec.split(':') if isinstance(spec, str) else (
            None, None, spec.get('extra_edges', 0), spec.get('seed', 0))
        return f'random:{n}:{extra}:{seed}'
    return f'{kind}:{n}'


def apply_isomorphism(graph: PortLabeledGraph, permutation: Sequence[int]) -> PortLabeledGraph:
    """
    Relabels nodes by `permutation` (node i becomes permutation[i]) and carries
    the port labels along, so that the port at permutation[i] for the edge to
    permutation[j] equals the port at i for the edge to j.
    """
    n = graph.n
    if sorted(permutation) != list(range(n)):
        raise ValueError(f'not a permutation of 0..{n - 1}: {list(permutation)}')
    adjacency = [None] * n
    for i, ports in enumerate(graph.adjacency):
        adjacency[permutation[i]] = tuple((permutation[j], r) for j, r in ports)
    return PortLabeledGraph(tuple(adjacency))


class GraphSpecError(ValueError):
    """
    A graph description that does not yield a valid port-labeled graph.
    """

    def __init__(self, message, node=None, port=None):
        self.node = node
        self.port = port
        where = ''
        if node is not None:
            where = f' (node {node}' + (f', port {port})' if port is not None else ')')
        super(GraphSpecError, self).__init__(message + where)
