"""Network data model: routing devices, links, trust, routing tables and MIB labels."""

from __future__ import annotations

import copy
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, NamedTuple

from .errors import DisconnectedGraph, UnknownNode

NodeId = str


class TrustKind(str, Enum):
    TRUSTED = "trusted"
    UNTRUSTED = "untrusted"
    ZOMBIFIED = "zombified"
    COMPROMISED = "compromised"


@dataclass(frozen=True)
class TrustState:
    kind: TrustKind
    since_tick: int | None = None

    @classmethod
    def trusted(cls) -> TrustState:
        return cls(TrustKind.TRUSTED)

    @classmethod
    def untrusted(cls) -> TrustState:
        return cls(TrustKind.UNTRUSTED)

    @classmethod
    def zombified(cls, since_tick: int) -> TrustState:
        return cls(TrustKind.ZOMBIFIED, since_tick)

    @classmethod
    def compromised(cls, since_tick: int) -> TrustState:
        return cls(TrustKind.COMPROMISED, since_tick)

    @property
    def is_trusted(self) -> bool:
        """Zombified devices are under our control and count as trusted."""
        return self.kind in (TrustKind.TRUSTED, TrustKind.ZOMBIFIED)

    def __str__(self) -> str:
        if self.since_tick is None:
            return self.kind.value
        return f"{self.kind.value}({self.since_tick})"


@dataclass(frozen=True)
class MibLabel:
    index: int
    value: int
    encrypted: bool
    bound_node: NodeId
    epoch: int


@dataclass
class Mib:
    labels: list[MibLabel] = field(default_factory=list)

    def values(self) -> tuple[int, ...]:
        return tuple(label.value for label in self.labels)


class RoutingTable:
    """Destination -> next-hop mapping, iterated in destination order."""

    __slots__ = ("_entries",)

    def __init__(self, entries: dict[NodeId, NodeId] | None = None):
        self._entries: dict[NodeId, NodeId] = {}
        for dst, hop in (entries or {}).items():
            self[dst] = hop

    def __getitem__(self, dst: NodeId) -> NodeId:
        return self._entries[dst]

    def __setitem__(self, dst: NodeId, hop: NodeId) -> None:
        self._entries[dst] = hop

    def __delitem__(self, dst: NodeId) -> None:
        del self._entries[dst]

    def __contains__(self, dst: object) -> bool:
        return dst in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[NodeId]:
        return iter(sorted(self._entries))

    def get(self, dst: NodeId, default: NodeId | None = None) -> NodeId | None:
        return self._entries.get(dst, default)

    def items(self) -> list[tuple[NodeId, NodeId]]:
        return sorted(self._entries.items())

    def frozen(self) -> tuple[tuple[NodeId, NodeId], ...]:
        return tuple(self.items())

    def __eq__(self, other: object) -> bool:
        if isinstance(other, RoutingTable):
            return self._entries == other._entries
        return NotImplemented

    def __repr__(self) -> str:
        return f"RoutingTable({dict(self.items())!r})"


class ForwardRecord(NamedTuple):
    tick: int
    destination: NodeId
    next_hop: NodeId
    flow: int | None = None


@dataclass
class Node:
    id: NodeId
    as_id: str
    location: str
    trust: TrustState = field(default_factory=TrustState.trusted)
    zombifiable: bool = False
    routing_table: RoutingTable = field(default_factory=RoutingTable)
    mib: Mib = field(default_factory=Mib)
    forwarding_log: list[ForwardRecord] = field(default_factory=list)

    def log_forward(self, record: ForwardRecord) -> None:
        if self.forwarding_log and record.tick < self.forwarding_log[-1].tick:
            raise ValueError("forwarding log must be tick-nondecreasing")
        self.forwarding_log.append(record)


def link_key(a: NodeId, b: NodeId) -> tuple[NodeId, NodeId]:
    return (a, b) if a <= b else (b, a)


@dataclass
class NetworkGraph:
    nodes: dict[NodeId, Node] = field(default_factory=dict)
    # unordered pair (stored sorted) -> latency in ticks
    links: dict[tuple[NodeId, NodeId], int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self._adj: dict[NodeId, list[NodeId]] | None = None

    def _adjacency(self) -> dict[NodeId, list[NodeId]]:
        if self._adj is None:
            adj: dict[NodeId, list[NodeId]] = {n: [] for n in self.nodes}
            for a, b in self.links:
                adj[a].append(b)
                adj[b].append(a)
            for nbrs in adj.values():
                nbrs.sort()
            self._adj = adj
        return self._adj

    def add_link(self, a: NodeId, b: NodeId, latency: int = 1) -> None:
        self.links[link_key(a, b)] = latency
        self._adj = None

    def node(self, node_id: NodeId) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(node_id) from None

    def neighbors(self, node_id: NodeId) -> list[NodeId]:
        """Neighbors in ascending id order."""
        try:
            return self._adjacency()[node_id]
        except KeyError:
            raise UnknownNode(node_id) from None

    def has_link(self, a: NodeId, b: NodeId) -> bool:
        return link_key(a, b) in self.links

    def latency(self, a: NodeId, b: NodeId) -> int:
        return self.links[link_key(a, b)]

    def node_ids(self) -> list[NodeId]:
        return sorted(self.nodes)

    def components(self) -> list[list[NodeId]]:
        """Connected components, each sorted, ordered by smallest member."""
        parent = {n: n for n in self.nodes}

        def find(x: NodeId) -> NodeId:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b in self.links:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        groups: dict[NodeId, list[NodeId]] = {}
        for n in sorted(self.nodes):
            groups.setdefault(find(n), []).append(n)
        return sorted(groups.values(), key=lambda g: g[0])

    def __deepcopy__(self, memo: dict) -> NetworkGraph:
        clone = NetworkGraph(copy.deepcopy(self.nodes, memo), dict(self.links))
        return clone


@dataclass(frozen=True)
class GraphViolation:
    kind: str  # "disconnected" | "missing_mesh_link"
    nodes: tuple[NodeId, ...]
    detail: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.detail}"


def validate_graph(graph: NetworkGraph, require_full_mesh: bool) -> list[GraphViolation]:
    violations: list[GraphViolation] = []
    components = graph.components()
    if len(components) > 1:
        split = " | ".join(",".join(c) for c in components)
        violations.append(
            GraphViolation(
                "disconnected",
                tuple(c[0] for c in components),
                f"graph has {len(components)} components: {split}",
            )
        )
    if require_full_mesh:
        trusted = [n for n in graph.node_ids() if graph.nodes[n].trust.kind is TrustKind.TRUSTED]
        for i, a in enumerate(trusted):
            for b in trusted[i + 1:]:
                if not graph.has_link(a, b):
                    violations.append(
                        GraphViolation("missing_mesh_link", (a, b), f"trusted pair ({a},{b}) has no direct link")
                    )
    return violations


def hop_distances(graph: NetworkGraph, target: NodeId, allowed: Iterable[NodeId] | None = None) -> dict[NodeId, int]:
    """Breadth-first hop counts to ``target``, optionally restricted to ``allowed`` nodes."""
    allowed_set = set(graph.nodes) if allowed is None else set(allowed)
    if target not in allowed_set:
        return {}
    dist = {target: 0}
    queue = deque([target])
    while queue:
        u = queue.popleft()
        for v in graph.neighbors(u):
            if v in allowed_set and v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def shortest_next_hops(graph: NetworkGraph, destination: NodeId) -> dict[NodeId, NodeId]:
    """For every node that reaches ``destination``, the smallest-id neighbor on a minimum-hop path."""
    dist = hop_distances(graph, destination)
    hops = {}
    for n, d in dist.items():
        if d == 0:
            continue
        hops[n] = next(v for v in graph.neighbors(n) if dist.get(v) == d - 1)
    return hops


def initial_routing_tables(graph: NetworkGraph, *, partial: bool = False) -> NetworkGraph:
    """Return a copy of ``graph`` whose routing tables follow minimum-hop paths.

    With ``partial`` set, unreachable destinations are simply left out instead
    of raising DisconnectedGraph.
    """
    out = copy.deepcopy(graph)
    for node in out.nodes.values():
        node.routing_table = RoutingTable()
    for dst in out.node_ids():
        hops = shortest_next_hops(out, dst)
        if not partial and len(hops) != len(out.nodes) - 1:
            missing = sorted(set(out.nodes) - set(hops) - {dst})
            raise DisconnectedGraph(f"{dst} unreachable from {', '.join(missing)}")
        for src, hop in hops.items():
            out.nodes[src].routing_table[dst] = hop
    return out


@dataclass(frozen=True)
class StateSnapshot:
    """Immutable copy of routing tables and MIB labels for a set of nodes."""

    routing_tables: tuple[tuple[NodeId, tuple[tuple[NodeId, NodeId], ...]], ...] = ()
    mibs: tuple[tuple[NodeId, tuple[MibLabel, ...]], ...] = ()

    def nodes(self) -> tuple[NodeId, ...]:
        return tuple(n for n, _ in self.routing_tables)

    def rt(self, node: NodeId) -> dict[NodeId, NodeId]:
        for n, entries in self.routing_tables:
            if n == node:
                return dict(entries)
        raise UnknownNode(node)

    def mib(self, node: NodeId) -> tuple[MibLabel, ...]:
        for n, labels in self.mibs:
            if n == node:
                return labels
        raise UnknownNode(node)

    def with_rt_entry(self, node: NodeId, destination: NodeId, next_hop: NodeId) -> StateSnapshot:
        """Copy with one routing entry replaced (authorized update)."""
        tables = []
        for n, entries in self.routing_tables:
            if n == node:
                updated = dict(entries)
                updated[destination] = next_hop
                entries = tuple(sorted(updated.items()))
            tables.append((n, entries))
        return StateSnapshot(tuple(tables), self.mibs)


def snapshot_state(graph: NetworkGraph, route_nodes: Iterable[NodeId]) -> StateSnapshot:
    tables = []
    mibs = []
    for n in route_nodes:
        node = graph.node(n)
        tables.append((n, node.routing_table.frozen()))
        mibs.append((n, tuple(node.mib.labels)))
    return StateSnapshot(tuple(tables), tuple(mibs))
