"""Trusted route computation, zombification and session preparation."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import Enum

from .errors import NoTrustedRoute, NotZombifiable, UnknownNode, ZombifyDisabled
from .monitor import LabelSchedule
from .topology import NetworkGraph, Node, NodeId, StateSnapshot, TrustKind, TrustState, snapshot_state


@dataclass(frozen=True)
class RoutingPolicy:
    zombify_enabled: bool = False
    zombify_delay_ticks: int = 0
    excluded_locations: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if self.zombify_delay_ticks < 0:
            raise ValueError("zombify_delay_ticks must be >= 0")
        object.__setattr__(self, "excluded_locations", frozenset(t.lower() for t in self.excluded_locations))

    def excludes(self, node: Node) -> bool:
        return node.location.lower() in self.excluded_locations


@dataclass(frozen=True)
class RoutePlan:
    path: tuple[NodeId, ...]
    zombify_set: frozenset[NodeId]

    @property
    def cost(self) -> tuple[int, int]:
        return (len(self.zombify_set), len(self.path) - 1)


class SessionState(str, Enum):
    PREPARING = "Preparing"
    TRANSFERRING = "Transferring"
    HALTED = "Halted"
    REROUTING = "Rerouting"
    COMPLETED = "Completed"
    FAILED = "Failed"


_TRANSITIONS = {
    SessionState.PREPARING: {SessionState.TRANSFERRING, SessionState.FAILED},
    SessionState.TRANSFERRING: {SessionState.HALTED, SessionState.COMPLETED},
    SessionState.HALTED: {SessionState.REROUTING},
    SessionState.REROUTING: {SessionState.TRANSFERRING, SessionState.FAILED},
    SessionState.COMPLETED: set(),
    SessionState.FAILED: set(),
}


@dataclass
class Session:
    id: int
    sender: NodeId
    receiver: NodeId
    created_tick: int
    plan: RoutePlan | None = None
    snapshot: StateSnapshot = field(default_factory=StateSnapshot)
    state: SessionState = SessionState.PREPARING
    halt_cause: str | None = None
    halt_tick: int | None = None
    fail_reason: str | None = None
    ready_tick: int | None = None
    active_since: int | None = None
    packets_pending: int = 0
    in_flight: int = 0
    delivered: int = 0
    dropped: int = 0

    def transition(self, new: SessionState) -> None:
        if new not in _TRANSITIONS[self.state]:
            raise RuntimeError(f"session {self.id}: illegal transition {self.state.value} -> {new.value}")
        self.state = new

    def fail(self, reason: str) -> None:
        self.transition(SessionState.FAILED)
        self.fail_reason = reason

    def halt(self, cause: str, tick: int) -> None:
        self.transition(SessionState.HALTED)
        self.halt_cause = cause
        self.halt_tick = tick
        self.active_since = None

    @property
    def finished(self) -> bool:
        return self.state in (SessionState.COMPLETED, SessionState.FAILED)


def admissible_nodes(graph: NetworkGraph, policy: RoutingPolicy) -> set[NodeId]:
    allowed = set()
    for n, node in graph.nodes.items():
        if policy.excludes(node):
            continue
        kind = node.trust.kind
        if kind in (TrustKind.TRUSTED, TrustKind.ZOMBIFIED):
            allowed.add(n)
        elif kind is TrustKind.UNTRUSTED and policy.zombify_enabled and node.zombifiable:
            allowed.add(n)
    return allowed


def compute_trusted_route(graph: NetworkGraph, sender: NodeId, receiver: NodeId, policy: RoutingPolicy) -> RoutePlan:
    """Best admissible path by (zombifications, hops, id sequence).

    A reverse Dijkstra from the receiver gives the optimal (zombifications,
    hops) cost-to-go of every node; walking forward from the sender and taking
    the smallest-id neighbor that stays on an optimal path then yields the
    lexicographically smallest optimal path.
    """
    graph.node(sender)
    graph.node(receiver)
    if sender == receiver:
        raise ValueError("sender and receiver must differ")
    allowed = admissible_nodes(graph, policy)
    if sender not in allowed or receiver not in allowed:
        raise NoTrustedRoute(f"{sender}->{receiver}: endpoint not admissible")

    def zcost(n: NodeId) -> int:
        return 1 if graph.nodes[n].trust.kind is TrustKind.UNTRUSTED else 0

    # cost_to_go[n] counts zombifications over the nodes after n, receiver included
    cost_to_go: dict[NodeId, tuple[int, int]] = {receiver: (0, 0)}
    heap = [((0, 0), receiver)]
    done: set[NodeId] = set()
    while heap:
        cost, v = heapq.heappop(heap)
        if v in done:
            continue
        done.add(v)
        step = (cost[0] + zcost(v), cost[1] + 1)
        for u in graph.neighbors(v):
            if u in allowed and u not in done and step < cost_to_go.get(u, (1 << 62, 0)):
                cost_to_go[u] = step
                heapq.heappush(heap, (step, u))

    if sender not in cost_to_go:
        raise NoTrustedRoute(f"{sender}->{receiver}: no path through admissible nodes")

    path = [sender]
    u = sender
    while u != receiver:
        target = cost_to_go[u]
        u = next(
            v for v in graph.neighbors(u)
            if v in cost_to_go and (cost_to_go[v][0] + zcost(v), cost_to_go[v][1] + 1) == target
        )
        path.append(u)
    zset = frozenset(n for n in path if zcost(n))
    return RoutePlan(tuple(path), zset)


def zombify(graph: NetworkGraph, node_id: NodeId, policy: RoutingPolicy, tick: int, schedule: LabelSchedule) -> Node:
    """Take control of an untrusted device and inject a fresh label set into its MIB."""
    if not policy.zombify_enabled:
        raise ZombifyDisabled(node_id)
    node = graph.node(node_id)
    if node.trust.kind is not TrustKind.UNTRUSTED or not node.zombifiable:
        raise NotZombifiable(f"{node_id} is {node.trust} (zombifiable={node.zombifiable})")
    node.trust = TrustState.zombified(tick + policy.zombify_delay_ticks)
    node.mib = schedule.fresh_mib(node_id, schedule.epoch(tick))
    return node


def install_overrides(graph: NetworkGraph, plan: RoutePlan) -> list[tuple[NodeId, NodeId, NodeId]]:
    """Point each path node's entry for the receiver at its path successor.

    Returns the (node, destination, next_hop) entries that actually changed.
    """
    receiver = plan.path[-1]
    changed = []
    for a, b in zip(plan.path, plan.path[1:]):
        rt = graph.nodes[a].routing_table
        if rt.get(receiver) != b:
            rt[receiver] = b
            changed.append((a, receiver, b))
    return changed


def _ready_tick(graph: NetworkGraph, plan: RoutePlan, tick: int) -> int:
    ready = tick
    for n in plan.path:
        trust = graph.nodes[n].trust
        if trust.kind is TrustKind.ZOMBIFIED and trust.since_tick is not None:
            ready = max(ready, trust.since_tick)
    return ready


def plan_route(
    session: Session, graph: NetworkGraph, policy: RoutingPolicy, tick: int, schedule: LabelSchedule
) -> list[NodeId]:
    """Compute a route for ``session`` and zombify what it needs.

    Returns the zombified node ids. Raises NoTrustedRoute.
    """
    plan = compute_trusted_route(graph, session.sender, session.receiver, policy)
    zombified = []
    for n in sorted(plan.zombify_set):
        zombify(graph, n, policy, tick, schedule)
        zombified.append(n)
    session.plan = plan
    session.ready_tick = _ready_tick(graph, plan, tick)
    return zombified


def activate_session(session: Session, graph: NetworkGraph, tick: int) -> list[tuple[NodeId, NodeId, NodeId]]:
    """Install route overrides, take the snapshot and start transferring."""
    assert session.plan is not None
    if session.ready_tick is not None and tick < session.ready_tick:
        raise RuntimeError(f"session {session.id} not ready before tick {session.ready_tick}")
    changed = install_overrides(graph, session.plan)
    session.snapshot = snapshot_state(graph, session.plan.path)
    session.transition(SessionState.TRANSFERRING)
    session.active_since = tick
    return changed


def prepare_session(
    graph: NetworkGraph,
    sender: NodeId,
    receiver: NodeId,
    policy: RoutingPolicy,
    tick: int,
    schedule: LabelSchedule,
    session_id: int = 0,
) -> Session:
    """Create a session; it is Transferring when nothing has to wait on zombification."""
    for n in (sender, receiver):
        if n not in graph.nodes:
            raise UnknownNode(n)
    session = Session(session_id, sender, receiver, created_tick=tick)
    try:
        plan_route(session, graph, policy, tick, schedule)
    except NoTrustedRoute:
        session.fail("NoTrustedRoute")
        return session
    if session.ready_tick == tick:
        activate_session(session, graph, tick)
    return session
