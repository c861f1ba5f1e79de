"""Deterministic tick loop: events, polling, halt-and-reroute, rotation, packet movement."""

from __future__ import annotations

import copy
import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field

from .adversary import EventKind, IdsObserver, MutationRecord, apply_event, ids_observe
from .errors import DisconnectedGraph, NoTrustedRoute
from .monitor import MonitorVerdict, ViolationKind, poll, rotate_labels
from .packet import Exposure, ExposureKind, ForwardResult, HopRecord, Packet
from .routing import (
    RoutePlan,
    Session,
    SessionState,
    activate_session,
    admissible_nodes,
    plan_route,
)
from .scenario import Scenario, TrafficDemand
from .topology import ForwardRecord, NetworkGraph, NodeId, TrustKind, TrustState, initial_routing_tables
from .vpn import EXPOSING_TRUST, Tunnel, establish_tunnel, retarget, vpn_forward

log = logging.getLogger(__name__)

_CAUSES = {
    ViolationKind.RT_CHANGED: (EventKind.TAMPER_RT,),
    ViolationKind.LABEL_MISMATCH: (EventKind.TAMPER_LABEL,),
    ViolationKind.FLOW_NON_CONFORMING: (EventKind.TAMPER_RT,),
}


@dataclass(frozen=True)
class Detection:
    tick: int
    node: NodeId
    kind: ViolationKind
    session: int
    cause_tick: int | None
    propagated: bool = False

    @property
    def latency(self) -> int | None:
        return None if self.cause_tick is None else self.tick - self.cause_tick

    def to_dict(self) -> dict:
        return {
            "tick": self.tick,
            "node": self.node,
            "kind": self.kind.value,
            "session": self.session,
            "cause_tick": self.cause_tick,
            "latency": self.latency,
            "propagated": self.propagated,
        }


@dataclass
class RouteInterval:
    """A stretch of ticks during which a session was Transferring on one path."""

    path: tuple[NodeId, ...]
    start: int
    end: int | None = None


@dataclass
class Flow:
    demand: TrafficDemand
    session: Session
    tunnel: Tunnel | None = None
    departures: list[int] = field(default_factory=list)
    intervals: list[RouteInterval] = field(default_factory=list)
    sent: int = 0
    next_seq: int = 0
    last_poll: int = 0
    clean_poll: int | None = None

    @property
    def id(self) -> int:
        return self.session.id


@dataclass
class MetricsReport:
    mode: str
    seed: int
    ticks_run: int
    packets_sent: int
    packets_delivered: int
    packets_dropped: int
    packets_in_flight: int
    plaintext_exposures: dict
    ciphertext_exposures: dict
    detections: list[dict]
    max_detection_latency: int | None
    reroute_count: int
    zombification_count: int
    rotation_count: int
    ids_alert_count: int
    sessions: list[dict]

    @property
    def total_exposures(self) -> int:
        return self.plaintext_exposures["total"] + self.ciphertext_exposures["total"]

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> MetricsReport:
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> MetricsReport:
        return cls.from_dict(json.loads(text))


def _exposure_summary(exposures: list[Exposure], kind: ExposureKind) -> dict:
    counts = Counter(e.node for e in exposures if e.kind is kind)
    return {"total": sum(counts.values()), "by_node": dict(sorted(counts.items()))}


def tr_forward(session: Session, packet: Packet, graph: NetworkGraph, tick: int) -> ForwardResult:
    """Process a trusted-route packet at its current node and launch it onward."""
    node_id = packet.current_node
    node = graph.node(node_id)
    result = ForwardResult([], [])
    if packet.at_destination:
        result.delivered = True
        return result
    if packet.at_intermediate and node.trust.kind in EXPOSING_TRUST:
        kind = ExposureKind.CIPHERTEXT if packet.encrypted else ExposureKind.PLAINTEXT
        result.exposures.append(Exposure(kind, node_id, tick, packet.flow, packet.seq))
    nxt = packet.path[packet.hop + 1]
    result.hops.append(HopRecord(tick, node_id, nxt, packet.flow, packet.seq))
    node.log_forward(ForwardRecord(tick, session.receiver, nxt, packet.flow))
    packet.hop += 1
    packet.arrival_tick = tick + graph.latency(node_id, nxt)
    return result


class Simulation:
    """Single-writer simulation state for one scenario run."""

    def __init__(self, scenario: Scenario, seed: int | None = None):
        self.scenario = scenario
        self.config = scenario.config
        self.mode = self.config.mode
        self.seed = self.config.seed if seed is None else seed
        self.policy = self.config.policy
        self.schedule = self.config.schedule
        self.graph = initial_routing_tables(copy.deepcopy(scenario.graph), partial=True)
        self.ids = IdsObserver(scenario.ids) if scenario.ids is not None else None

        self.tick = -1
        self.flows: list[Flow] = []
        self.packets: list[Packet] = []
        self.exposures: list[Exposure] = []
        self.hops: list[HopRecord] = []
        self.detections: list[Detection] = []
        self.mutations: list[MutationRecord] = []
        self.tamper_log: dict[NodeId, list[tuple[int, EventKind]]] = {}
        self.packets_delivered = 0
        self.packets_dropped = 0
        self.reroute_count = 0
        self.zombification_count = 0
        self.rotation_count = 0
        self.finished = False
        self.rogue_gateway: NodeId | None = None

        self._events_by_tick: dict[int, list] = {}
        for ev in scenario.events:
            self._events_by_tick.setdefault(ev.tick, []).append(ev)
        self._starts: dict[int, list[tuple[int, TrafficDemand]]] = {}
        for i, demand in enumerate(scenario.traffic):
            self._starts.setdefault(demand.start_tick, []).append((i, demand))
        self._last_start = max((d.start_tick for d in scenario.traffic), default=0)

    # -- public loop ---------------------------------------------------

    def run(self) -> MetricsReport:
        while not self.finished and self.tick < self.config.max_ticks:
            self.step()
        return self.report()

    def step(self, tick: int | None = None) -> None:
        t = self.tick + 1
        if tick is not None and tick != t:
            raise ValueError(f"expected tick {t}, got {tick}")
        self.tick = t
        tr = self.mode == "tr"

        self._apply_events(t)
        if tr and t % self.config.poll_period == 0:
            verdicts = []
            for flow in self._flows_in(SessionState.TRANSFERRING):
                verdict = poll(flow.session, self.graph, t, self.schedule, since=flow.last_poll)
                # forwards logged at this tick all happen after the poll
                flow.last_poll = t
                if verdict:
                    verdicts.append((flow, verdict))
                else:
                    flow.clean_poll = t
            handled: set[int] = set()
            for flow, verdict in verdicts:
                if flow.id not in handled:
                    handled.update(f.id for f in self.handle_detection(flow, verdict, t))
        if tr and rotate_labels(self.graph, self.graph.node_ids(), t, self.schedule):
            self.rotation_count += 1
        self._start_flows(t)
        self._activate_ready(t)
        self._inject(t)
        self._move(t)
        self._settle(t)

        if t >= self._last_start and all(f.session.finished for f in self.flows):
            self.finished = True

    # -- detection and recovery ----------------------------------------

    def handle_detection(self, flow: Flow, verdict: MonitorVerdict, tick: int) -> list[Flow]:
        """Halt every session routed through the offending node, mark it compromised, reroute."""
        node = verdict.node
        cause = self._cause_tick(flow, node, verdict.kind, tick)
        self._halt(flow, verdict.kind, node, tick, cause, propagated=False)
        offender = self.graph.node(node)
        if offender.trust.kind is not TrustKind.COMPROMISED:
            offender.trust = TrustState.compromised(tick)
        halted = [flow]
        for other in self._flows_in(SessionState.TRANSFERRING):
            if node in other.session.plan.path:
                self._halt(other, verdict.kind, node, tick, cause, propagated=True)
                halted.append(other)
        for f in sorted(halted, key=lambda f: f.id):
            self._reroute(f, tick)
        return halted

    def _cause_tick(self, flow: Flow, node: NodeId, kind: ViolationKind, tick: int) -> int | None:
        """Earliest matching tamper the session could not have seen at an earlier clean poll."""
        candidates = [t for t, k in self.tamper_log.get(node, []) if k in _CAUSES[kind] and t <= tick]
        if not candidates:
            return None
        since = flow.session.active_since or 0
        if flow.clean_poll is not None and flow.clean_poll > since:
            after = [t for t in candidates if t > flow.clean_poll]
        else:
            # routing-table tampering at the activation tick itself lands in the snapshot
            after = [t for t in candidates if t > since or (t == since and kind is ViolationKind.LABEL_MISMATCH)]
        return min(after) if after else max(candidates)

    def _halt(
        self, flow: Flow, kind: ViolationKind, node: NodeId, tick: int, cause: int | None, propagated: bool
    ) -> None:
        s = flow.session
        self.detections.append(Detection(tick, node, kind, s.id, cause, propagated))
        log.debug("tick %d: session %d halted (%s at %s)", tick, s.id, kind.value, node)
        s.halt(f"{kind.value}@{node}", tick)
        self._close_interval(flow, tick)
        dropped = [p for p in self.packets if p.flow == s.id]
        if dropped:
            self.packets = [p for p in self.packets if p.flow != s.id]
            s.dropped += len(dropped)
            s.in_flight -= len(dropped)
            s.packets_pending += len(dropped)
            self.packets_dropped += len(dropped)
        s.transition(SessionState.REROUTING)

    def _reroute(self, flow: Flow, tick: int) -> None:
        if self._plan(flow, tick):
            self.reroute_count += 1

    def _plan(self, flow: Flow, tick: int) -> bool:
        try:
            zombified = plan_route(flow.session, self.graph, self.policy, tick, self.schedule)
        except NoTrustedRoute:
            flow.session.fail("NoTrustedRoute")
            return False
        self.zombification_count += len(zombified)
        if flow.session.ready_tick <= tick:
            self._activate(flow, tick)
        return True

    def _activate(self, flow: Flow, tick: int) -> None:
        changed = activate_session(flow.session, self.graph, tick)
        for node, dst, hop in changed:
            for other in self._flows_in(SessionState.TRANSFERRING):
                if other is not flow and node in other.session.plan.path:
                    other.session.snapshot = other.session.snapshot.with_rt_entry(node, dst, hop)
        flow.intervals.append(RouteInterval(flow.session.plan.path, tick))

    def _close_interval(self, flow: Flow, tick: int) -> None:
        if flow.intervals and flow.intervals[-1].end is None:
            flow.intervals[-1].end = tick

    # -- per-tick phases -----------------------------------------------

    def _flows_in(self, state: SessionState) -> list[Flow]:
        return [f for f in self.flows if f.session.state is state]

    def _apply_events(self, t: int) -> None:
        tunnels = [f.tunnel for f in self._flows_in(SessionState.TRANSFERRING) if f.tunnel is not None]
        for ev in self._events_by_tick.get(t, ()):
            record = apply_event(ev, self.graph, tunnels, t, mode=self.mode)
            self.mutations.append(record)
            if ev.kind is EventKind.ROGUE_GATEWAY:
                self.rogue_gateway = ev.node
            if record.changed and ev.kind in (EventKind.TAMPER_RT, EventKind.TAMPER_LABEL):
                self.tamper_log.setdefault(ev.node, []).append((t, ev.kind))

    def _start_flows(self, t: int) -> None:
        for index, demand in self._starts.get(t, ()):
            session = Session(index, demand.src, demand.dst, created_tick=t, packets_pending=demand.packets)
            flow = Flow(demand, session)
            self.flows.append(flow)
            if self.mode == "tr":
                self._plan(flow, t)
                continue
            try:
                flow.tunnel = establish_tunnel(self.graph, demand.src, demand.dst, vpn_id=index + 1)
            except DisconnectedGraph:
                session.fail("Disconnected")
                continue
            if self.rogue_gateway is not None and self.rogue_gateway != demand.src:
                # the imposter gateway stays in place for tunnels set up after it appeared
                try:
                    retarget(flow.tunnel, self.graph, self.rogue_gateway)
                except DisconnectedGraph:
                    pass
            session.plan = RoutePlan(flow.tunnel.path, frozenset())
            session.ready_tick = t
            self._activate(flow, t)

    def _activate_ready(self, t: int) -> None:
        for flow in self.flows:
            s = flow.session
            if s.state not in (SessionState.PREPARING, SessionState.REROUTING) or s.ready_tick > t:
                continue
            allowed = admissible_nodes(self.graph, self.policy)
            if all(n in allowed for n in s.plan.path):
                self._activate(flow, t)
            else:
                self._plan(flow, t)

    def _inject(self, t: int) -> None:
        for flow in self._flows_in(SessionState.TRANSFERRING):
            s = flow.session
            if s.packets_pending == 0:
                continue
            d = flow.demand
            if flow.tunnel is not None:
                packet = Packet(s.id, flow.next_seq, flow.tunnel.path, 0, t, True, d.malicious,
                                payload_observable=False, vpn_id=flow.tunnel.vpn_id)
            else:
                packet = Packet(s.id, flow.next_seq, s.plan.path, 0, t, d.encrypted, d.malicious,
                                payload_observable=not d.encrypted)
            flow.next_seq += 1
            flow.sent += 1
            flow.departures.append(t)
            s.packets_pending -= 1
            s.in_flight += 1
            self.packets.append(packet)
            self._process(flow, packet, t)

    def _move(self, t: int) -> None:
        arriving = sorted((p for p in self.packets if p.arrival_tick == t and p.hop > 0), key=lambda p: (p.flow, p.seq))
        flows = {f.id: f for f in self.flows}
        for packet in arriving:
            self._process(flows[packet.flow], packet, t)

    def _process(self, flow: Flow, packet: Packet, t: int) -> None:
        node = packet.current_node
        if flow.tunnel is not None:
            result = vpn_forward(flow.tunnel, packet, self.graph, t)
        else:
            result = tr_forward(flow.session, packet, self.graph, t)
        ids_observe(self.ids, packet, node, t)
        self.exposures.extend(result.exposures)
        self.hops.extend(result.hops)
        if result.delivered or result.hijacked:
            self.packets.remove(packet)
            flow.session.in_flight -= 1
            if result.delivered:
                flow.session.delivered += 1
                self.packets_delivered += 1
            else:
                flow.session.dropped += 1
                self.packets_dropped += 1

    def _settle(self, t: int) -> None:
        for flow in self._flows_in(SessionState.TRANSFERRING):
            s = flow.session
            if flow.tunnel is None:
                done = s.delivered == flow.demand.packets
            else:
                done = s.packets_pending == 0 and s.in_flight == 0
            if done:
                s.transition(SessionState.COMPLETED)
                self._close_interval(flow, t)

    # -- reporting -----------------------------------------------------

    def report(self) -> MetricsReport:
        detections = sorted(self.detections, key=lambda d: (d.tick, d.node, d.session))
        latencies = [d.latency for d in detections if d.latency is not None]
        sessions = []
        for f in sorted(self.flows, key=lambda f: f.id):
            s = f.session
            sessions.append({
                "id": s.id,
                "sender": s.sender,
                "receiver": s.receiver,
                "state": s.state.value,
                "reason": s.fail_reason,
                "path": list(s.plan.path) if s.plan else [],
                "sent": f.sent,
                "delivered": s.delivered,
                "dropped": s.dropped,
                "vpn_id": f.tunnel.vpn_id if f.tunnel else None,
            })
        return MetricsReport(
            mode=self.mode,
            seed=self.seed,
            ticks_run=self.tick + 1,
            packets_sent=sum(f.sent for f in self.flows),
            packets_delivered=self.packets_delivered,
            packets_dropped=self.packets_dropped,
            packets_in_flight=len(self.packets),
            plaintext_exposures=_exposure_summary(self.exposures, ExposureKind.PLAINTEXT),
            ciphertext_exposures=_exposure_summary(self.exposures, ExposureKind.CIPHERTEXT),
            detections=[d.to_dict() for d in detections],
            max_detection_latency=max(latencies) if latencies else None,
            reroute_count=self.reroute_count,
            zombification_count=self.zombification_count,
            rotation_count=self.rotation_count,
            ids_alert_count=len(self.ids.alerts) if self.ids else 0,
            sessions=sessions,
        )


def run(scenario: Scenario, seed: int | None = None) -> MetricsReport:
    return Simulation(scenario, seed).run()
