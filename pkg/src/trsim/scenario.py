"""Scenario files: strict JSON schema, loading, validation and rendering."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Annotated, Literal, Optional

import pydantic
from pydantic import BaseModel, ConfigDict, Field, StringConstraints

from .adversary import EVENT_FIELDS, EventKind, IntrusionEvent
from .errors import ParseError, ValidationError
from .monitor import LabelSchedule
from .routing import RoutingPolicy
from .topology import NetworkGraph, Node, NodeId, TrustState

UINT64_MAX = 2**64 - 1

Token = Annotated[str, StringConstraints(min_length=1, pattern=r"^\S+$")]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True)


class ZombifyModel(_Strict):
    enabled: bool
    delay_ticks: int = Field(ge=0)


class ConfigModel(_Strict):
    mode: Literal["tr", "vpn"]
    poll_period: int = Field(ge=1)
    rotation_period: int = Field(ge=1)
    labels_per_node: int = Field(ge=1)
    zombify: ZombifyModel
    require_full_mesh: bool
    excluded_locations: list[str]
    seed: int = Field(ge=0, le=UINT64_MAX)
    max_ticks: int = Field(ge=0)
    session_key: int = Field(ge=0, le=UINT64_MAX)


class NodeModel(_Strict):
    id: Token
    as_: Token = Field(alias="as")
    location: Token
    trust: Literal["trusted", "untrusted"]
    zombifiable: bool


class LinkModel(_Strict):
    a: Token
    b: Token
    latency_ticks: int = Field(ge=1)


class TrafficModel(_Strict):
    src: Token
    dst: Token
    packets: int = Field(ge=1)
    start_tick: int = Field(ge=0)
    encrypted: bool
    malicious: bool = False


class EventModel(_Strict):
    tick: int = Field(ge=0)
    kind: Literal["tamper_rt", "tamper_label", "silent_compromise", "rogue_gateway"]
    node: Token
    destination: Optional[Token] = None
    new_next_hop: Optional[Token] = None
    index: Optional[int] = Field(default=None, ge=0)
    new_value: Optional[int] = Field(default=None, ge=0, le=UINT64_MAX)


class ScenarioModel(_Strict):
    config: ConfigModel
    nodes: list[NodeModel]
    links: list[LinkModel]
    traffic: list[TrafficModel]
    events: list[EventModel]
    ids: Optional[Token] = None


@dataclass(frozen=True)
class Config:
    mode: str = "tr"
    poll_period: int = 1
    rotation_period: int = 10
    labels_per_node: int = 3
    zombify_enabled: bool = False
    zombify_delay_ticks: int = 0
    require_full_mesh: bool = False
    excluded_locations: tuple[str, ...] = ()
    seed: int = 0
    max_ticks: int = 1000
    session_key: int = 0

    @property
    def policy(self) -> RoutingPolicy:
        return RoutingPolicy(self.zombify_enabled, self.zombify_delay_ticks, frozenset(self.excluded_locations))

    @property
    def schedule(self) -> LabelSchedule:
        return LabelSchedule(self.rotation_period, self.session_key, self.labels_per_node)


@dataclass(frozen=True)
class TrafficDemand:
    src: NodeId
    dst: NodeId
    packets: int
    start_tick: int = 0
    encrypted: bool = False
    malicious: bool = False


@dataclass
class Scenario:
    config: Config
    graph: NetworkGraph
    traffic: list[TrafficDemand] = field(default_factory=list)
    events: list[IntrusionEvent] = field(default_factory=list)
    ids: NodeId | None = None

    def with_mode(self, mode: str) -> tuple[Scenario, list[str]]:
        """Same scenario under ``mode``; events that mode cannot express are dropped with a notice."""
        notices = []
        events = []
        for i, ev in enumerate(self.events):
            if ev.kind is EventKind.ROGUE_GATEWAY and mode != "vpn":
                notices.append(f"event {i} ({ev.kind.value} at {ev.node}, tick {ev.tick}) skipped in {mode} mode")
                continue
            events.append(ev)
        clone = load_scenario(render_scenario(self))
        return replace(clone, config=replace(clone.config, mode=mode), events=events), notices


def _reject_duplicate_keys(pairs: list[tuple[str, object]]) -> dict:
    out: dict = {}
    for k, v in pairs:
        if k in out:
            raise ValidationError(k, "duplicate key")
        out[k] = v
    return out


def _field_name(loc: tuple) -> str:
    parts = []
    for p in loc:
        if isinstance(p, int):
            parts.append(f"[{p}]")
        else:
            p = "as" if p == "as_" else p
            parts.append(("." if parts else "") + str(p))
    return "".join(parts)


def parse_json(text: str) -> dict:
    try:
        return json.loads(text, object_pairs_hook=_reject_duplicate_keys)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    except RecursionError:
        raise ParseError("nesting too deep", 1, 1) from None


def load_scenario(text: str) -> Scenario:
    """Parse and fully validate scenario JSON."""
    raw = parse_json(text)
    if not isinstance(raw, dict):
        raise ValidationError("<root>", "scenario must be a JSON object")
    try:
        model = ScenarioModel.model_validate(raw)
    except pydantic.ValidationError as exc:
        err = exc.errors()[0]
        raise ValidationError(_field_name(err["loc"]) or "<root>", err["msg"]) from None
    return _build(model)


def _build(m: ScenarioModel) -> Scenario:
    c = m.config
    for i, tag in enumerate(c.excluded_locations):
        if not tag or tag != tag.lower() or any(ch.isspace() for ch in tag):
            raise ValidationError(f"config.excluded_locations[{i}]", f"{tag!r} is not a lowercase token")
    config = Config(
        mode=c.mode,
        poll_period=c.poll_period,
        rotation_period=c.rotation_period,
        labels_per_node=c.labels_per_node,
        zombify_enabled=c.zombify.enabled,
        zombify_delay_ticks=c.zombify.delay_ticks,
        require_full_mesh=c.require_full_mesh,
        excluded_locations=tuple(c.excluded_locations),
        seed=c.seed,
        max_ticks=c.max_ticks,
        session_key=c.session_key,
    )
    schedule = config.schedule

    graph = NetworkGraph()
    for i, n in enumerate(m.nodes):
        if n.id in graph.nodes:
            raise ValidationError(f"nodes[{i}].id", f"duplicate node id {n.id!r}")
        trust = TrustState.trusted() if n.trust == "trusted" else TrustState.untrusted()
        graph.nodes[n.id] = Node(n.id, n.as_, n.location, trust, n.zombifiable, mib=schedule.fresh_mib(n.id, 0))

    def known(fname: str, node: str | None) -> None:
        if node not in graph.nodes:
            raise ValidationError(fname, f"unknown node {node!r}")

    for i, link in enumerate(m.links):
        known(f"links[{i}].a", link.a)
        known(f"links[{i}].b", link.b)
        if link.a == link.b:
            raise ValidationError(f"links[{i}]", f"self-loop on {link.a!r}")
        if graph.has_link(link.a, link.b):
            raise ValidationError(f"links[{i}]", f"duplicate link {link.a!r}-{link.b!r}")
        graph.add_link(link.a, link.b, link.latency_ticks)

    traffic = []
    for i, t in enumerate(m.traffic):
        known(f"traffic[{i}].src", t.src)
        known(f"traffic[{i}].dst", t.dst)
        if t.src == t.dst:
            raise ValidationError(f"traffic[{i}].dst", "src and dst must differ")
        if t.start_tick > config.max_ticks:
            raise ValidationError(f"traffic[{i}].start_tick", "beyond max_ticks")
        traffic.append(TrafficDemand(t.src, t.dst, t.packets, t.start_tick, t.encrypted, t.malicious))

    events = []
    for i, e in enumerate(m.events):
        where = f"events[{i}]"
        kind = EventKind(e.kind)
        if e.tick > config.max_ticks:
            raise ValidationError(f"{where}.tick", "beyond max_ticks")
        known(f"{where}.node", e.node)
        wanted = EVENT_FIELDS[kind]
        for name in ("destination", "new_next_hop", "index", "new_value"):
            present = getattr(e, name) is not None
            if name in wanted and not present:
                raise ValidationError(f"{where}.{name}", f"required for {kind.value}")
            if name not in wanted and present:
                raise ValidationError(f"{where}.{name}", f"not allowed for {kind.value}")
        if kind is EventKind.TAMPER_RT:
            known(f"{where}.destination", e.destination)
            known(f"{where}.new_next_hop", e.new_next_hop)
            if e.destination == e.node:
                raise ValidationError(f"{where}.destination", "a node has no route to itself")
            if not graph.has_link(e.node, e.new_next_hop):
                raise ValidationError(f"{where}.new_next_hop", f"{e.new_next_hop!r} is not a neighbor of {e.node!r}")
        elif kind is EventKind.TAMPER_LABEL:
            if e.index >= config.labels_per_node:
                raise ValidationError(f"{where}.index", f"must be < labels_per_node ({config.labels_per_node})")
        elif kind is EventKind.ROGUE_GATEWAY and config.mode != "vpn":
            raise ValidationError(f"{where}.kind", "rogue_gateway is only valid in vpn mode")
        events.append(IntrusionEvent(e.tick, kind, e.node, e.destination, e.new_next_hop, e.index, e.new_value))

    if m.ids is not None:
        known("ids", m.ids)
    return Scenario(config, graph, traffic, events, m.ids)


def scenario_to_dict(s: Scenario) -> dict:
    c = s.config
    out = {
        "config": {
            "mode": c.mode,
            "poll_period": c.poll_period,
            "rotation_period": c.rotation_period,
            "labels_per_node": c.labels_per_node,
            "zombify": {"enabled": c.zombify_enabled, "delay_ticks": c.zombify_delay_ticks},
            "require_full_mesh": c.require_full_mesh,
            "excluded_locations": list(c.excluded_locations),
            "seed": c.seed,
            "max_ticks": c.max_ticks,
            "session_key": c.session_key,
        },
        "nodes": [
            {"id": n.id, "as": n.as_id, "location": n.location, "trust": n.trust.kind.value,
             "zombifiable": n.zombifiable}
            for n in s.graph.nodes.values()
        ],
        "links": [{"a": a, "b": b, "latency_ticks": lat} for (a, b), lat in s.graph.links.items()],
        "traffic": [
            {"src": t.src, "dst": t.dst, "packets": t.packets, "start_tick": t.start_tick,
             "encrypted": t.encrypted, "malicious": t.malicious}
            for t in s.traffic
        ],
        "events": [e.to_dict() for e in s.events],
    }
    if s.ids is not None:
        out["ids"] = s.ids
    return out


def render_scenario(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=2) + "\n"
