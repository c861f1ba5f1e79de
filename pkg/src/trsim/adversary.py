"""Scheduled intrusion events and the IDS observer."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

from .errors import DisconnectedGraph, InvalidForMode
from .packet import Packet
from .topology import NetworkGraph, NodeId, TrustKind, TrustState
from .vpn import Tunnel, retarget


class EventKind(str, Enum):
    TAMPER_RT = "tamper_rt"
    TAMPER_LABEL = "tamper_label"
    SILENT_COMPROMISE = "silent_compromise"
    ROGUE_GATEWAY = "rogue_gateway"


# fields each kind carries beyond tick/kind/node
EVENT_FIELDS = {
    EventKind.TAMPER_RT: ("destination", "new_next_hop"),
    EventKind.TAMPER_LABEL: ("index", "new_value"),
    EventKind.SILENT_COMPROMISE: (),
    EventKind.ROGUE_GATEWAY: (),
}


@dataclass(frozen=True)
class IntrusionEvent:
    tick: int
    kind: EventKind
    node: NodeId
    destination: NodeId | None = None
    new_next_hop: NodeId | None = None
    index: int | None = None
    new_value: int | None = None

    def to_dict(self) -> dict:
        out: dict = {"tick": self.tick, "kind": self.kind.value, "node": self.node}
        for name in EVENT_FIELDS[self.kind]:
            out[name] = getattr(self, name)
        return out


@dataclass(frozen=True)
class MutationRecord:
    tick: int
    kind: EventKind
    node: NodeId
    changed: bool
    detail: str

    def to_dict(self) -> dict:
        return {"tick": self.tick, "kind": self.kind.value, "node": self.node,
                "changed": self.changed, "detail": self.detail}


def apply_event(
    event: IntrusionEvent,
    graph: NetworkGraph,
    tunnels: Sequence[Tunnel] = (),
    tick: int | None = None,
    *,
    mode: str = "tr",
) -> MutationRecord:
    """Apply one adversary action to live state. Session snapshots are never touched."""
    tick = event.tick if tick is None else tick
    if tick != event.tick:
        raise ValueError(f"event scheduled for tick {event.tick} applied at {tick}")
    node = graph.node(event.node)
    kind = event.kind

    if kind is EventKind.TAMPER_RT:
        graph.node(event.destination)
        graph.node(event.new_next_hop)
        before = node.routing_table.get(event.destination)
        node.routing_table[event.destination] = event.new_next_hop
        return MutationRecord(tick, kind, node.id, before != event.new_next_hop,
                              f"RT[{event.destination}] {before} -> {event.new_next_hop}")

    if kind is EventKind.TAMPER_LABEL:
        labels = node.mib.labels
        if not 0 <= event.index < len(labels):
            raise IndexError(f"{node.id} has no label {event.index}")
        before = labels[event.index].value
        labels[event.index] = replace(labels[event.index], value=event.new_value)
        return MutationRecord(tick, kind, node.id, before != event.new_value,
                              f"label[{event.index}] {before} -> {event.new_value}")

    if kind is EventKind.SILENT_COMPROMISE:
        already = node.trust.kind is TrustKind.COMPROMISED
        if not already:
            node.trust = TrustState.compromised(tick)
        return MutationRecord(tick, kind, node.id, not already, f"trust -> {node.trust}")

    if kind is EventKind.ROGUE_GATEWAY:
        if mode != "vpn":
            raise InvalidForMode("rogue_gateway applies only in vpn mode")
        moved = []
        for tunnel in tunnels:
            if tunnel.sender == node.id or tunnel.gateway == node.id:
                continue
            try:
                retarget(tunnel, graph, node.id)
            except DisconnectedGraph:
                continue
            moved.append(tunnel.vpn_id)
        detail = f"tunnels {moved} -> gateway {node.id}" if moved else "no active tunnel retargeted"
        return MutationRecord(tick, kind, node.id, bool(moved), detail)

    raise ValueError(f"unhandled event kind {kind}")  # pragma: no cover


@dataclass
class IdsObserver:
    vantage: NodeId
    alerts: list[tuple[int, str]] = field(default_factory=list)


def ids_observe(ids: IdsObserver | None, packet: Packet, node: NodeId, tick: int) -> str | None:
    """Alert on observable malicious payloads passing the vantage node."""
    if ids is None or node != ids.vantage:
        return None
    if not packet.payload_observable or not packet.malicious:
        return None
    alert = f"malicious payload flow={packet.flow} seq={packet.seq} at {node}"
    ids.alerts.append((tick, alert))
    return alert

