"""Baseline VPN: a trust-blind encrypted tunnel over the shortest path."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DisconnectedGraph
from .packet import Exposure, ExposureKind, ForwardResult, HopRecord, Packet
from .topology import ForwardRecord, NetworkGraph, NodeId, TrustKind, shortest_next_hops

EXPOSING_TRUST = (TrustKind.UNTRUSTED, TrustKind.COMPROMISED)


@dataclass
class Tunnel:
    vpn_id: int
    sender: NodeId
    gateway: NodeId
    receiver: NodeId
    path: tuple[NodeId, ...]
    encrypted: bool = True

    @property
    def endpoints(self) -> tuple[NodeId, NodeId]:
        return (self.sender, self.gateway)

    @property
    def rogue(self) -> bool:
        return self.gateway != self.receiver


def shortest_path(graph: NetworkGraph, src: NodeId, dst: NodeId) -> tuple[NodeId, ...]:
    """Minimum-hop path, lexicographically smallest among ties; ignores trust and location."""
    graph.node(src)
    graph.node(dst)
    hops = shortest_next_hops(graph, dst)
    if src != dst and src not in hops:
        raise DisconnectedGraph(f"{dst} unreachable from {src}")
    path = [src]
    while path[-1] != dst:
        path.append(hops[path[-1]])
    return tuple(path)


def establish_tunnel(graph: NetworkGraph, sender: NodeId, receiver: NodeId, vpn_id: int = 1) -> Tunnel:
    if sender == receiver:
        raise ValueError("sender and receiver must differ")
    return Tunnel(vpn_id, sender, receiver, receiver, shortest_path(graph, sender, receiver))


def retarget(tunnel: Tunnel, graph: NetworkGraph, gateway: NodeId) -> None:
    """Send subsequent tunnel traffic to ``gateway``; packets already in flight keep their path."""
    tunnel.path = shortest_path(graph, tunnel.sender, gateway)
    tunnel.gateway = gateway


def vpn_forward(tunnel: Tunnel, packet: Packet, graph: NetworkGraph, tick: int) -> ForwardResult:
    """Process ``packet`` at its current node at ``tick`` and launch it toward the next hop."""
    node_id = packet.current_node
    node = graph.node(node_id)
    result = ForwardResult([], [])
    if packet.at_destination:
        if node_id != tunnel.receiver:
            # an imposter endpoint terminates the tunnel and sees the payload
            packet.payload_observable = True
            result.exposures.append(Exposure(ExposureKind.PLAINTEXT, node_id, tick, packet.flow, packet.seq))
            result.hijacked = True
        else:
            result.delivered = True
        return result
    if packet.at_intermediate and node.trust.kind in EXPOSING_TRUST:
        result.exposures.append(Exposure(ExposureKind.CIPHERTEXT, node_id, tick, packet.flow, packet.seq))
    nxt = packet.path[packet.hop + 1]
    result.hops.append(HopRecord(tick, node_id, nxt, packet.flow, packet.seq))
    node.log_forward(ForwardRecord(tick, packet.path[-1], nxt, packet.flow))
    packet.hop += 1
    packet.arrival_tick = tick + graph.latency(node_id, nxt)
    return result
