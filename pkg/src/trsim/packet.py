from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .topology import NodeId


@dataclass
class Packet:
    flow: int
    seq: int
    path: tuple[NodeId, ...]
    hop: int = 0
    arrival_tick: int = 0
    encrypted: bool = False
    malicious: bool = False
    payload_observable: bool = True
    vpn_id: int | None = None

    @property
    def current_node(self) -> NodeId:
        return self.path[self.hop]

    @property
    def at_destination(self) -> bool:
        return self.hop == len(self.path) - 1

    @property
    def at_intermediate(self) -> bool:
        return 0 < self.hop < len(self.path) - 1


class ExposureKind(str, Enum):
    CIPHERTEXT = "ciphertext"
    PLAINTEXT = "plaintext"


@dataclass(frozen=True)
class Exposure:
    kind: ExposureKind
    node: NodeId
    tick: int
    flow: int
    seq: int


@dataclass(frozen=True)
class HopRecord:
    tick: int
    node: NodeId
    next_hop: NodeId
    flow: int
    seq: int


@dataclass
class ForwardResult:
    hops: list[HopRecord]
    exposures: list[Exposure]
    delivered: bool = False
    hijacked: bool = False
