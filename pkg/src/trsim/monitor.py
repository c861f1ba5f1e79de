"""Route integrity monitoring: routing tables, MIB labels and forwarding conformance."""

from __future__ import annotations

import struct
from functools import lru_cache
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Iterable

from .topology import Mib, MibLabel, NetworkGraph, NodeId

if TYPE_CHECKING:
    from .routing import Session

FNV64_OFFSET = 14695981039346656037
FNV64_PRIME = 1099511628211
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a_64(data: bytes, state: int = FNV64_OFFSET) -> int:
    """FNV-1a 64; pass a previous result as ``state`` to continue hashing."""
    h = state
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & _MASK64
    return h


def label_bytes(node: NodeId, index: int, epoch: int, session_key: int) -> bytes:
    return f"{node}|{index}|{epoch}|".encode("utf-8") + struct.pack("<Q", session_key)


@lru_cache(maxsize=4096)
def _prefix_state(node: NodeId, index: int) -> int:
    return fnv1a_64(f"{node}|{index}|".encode("utf-8"))


@lru_cache(maxsize=16384)
def expected_label(node: NodeId, index: int, epoch: int, session_key: int) -> int:
    """Keyed label value for one MIB slot; the key plays the role of label encryption."""
    tail = f"{epoch}|".encode("ascii") + struct.pack("<Q", session_key)
    return fnv1a_64(tail, _prefix_state(node, index))


@dataclass(frozen=True)
class LabelSchedule:
    rotation_period: int
    session_key: int
    labels_per_node: int

    def __post_init__(self) -> None:
        if self.rotation_period < 1:
            raise ValueError("rotation_period must be >= 1")
        if self.labels_per_node < 1:
            raise ValueError("labels_per_node must be >= 1")

    def epoch(self, tick: int) -> int:
        return tick // self.rotation_period

    def is_boundary(self, tick: int) -> bool:
        return tick > 0 and self.epoch(tick) != self.epoch(tick - 1)

    def fresh_mib(self, node: NodeId, epoch: int) -> Mib:
        return Mib([
            MibLabel(i, expected_label(node, i, epoch, self.session_key), True, node, epoch)
            for i in range(self.labels_per_node)
        ])


def rotate_labels(graph: NetworkGraph, route_nodes: Iterable[NodeId], tick: int, schedule: LabelSchedule) -> bool:
    """Rewrite every label of ``route_nodes`` when ``tick`` opens a new epoch.

    Returns True when a rotation happened.
    """
    if not schedule.is_boundary(tick):
        return False
    epoch = schedule.epoch(tick)
    for n in route_nodes:
        graph.node(n).mib = schedule.fresh_mib(n, epoch)
    return True


class ViolationKind(str, Enum):
    RT_CHANGED = "RtChanged"
    LABEL_MISMATCH = "LabelMismatch"
    FLOW_NON_CONFORMING = "FlowNonConforming"


@dataclass(frozen=True)
class MonitorVerdict:
    kind: ViolationKind | None = None
    node: NodeId | None = None
    detected_tick: int | None = None

    @property
    def clean(self) -> bool:
        return self.kind is None

    def __bool__(self) -> bool:
        # truthy means "something is wrong"
        return not self.clean


CLEAN = MonitorVerdict()


def check_rt_integrity(session: Session, graph: NetworkGraph, tick: int | None = None) -> MonitorVerdict:
    snapshot = dict(session.snapshot.routing_tables)
    for n in session.plan.path:
        if graph.node(n).routing_table.frozen() != snapshot[n]:
            return MonitorVerdict(ViolationKind.RT_CHANGED, n, tick)
    return CLEAN


def _authorized_epochs(tick: int, schedule: LabelSchedule) -> set[int]:
    # The poll runs before rotation within a tick, so at an epoch boundary the
    # outgoing epoch is still authorized; a rotation already applied is too.
    epochs = {schedule.epoch(tick)}
    if tick > 0:
        epochs.add(schedule.epoch(tick - 1))
    return epochs


def check_label_integrity(
    session: Session, graph: NetworkGraph, tick: int, schedule: LabelSchedule
) -> MonitorVerdict:
    authorized = _authorized_epochs(tick, schedule)
    for n in session.plan.path:
        labels = graph.node(n).mib.labels
        if len(labels) != schedule.labels_per_node:
            return MonitorVerdict(ViolationKind.LABEL_MISMATCH, n, tick)
        for i, label in enumerate(labels):
            if (
                label.index != i
                or label.bound_node != n
                or label.epoch not in authorized
                or label.value != expected_label(n, i, label.epoch, schedule.session_key)
            ):
                return MonitorVerdict(ViolationKind.LABEL_MISMATCH, n, tick)
    return CLEAN


def check_flow_conformance(
    session: Session, graph: NetworkGraph, tick: int | None = None, since: int = 0
) -> MonitorVerdict:
    """Every forward toward the receiver since activation must follow the session's route.

    ``since`` lets a caller that polls repeatedly skip records it has already checked.
    """
    path = session.plan.path
    since = max(since, session.active_since if session.active_since is not None else 0)
    for pos, n in enumerate(path[:-1]):
        expected = path[pos + 1]
        for rec in reversed(graph.node(n).forwarding_log):
            if rec.tick < since:
                break
            if rec.destination != session.receiver or rec.flow not in (None, session.id):
                continue
            if rec.next_hop != expected:
                return MonitorVerdict(ViolationKind.FLOW_NON_CONFORMING, n, tick)
    return CLEAN


def poll(
    session: Session, graph: NetworkGraph, tick: int, schedule: LabelSchedule, since: int = 0
) -> MonitorVerdict:
    """Run the three checks in fixed order and return the first violation."""
    return (
        check_rt_integrity(session, graph, tick)
        or check_label_integrity(session, graph, tick, schedule)
        or check_flow_conformance(session, graph, tick, since)
        or CLEAN
    )
