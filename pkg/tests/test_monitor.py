import copy
import random
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpus import make_scenario
from oracles import fnv1a_64_oracle, label_oracle
from trsim.monitor import (
    CLEAN,
    LabelSchedule,
    ViolationKind,
    check_flow_conformance,
    check_label_integrity,
    check_rt_integrity,
    expected_label,
    fnv1a_64,
    poll,
    rotate_labels,
)
from trsim.routing import RoutingPolicy, prepare_session
from trsim.topology import ForwardRecord, initial_routing_tables

# computed once with oracles.label_oracle and frozen
LABEL_A_0_0_0 = 914443213575264272


def test_fnv_offset_basis():
    assert fnv1a_64(b"") == 14695981039346656037


@pytest.mark.parametrize("data,value", [
    (b"a", 0xAF63DC4C8601EC8C),
    (b"foobar", 0x85944171F73967E8),
])
def test_fnv_reference_vectors(data, value):
    assert fnv1a_64_oracle(data) == value
    assert fnv1a_64(data) == value


def test_golden_label():
    assert label_oracle("A", 0, 0, 0) == LABEL_A_0_0_0
    assert expected_label("A", 0, 0, 0) == LABEL_A_0_0_0


@given(st.text(min_size=1, max_size=12), st.integers(0, 15), st.integers(0, 10_000), st.integers(0, 2**64 - 1))
@settings(max_examples=300)
def test_expected_label_matches_oracle(node, index, epoch, key):
    assert expected_label(node, index, epoch, key) == label_oracle(node, index, epoch, key)


def test_adjacent_epochs_differ_on_corpus():
    rng = random.Random(5)
    for _ in range(500):
        node, i, e, k = f"r{rng.randrange(100)}", rng.randrange(8), rng.randrange(5000), rng.getrandbits(64)
        assert expected_label(node, i, e, k) != expected_label(node, i, e + 1, k)


def test_epoch_arithmetic():
    sched = LabelSchedule(5, 0, 2)
    assert [sched.epoch(t) for t in (0, 4, 5, 9, 10)] == [0, 0, 1, 1, 2]
    assert [t for t in range(23) if sched.is_boundary(t)] == [5, 10, 15, 20]


def route_fixture(**kwargs):
    sc = make_scenario(["S-A", "A-R", "S-B", "B-R"], session_key=99, rotation_period=5, **kwargs)
    g = initial_routing_tables(sc.graph)
    session = prepare_session(g, "S", "R", RoutingPolicy(), 0, sc.config.schedule)
    return g, session, sc.config.schedule


def test_rotation_within_epoch_is_noop():
    g, _, sched = route_fixture()
    before = copy.deepcopy(g)
    for t in range(1, 5):
        assert rotate_labels(g, ["S", "A", "R"], t, sched) is False
    assert g == before


def test_rotation_at_boundary_rewrites_all_labels():
    g, _, sched = route_fixture()
    assert rotate_labels(g, ["S", "A", "R"], 5, sched)
    for n in ("S", "A", "R"):
        labels = g.nodes[n].mib.labels
        assert [lab.epoch for lab in labels] == [1, 1, 1]
        assert [lab.value for lab in labels] == [label_oracle(n, i, 1, 99) for i in range(3)]
    assert g.nodes["B"].mib.labels[0].epoch == 0


def test_rotation_count_over_23_ticks():
    g, _, sched = route_fixture()
    assert sum(rotate_labels(g, ["S"], t, sched) for t in range(23)) == 4


def test_rotation_restores_tampered_label():
    g, _, sched = route_fixture()
    g.nodes["A"].mib.labels[1] = replace(g.nodes["A"].mib.labels[1], value=1)
    rotate_labels(g, ["A"], 5, sched)
    assert g.nodes["A"].mib.labels[1].value == expected_label("A", 1, 1, 99)


def test_rt_clean_then_changed():
    g, s, _ = route_fixture()
    assert s.plan.path == ("S", "A", "R")
    assert check_rt_integrity(s, g) == CLEAN
    g.nodes["A"].routing_table["R"] = "S"
    verdict = check_rt_integrity(s, g, 7)
    assert (verdict.kind, verdict.node, verdict.detected_tick) == (ViolationKind.RT_CHANGED, "A", 7)


def test_rt_any_entry_counts():
    g, s, _ = route_fixture()
    assert g.nodes["A"].routing_table["B"] == "R"
    g.nodes["A"].routing_table["B"] = "S"
    assert check_rt_integrity(s, g).node == "A"


def test_rt_reports_first_node_in_path_order():
    g, s, _ = route_fixture()
    g.nodes["R"].routing_table["S"] = "B"
    g.nodes["A"].routing_table["S"] = "R"
    assert check_rt_integrity(s, g).node == "A"


def test_labels_clean_at_start_and_mismatch_after_tamper():
    g, s, sched = route_fixture()
    assert check_label_integrity(s, g, 0, sched) == CLEAN
    lab = g.nodes["A"].mib.labels[0]
    g.nodes["A"].mib.labels[0] = replace(lab, value=(lab.value + 1) % 2**64)
    verdict = check_label_integrity(s, g, 1, sched)
    assert (verdict.kind, verdict.node) == (ViolationKind.LABEL_MISMATCH, "A")


def test_labels_clean_at_rotation_tick_before_and_after_rotate():
    g, s, sched = route_fixture()
    for t in range(1, 5):
        assert check_label_integrity(s, g, t, sched) == CLEAN
    # poll precedes rotation at the boundary tick: outgoing epoch still authorized
    assert check_label_integrity(s, g, 5, sched) == CLEAN
    rotate_labels(g, ["S", "A", "R"], 5, sched)
    assert check_label_integrity(s, g, 5, sched) == CLEAN
    assert check_label_integrity(s, g, 6, sched) == CLEAN


def test_stale_epoch_labels_are_a_violation():
    g, s, sched = route_fixture()
    # no rotation applied; at tick 10 epoch 0 is two epochs old
    assert check_label_integrity(s, g, 10, sched).kind is ViolationKind.LABEL_MISMATCH


def test_flow_vacuous_conforming_and_off_path():
    g, s, _ = route_fixture()
    assert check_flow_conformance(s, g) == CLEAN
    g.nodes["S"].log_forward(ForwardRecord(1, "R", "A", s.id))
    g.nodes["A"].log_forward(ForwardRecord(2, "R", "R", s.id))
    assert check_flow_conformance(s, g) == CLEAN
    g.nodes["A"].log_forward(ForwardRecord(3, "R", "S", s.id))
    verdict = check_flow_conformance(s, g, 4)
    assert (verdict.kind, verdict.node) == (ViolationKind.FLOW_NON_CONFORMING, "A")


def test_flow_ignores_other_flows_and_earlier_ticks():
    g, s, _ = route_fixture()
    g.nodes["A"].log_forward(ForwardRecord(0, "R", "S", s.id + 1))
    g.nodes["A"].log_forward(ForwardRecord(0, "B", "S", s.id))
    assert check_flow_conformance(s, g) == CLEAN
    s.active_since = 5
    g.nodes["A"].log_forward(ForwardRecord(3, "R", "S", s.id))
    assert check_flow_conformance(s, g) == CLEAN


def test_poll_precedence_and_read_only():
    g, s, sched = route_fixture()
    before_graph, before_session = copy.deepcopy(g), copy.deepcopy(s)
    assert poll(s, g, 2, sched) == CLEAN
    assert g == before_graph and s == before_session
    g.nodes["A"].routing_table["R"] = "S"
    g.nodes["A"].mib.labels[0] = replace(g.nodes["A"].mib.labels[0], value=0)
    frozen = copy.deepcopy(g)
    assert poll(s, g, 2, sched).kind is ViolationKind.RT_CHANGED
    assert g == frozen


@given(st.integers(0, 60), st.integers(1, 7))
@settings(max_examples=80, deadline=None)
def test_detection_on_first_poll_tick_after_tamper(tamper_tick, period):
    """Ceiling of the tamper tick onto the poll grid."""
    g, s, sched = route_fixture()
    detected = None
    for t in range(0, tamper_tick + period + 1):
        if t == tamper_tick:
            g.nodes["A"].routing_table["R"] = "S"
        if t % period == 0 and poll(s, g, t, sched):
            detected = t
            break
        rotate_labels(g, ["S", "A", "R"], t, sched)
    expected = -(-tamper_tick // period) * period
    assert detected == expected
    assert tamper_tick <= detected <= tamper_tick + period
