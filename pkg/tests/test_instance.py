import copy
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridrestore import InstanceError, dump_instance, load_instance
from gridrestore.fixtures import SHIPPED, load_fixture
from gridrestore.network import ReductionError, build_travel_matrix, reduce_network, travel_minutes


def tiny_doc():
    return {
        "name": "tiny",
        "network": {
            "nodes": [{"id": "A", "load": 10}, {"id": "B", "x": 100, "load": [5, 6]}],
            "lines": [{"id": "L1", "from": "A", "to": "B", "r": 0.1, "x": 0.1}],
            "sources": [{"id": "S", "kind": "substation", "node": "A", "p_max": 100}],
        },
        "crews": {"speed_kmh": 5},
        "horizon": {"slot_minutes": 30, "slots": 2},
    }


def test_shipped_fixtures_load():
    for name in SHIPPED:
        inst = load_fixture(name)
        assert inst.horizon.slots >= 1


def test_defaults_and_series():
    inst = load_instance(tiny_doc())
    a, b = inst.network.nodes
    assert a.load == (10.0, 10.0)
    assert b.load == (5.0, 6.0)
    assert a.penalty == 14.0
    assert inst.network.nominal_voltage == 4160.0


def test_units_are_converted():
    doc = tiny_doc()
    doc["units"] = {"power": "MW", "voltage": "kV", "length": "km"}
    doc["network"]["nodes"][1]["x"] = 0.1
    doc["network"]["nominal_voltage"] = 4.16
    inst = load_instance(doc)
    assert inst.network.nodes[0].load[0] == pytest.approx(10000.0)
    assert inst.network.nodes[1].x == pytest.approx(100.0)
    assert inst.network.nominal_voltage == pytest.approx(4160.0)


@pytest.mark.parametrize("mutate,where", [
    (lambda d: d["network"]["nodes"][0].update(colour="red"), "network.nodes[0]"),
    (lambda d: d["network"]["lines"][0].update(to="Z"), "network.lines[0]"),
    (lambda d: d["network"]["nodes"].append({"id": "A"}), "network.nodes"),
    (lambda d: d["crews"].update(speed_kmh=0), "crews.speed_kmh"),
    (lambda d: d["network"]["lines"][0].update(switch={"id": "S1", "type": "MS"}), "manual_minutes"),
])
def test_malformed_documents_are_rejected(mutate, where):
    doc = tiny_doc()
    mutate(doc)
    with pytest.raises(InstanceError) as err:
        load_instance(doc)
    assert where in str(err.value)


def test_damaged_line_needs_a_repair_crew():
    doc = tiny_doc()
    doc["network"]["lines"][0].update(damaged=True, repair_minutes=30)
    with pytest.raises(InstanceError):
        load_instance(doc)


def test_dump_round_trip(desk):
    again = load_instance(json.loads(json.dumps(dump_instance(desk))))
    assert dump_instance(again) == dump_instance(desk)


def test_epsilon_rule_moves_completion_off_the_boundary():
    doc = tiny_doc()
    doc["network"]["lines"][0].update(damaged=True, repair_minutes=30.01, site=[0, 0])
    doc["crews"]["repair"] = [{"id": "R", "depot": [0, 0]}]
    inst = load_instance(doc)
    eps = inst.horizon.epsilon
    assert eps == pytest.approx(0.03)
    done = inst.network.line("L1").repair_minutes
    assert not (0 < done % 30 <= eps)
    assert done == pytest.approx(30.01 + 2 * eps)


# travel times


def test_travel_time_example():
    # 2083.33 m each way at 5 km/h, counted as twice the straight line
    assert travel_minutes((0, 0), (2083.333, 0), 5) == pytest.approx(50.0, abs=1e-3)
    assert travel_minutes((3, 4), (3, 4), 5) == 0.0


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(-5e3, 5e3), st.floats(-5e3, 5e3)), min_size=1, max_size=6),
       st.floats(0.5, 50), st.floats(0.1, 10))
def test_travel_matrix_properties(points, speed, k):
    m = build_travel_matrix(points, speed)
    assert np.allclose(m, m.T)
    assert np.all(m >= 0) and np.allclose(np.diag(m), 0)
    assert np.allclose(build_travel_matrix(points, speed * k), m / k)


# node-cell reduction


def test_desk_reduces_to_four_cells(desk):
    # ten nodes and three sectionalizing switches
    ncg = reduce_network(desk.network)
    assert len(desk.network.nodes) == 10 and len(ncg.edges) == 3
    assert len(ncg.cells) == 4
    assert sorted(f for c in ncg.cells for f in c.faults) == ["L5", "L7"]


def test_no_switch_gives_one_cell():
    ncg = reduce_network(load_instance(tiny_doc()).network)
    assert len(ncg.cells) == 1 and ncg.edges == ()


def test_switch_inside_a_cell_is_rejected():
    doc = tiny_doc()
    doc["network"]["lines"].append({"id": "L2", "from": "A", "to": "B",
                                    "switch": {"id": "S2", "type": "MS", "manual_minutes": 5}})
    with pytest.raises(ReductionError):
        reduce_network(load_instance(doc).network)


def chain_doc(n, switched):
    doc = tiny_doc()
    doc["network"]["nodes"] = [{"id": f"N{i}", "load": 1} for i in range(n)]
    doc["network"]["lines"] = []
    for i in range(n - 1):
        ln = {"id": f"L{i}", "from": f"N{i}", "to": f"N{i + 1}"}
        if i in switched:
            ln["switch"] = {"id": f"S{i}", "type": "MS", "manual_minutes": 5}
        doc["network"]["lines"].append(ln)
    doc["network"]["sources"][0]["node"] = "N0"
    return doc


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 9).flatmap(lambda n: st.tuples(st.just(n), st.sets(st.integers(0, n - 2)))))
def test_cells_partition_nodes_and_bridge_switches_add_one_cell(case):
    n, switched = case
    ncg = reduce_network(load_instance(chain_doc(n, switched)).network)
    members = [m for c in ncg.cells for m in c.nodes]
    assert sorted(members) == sorted(f"N{i}" for i in range(n))
    # every line of a chain is a bridge
    assert len(ncg.cells) == len(switched) + 1
    for e in ncg.edges:
        assert e.a != e.b


def test_switch_on_a_loop_line_keeps_the_cell_count():
    doc = chain_doc(4, set())
    doc["network"]["lines"].append({"id": "LX", "from": "N0", "to": "N3",
                                    "switch": {"id": "SX", "type": "MS", "manual_minutes": 5}})
    with pytest.raises(ReductionError):
        reduce_network(load_instance(doc).network)
    base = reduce_network(load_instance(chain_doc(4, set())).network)
    assert len(base.cells) == 1


def test_big_m_registry_is_family_specific(desk):
    m = desk.horizon.big_m
    assert m["link"] == 1.0
    assert m["commodity"] == 4.0
    assert m["power_dependency"] == pytest.approx(10 * desk.total_load())
    assert m["routing"] == pytest.approx(3 * desk.horizon.big_time)
    assert math.isfinite(m["voltage"]) and m["voltage"] > 0
