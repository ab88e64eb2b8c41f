import pytest

from gridrestore import OracleRefused, enumerate_oracle, load_instance
from gridrestore.oracle import budget_vertices

from helpers import island, island_doc


def test_vertex_count():
    # choose 2 of 4 slots, each with a sign
    assert len(budget_vertices(island(slots=4, budget=2))) == 6 * 4


def test_zero_budget_has_one_vertex():
    vs = budget_vertices(island(slots=4, budget=0))
    assert len(vs) == 1 and vs[0].used_budget("PV1") == 0


def test_zero_error_has_one_vertex():
    assert len(budget_vertices(island(slots=4, budget=2, omega=0.0))) == 1


def test_vertices_respect_the_budget():
    for s in budget_vertices(island(slots=5, budget=2)):
        assert s.used_budget("PV1") == 2


def test_fractional_budget_is_refused():
    with pytest.raises(OracleRefused, match="integer"):
        budget_vertices(island(slots=4, budget=1.5))


def test_too_many_vertices_is_refused():
    with pytest.raises(OracleRefused):
        budget_vertices(island(slots=8, budget=4))


def test_too_many_slots_is_refused():
    with pytest.raises(OracleRefused, match="slots"):
        enumerate_oracle(island(slots=9, budget=1))


def test_zero_budget_collapses_to_forecast_pricing():
    inst = island(slots=4, budget=0)
    res = enumerate_oracle(inst)
    assert res.worst.used_budget("PV1") == 0
    assert res.objective == pytest.approx(enumerate_oracle(island(slots=4, budget=2, omega=0.0)).objective)


def test_no_faults_means_no_repair_routes():
    doc = island_doc(slots=3, budget=1)
    doc["network"]["lines"][0].pop("damaged")
    doc["network"]["lines"][0].pop("repair_minutes")
    res = enumerate_oracle(load_instance(doc))
    assert all(not r for r in res.repair_routes.values())
    assert res.evaluated == 1


def test_oracle_routes_every_fault():
    res = enumerate_oracle(island(slots=4, budget=2))
    assert res.repair_routes == {"RC1": ["L1"]}
    assert res.worst is not None
