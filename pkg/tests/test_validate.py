import pytest
from hypothesis import given, settings, strategies as st

from gridrestore import Scenario, ccg_solve, validate_schedule

from helpers import island

DEPOT = "@depot"


@pytest.fixture(scope="module")
def solved(anchors):
    return ccg_solve(anchors)


def kinds(inst, x, scenario):
    return {v.kind for v in validate_schedule(inst, x, scenario).violations}


def test_solver_schedule_is_clean(anchors, solved):
    check = validate_schedule(anchors, solved.schedule, solved.worst_scenario)
    assert check.feasible, [str(v) for v in check.violations]
    assert check.objective == pytest.approx(solved.objective, rel=1e-6)


def test_remote_close_one_slot_early(anchors, solved):
    x = solved.schedule.replace({("wRCS", "L2", 7): 1, ("w", "L2", 7): 1})
    assert "remote_close" in kinds(anchors, x, solved.worst_scenario)


def test_manual_close_one_slot_early(anchors, solved):
    x = solved.schedule.replace({("wMS", "L5", 9): 1, ("w", "L5", 9): 1})
    assert "manual_close" in kinds(anchors, x, solved.worst_scenario)


def test_fault_visited_twice(anchors, solved):
    x = solved.schedule.replace({("xr", "RC1", "L4", DEPOT): 0, ("xr", "RC1", "L4", "L6"): 1,
                                 ("xr", "RC1", "L6", DEPOT): 1})
    check = validate_schedule(anchors, x, solved.worst_scenario)
    assert any(v.kind == "coverage" and v.entity == "L6" for v in check.violations)


def test_broken_route_is_a_routing_violation(anchors, solved):
    x = solved.schedule.replace({("xr", "RC1", "L3", "L4"): 0})
    assert "routing" in kinds(anchors, x, solved.worst_scenario)


def test_scenario_over_budget_is_flagged():
    inst = island(slots=4, budget=2)
    res = ccg_solve(inst)
    s = Scenario({"PV1": (1.0,) * 4}, {"PV1": (0.0,) * 4})
    check = validate_schedule(inst, res.schedule, s)
    assert [v.family for v in check.violations] == ["III"]


def test_violations_render_with_slot(anchors, solved):
    x = solved.schedule.replace({("wMS", "L5", 9): 1, ("w", "L5", 9): 1})
    text = [str(v) for v in validate_schedule(anchors, x, solved.worst_scenario).violations]
    assert any(t.startswith("[I] manual_close L5@9") for t in text)


@settings(max_examples=25, deadline=None)
@given(data=st.data())
def test_bit_flips_never_crash(anchors, solved, data):
    binaries = sorted(k for k, v in solved.schedule.values.items()
                      if k[0] in ("w", "wMS", "wRCS", "uL", "uNC", "uC", "uUPS", "xr", "xo"))
    key = data.draw(st.sampled_from(binaries))
    x = solved.schedule.replace({key: 1 - solved.schedule.flag(key)})
    check = validate_schedule(anchors, x, solved.worst_scenario)
    assert check.feasible == (not check.violations)
