import dataclasses

import pytest

from gridrestore import ccg_solve, load_instance, validate_schedule
from gridrestore.cyber import CyberError, derive_cyber_links, ups_alive
from gridrestore.instance import CyberNetwork, Router


def router(rid, x, y, role="rcs-ftu"):
    return Router(id=rid, role=role, x=x, y=y)


def test_ups_alive_covers_whole_slots_only():
    assert ups_alive(60, 2, 30) == 1
    assert ups_alive(60, 3, 30) == 0
    assert ups_alive(0, 1, 30) == 0
    assert ups_alive(45, 1, 30) == 1 and ups_alive(45, 2, 30) == 0


def test_links_follow_the_radius():
    net = CyberNetwork((router("CC", 0, 0, "control-centre"), router("A", 800, 0), router("B", 1600, 0)),
                       radius=1000)
    links = derive_cyber_links(net)
    assert links["A"] == (("A", "CC"),)
    assert links["B"] == (("B", "A", "CC"),)


def test_links_are_ordered_by_hops_then_length():
    net = CyberNetwork((router("CC", 0, 0, "control-centre"), router("A", 900, 0), router("B", 500, 400),
                        router("C", 450, 0)), radius=1000)
    paths = derive_cyber_links(net)["A"]
    assert paths[0] == ("A", "CC")
    assert [len(p) for p in paths] == sorted(len(p) for p in paths)


def test_explicit_links_win():
    net = CyberNetwork((router("CC", 0, 0, "control-centre"), router("A", 10, 0)), radius=1000,
                       links={"A": (("A", "CC"),)})
    assert derive_cyber_links(net) == {"A": (("A", "CC"),)}


def test_out_of_range_router_has_no_path():
    net = CyberNetwork((router("CC", 0, 0, "control-centre"), router("A", 5000, 0)), radius=1000)
    assert derive_cyber_links(net)["A"] == ()


def test_missing_control_centre_is_an_error():
    with pytest.raises(CyberError):
        derive_cyber_links(CyberNetwork((router("A", 0, 0),), radius=1000))


def test_blackout_forbids_remote_closing(anchors):
    cyber = dataclasses.replace(anchors.cyber, blackout_slots=anchors.horizon.slots)
    res = ccg_solve(anchors.with_changes(cyber=cyber))
    x = res.schedule
    assert not any(x.flag(("wRCS", "L2", t)) for t in anchors.slots)
    assert validate_schedule(anchors.with_changes(cyber=cyber), x, res.worst_scenario).feasible


def test_remote_close_needs_an_available_controller(anchors):
    res = ccg_solve(anchors)
    x = res.schedule
    for t in anchors.slots:
        if x.flag(("wRCS", "L2", t)):
            assert x.flag(("uC", "F3", t)) == 1


def test_remote_close_without_controller_is_flagged(anchors):
    res = ccg_solve(anchors)
    x = res.schedule
    first = next(t for t in anchors.slots if x.flag(("wRCS", "L2", t)))
    forced = x.replace({("uC", "F3", first): 0.0})
    check = validate_schedule(anchors, forced, res.worst_scenario)
    assert any(v.kind in ("remote_close", "cyber", "router_power") for v in check.violations)
