import numpy as np
import pytest

from gridrestore import assemble_compact, ccg_solve, enumerate_oracle, solve_deterministic
from gridrestore.backend import make_backend
from gridrestore.oracle import budget_vertices
from gridrestore.ccg import CcgState, _expansion, recourse_value, sigma_from_bits, solve_master, solve_subproblem

from helpers import island


def test_expansion_step():
    _, eta = _expansion(1, 2)
    assert eta == pytest.approx(1 / 7)


@pytest.mark.parametrize("bits, expected", [([1, 1, 1], 1.0), ([1, 0, 0], 1 / 7), ([0, 1, 0], 2 / 7),
                                            ([0, 0, 1], 4 / 7), ([0, 0, 0], 0.0)])
def test_sigma_from_bits(bits, expected):
    assert sigma_from_bits(np.array(bits, dtype=float), 2) == pytest.approx([expected])


def test_sigma_from_bits_per_entry():
    out = sigma_from_bits(np.array([1, 1, 1, 0, 1, 0], dtype=float), 2)
    assert out == pytest.approx([1.0, 2 / 7])


@pytest.fixture(scope="module")
def tiny():
    inst = island(slots=4, budget=2)
    model = assemble_compact(inst)
    solver = make_backend("highs")
    state = CcgState()
    state.scenarios.append(np.zeros(len(model.s_idx)))
    state.optimality.append(True)
    x, _, _ = solve_master(state, model, solver)
    return inst, model, solver, x


def test_subproblem_matches_the_worst_vertex(tiny):
    inst, model, solver, x = tiny
    sub = solve_subproblem(x, model, solver, bits=2)
    best = -np.inf
    for s in budget_vertices(inst):
        value, _ = recourse_value(x, model.sigma_vector(s), model, solver)
        best = max(best, value)
    assert sub.value == pytest.approx(best, rel=1e-6)


def test_strong_duality_at_the_returned_scenario(tiny):
    _, model, solver, x = tiny
    sub = solve_subproblem(x, model, solver, bits=2)
    primal, _ = recourse_value(x, sub.sigma, model, solver)
    assert abs(sub.value - primal) <= 1e-4 * max(1.0, abs(primal))


def test_more_bits_never_lower_the_worst_case(tiny):
    # the 1-bit grid {0, 1/3, 2/3, 1} sits inside the 3-bit grid
    _, model, solver, x = tiny
    coarse = solve_subproblem(x, model, solver, bits=1).value
    fine = solve_subproblem(x, model, solver, bits=3).value
    assert fine >= coarse - 1e-6 * max(1.0, coarse)


def test_recourse_is_feasible_for_sampled_scenarios(tiny):
    inst, model, solver, x = tiny
    rng = np.random.default_rng(0)
    for _ in range(20):
        up = rng.random(inst.horizon.slots)
        down = rng.random(inst.horizon.slots) * (1 - up)
        total = up.sum() + down.sum()
        scale = min(1.0, inst.uncertainty.res[0].budget / total)
        sigma = np.concatenate([up * scale, down * scale])
        value, _ = recourse_value(x, sigma, model, solver)
        assert value is not None


def test_zero_error_collapses_to_the_deterministic_schedule():
    inst = island(slots=4, budget=2, omega=0.0)
    assert ccg_solve(inst, tolerance=1e-6).objective == pytest.approx(solve_deterministic(inst).objective,
                                                                      rel=1e-9)


def test_no_load_costs_nothing():
    res = ccg_solve(island(slots=4, budget=2, load_scale=0.0))
    assert res.objective == pytest.approx(0.0, abs=1e-6)
    assert res.converged


def test_robust_value_matches_the_oracle():
    inst = island(slots=4, budget=2)
    assert ccg_solve(inst, tolerance=1e-6).objective == pytest.approx(enumerate_oracle(inst).objective,
                                                                      rel=1e-6)


def test_bounds_are_monotone_in_the_trace(desk_solved):
    lowers = [e["lower"] for e in desk_solved.trace]
    uppers = [e["upper"] for e in desk_solved.trace]
    assert lowers == sorted(lowers)
    assert uppers == sorted(uppers, reverse=True)
    assert desk_solved.lower_bound <= desk_solved.upper_bound + 1e-6


def test_bad_parameters_are_rejected():
    inst = island()
    with pytest.raises(ValueError):
        ccg_solve(inst, tolerance=0)
    with pytest.raises(ValueError):
        ccg_solve(inst, max_iter=0)
