"""Column-and-constraint generation for the two-stage robust schedule."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .backend import BackendError, HighsBackend, make_backend
from .compact import CompactModel, assemble_compact
from .decision import FirstStageDecision
from .grid import Scenario
from .instance import Instance

logger = logging.getLogger(__name__)


class CcgError(RuntimeError):
    pass


class InfeasibleInstance(CcgError):
    pass


@dataclass
class CcgState:
    tolerance: float = 1e-3
    iteration: int = 0
    lower: float = 0.0
    upper: float = math.inf
    scenarios: list[np.ndarray] = field(default_factory=list)
    optimality: list[bool] = field(default_factory=list)  # False marks a feasibility cut
    incumbent: np.ndarray | None = None
    worst: np.ndarray | None = None
    trace: list[dict] = field(default_factory=list)
    timings: list[dict] = field(default_factory=list)

    @property
    def gap(self) -> float:
        if self.upper <= 1e-9:
            return 0.0
        if not math.isfinite(self.upper):
            return math.inf
        return max(0.0, 1.0 - self.lower / self.upper)

    def pooled(self, sigma: np.ndarray, tol: float = 1e-6) -> bool:
        return any(np.max(np.abs(sigma - s), initial=0.0) <= tol for s in self.scenarios)


@dataclass
class SubproblemResult:
    sigma: np.ndarray
    value: float
    feasible: bool
    dual_bound: float
    rounds: int


@dataclass
class SolveReport:
    instance: str
    status: str  # converged | iteration-limit
    objective: float
    lower_bound: float
    upper_bound: float
    gap: float
    iterations: int
    trace: list[dict]
    schedule: FirstStageDecision
    worst_scenario: Scenario
    model_sizes: dict
    timings: list[dict] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == "converged"


# --------------------------------------------------------------------------
# master problem


def solve_master(state: CcgState, model: CompactModel, backend: HighsBackend) -> tuple[np.ndarray, float, float]:
    """min mu over x and one recourse copy per pooled scenario.

    Returns ``(x, mu, dual_bound)``; ``state.lower`` is raised to the dual bound.
    """
    nx, ny = len(model.x_idx), len(model.y_idx)
    n_scen = len(state.scenarios)
    ncols = nx + 1 + n_scen * ny
    blocks = [sp.hstack([model.A, sp.csr_array((model.A.shape[0], ncols - nx))])]
    rhs = [model.d]
    for r, (sigma, opt) in enumerate(zip(state.scenarios, state.optimality)):
        before = nx + 1 + r * ny
        after = ncols - before - ny
        blocks.append(sp.hstack([model.D, sp.csr_array((model.D.shape[0], 1 + r * ny)), model.F,
                                 sp.csr_array((model.D.shape[0], after))]))
        rhs.append(model.f)
        blocks.append(sp.hstack([sp.csr_array((model.H.shape[0], before)), model.H,
                                 sp.csr_array((model.H.shape[0], after))]))
        rhs.append(model.g - model.G @ sigma)
        if opt:
            row = sp.lil_array((1, ncols))
            row[0, nx] = -1.0
            row[0, before:before + ny] = model.b
            blocks.append(row.tocsr())
            rhs.append(np.zeros(1))
    A = sp.vstack(blocks).tocsr()
    ub_rows = np.concatenate(rhs)
    c = np.zeros(ncols)
    c[nx] = 1.0
    lb = np.concatenate([model.x_lb, [0.0], np.full(n_scen * ny, -np.inf)])
    ub = np.concatenate([model.x_ub, [np.inf], np.full(n_scen * ny, np.inf)])
    integrality = np.concatenate([model.x_int, np.zeros(1 + n_scen * ny, dtype=int)])
    sol = backend.solve_milp(c, A, np.full(A.shape[0], -np.inf), ub_rows, lb, ub, integrality)
    if sol.status == "infeasible":
        raise InfeasibleInstance("master problem infeasible: no schedule satisfies the first-stage rows"
                                 + (" and the pooled feasibility cuts" if n_scen else ""))
    if not sol.ok:
        raise BackendError(f"master problem: {sol.status} ({sol.message})")
    x = sol.x[:nx].copy()
    x[model.x_int == 1] = np.round(x[model.x_int == 1])
    mu = max(float(sol.x[nx]), 0.0)
    bound = max(0.0, min(sol.dual_bound, sol.objective))
    state.lower = max(state.lower, bound)
    return x, mu, bound


# --------------------------------------------------------------------------
# subproblem


def all_shed_cost(model: CompactModel) -> float:
    """Cost of shedding every load in every slot: an upper bound of any recourse value."""
    total = 0.0
    for j, name in enumerate(model.y_names()):
        if name[0] == "shed":
            total += model.b[j] * model.builder.variables[model.y_idx[j]].ub
    return total


def _expansion(n_sigma: int, bits: int) -> tuple[sp.csr_array, float]:
    """sigma = eta * sum_k 2^k zeta_k with eta = 1 / (2^(bits+1) - 1)."""
    eta = 1.0 / (2 ** (bits + 1) - 1)
    weights = eta * 2.0 ** np.arange(bits + 1)
    E = sp.kron(sp.eye_array(n_sigma), sp.csr_array(weights.reshape(1, -1))).tocsr()
    return E, eta


def sigma_from_bits(zeta: np.ndarray, bits: int) -> np.ndarray:
    E, _ = _expansion(len(zeta) // (bits + 1), bits)
    return E @ np.round(zeta)


def solve_subproblem(x: np.ndarray, model: CompactModel, backend: HighsBackend, bits: int = 6,
                     dual_cap: float | None = None) -> SubproblemResult:
    """Worst-case deviations for a fixed first stage, through the dualized recourse.

    The dual multipliers are boxed in [-L, 0]. L doubles while some multiplier
    sits on the box and the optimal value keeps moving.
    """
    m2, m3, ny, ns = model.F.shape[0], model.H.shape[0], len(model.y_idx), len(model.s_idx)
    rhs1 = model.f - model.D @ x
    cap = all_shed_cost(model)
    scale = max(1.0, float(np.max(np.abs(model.b), initial=0.0)))
    L = dual_cap if dual_cap is not None else 4.0 * scale
    nb = bits + 1
    E, _ = _expansion(ns, bits)
    # sigma-only polytope written over the bits
    UE = (model.U @ E).tocsr()
    Gabs = np.asarray(abs(model.G).sum(axis=0)).ravel() if m3 else np.zeros(ns)
    active = Gabs > 0
    prev_value = None
    rounds = 0
    while True:
        rounds += 1
        lam_bound = L * Gabs  # |G^T pi2| per sigma column
        big = np.repeat(lam_bound, nb)
        # columns: pi1 | pi2 | zeta | nu
        nz = ns * nb
        ncols = m2 + m3 + 2 * nz
        eq = sp.hstack([model.F.T, model.H.T, sp.csr_array((ny, 2 * nz))]).tocsr()
        poly = sp.hstack([sp.csr_array((UE.shape[0], m2 + m3)), UE, sp.csr_array((UE.shape[0], nz))]).tocsr()
        # lambda_j = (G^T pi2)_j, expanded once per bit
        GtE = sp.kron(model.G.T, sp.csr_array(np.ones((nb, 1)))).tocsr() if m3 else sp.csr_array((nz, 0))
        Iz = sp.eye_array(nz, format="csr")
        Bz = sp.diags_array(big, format="csr") if nz else sp.csr_array((0, 0))
        Zp = sp.csr_array((nz, m2))
        Z3 = sp.csr_array((nz, m3))
        mc = sp.vstack([
            sp.hstack([Zp, Z3, -Bz, Iz]),          # nu <= B zeta
            sp.hstack([Zp, Z3, -Bz, -Iz]),         # -nu <= B zeta
            sp.hstack([Zp, -GtE, Bz, Iz]),         # nu - lambda + B zeta <= B
            sp.hstack([Zp, GtE, Bz, -Iz]),         # lambda - nu + B zeta <= B
        ]).tocsr() if nz else sp.csr_array((0, ncols))
        A = sp.vstack([eq, poly, mc]).tocsr()
        row_lb = np.concatenate([model.b, np.full(poly.shape[0] + mc.shape[0], -np.inf)])
        row_ub = np.concatenate([model.b, model.u, np.zeros(2 * nz), big, big])
        weights = np.tile(2.0 ** np.arange(nb), ns) / (2 ** nb - 1)
        # maximise rhs1'pi1 + g'pi2 - sum eta 2^k nu  ->  minimise the negative
        c = np.concatenate([-rhs1, -model.g, np.zeros(nz), weights])
        lb = np.concatenate([np.full(m2 + m3, -L), np.zeros(nz), -big])
        ub = np.concatenate([np.zeros(m2 + m3), np.ones(nz), big])
        integrality = np.concatenate([np.zeros(m2 + m3, dtype=int), np.ones(nz, dtype=int),
                                      np.zeros(nz, dtype=int)])
        # deviations with no effect on the recourse stay at zero
        ub[m2 + m3:m2 + m3 + nz][np.repeat(~active, nb)] = 0.0
        sol = backend.solve_milp(c, A, row_lb, row_ub, lb, ub, integrality)
        if not sol.ok:
            raise BackendError(f"subproblem: {sol.status} ({sol.message})")
        value = -sol.objective
        pis = sol.x[:m2 + m3]
        zeta = sol.x[m2 + m3:m2 + m3 + nz]
        at_box = bool(np.any(pis <= -L * (1 - 1e-9) + 1e-9))
        if value > cap * (1 + 1e-6) + 1e-6:
            return SubproblemResult(sigma_from_bits(zeta, bits) if nz else np.zeros(0), value, False,
                                    -sol.dual_bound, rounds)
        settled = prev_value is not None and abs(value - prev_value) <= 1e-9 * max(1.0, abs(value))
        if not at_box or settled or rounds >= 40:
            sigma = sigma_from_bits(zeta, bits) if nz else np.zeros(0)
            return SubproblemResult(sigma, value, True, -sol.dual_bound, rounds)
        prev_value = value
        L *= 2.0


def recourse_value(x: np.ndarray, sigma: np.ndarray, model: CompactModel,
                   backend: HighsBackend) -> tuple[float | None, np.ndarray | None]:
    """Primal recourse LP at fixed (x, sigma); ``None`` when infeasible."""
    A = sp.vstack([model.F, model.H]).tocsr()
    rhs = np.concatenate([model.f - model.D @ x, model.g - model.G @ sigma])
    ny = len(model.y_idx)
    sol = backend.solve_lp(model.b, A, rhs, np.full(ny, -np.inf), np.full(ny, np.inf))
    if sol.status == "infeasible":
        return None, None
    if not sol.ok:
        raise BackendError(f"recourse LP: {sol.status} ({sol.message})")
    return sol.objective, sol.x


# --------------------------------------------------------------------------


def decode(model: CompactModel, x: np.ndarray) -> FirstStageDecision:
    values = {}
    for name, v, is_int in zip(model.x_names(), x, model.x_int):
        values[name] = float(int(round(v))) if is_int else float(v)
    return FirstStageDecision(values)


def scenario_from_vector(model: CompactModel, inst: Instance, sigma: np.ndarray) -> Scenario:
    up = {u.source: [0.0] * inst.horizon.slots for u in inst.uncertainty.res}
    down = {u.source: [0.0] * inst.horizon.slots for u in inst.uncertainty.res}
    for (side, src, t), v in zip(model.s_names(), sigma):
        (up if side == "sp" else down)[src][t - 1] = float(v)
    return Scenario({k: tuple(v) for k, v in up.items()}, {k: tuple(v) for k, v in down.items()})


def ccg_solve(inst: Instance, tolerance: float = 1e-3, max_iter: int = 30, bits: int | None = None,
              backend: str | HighsBackend = "highs", cluster: bool = True, seed: int = 0,
              model: CompactModel | None = None) -> SolveReport:
    """Alternate master and worst-case subproblem until 1 - LB/UB < ``tolerance``."""
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    bits = inst.uncertainty.bits if bits is None else bits
    solver = make_backend(backend, seed=seed) if isinstance(backend, str) else backend
    t0 = time.perf_counter()
    model = model if model is not None else assemble_compact(inst, cluster=cluster)
    state = CcgState(tolerance)
    # seeding the pool with the forecast keeps the first master from picking
    # schedules whose recourse is infeasible even without deviations
    state.scenarios.append(np.zeros(len(model.s_idx)))
    state.optimality.append(True)
    dual_cap = None
    status = "iteration-limit"
    while state.iteration < max_iter:
        state.iteration += 1
        t_iter = time.perf_counter()
        x, mu, bound = solve_master(state, model, solver)
        t_master = time.perf_counter() - t_iter
        sub = solve_subproblem(x, model, solver, bits, dual_cap)
        primal, _ = recourse_value(x, sub.sigma, model, solver)
        feasible = sub.feasible and primal is not None
        entry = {"iteration": state.iteration, "master": mu, "subproblem": sub.value,
                 "recourse": primal, "feasible": feasible, "dual_rounds": sub.rounds}
        if feasible:
            entry["duality_gap"] = abs(sub.value - primal) / max(1.0, abs(primal))
            value = max(sub.value, primal)
            if value < state.upper:
                state.upper = value
                state.incumbent = x
                state.worst = sub.sigma
        else:
            logger.warning("iteration %d: recourse infeasible for the master schedule; adding a feasibility cut",
                           state.iteration)
        entry.update({"lower": state.lower, "upper": state.upper, "gap": state.gap})
        state.trace.append(entry)
        state.timings.append({"iteration": state.iteration, "master_s": t_master,
                              "total_s": time.perf_counter() - t_iter})
        logger.info("iteration %d: LB %.6g UB %.6g", state.iteration, state.lower, state.upper)
        if math.isfinite(state.upper) and state.gap < tolerance:
            status = "converged"
            break
        if state.pooled(sub.sigma):
            entry["repeated_scenario"] = True
            if math.isfinite(state.upper):
                status = "converged"
            break
        state.scenarios.append(sub.sigma)
        state.optimality.append(feasible)
    if state.incumbent is None:
        raise InfeasibleInstance("no schedule with a feasible recourse was found")
    report = SolveReport(
        instance=inst.name, status=status, objective=state.upper, lower_bound=state.lower,
        upper_bound=state.upper, gap=state.gap, iterations=state.iteration, trace=state.trace,
        schedule=decode(model, state.incumbent),
        worst_scenario=scenario_from_vector(model, inst, state.worst),
        model_sizes=model.sizes, timings=state.timings,
    )
    report.timings.append({"total_s": time.perf_counter() - t0})
    return report


def solve_deterministic(inst: Instance, scenario: Scenario | None = None, backend: str | HighsBackend = "highs",
                        cluster: bool = True, model: CompactModel | None = None) -> SolveReport:
    """Best schedule for one fixed scenario (the forecast by default)."""
    solver = make_backend(backend) if isinstance(backend, str) else backend
    model = model if model is not None else assemble_compact(inst, cluster=cluster)
    scenario = scenario or Scenario.zero(inst.uncertainty, inst.horizon.slots)
    sigma = model.sigma_vector(scenario)
    state = CcgState()
    state.scenarios.append(sigma)
    state.optimality.append(True)
    x, mu, bound = solve_master(state, model, solver)
    value, _ = recourse_value(x, sigma, model, solver)
    if value is None:
        raise InfeasibleInstance("recourse infeasible for the deterministic schedule")
    entry = {"iteration": 1, "master": mu, "recourse": value, "lower": bound, "upper": value}
    return SolveReport(inst.name, "converged", value, bound, value, 0.0 if value <= 1e-9 else max(0.0, 1 - bound / value),
                       1, [entry], decode(model, x), scenario, model.sizes)
