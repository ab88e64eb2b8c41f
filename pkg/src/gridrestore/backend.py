"""MILP/LP backends.

Only HiGHS (through :mod:`scipy.optimize`) ships here; other solvers plug in by
registering a class with the same two methods in :data:`BACKENDS`.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

logger = logging.getLogger(__name__)


class BackendError(RuntimeError):
    pass


@dataclass
class Solution:
    status: str  # optimal | infeasible | unbounded | limit | error
    x: np.ndarray | None = None
    objective: float = float("nan")
    dual_bound: float = float("nan")
    # marginals of the <= rows (LP only); nonpositive for a minimisation
    duals: np.ndarray | None = None
    message: str = ""
    stats: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


_MILP_STATUS = {0: "optimal", 1: "limit", 2: "infeasible", 3: "unbounded", 4: "error"}
_LP_STATUS = {0: "optimal", 1: "limit", 2: "infeasible", 3: "unbounded", 4: "error"}


class HighsBackend:
    """HiGHS via scipy. Deterministic for identical input (single thread)."""

    name = "highs"

    def __init__(self, mip_rel_gap: float = 1e-7, time_limit: float | None = None, seed: int = 0):
        self.mip_rel_gap = mip_rel_gap
        self.time_limit = time_limit
        # scipy does not expose the HiGHS random seed; kept for interface parity
        self.seed = seed

    def solve_milp(self, c, A, row_lb, row_ub, lb, ub, integrality) -> Solution:
        A = sp.csr_array(A)
        options = {"mip_rel_gap": self.mip_rel_gap, "presolve": True}
        if self.time_limit is not None:
            options["time_limit"] = self.time_limit
        constraints = [LinearConstraint(A, row_lb, row_ub)] if A.shape[0] else []
        try:
            res = milp(np.asarray(c, float), constraints=constraints, bounds=Bounds(lb, ub),
                       integrality=np.asarray(integrality), options=options)
        except Exception as exc:  # pragma: no cover - surfaced verbatim
            raise BackendError(f"HiGHS MILP failed on {A.shape[0]}x{A.shape[1]} model: {exc}") from exc
        status = _MILP_STATUS.get(res.status, "error")
        if status == "limit" and res.x is None:
            status = "error"
        sol = Solution(status, res.x, float(res.fun) if res.fun is not None else float("nan"),
                       float(getattr(res, "mip_dual_bound", np.nan) or np.nan), None, res.message,
                       {"rows": A.shape[0], "cols": A.shape[1], "nodes": getattr(res, "mip_node_count", 0)})
        if sol.ok and np.isnan(sol.dual_bound):
            sol.dual_bound = sol.objective
        return sol

    def solve_lp(self, c, A_ub, b_ub, lb, ub) -> Solution:
        A_ub = sp.csr_array(A_ub)
        bounds = np.column_stack([lb, ub])
        bounds = [(None if np.isinf(lo) else lo, None if np.isinf(hi) else hi) for lo, hi in bounds]
        try:
            res = linprog(np.asarray(c, float), A_ub=A_ub if A_ub.shape[0] else None,
                          b_ub=b_ub if A_ub.shape[0] else None, bounds=bounds, method="highs")
        except Exception as exc:  # pragma: no cover
            raise BackendError(f"HiGHS LP failed on {A_ub.shape[0]}x{A_ub.shape[1]} model: {exc}") from exc
        status = _LP_STATUS.get(res.status, "error")
        duals = None
        if status == "optimal" and A_ub.shape[0]:
            duals = np.asarray(res.ineqlin.marginals)
        return Solution(status, res.x, float(res.fun) if res.fun is not None else float("nan"),
                        float(res.fun) if res.fun is not None else float("nan"), duals, res.message,
                        {"rows": A_ub.shape[0], "cols": A_ub.shape[1]})


BACKENDS = {"highs": HighsBackend}


def make_backend(name: str = "highs", **params) -> HighsBackend:
    try:
        cls = BACKENDS[name]
    except KeyError:
        raise BackendError(f"unknown backend {name!r}; available: {sorted(BACKENDS)}") from None
    return cls(**params)
