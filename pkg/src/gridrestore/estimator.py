"""Estimator-style wrapper around the robust solver."""
from __future__ import annotations

from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .backend import BACKENDS
from .ccg import ccg_solve
from .grid import Scenario
from .instance import Instance, load_instance
from .report import build_report
from .validate import validate_schedule


def check_instance(X: Any) -> Instance:
    """Accept an :class:`Instance`, a parsed document or a path to one."""
    if isinstance(X, Instance):
        return X
    if isinstance(X, (str, Path)):
        return load_instance(Path(X))
    if isinstance(X, Mapping):
        return load_instance(X)
    raise TypeError(f"expected an Instance, a mapping or a path, got {type(X).__name__}")


def check_params(est: "RestorationScheduler") -> None:
    if not est.tol > 0:
        raise ValueError(f"tol must be positive, got {est.tol!r}")
    if int(est.max_iter) != est.max_iter or est.max_iter < 1:
        raise ValueError(f"max_iter must be a positive integer, got {est.max_iter!r}")
    if est.bits is not None and (int(est.bits) != est.bits or est.bits < 0):
        raise ValueError(f"bits must be a non-negative integer, got {est.bits!r}")
    if est.backend not in BACKENDS:
        raise ValueError(f"unknown backend {est.backend!r}; available: {sorted(BACKENDS)}")


class RestorationScheduler(BaseEstimator):
    """Robust crew and switching schedule for one damaged feeder.

    ``fit`` takes the instance (there is no target). ``predict`` prices the
    fitted schedule under each given deviation scenario.
    """

    def __init__(self, tol=1e-3, max_iter=30, bits=None, backend="highs", seed=0, cluster=True):
        self.tol = tol
        self.max_iter = max_iter
        self.bits = bits
        self.backend = backend
        self.seed = seed
        self.cluster = cluster

    def fit(self, X, y=None):
        check_params(self)
        inst = check_instance(X)
        report = ccg_solve(inst, tolerance=self.tol, max_iter=int(self.max_iter), bits=self.bits,
                           backend=self.backend, cluster=self.cluster, seed=self.seed)
        self.instance_ = inst
        self.result_ = report
        self.schedule_ = report.schedule
        self.worst_scenario_ = report.worst_scenario
        self.objective_ = report.objective
        self.converged_ = report.converged
        self.trace_ = report.trace
        return self

    def predict(self, scenarios: Iterable[Scenario | Mapping] | None = None) -> np.ndarray:
        """Operating cost of the fitted schedule per scenario (forecast when ``None``)."""
        check_is_fitted(self, "schedule_")
        if scenarios is None:
            scenarios = [Scenario.zero(self.instance_.uncertainty, self.instance_.horizon.slots)]
        out = []
        for s in scenarios:
            s = s if isinstance(s, Scenario) else Scenario.from_dict(s)
            out.append(validate_schedule(self.instance_, self.schedule_, s).objective)
        return np.asarray(out, dtype=float)

    def report(self) -> dict:
        check_is_fitted(self, "result_")
        return build_report(self.instance_, self.result_)
