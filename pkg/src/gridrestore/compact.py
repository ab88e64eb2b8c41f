"""Assemble the full restoration model and split it into compact matrix blocks.

    I    A x <= d
    II   D x + F y <= f
    III  G s + H y <= g
    U    U s <= u          (box and budget of the deviations)

Equalities become two rows and finite bounds of y become family II rows, so y
is free in every block.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .builder import ModelBuilder, ModelError
from .crews import Clusters, all_tasks, cluster_tasks, emit_crew_dispatch
from .cyber import emit_cyber
from .grid import declare_switch_status, emit_grid_operation
from .instance import Instance
from .network import NodeCellGraph, reduce_network

logger = logging.getLogger(__name__)


@dataclass
class CompactModel:
    builder: ModelBuilder
    ncg: NodeCellGraph
    clusters: Clusters
    links: dict
    x_idx: np.ndarray
    y_idx: np.ndarray
    s_idx: np.ndarray
    A: sp.csr_array
    d: np.ndarray
    D: sp.csr_array
    F: sp.csr_array
    f: np.ndarray
    G: sp.csr_array
    H: sp.csr_array
    g: np.ndarray
    U: sp.csr_array
    u: np.ndarray
    b: np.ndarray  # objective on y
    x_lb: np.ndarray
    x_ub: np.ndarray
    x_int: np.ndarray
    tags: dict = field(default_factory=dict)  # block -> row tags
    reclassified: int = 0

    @property
    def sizes(self) -> dict[str, int]:
        return {"x": len(self.x_idx), "y": len(self.y_idx), "sigma": len(self.s_idx),
                "I": self.A.shape[0], "II": self.D.shape[0], "III": self.G.shape[0], "U": self.U.shape[0]}

    def x_names(self) -> list[tuple]:
        return [self.builder.variables[k].name for k in self.x_idx]

    def y_names(self) -> list[tuple]:
        return [self.builder.variables[k].name for k in self.y_idx]

    def s_names(self) -> list[tuple]:
        return [self.builder.variables[k].name for k in self.s_idx]

    def sigma_vector(self, scenario) -> np.ndarray:
        """Deviation values in column order of ``G``/``U``."""
        out = np.zeros(len(self.s_idx))
        for j, (side, src, t) in enumerate(self.s_names()):
            seq = (scenario.up if side == "sp" else scenario.down).get(src)
            out[j] = seq[t - 1] if seq else 0.0
        return out


def build_model(inst: Instance, cluster: bool = True, final_merge: bool = True) -> tuple[ModelBuilder, NodeCellGraph,
                                                                                        Clusters, dict]:
    """Emit every constraint family into one builder."""
    ncg = reduce_network(inst.network)
    clusters = cluster_tasks(inst) if cluster else all_tasks(inst)
    b = ModelBuilder()
    emit_crew_dispatch(b, inst, clusters, ncg)
    declare_switch_status(b, inst, ncg)
    emit_grid_operation(b, inst, ncg, final_merge)
    links = emit_cyber(b, inst, ncg)
    hours = inst.horizon.slot_minutes / 60.0
    b.minimize({("shed", n.id, t): n.penalty * hours for n in inst.network.nodes for t in inst.slots})
    return b, ncg, clusters, links


def assemble_compact(inst: Instance, cluster: bool = True, final_merge: bool = True) -> CompactModel:
    b, ncg, clusters, links = build_model(inst, cluster, final_merge)
    return compact_from_builder(b, ncg, clusters, links)


def compact_from_builder(b: ModelBuilder, ncg: NodeCellGraph, clusters: Clusters, links: dict) -> CompactModel:
    stage = np.array([v.stage for v in b.variables])
    x_idx = np.flatnonzero(stage == "first")
    y_idx = np.flatnonzero(stage == "second")
    s_idx = np.flatnonzero(stage == "uncertainty")
    pos = np.empty(len(b.variables), dtype=int)
    for arr in (x_idx, y_idx, s_idx):
        pos[arr] = np.arange(len(arr))

    blocks = {k: ([], [], [], [], []) for k in ("I", "II", "III", "U")}  # rows, cols, vals, rhs, tags
    counts = {k: 0 for k in blocks}
    reclassified = 0
    used_y = np.zeros(len(y_idx), dtype=bool)

    def push(block: str, coeffs: dict[int, float], rhs: float, tag: str) -> None:
        rows, cols, vals, rhs_list, tags = blocks[block]
        r = counts[block]
        for k, c in coeffs.items():
            rows.append(r)
            cols.append(k)
            vals.append(c)
        rhs_list.append(rhs)
        tags.append(tag)
        counts[block] += 1

    for row in b.rows:
        stages = {stage[k] for k in row.coeffs}
        has_y, has_s = "second" in stages, "uncertainty" in stages
        if row.family == "I" and (has_y or has_s):
            raise ModelError(f"row {row.tag!r} is tagged first-stage but uses second-stage variables")
        if has_y and has_s and "first" in stages:
            raise ModelError(f"row {row.tag!r} couples first stage and uncertainty directly")
        if has_s and not has_y:
            block = "U"
        elif has_s:
            block = "III"
        elif has_y:
            block = "II"
        else:
            block = "I"
            if row.family != "I":
                reclassified += 1
        if has_y:
            for k in row.coeffs:
                if stage[k] == "second":
                    used_y[pos[k]] = True
        senses = {"<=": (1.0,), ">=": (-1.0,), "==": (1.0, -1.0)}[row.sense]
        for sign in senses:
            push(block, {k: sign * c for k, c in row.coeffs.items()}, sign * row.rhs, row.tag)

    for j, k in enumerate(y_idx):
        v = b.variables[k]
        if not used_y[j]:
            raise ModelError(f"second-stage variable {v.name} appears in no coupling row")
        if np.isfinite(v.ub):
            push("II", {int(k): 1.0}, v.ub, "bound")
        if np.isfinite(v.lb):
            push("II", {int(k): -1.0}, -v.lb, "bound")
    for k in s_idx:
        v = b.variables[k]
        push("U", {int(k): 1.0}, v.ub, "box")
        push("U", {int(k): -1.0}, -v.lb, "box")

    def split(block: str, groups: tuple) -> tuple:
        rows, cols, vals, rhs, _ = blocks[block]
        rows, cols, vals = np.array(rows, dtype=int), np.array(cols, dtype=int), np.array(vals, dtype=float)
        out = []
        for idx in groups:
            mask = np.isin(cols, idx) if len(cols) else np.zeros(0, bool)
            out.append(sp.csr_array((vals[mask], (rows[mask], pos[cols[mask]])), shape=(counts[block], len(idx))))
        return (*out, np.array(rhs, dtype=float))

    (A, d) = split("I", (x_idx,))
    D, F, f = split("II", (x_idx, y_idx))
    G, H, g = split("III", (s_idx, y_idx))
    (U, u) = split("U", (s_idx,))
    bvec = np.zeros(len(y_idx))
    for k, c in b.objective.items():
        if stage[k] != "second":
            raise ModelError(f"objective term on {b.variables[k].name} is not second-stage")
        bvec[pos[k]] = c
    xs = [b.variables[k] for k in x_idx]
    model = CompactModel(
        b, ncg, clusters, links, x_idx, y_idx, s_idx, A, d, D, F, f, G, H, g, U, u, bvec,
        np.array([v.lb for v in xs]), np.array([v.ub for v in xs]),
        np.array([1 if v.kind == "B" else 0 for v in xs]),
        {k: blocks[k][4] for k in blocks}, reclassified,
    )
    logger.debug("compact model %s (%d rows moved to the first stage)", model.sizes, reclassified)
    return model
