"""Linear model registry shared by every constraint emitter.

Variables carry a stage tag (first / second / uncertainty) and every row a
family tag: ``I`` rows involve first-stage variables only, ``II`` rows couple
the first stage with second-stage operation, ``III`` rows tie operation to
the uncertain RES deviations.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping

STAGES = ("first", "second", "uncertainty")
FAMILIES = ("I", "II", "III")
SENSES = ("<=", ">=", "==")


class ModelError(ValueError):
    pass


@dataclass
class Variable:
    index: int
    name: tuple
    kind: str  # "B" or "C"
    lb: float
    ub: float
    stage: str


@dataclass
class Row:
    coeffs: dict[int, float]
    sense: str
    rhs: float
    family: str
    tag: str


@dataclass
class ModelBuilder:
    variables: list[Variable] = field(default_factory=list)
    rows: list[Row] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    _index: dict[tuple, int] = field(default_factory=dict)

    # -- variables
    def add_var(self, name: tuple, kind: str = "C", lb: float = 0.0, ub: float = math.inf,
                stage: str = "first") -> int:
        if name in self._index:
            raise ModelError(f"variable {name} registered twice")
        if stage not in STAGES:
            raise ModelError(f"unknown stage {stage!r}")
        if kind == "B":
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        idx = len(self.variables)
        self.variables.append(Variable(idx, name, kind, float(lb), float(ub), stage))
        self._index[name] = idx
        return idx

    def binary(self, name: tuple, stage: str = "first") -> int:
        return self.add_var(name, "B", 0.0, 1.0, stage)

    def idx(self, name: Hashable) -> int:
        if isinstance(name, int):
            return name
        try:
            return self._index[name]
        except KeyError:
            raise ModelError(f"unknown variable {name}") from None

    def has(self, name: tuple) -> bool:
        return name in self._index

    def var(self, name: tuple) -> Variable:
        return self.variables[self.idx(name)]

    def fix(self, name: Hashable, value: float) -> None:
        v = self.variables[self.idx(name)]
        v.lb = v.ub = float(value)

    # -- rows
    def add(self, terms: Mapping | Iterable, sense: str, rhs: float, family: str, tag: str) -> int:
        if sense not in SENSES:
            raise ModelError(f"unknown sense {sense!r}")
        if family not in FAMILIES:
            raise ModelError(f"unknown family {family!r}")
        items = terms.items() if isinstance(terms, Mapping) else terms
        coeffs: dict[int, float] = {}
        for name, coef in items:
            if coef == 0:
                continue
            k = self.idx(name)
            coeffs[k] = coeffs.get(k, 0.0) + float(coef)
        coeffs = {k: c for k, c in coeffs.items() if c != 0.0}
        self.rows.append(Row(coeffs, sense, float(rhs), family, tag))
        return len(self.rows) - 1

    def minimize(self, terms: Mapping) -> None:
        for name, coef in terms.items():
            k = self.idx(name)
            self.objective[k] = self.objective.get(k, 0.0) + float(coef)

    # -- introspection
    def count_by_family(self) -> dict[str, int]:
        out = {f: 0 for f in FAMILIES}
        for r in self.rows:
            out[r.family] += 1
        return out

    def rows_tagged(self, tag: str) -> list[Row]:
        return [r for r in self.rows if r.tag == tag]

    def names(self, stage: str | None = None) -> list[tuple]:
        return [v.name for v in self.variables if stage is None or v.stage == stage]


_LP_BAD = re.compile(r"[^A-Za-z0-9_().,]")


def lp_name(name: tuple) -> str:
    head, *rest = name
    text = str(head) + ("(" + ",".join(str(p) for p in rest) + ")" if rest else "")
    text = _LP_BAD.sub("_", text)
    return text if not text[0].isdigit() else "v" + text


def write_lp(builder: ModelBuilder, stream, sigma: Mapping[tuple, float] | None = None) -> None:
    """Write the model in CPLEX LP text format.

    Uncertainty variables stay free unless ``sigma`` pins them. Row names carry the
    family tag so the partition survives the export.
    """
    names = [lp_name(v.name) for v in builder.variables]

    def expr(coeffs: Mapping[int, float]) -> str:
        if not coeffs:
            return "0 " + names[0] if names else "0"
        parts = []
        for k, c in sorted(coeffs.items()):
            sign = "-" if c < 0 else "+"
            parts.append(f"{sign} {abs(c):.12g} {names[k]}")
        text = " ".join(parts)
        return text[2:] if text.startswith("+ ") else text

    stream.write("\\ restoration schedule model\nMinimize\n obj: ")
    stream.write(expr(builder.objective) if builder.objective else "0")
    stream.write("\nSubject To\n")
    for k, r in enumerate(builder.rows):
        op = {"<=": "<=", ">=": ">=", "==": "="}[r.sense]
        stream.write(f" F{r.family}_{r.tag}_{k}: {expr(r.coeffs)} {op} {r.rhs:.12g}\n")
    stream.write("Bounds\n")
    for v, n in zip(builder.variables, names):
        lb, ub = v.lb, v.ub
        if sigma is not None and v.name in sigma:
            lb = ub = sigma[v.name]
        lo = "-inf" if math.isinf(lb) else f"{lb:.12g}"
        hi = "+inf" if math.isinf(ub) else f"{ub:.12g}"
        stream.write(f" {lo} <= {n} <= {hi}\n")
    binaries = [n for v, n in zip(builder.variables, names) if v.kind == "B"]
    if binaries:
        stream.write("Binaries\n")
        for n in binaries:
            stream.write(f" {n}\n")
    stream.write("End\n")
