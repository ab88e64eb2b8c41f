"""First-stage decisions and scenario realizations as plain data."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .grid import Scenario

ScenarioRealization = Scenario

DEPOT = "@depot"


def encode_key(name: tuple) -> str:
    return json.dumps(list(name), separators=(",", ":"))


def decode_key(text: str) -> tuple:
    return tuple(json.loads(text))


@dataclass(frozen=True)
class FirstStageDecision:
    """Values of every first-stage variable, keyed by variable name tuple.

    Binaries are stored as 0/1 integers, times in minutes.
    """

    values: Mapping[tuple, float] = field(default_factory=dict)

    def __getitem__(self, name: tuple) -> float:
        return self.values[name]

    def get(self, name: tuple, default: float = 0.0) -> float:
        return self.values.get(name, default)

    def flag(self, name: tuple) -> int:
        return int(round(self.values.get(name, 0.0)))

    def timeline(self, head: str, key: str, slots: Iterable[int]) -> list[int]:
        return [self.flag((head, key, t)) for t in slots]

    def arcs(self, kind: str, crew: str) -> list[tuple[str, str]]:
        """Selected arcs of one crew, ``kind`` being ``xr`` or ``xo``."""
        return sorted((n[2], n[3]) for n, v in self.values.items()
                      if n[0] == kind and n[1] == crew and round(v) == 1)

    def route(self, kind: str, crew: str) -> list[str]:
        """Ordered task visits; raises ``ValueError`` on broken chains."""
        succ: dict[str, str] = {}
        for a, b in self.arcs(kind, crew):
            if a in succ:
                raise ValueError(f"{crew}: two arcs leave {a}")
            succ[a] = b
        out: list[str] = []
        here = succ.get(DEPOT, DEPOT)
        while here != DEPOT:
            if here in out:
                raise ValueError(f"{crew}: route revisits {here}")
            out.append(here)
            if here not in succ:
                raise ValueError(f"{crew}: route stops at {here}")
            here = succ[here]
        return out

    def to_dict(self) -> dict:
        return {encode_key(k): (int(v) if float(v).is_integer() else v)
                for k, v in sorted(self.values.items(), key=lambda kv: encode_key(kv[0]))}

    @classmethod
    def from_dict(cls, doc: Mapping[str, float]) -> "FirstStageDecision":
        return cls({decode_key(k): float(v) for k, v in doc.items()})

    def replace(self, updates: Mapping[tuple, float]) -> "FirstStageDecision":
        merged = dict(self.values)
        merged.update(updates)
        return FirstStageDecision(merged)
