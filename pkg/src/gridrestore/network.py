"""Node-cell reduction of the physical network and crew travel times."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import networkx as nx
import numpy as np

from .instance import PhysicalNetwork


class ReductionError(ValueError):
    pass


@dataclass(frozen=True)
class Cell:
    id: str
    nodes: tuple[str, ...]
    faults: tuple[str, ...]


@dataclass(frozen=True)
class CellEdge:
    """A switchable line seen as an edge between two cells."""

    line: str
    switch: str
    kind: str
    a: str
    b: str


@dataclass(frozen=True)
class NodeCellGraph:
    cells: tuple[Cell, ...]
    edges: tuple[CellEdge, ...]
    cell_of_node: dict[str, str]

    def cell(self, cell_id: str) -> Cell:
        return next(c for c in self.cells if c.id == cell_id)

    def adjacent_cells(self, switch_id: str) -> tuple[str, ...]:
        e = next(e for e in self.edges if e.switch == switch_id)
        return (e.a, e.b)

    def edge_of_switch(self, switch_id: str) -> CellEdge:
        return next(e for e in self.edges if e.switch == switch_id)

    def fault_cells(self, fault: str) -> tuple[str, ...]:
        """Cells whose clearing waits on ``fault``."""
        return tuple(c.id for c in self.cells if fault in c.faults)

    def as_graph(self) -> nx.MultiGraph:
        g = nx.MultiGraph()
        g.add_nodes_from(c.id for c in self.cells)
        for e in self.edges:
            g.add_edge(e.a, e.b, key=e.line)
        return g


def reduce_network(net: PhysicalNetwork) -> NodeCellGraph:
    """Aggregate node blocks separated by switchable lines into cells.

    A damaged line that carries a switch is an edge of the reduced graph and
    also counts as a fault of both cells it joins.
    """
    g = nx.Graph()
    g.add_nodes_from(n.id for n in net.nodes)
    g.add_edges_from((ln.from_node, ln.to_node) for ln in net.lines if ln.switch is None)
    order = {n.id: k for k, n in enumerate(net.nodes)}
    components = sorted((sorted(c, key=order.__getitem__) for c in nx.connected_components(g)),
                        key=lambda members: order[members[0]])
    cell_of_node = {}
    for k, members in enumerate(components, start=1):
        for node in members:
            cell_of_node[node] = f"NC{k}"

    faults: dict[str, list[str]] = {f"NC{k}": [] for k in range(1, len(components) + 1)}
    edges = []
    for ln in net.lines:
        a, b = cell_of_node[ln.from_node], cell_of_node[ln.to_node]
        if ln.switch is None:
            if ln.damaged:
                faults[a].append(ln.id)
            continue
        if a == b:
            raise ReductionError(f"switchable line {ln.id} has both ends in cell {a}")
        edges.append(CellEdge(ln.id, ln.switch.id, ln.switch.kind, a, b))
        if ln.damaged:
            faults[a].append(ln.id)
            faults[b].append(ln.id)
    cells = tuple(Cell(f"NC{k}", tuple(members), tuple(faults[f"NC{k}"]))
                  for k, members in enumerate(components, start=1))
    return NodeCellGraph(cells, tuple(edges), cell_of_node)


def travel_minutes(a: Sequence[float], b: Sequence[float], speed_kmh: float) -> float:
    """Travel time for twice the straight-line distance (meters) at ``speed_kmh``."""
    dist_km = 2.0 * math.dist(a, b) / 1000.0
    return dist_km / speed_kmh * 60.0


def build_travel_matrix(coords: Sequence[Sequence[float]], speed_kmh: float) -> np.ndarray:
    """Pairwise travel minutes between sites given in meters."""
    pts = np.asarray(coords, dtype=float).reshape(-1, 2)
    diff = pts[:, None, :] - pts[None, :, :]
    dist_km = 2.0 * np.sqrt((diff ** 2).sum(axis=-1)) / 1000.0
    return dist_km / speed_kmh * 60.0
