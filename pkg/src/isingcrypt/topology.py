"""Hardware connectivity graphs.

Chimera qubit indexing
----------------------
``chimera(m)`` is an ``m x m`` grid of K4,4 unit cells.  Qubit
``(row, col, side, pos)`` has linear index::

    ((row * m + col) * 2 + side) * 4 + pos

Side 0 qubits couple to the same position in the cells directly above and
below (vertical lines); side 1 qubits couple to the same position in the cells
to the left and right (horizontal lines).  Inside a cell every side 0 qubit is
coupled to every side 1 qubit.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .io import check_fields

__all__ = ["Topology", "chimera", "chimera_index", "chimera_coordinates", "degree"]

CELL = 4  # qubits per side of a unit cell


@dataclass(frozen=True)
class Topology:
    """Undirected coupler graph over qubits ``0..num_qubits-1``."""

    num_qubits: int
    edges: frozenset = field(default_factory=frozenset, repr=False)
    label: str = ""

    def __post_init__(self):
        edges = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop on qubit {i}")
            if i > j:
                i, j = j, i
            if i < 0 or j >= self.num_qubits:
                raise ValueError(f"edge ({i}, {j}) outside [0, {self.num_qubits})")
            edges.add((i, j))
        object.__setattr__(self, "edges", frozenset(edges))
        adj: dict[int, set[int]] = {q: set() for q in range(self.num_qubits)}
        for i, j in edges:
            adj[i].add(j)
            adj[j].add(i)
        object.__setattr__(self, "_adj", {q: frozenset(v) for q, v in adj.items()})

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.edges

    def neighbors(self, i: int) -> frozenset:
        self._check(i)
        return self._adj[i]

    def _check(self, i: int) -> None:
        if not 0 <= i < self.num_qubits:
            raise IndexError(f"qubit {i} outside [0, {self.num_qubits})")

    @property
    def chimera_size(self) -> int | None:
        """Grid size ``m`` when the label marks a Chimera graph, else None."""
        match = re.fullmatch(r"chimera-(\d+)", self.label)
        return int(match.group(1)) if match else None

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def to_dict(self) -> dict:
        return {
            "num_qubits": self.num_qubits,
            "edges": [[i, j] for i, j in self.sorted_edges()],
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Topology":
        check_fields(d, {"num_qubits", "edges", "label"}, {"num_qubits", "edges"}, "topology")
        return cls(int(d["num_qubits"]), frozenset(tuple(e) for e in d["edges"]), d.get("label", ""))

    @classmethod
    def from_edges(cls, num_qubits: int, edges: Iterable, label: str = "") -> "Topology":
        return cls(num_qubits, frozenset(tuple(e) for e in edges), label)


def chimera_index(m: int, row: int, col: int, side: int, pos: int) -> int:
    return ((row * m + col) * 2 + side) * CELL + pos


def chimera_coordinates(m: int, q: int) -> tuple[int, int, int, int]:
    """Inverse of :func:`chimera_index`: ``(row, col, side, pos)``."""
    q, pos = divmod(q, CELL)
    q, side = divmod(q, 2)
    row, col = divmod(q, m)
    return row, col, side, pos


def chimera(m: int) -> Topology:
    """Defect-free Chimera graph with ``8 m^2`` qubits and ``16 m^2 + 8 m (m - 1)`` couplers."""
    if m < 1:
        raise ValueError(f"Chimera grid size must be >= 1, got {m}")
    edges = []
    for row in range(m):
        for col in range(m):
            for a in range(CELL):
                for b in range(CELL):
                    edges.append((chimera_index(m, row, col, 0, a), chimera_index(m, row, col, 1, b)))
            for k in range(CELL):
                if row + 1 < m:
                    edges.append((chimera_index(m, row, col, 0, k), chimera_index(m, row + 1, col, 0, k)))
                if col + 1 < m:
                    edges.append((chimera_index(m, row, col, 1, k), chimera_index(m, row, col + 1, 1, k)))
    return Topology.from_edges(8 * m * m, edges, label=f"chimera-{m}")


def degree(t: Topology, i: int) -> int:
    return len(t.neighbors(i))
