"""Benchmark problem generators: RAN1 spin glasses and NBMF column subproblems."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ising import DimensionError, IsingProblem, QuboProblem, qubo_to_ising
from .topology import Topology

__all__ = ["NbmfInstance", "ran1", "nbmf_column_qubo", "nbmf_column_ising", "random_nbmf_instance"]


def ran1(t: Topology, rng=None) -> IsingProblem:
    """Zero fields and an independent fair +-1 coupling on every edge of ``t``.

    Couplings are drawn in sorted edge order.
    """
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    edges = t.sorted_edges()
    signs = rng.integers(0, 2, size=len(edges)) * 2 - 1
    return IsingProblem(t.num_qubits, {}, {e: float(v) for e, v in zip(edges, signs)})


@dataclass(frozen=True, eq=False)
class NbmfInstance:
    """Data matrix ``A`` (n x m) and current nonnegative factor ``B`` (n x k)."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        B = np.atleast_2d(np.asarray(self.B, dtype=np.float64))
        if A.ndim != 2 or B.ndim != 2 or A.shape[0] != B.shape[0]:
            raise DimensionError(f"A {A.shape} and B {B.shape} need the same row count")
        if np.any(B < 0):
            raise ValueError("B must be nonnegative")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def k(self) -> int:
        return self.B.shape[1]

    def objective(self, col: int, c) -> float:
        """``||A[:, col] - B c||^2`` evaluated directly."""
        r = self.A[:, col] - self.B @ np.asarray(c, dtype=np.float64)
        return float(r @ r)

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "B": self.B.tolist()}

    @classmethod
    def from_dict(cls, d) -> "NbmfInstance":
        return cls(np.array(d["A"], dtype=float), np.array(d["B"], dtype=float))


def random_nbmf_instance(n: int, m: int, k: int, rng=None) -> NbmfInstance:
    """Synthetic instance: ``A = B C + noise`` with random nonnegative ``B`` and binary ``C``."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    B = rng.random((n, k))
    C = rng.integers(0, 2, size=(k, m))
    A = B @ C + 0.1 * rng.standard_normal((n, m))
    return NbmfInstance(A, B)


def nbmf_column_qubo(inst: NbmfInstance, col: int) -> QuboProblem:
    """QUBO whose value at binary ``c`` is ``||A[:, col] - B c||^2``.

    Expanding the square with ``c_i^2 = c_i`` gives diagonal terms
    ``(B^T B)_ii - 2 (B^T a)_i``, pair terms ``2 (B^T B)_ij`` and the constant
    ``||a||^2``.
    """
    if not 0 <= col < inst.A.shape[1]:
        raise DimensionError(f"column {col} outside [0, {inst.A.shape[1]})")
    a = inst.A[:, col]
    G = inst.B.T @ inst.B
    b = inst.B.T @ a
    Q = {}
    for i in range(inst.k):
        Q[(i, i)] = G[i, i] - 2.0 * b[i]
        for j in range(i + 1, inst.k):
            Q[(i, j)] = 2.0 * G[i, j]
    return QuboProblem(inst.k, Q, float(a @ a))


def nbmf_column_ising(inst: NbmfInstance, col: int) -> IsingProblem:
    return qubo_to_ising(nbmf_column_qubo(inst, col))
