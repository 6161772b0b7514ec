"""Ising and QUBO problem values, spin vectors, sample sets and energies.

An Ising problem over ``n`` spins ``s_i in {-1, +1}`` has energy

    E(s) = sum_i h_i s_i + sum_{i<j} J_ij s_i s_j + offset

Couplings are stored once per unordered pair, so the pairwise sum runs over
couplers rather than over ordered index pairs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, NamedTuple

import numpy as np

from .io import check_fields

__all__ = [
    "DimensionError",
    "IsingProblem",
    "QuboProblem",
    "SampleSet",
    "Violation",
    "as_spins",
    "energies",
    "energy",
    "qubo_energy",
    "qubo_to_ising",
    "validate_against",
]


class DimensionError(ValueError):
    """Raised when vector or problem sizes disagree."""


def _pair(i, j) -> tuple[int, int]:
    i, j = int(i), int(j)
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class IsingProblem:
    """Sparse Ising problem ``(h, J)`` over qubits ``0..n-1``.

    ``h`` maps qubit index to field, ``J`` maps an unordered pair ``(i, j)``
    to a coupling.  Keys are normalized to ``i < j`` and both maps are kept
    in sorted key order, which fixes the summation order of :func:`energy`.
    Missing entries are zero.
    """

    n: int
    h: Mapping[int, float] = field(default_factory=dict)
    J: Mapping[tuple[int, int], float] = field(default_factory=dict)
    offset: float = 0.0

    def __post_init__(self):
        n = int(self.n)
        if n < 0:
            raise ValueError(f"qubit count must be nonnegative, got {n}")
        h = {}
        for i, v in self.h.items():
            i = int(i)
            if not 0 <= i < n:
                raise ValueError(f"field index {i} outside [0, {n})")
            h[i] = float(v)
        J = {}
        for key, v in self.J.items():
            i, j = key
            if int(i) == int(j):
                raise ValueError(f"self-coupling on qubit {i}")
            p = _pair(i, j)
            if p in J:
                raise ValueError(f"duplicate coupling for pair {p}")
            if not (0 <= p[0] and p[1] < n):
                raise ValueError(f"coupling {p} outside [0, {n})")
            J[p] = float(v)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "h", dict(sorted(h.items())))
        object.__setattr__(self, "J", dict(sorted(J.items())))
        object.__setattr__(self, "offset", float(self.offset))

    __hash__ = None  # type: ignore[assignment]

    @classmethod
    def zero(cls, n: int) -> "IsingProblem":
        return cls(n)

    def __add__(self, other: "IsingProblem") -> "IsingProblem":
        if not isinstance(other, IsingProblem):
            return NotImplemented
        if other.n != self.n:
            raise DimensionError(f"cannot add problems of size {self.n} and {other.n}")
        h = dict(self.h)
        for i, v in other.h.items():
            h[i] = h[i] + v if i in h else v
        J = dict(self.J)
        for p, v in other.J.items():
            J[p] = J[p] + v if p in J else v
        return IsingProblem(self.n, h, J, self.offset + other.offset)

    def is_integral(self) -> bool:
        """True when every coefficient and the offset is an integer."""
        values = [*self.h.values(), *self.J.values(), self.offset]
        return all(float(v).is_integer() for v in values)

    def max_abs_bias(self) -> float:
        values = [abs(v) for v in (*self.h.values(), *self.J.values())]
        return max(values, default=0.0)

    def linear_array(self) -> np.ndarray:
        out = np.zeros(self.n)
        for i, v in self.h.items():
            out[i] = v
        return out

    def adjacency(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Symmetric CSR adjacency ``(indptr, indices, weights)`` of ``J``."""
        rows: list[list[tuple[int, float]]] = [[] for _ in range(self.n)]
        for (i, j), v in self.J.items():
            rows[i].append((j, v))
            rows[j].append((i, v))
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(r) for r in rows])
        indices = np.array([j for r in rows for j, _ in r], dtype=np.int64)
        weights = np.array([v for r in rows for _, v in r], dtype=np.float64)
        return indptr, indices, weights

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "h": [[i, v] for i, v in self.h.items()],
            "J": [[i, j, v] for (i, j), v in self.J.items()],
            "offset": self.offset,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "IsingProblem":
        check_fields(d, {"n", "h", "J", "offset"}, {"n"}, "Ising problem")
        h = {}
        for i, v in d.get("h", []):
            if int(i) in h:
                raise ValueError(f"duplicate field for qubit {i}")
            h[int(i)] = v
        J = {}
        for i, j, v in d.get("J", []):
            p = _pair(i, j)
            if p in J:
                raise ValueError(f"duplicate coupling for pair {p}")
            J[p] = v
        return cls(int(d["n"]), h, J, d.get("offset", 0.0))


def as_spins(s, n: int | None = None) -> np.ndarray:
    """Validate a spin vector and return it as an ``int8`` array."""
    arr = np.asarray(s)
    if arr.ndim != 1:
        raise DimensionError(f"spin vector must be 1-d, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise DimensionError(f"spin vector has length {arr.shape[0]}, expected {n}")
    if not np.all((arr == 1) | (arr == -1)):
        raise ValueError("spins must be +1 or -1")
    return arr.astype(np.int8)


def energies(p: IsingProblem, states) -> np.ndarray:
    """Energies of each row of ``states`` (shape ``(m, n)``) under ``p``.

    Terms are accumulated fields first, then couplers, then the offset, each in
    sorted key order.  Every term is a coefficient times a sign, so the result
    depends only on the problem and the spins, never on the caller.
    """
    S = np.asarray(states)
    if S.ndim != 2 or S.shape[1] != p.n:
        raise DimensionError(f"states of shape {S.shape} do not fit a problem with n={p.n}")
    S = S.astype(np.float64)
    out = np.zeros(S.shape[0])
    for i, v in p.h.items():
        out += v * S[:, i]
    for (i, j), v in p.J.items():
        out += v * S[:, i] * S[:, j]
    out += p.offset
    return out


def energy(p: IsingProblem, s) -> float:
    """Energy of a single spin vector.

    >>> energy(IsingProblem(2, {0: 1, 1: -1}, {(0, 1): 2}), [1, 1])
    2.0
    """
    spins = as_spins(s, p.n)
    return float(energies(p, spins[None, :])[0])


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Spin samples with their energies and occurrence counts.

    Rows of ``states`` are spin vectors; ``energies[k]`` is the energy of row
    ``k`` under the problem that produced it.  Arrays are read-only.
    """

    states: np.ndarray
    energies: np.ndarray
    occurrences: np.ndarray

    def __post_init__(self):
        e = np.array(self.energies, dtype=np.float64, copy=True).reshape(-1)
        states = np.array(self.states, dtype=np.int8, copy=True)
        if states.ndim != 2:
            if len(e) == 0:
                raise ValueError("sample set is empty")
            states = states.reshape(len(e), -1)
        occ = np.array(self.occurrences, dtype=np.int64, copy=True).reshape(-1)
        if not (states.shape[0] == e.shape[0] == occ.shape[0]):
            raise DimensionError("states, energies and occurrences differ in length")
        if np.any(occ < 1):
            raise ValueError("occurrences must be positive")
        if not np.all((states == 1) | (states == -1)):
            raise ValueError("spins must be +1 or -1")
        for a in (states, e, occ):
            a.flags.writeable = False
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "occurrences", occ)

    @classmethod
    def from_states(cls, p: IsingProblem, states, occurrences=None) -> "SampleSet":
        S = np.asarray(states, dtype=np.int8)
        if occurrences is None:
            occurrences = np.ones(S.shape[0], dtype=np.int64)
        return cls(S, energies(p, S), occurrences)

    @property
    def num_variables(self) -> int:
        return self.states.shape[1]

    @property
    def num_reads(self) -> int:
        return int(self.occurrences.sum())

    def __len__(self) -> int:
        return self.states.shape[0]

    def __iter__(self) -> Iterator[tuple[np.ndarray, float, int]]:
        for s, e, k in zip(self.states, self.energies, self.occurrences):
            yield s, float(e), int(k)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SampleSet):
            return NotImplemented
        return (
            self.states.shape == other.states.shape
            and np.array_equal(self.states, other.states)
            and np.array_equal(self.energies, other.energies)
            and np.array_equal(self.occurrences, other.occurrences)
        )

    __hash__ = None  # type: ignore[assignment]

    def lowest(self) -> tuple[np.ndarray, float]:
        k = int(np.argmin(self.energies))
        return self.states[k].copy(), float(self.energies[k])

    def aggregate(self) -> "SampleSet":
        """Merge identical spin vectors, summing occurrences (first-seen order)."""
        seen: dict[bytes, int] = {}
        rows, es, occ = [], [], []
        for s, e, k in self:
            key = s.tobytes()
            if key in seen:
                occ[seen[key]] += k
            else:
                seen[key] = len(rows)
                rows.append(s)
                es.append(e)
                occ.append(k)
        return SampleSet(np.array(rows).reshape(len(rows), self.num_variables), es, occ)

    def to_dict(self) -> dict:
        return {
            "samples": [
                {"s": [int(x) for x in s], "energy": e, "occurrences": k}
                for s, e, k in self
            ]
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SampleSet":
        check_fields(d, {"samples"}, {"samples"}, "sample set")
        samples = d["samples"]
        for x in samples:
            check_fields(x, {"s", "energy", "occurrences"}, {"s", "energy"}, "sample")
        if not samples:
            raise ValueError("sample set is empty")
        return cls(
            [x["s"] for x in samples],
            [x["energy"] for x in samples],
            [x.get("occurrences", 1) for x in samples],
        )


@dataclass(frozen=True)
class QuboProblem:
    """Quadratic objective over binary variables ``x_i in {0, 1}``.

    ``Q`` is keyed by ``(i, j)`` with ``i <= j``; diagonal keys are linear
    terms.  Entries given under both orderings are summed.
    """

    n: int
    Q: Mapping[tuple[int, int], float] = field(default_factory=dict)
    offset: float = 0.0

    def __post_init__(self):
        n = int(self.n)
        Q: dict[tuple[int, int], float] = {}
        for (i, j), v in self.Q.items():
            p = _pair(i, j)
            if not (0 <= p[0] and p[1] < n):
                raise ValueError(f"QUBO entry {p} outside [0, {n})")
            Q[p] = Q.get(p, 0.0) + float(v)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "Q", dict(sorted(Q.items())))
        object.__setattr__(self, "offset", float(self.offset))

    __hash__ = None  # type: ignore[assignment]


def qubo_energy(q: QuboProblem, x) -> float:
    x = np.asarray(x)
    if x.shape != (q.n,):
        raise DimensionError(f"binary vector of shape {x.shape} for QUBO with n={q.n}")
    total = 0.0
    for (i, j), v in q.Q.items():
        total += v * int(x[i]) * int(x[j])
    return total + q.offset


def qubo_to_ising(q: QuboProblem) -> IsingProblem:
    """Rewrite a QUBO in spin form via ``x = (1 + s) / 2``.

    For every binary ``x`` and its spins ``s``, ``qubo_energy(q, x)`` equals
    ``energy(result, s)``.
    """
    h: dict[int, float] = {}
    J: dict[tuple[int, int], float] = {}
    offset = q.offset
    for (i, j), v in q.Q.items():
        if i == j:
            h[i] = h.get(i, 0.0) + v / 2
            offset += v / 2
        else:
            J[(i, j)] = v / 4
            h[i] = h.get(i, 0.0) + v / 4
            h[j] = h.get(j, 0.0) + v / 4
            offset += v / 4
    return IsingProblem(q.n, h, J, offset)


class Violation(NamedTuple):
    """One reason a problem cannot be placed on a topology."""

    kind: str  # "missing_coupler" or "qubit_out_of_range"
    i: int
    j: int | None = None


def validate_against(p: IsingProblem, t) -> list[Violation]:
    """List every field or coupling of ``p`` that topology ``t`` cannot realize.

    An empty list means the problem is realizable on ``t``.
    """
    out: list[Violation] = []
    for i in p.h:
        if i >= t.num_qubits:
            out.append(Violation("qubit_out_of_range", i))
    for i, j in p.J:
        if j >= t.num_qubits:
            out.append(Violation("qubit_out_of_range", i, j))
        elif not t.has_edge(i, j):
            out.append(Violation("missing_coupler", i, j))
    return out

