"""Chains of physical qubits standing in for logical variables."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .io import check_fields
from .ising import DimensionError, IsingProblem, SampleSet, energies
from .topology import Topology, chimera_index

__all__ = [
    "ChainStats",
    "Embedding",
    "EmbeddingError",
    "default_chain_strength",
    "embed_complete",
    "embed_problem",
    "unembed",
]


class EmbeddingError(ValueError):
    pass


@dataclass(frozen=True)
class Embedding:
    """Logical variable -> ordered tuple of physical qubits."""

    chains: Mapping[int, tuple[int, ...]]

    def __post_init__(self):
        chains = {int(v): tuple(int(q) for q in c) for v, c in self.chains.items()}
        object.__setattr__(self, "chains", dict(sorted(chains.items())))

    __hash__ = None  # type: ignore[assignment]

    def __len__(self) -> int:
        return len(self.chains)

    @property
    def max_chain_length(self) -> int:
        return max((len(c) for c in self.chains.values()), default=0)

    def intra_chain_edges(self, t: Topology) -> list[tuple[int, int]]:
        out = []
        for chain in self.chains.values():
            members = set(chain)
            out.extend((i, j) for i, j in t.sorted_edges() if i in members and j in members)
        return sorted(out)

    def inter_chain_edges(self, t: Topology, u: int, v: int) -> list[tuple[int, int]]:
        cu, cv = self.chains[u], set(self.chains[v])
        return sorted({(min(a, b), max(a, b)) for a in cu for b in t.neighbors(a) if b in cv})

    def check(self, t: Topology, logical_edges=()) -> list[str]:
        """Every broken invariant, as readable messages; empty when valid."""
        problems = []
        owner: dict[int, int] = {}
        for v, chain in self.chains.items():
            if not chain:
                problems.append(f"chain {v} is empty")
                continue
            for q in chain:
                if not 0 <= q < t.num_qubits:
                    problems.append(f"chain {v} uses qubit {q} outside the topology")
                elif q in owner:
                    problems.append(f"qubit {q} shared by chains {owner[q]} and {v}")
                else:
                    owner[q] = v
            if not _connected(chain, t):
                problems.append(f"chain {v} is not connected")
        for u, v in logical_edges:
            if u not in self.chains or v not in self.chains:
                problems.append(f"logical edge ({u}, {v}) has no chain")
            elif not self.inter_chain_edges(t, u, v):
                problems.append(f"no coupler between chains {u} and {v}")
        return problems

    def to_dict(self) -> dict:
        return {"chains": {str(v): list(c) for v, c in self.chains.items()}}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Embedding":
        check_fields(d, {"chains"}, {"chains"}, "embedding")
        return cls({int(v): tuple(c) for v, c in d["chains"].items()})


def _connected(chain: Sequence[int], t: Topology) -> bool:
    members = {q for q in chain if 0 <= q < t.num_qubits}
    if len(members) != len(set(chain)):
        return False
    start = chain[0]
    seen = {start}
    queue = deque([start])
    while queue:
        q = queue.popleft()
        for r in t.neighbors(q):
            if r in members and r not in seen:
                seen.add(r)
                queue.append(r)
    return seen == members


@dataclass(frozen=True)
class ChainStats:
    break_fraction: float
    max_chain_length: int


def embed_complete(k: int, t: Topology) -> Embedding:
    """Embed the complete graph ``K_k`` in a Chimera topology.

    Uses the triangle layout on the top-left ``b x b`` block of cells with
    ``b = ceil(k / 4)``.  Variable ``v = 4 i + p`` owns the side 1 qubits at
    position ``p`` in row ``i``, columns ``0..i``, followed by the side 0
    qubits at position ``p`` in column ``i``, rows ``i..b-1``.  Every chain has
    length ``b + 1``, and chains ``4 i + p`` and ``4 j + q`` (``i < j``) meet in
    cell ``(j, i)``.
    """
    m = t.chimera_size
    if m is None:
        raise EmbeddingError(f"topology {t.label!r} is not a Chimera graph")
    if k < 0:
        raise ValueError(f"variable count must be nonnegative, got {k}")
    b = math.ceil(k / 4)
    if b > m:
        raise EmbeddingError(f"K_{k} needs a {b}x{b} block but chimera-{m} has {m}x{m}")
    chains = {}
    for v in range(k):
        i, p = divmod(v, 4)
        horizontal = [chimera_index(m, i, col, 1, p) for col in range(i + 1)]
        vertical = [chimera_index(m, row, i, 0, p) for row in range(i, b)]
        chains[v] = tuple(horizontal + vertical)
    if k == 1:
        chains[0] = chains[0][:1]
    return Embedding(chains)


def default_chain_strength(p: IsingProblem) -> float:
    return 2.0 * p.max_abs_bias()


def embed_problem(p_logical: IsingProblem, e: Embedding, t: Topology, chain_strength: float | None = None) -> IsingProblem:
    """Spread a logical problem over its chains.

    Each ``h_v`` is split evenly over chain ``v``; each ``J_uv`` is split evenly
    over the couplers joining chains ``u`` and ``v``; every coupler inside a
    chain gets ``-chain_strength``.  The offset is copied unchanged, so an
    unbroken physical state has the logical energy of its projection minus
    ``chain_strength`` times the number of intra-chain couplers.
    """
    if chain_strength is None:
        chain_strength = default_chain_strength(p_logical)
    if not chain_strength > 0:
        raise ValueError(f"chain_strength must be positive, got {chain_strength}")
    missing = [v for v in range(p_logical.n) if v not in e.chains]
    if missing:
        raise EmbeddingError(f"no chain for logical variables {missing}")
    active = [pair for pair, v in p_logical.J.items() if v != 0]
    issues = e.check(t, active)
    if issues:
        raise EmbeddingError("; ".join(issues))

    h: dict[int, float] = {}
    J: dict[tuple[int, int], float] = {}
    for v, bias in p_logical.h.items():
        chain = e.chains[v]
        for q in chain:
            h[q] = bias / len(chain)
    for (u, v), bias in p_logical.J.items():
        couplers = e.inter_chain_edges(t, u, v)
        if not couplers:
            continue  # zero coupling with no physical coupler
        for pair in couplers:
            J[pair] = bias / len(couplers)
    for pair in e.intra_chain_edges(t):
        J[pair] = -float(chain_strength)
    return IsingProblem(t.num_qubits, h, J, p_logical.offset)


def unembed(ss_physical: SampleSet, e: Embedding, p_logical: IsingProblem) -> tuple[SampleSet, ChainStats]:
    """Majority-vote each chain back to one logical spin.

    A tied chain takes the spin of its lowest-indexed qubit.  Broken chains
    are repaired and counted, never rejected.  Energies are recomputed
    against ``p_logical``.
    """
    S = ss_physical.states
    n = p_logical.n
    logical = np.empty((S.shape[0], n), dtype=np.int8)
    broken = np.zeros(S.shape[0], dtype=np.int64)
    for v in range(n):
        chain = np.asarray(e.chains[v])
        if chain.size and chain.max() >= S.shape[1]:
            raise DimensionError(f"chain {v} uses qubit {chain.max()} beyond sample length {S.shape[1]}")
        spins = S[:, chain].astype(np.int64)
        total = spins.sum(axis=1)
        tie = spins[:, int(np.argmin(chain))]
        logical[:, v] = np.where(total > 0, 1, np.where(total < 0, -1, tie))
        broken += np.abs(total) != len(chain)
    occ = ss_physical.occurrences
    weight = int(occ.sum()) * n
    fraction = float((broken * occ).sum() / weight) if weight else 0.0
    out = SampleSet(logical, energies(p_logical, logical), occ)
    return out, ChainStats(fraction, e.max_chain_length)
