"""Classical stand-ins for the annealer.

``brute_force_min`` and ``exact_boltzmann`` enumerate all ``2^n`` states and
serve as oracles.  ``simulated_annealing`` is single-spin Metropolis under a
geometric inverse-temperature schedule.

Enumeration order: state number ``k`` sets ``s_i = +1`` when bit ``n-1-i`` of
``k`` is 1, else ``-1``.  Index order is therefore lexicographic order with
``-1 < +1`` and spin 0 most significant.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numba
import numpy as np
from scipy.special import logsumexp

from .io import check_fields
from .ising import IsingProblem, SampleSet, as_spins, energies

__all__ = [
    "AnnealParams",
    "ExactDistribution",
    "brute_force_min",
    "enumerate_states",
    "exact_boltzmann",
    "sample_exact",
    "simulated_annealing",
]

MAX_BRUTE_FORCE = 24
MAX_EXACT = 20
_CHUNK = 1 << 16


def enumerate_states(n: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    """States ``start..stop-1`` in enumeration order, as an ``(m, n)`` int8 array."""
    if stop is None:
        stop = 1 << n
    k = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    bits = (k[:, None] >> shifts[None, :]) & 1
    return (2 * bits - 1).astype(np.int8)


def _all_energies(p: IsingProblem) -> np.ndarray:
    total = 1 << p.n
    out = np.empty(total)
    for start in range(0, total, _CHUNK):
        stop = min(start + _CHUNK, total)
        out[start:stop] = energies(p, enumerate_states(p.n, start, stop))
    return out


def brute_force_min(p: IsingProblem) -> tuple[np.ndarray, float, int]:
    """Global minimum by enumeration.

    Returns:
        ``(spins, energy, degeneracy)`` where ``spins`` is the
        lexicographically smallest minimizer.
    """
    if p.n > MAX_BRUTE_FORCE:
        raise ValueError(f"brute force limited to n <= {MAX_BRUTE_FORCE}, got {p.n}")
    e = _all_energies(p)
    k = int(np.argmin(e))
    emin = float(e[k])
    return enumerate_states(p.n, k, k + 1)[0], emin, int(np.count_nonzero(e == emin))


@dataclass(frozen=True, eq=False)
class ExactDistribution:
    """Gibbs distribution over all states, in enumeration order."""

    states: np.ndarray
    energies: np.ndarray
    probabilities: np.ndarray
    beta: float

    def prob(self, s) -> float:
        s = as_spins(s, self.states.shape[1])
        k = 0
        for x in s:
            k = (k << 1) | int(x > 0)
        return float(self.probabilities[k])

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {tuple(int(x) for x in s): float(q) for s, q in zip(self.states, self.probabilities)}


def _gibbs(e: np.ndarray, beta: float) -> np.ndarray:
    # normalize over the sorted energies so equal spectra give bit-identical Z
    log_z = logsumexp(-beta * np.sort(e))
    return np.exp(-beta * e - log_z)


def exact_boltzmann(p: IsingProblem, beta: float) -> ExactDistribution:
    if p.n > MAX_EXACT:
        raise ValueError(f"exact distribution limited to n <= {MAX_EXACT}, got {p.n}")
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    states = enumerate_states(p.n)
    e = energies(p, states)
    return ExactDistribution(states, e, _gibbs(e, beta), float(beta))


def sample_exact(p: IsingProblem, beta: float, num_reads: int, seed: int = 0) -> SampleSet:
    """Draw ``num_reads`` independent states from the exact Gibbs distribution."""
    dist = exact_boltzmann(p, beta)
    rng = np.random.default_rng(seed)
    k = rng.choice(len(dist.probabilities), size=num_reads, p=dist.probabilities)
    states = dist.states[k]
    return SampleSet(states, dist.energies[k], np.ones(num_reads, dtype=np.int64))


@dataclass(frozen=True)
class AnnealParams:
    num_reads: int = 100
    sweeps: int = 1000
    beta_initial: float = 0.1
    beta_final: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.num_reads < 1:
            raise ValueError("num_reads must be >= 1")
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        if not 0 < self.beta_initial <= self.beta_final:
            raise ValueError("need 0 < beta_initial <= beta_final")

    def betas(self) -> np.ndarray:
        return np.geomspace(self.beta_initial, self.beta_final, self.sweeps)

    def to_dict(self) -> dict:
        return {
            "num_reads": self.num_reads,
            "sweeps": self.sweeps,
            "beta_schedule": [self.beta_initial, self.beta_final],
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "AnnealParams":
        check_fields(d, {"num_reads", "sweeps", "beta_schedule", "seed"}, what="anneal parameters")
        defaults = cls()
        bi, bf = d.get("beta_schedule", (defaults.beta_initial, defaults.beta_final))
        return cls(
            int(d.get("num_reads", defaults.num_reads)),
            int(d.get("sweeps", defaults.sweeps)),
            float(bi),
            float(bf),
            int(d.get("seed", defaults.seed)),
        )


@numba.njit(cache=True)
def _anneal(h, indptr, indices, weights, betas, seed, num_reads, init, out):
    n = h.shape[0]
    s = np.empty(n, dtype=np.int8)
    for r in range(num_reads):
        # each read owns a stream seeded by seed + read index
        np.random.seed((seed + r) & 0xFFFFFFFF)
        for i in range(n):
            if init.shape[0] == n:
                s[i] = init[i]
            else:
                s[i] = 1 if np.random.random() < 0.5 else -1
        for t in range(betas.shape[0]):
            beta = betas[t]
            for i in range(n):
                field = h[i]
                for k in range(indptr[i], indptr[i + 1]):
                    field += weights[k] * s[indices[k]]
                delta = -2.0 * s[i] * field
                u = np.random.random()
                if delta <= 0.0 or u < np.exp(-beta * delta):
                    s[i] = -s[i]
        for i in range(n):
            out[r, i] = s[i]


def simulated_annealing(p: IsingProblem, params: AnnealParams, initial_state=None) -> SampleSet:
    """Independent Metropolis annealing runs, one per read.

    Every read starts from uniformly random spins, or from ``initial_state``
    when given (reverse annealing), then performs ``params.sweeps`` sweeps in
    index order with ``beta`` rising geometrically from ``beta_initial`` to
    ``beta_final``.  Read ``r`` uses random stream ``seed + r``, so output is
    identical for identical ``(p, params, initial_state)``.
    """
    indptr, indices, weights = p.adjacency()
    if initial_state is None:
        init = np.empty(0, dtype=np.int8)
    else:
        init = as_spins(initial_state, p.n)
    out = np.empty((params.num_reads, p.n), dtype=np.int8)
    if p.n:
        _anneal(p.linear_array(), indptr, indices, weights, params.betas(), int(params.seed), params.num_reads, init, out)
    return SampleSet.from_states(p, out)
