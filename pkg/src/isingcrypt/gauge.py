"""Spin reversal (gauge) transformations used as an encryption layer.

A secret key is a bit string ``x``.  Encoding flips the sign of ``h_i`` for
every ``x_i = 1`` and of ``J_ij`` whenever exactly one of ``x_i``, ``x_j`` is
set.  A sample ``s*`` of the encoded problem maps back to ``s_i = (-1)^x_i s*_i``
with the same energy, so the untrusted solver never sees the plaintext
problem or the plaintext samples.

Keys come from a caller supplied RNG.  Seeded generators are fine for tests;
production use should draw keys from a cryptographically secure source such
as :mod:`secrets`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .io import check_fields
from .ising import DimensionError, IsingProblem, SampleSet, as_spins, energies

__all__ = [
    "IntegrityError",
    "SecretKey",
    "combine_encrypted",
    "decode_sample",
    "decode_sampleset",
    "decode_states",
    "encode_problem",
    "encode_initial_state",
    "keygen",
    "lift_key",
]


class IntegrityError(RuntimeError):
    """Decoded energies disagree with the energies the solver reported."""


@dataclass(frozen=True)
class SecretKey:
    x: tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.x)
        if any(b not in (0, 1) for b in bits):
            raise ValueError("key bits must be 0 or 1")
        object.__setattr__(self, "x", bits)

    @property
    def n(self) -> int:
        return len(self.x)

    def __len__(self) -> int:
        return len(self.x)

    @property
    def signs(self) -> np.ndarray:
        """``(-1)^x_i`` as an ``int8`` vector."""
        return (1 - 2 * np.asarray(self.x, dtype=np.int8)).astype(np.int8)

    @classmethod
    def zeros(cls, n: int) -> "SecretKey":
        return cls((0,) * n)

    def to_dict(self) -> dict:
        return {"n": self.n, "x": list(self.x)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "SecretKey":
        check_fields(d, {"n", "x"}, {"x"}, "secret key")
        key = cls(tuple(d["x"]))
        if "n" in d and int(d["n"]) != key.n:
            raise ValueError(f"key declares n={d['n']} but has {key.n} bits")
        return key


def _rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def keygen(n: int, rng=None) -> SecretKey:
    """Draw ``n`` independent fair bits.

    Args:
        n: Key length, the number of logical variables.
        rng: A ``numpy.random.Generator`` or anything ``default_rng`` accepts.
    """
    if n < 0:
        raise ValueError(f"key length must be nonnegative, got {n}")
    bits = _rng(rng).integers(0, 2, size=n)
    return SecretKey(tuple(int(b) for b in bits))


def _check_len(k: SecretKey, n: int) -> None:
    if k.n != n:
        raise DimensionError(f"key of length {k.n} does not fit {n} variables")


def encode_problem(p: IsingProblem, k: SecretKey) -> IsingProblem:
    """Apply the spin reversal transformation selected by ``k`` to ``p``.

    Magnitudes, the sparsity pattern and the offset are unchanged; applying
    the same key twice returns the original problem exactly.
    """
    _check_len(k, p.n)
    x = k.x
    h = {i: -v if x[i] else v for i, v in p.h.items()}
    J = {(i, j): -v if x[i] ^ x[j] else v for (i, j), v in p.J.items()}
    return IsingProblem(p.n, h, J, p.offset)


def decode_sample(s_star, k: SecretKey) -> np.ndarray:
    """Map a sample of the encoded problem back to the original problem.

    The map is an involution, so it also encodes plaintext states.
    """
    s = as_spins(s_star)
    _check_len(k, s.shape[0])
    return s * k.signs


# Starting states for reverse annealing are encoded with the same sign flip.
encode_initial_state = decode_sample


def decode_states(states, k: SecretKey) -> np.ndarray:
    S = np.asarray(states, dtype=np.int8)
    _check_len(k, S.shape[1])
    return S * k.signs[None, :]


def decode_sampleset(ss: SampleSet, k: SecretKey, p_original: IsingProblem, rtol: float = 1e-9) -> SampleSet:
    """Decode every sample and verify the energies survived the round trip.

    Energies are recomputed against ``p_original`` and must equal the energies
    reported for the encoded problem: exactly when ``p_original`` has integer
    coefficients, within ``rtol`` relative otherwise.

    Raises:
        IntegrityError: the transcript was corrupted, the wrong key was used, or
            the samples do not belong to ``encode_problem(p_original, k)``.
    """
    _check_len(k, p_original.n)
    if ss.num_variables != p_original.n:
        raise DimensionError(f"samples have {ss.num_variables} spins, problem has {p_original.n}")
    states = decode_states(ss.states, k)
    recomputed = energies(p_original, states)
    if p_original.is_integral():
        bad = recomputed != ss.energies
    else:
        scale = np.maximum(np.abs(ss.energies), 1.0)
        bad = np.abs(recomputed - ss.energies) > rtol * scale
    if np.any(bad):
        row = int(np.flatnonzero(bad)[0])
        raise IntegrityError(
            f"{int(bad.sum())} decoded sample(s) disagree with reported energies "
            f"(first: row {row}, reported {ss.energies[row]!r}, recomputed {recomputed[row]!r})"
        )
    return SampleSet(states, recomputed, ss.occurrences)


def combine_encrypted(*problems: IsingProblem) -> IsingProblem:
    """Sum encoded problems coefficient-wise.

    When every input was encoded under the same key the sum is the encoding
    of the plaintext sum.  The solver has no way to check that precondition.
    """
    if not problems:
        raise ValueError("nothing to combine")
    total = problems[0]
    for p in problems[1:]:
        total = total + p
    return total


def lift_key(k: SecretKey, chains: Mapping[int, Sequence[int]], num_qubits: int) -> SecretKey:
    """Physical key giving every qubit of chain ``v`` the bit ``x_v``.

    Unused qubits get 0.  Useful for checking that the logical-level
    transformation commutes with embedding.
    """
    bits = [0] * num_qubits
    for v, chain in chains.items():
        for q in chain:
            bits[q] = k.x[v]
    return SecretKey(tuple(bits))
