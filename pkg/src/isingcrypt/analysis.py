"""Energy CDFs and the encrypted-vs-plain sampling comparison."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .gauge import IntegrityError, SecretKey, decode_sampleset, decode_states, encode_problem, keygen
from .ising import IsingProblem, SampleSet, energies
from .samplers import AnnealParams, exact_boltzmann, simulated_annealing

__all__ = [
    "ComparisonReport",
    "EnergyCdf",
    "avg_cdf_diff",
    "cdf",
    "cdf_from_distribution",
    "gauge_experiment",
]


@dataclass(frozen=True, eq=False)
class EnergyCdf:
    """Right-continuous step function ``F(x) = P(energy <= x)``.

    ``energies`` is strictly increasing and ``cum_probs[-1] == 1``.
    """

    energies: np.ndarray
    cum_probs: np.ndarray

    def __call__(self, x):
        idx = np.searchsorted(self.energies, x, side="right") - 1
        return np.where(idx >= 0, self.cum_probs[np.maximum(idx, 0)], 0.0)

    def __eq__(self, other):
        if not isinstance(other, EnergyCdf):
            return NotImplemented
        return np.array_equal(self.energies, other.energies) and np.array_equal(self.cum_probs, other.cum_probs)

    __hash__ = None  # type: ignore[assignment]

    def points(self) -> list[tuple[float, float]]:
        return [(float(e), float(q)) for e, q in zip(self.energies, self.cum_probs)]

    def to_dict(self) -> dict:
        return {"energy": self.energies.tolist(), "cum_prob": self.cum_probs.tolist()}


def cdf(ss: SampleSet) -> EnergyCdf:
    """Occurrence-weighted empirical CDF over the distinct sample energies."""
    if len(ss) == 0:
        raise ValueError("cannot build a CDF from an empty sample set")
    levels, inverse = np.unique(ss.energies, return_inverse=True)
    counts = np.zeros(len(levels), dtype=np.int64)
    np.add.at(counts, inverse, ss.occurrences)
    cum = np.cumsum(counts)
    return EnergyCdf(levels, cum / cum[-1])


def cdf_from_distribution(energy_values, probabilities) -> EnergyCdf:
    """CDF of an explicit distribution over states."""
    levels, inverse = np.unique(np.asarray(energy_values), return_inverse=True)
    mass = np.bincount(inverse, weights=np.asarray(probabilities, dtype=np.float64), minlength=len(levels))
    cum = np.cumsum(mass)
    return EnergyCdf(levels, cum / cum[-1])


def avg_cdf_diff(baseline: EnergyCdf, other: EnergyCdf) -> float:
    """Mean of ``F_baseline - F_other`` over the union of both step points, in percent.

    Positive values mean baseline samples reach low energies more often.
    """
    grid = np.union1d(baseline.energies, other.energies)
    return float(np.mean(baseline(grid) - other(grid)) * 100.0)


@dataclass(frozen=True, eq=False)
class ComparisonReport:
    baseline_cdf: EnergyCdf
    transformed_cdfs: list[EnergyCdf]
    per_transform_diffs: list[float]
    avg_diff_percent: float

    def to_dict(self) -> dict:
        return {
            "baseline_cdf": self.baseline_cdf.to_dict(),
            "transformed_cdfs": [c.to_dict() for c in self.transformed_cdfs],
            "per_transform_diffs": list(self.per_transform_diffs),
            "avg_diff_percent": self.avg_diff_percent,
        }

    def csv_rows(self) -> list[tuple[str, float, float]]:
        rows = [("baseline", e, q) for e, q in self.baseline_cdf.points()]
        for t, c in enumerate(self.transformed_cdfs):
            rows.extend((f"transform_{t}", e, q) for e, q in c.points())
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["series", "energy", "cum_prob"])
        for series, e, q in self.csv_rows():
            writer.writerow([series, repr(e), repr(q)])
        return buf.getvalue()


def _exact_cdf(p: IsingProblem, key: SecretKey, p_original: IsingProblem, beta: float) -> EnergyCdf:
    dist = exact_boltzmann(p, beta)
    decoded = decode_states(dist.states, key)
    if not np.array_equal(energies(p_original, decoded), dist.energies):
        raise IntegrityError("decoded exact distribution changed state energies")
    return cdf_from_distribution(dist.energies, dist.probabilities)


def gauge_experiment(
    p: IsingProblem,
    num_transforms: int = 10,
    reads: int = 10_000,
    params: AnnealParams | None = None,
    seed: int = 0,
    sampler: str = "sa",
    beta: float | None = None,
    keys: Sequence[SecretKey] | None = None,
    share_sampler_seed: bool = False,
) -> ComparisonReport:
    """Compare sampling ``p`` directly against sampling encrypted copies of it.

    The baseline samples ``p`` itself.  Each transform draws a fresh key,
    samples ``encode_problem(p, key)``, decodes the samples against ``p`` and
    records ``avg_cdf_diff(baseline, decoded)``.

    Args:
        params: Annealing schedule for ``sampler="sa"``; ``num_reads`` and
            ``seed`` are overridden by ``reads`` and the derived seeds.
        seed: Root seed; baseline seed, key seeds and transform sampler seeds
            are all derived from it.
        sampler: ``"sa"`` for simulated annealing or ``"exact"`` to use the
            exact Gibbs distribution at ``beta`` (defaults to
            ``params.beta_final``) instead of samples.
        keys: Use these keys instead of generating ``num_transforms`` of them.
        share_sampler_seed: Give every transform the baseline sampler seed.
    """
    if num_transforms < 1 and keys is None:
        raise ValueError("num_transforms must be >= 1")
    if keys is not None:
        num_transforms = len(keys)
    params = params or AnnealParams()
    if beta is None:
        beta = params.beta_final
    derived = [int(x) for x in np.random.SeedSequence(seed).generate_state(1 + 2 * num_transforms)]
    base_seed = derived[0]

    def run(problem: IsingProblem, key: SecretKey, sampler_seed: int) -> EnergyCdf:
        if sampler == "exact":
            return _exact_cdf(problem, key, p, beta)
        if sampler != "sa":
            raise ValueError(f"unknown sampler {sampler!r}")
        ss = simulated_annealing(problem, replace(params, num_reads=reads, seed=sampler_seed))
        return cdf(decode_sampleset(ss, key, p))

    baseline = run(p, SecretKey.zeros(p.n), base_seed)
    cdfs, diffs = [], []
    for t in range(num_transforms):
        key = keys[t] if keys is not None else keygen(p.n, derived[1 + 2 * t])
        sampler_seed = base_seed if share_sampler_seed else derived[2 + 2 * t]
        c = run(encode_problem(p, key), key, sampler_seed)
        cdfs.append(c)
        diffs.append(avg_cdf_diff(baseline, c))
    return ComparisonReport(baseline, cdfs, diffs, float(np.mean(diffs)))
