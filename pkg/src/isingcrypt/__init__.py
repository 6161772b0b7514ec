"""Spin reversal encryption for Ising-model annealing.

A client encodes an Ising problem with a secret bit string, an untrusted
solver samples the encoded problem, and the client decodes the samples.
Energies are preserved exactly, so decoded samples are as good as samples of
the original problem.
"""
from .analysis import ComparisonReport, EnergyCdf, avg_cdf_diff, cdf, gauge_experiment
from .embedding import ChainStats, Embedding, embed_complete, embed_problem, unembed
from .gauge import (
    IntegrityError,
    SecretKey,
    combine_encrypted,
    decode_sample,
    decode_sampleset,
    encode_initial_state,
    encode_problem,
    keygen,
)
from .ising import (
    DimensionError,
    IsingProblem,
    QuboProblem,
    SampleSet,
    energies,
    energy,
    qubo_energy,
    qubo_to_ising,
    validate_against,
)
from .problems import NbmfInstance, nbmf_column_ising, nbmf_column_qubo, ran1
from .samplers import AnnealParams, brute_force_min, exact_boltzmann, simulated_annealing
from .topology import Topology, chimera, degree

__version__ = "0.1.0"
