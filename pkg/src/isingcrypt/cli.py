"""Command line interface: ``isingcrypt <subcommand> ...``.

Every subcommand reads and writes the canonical JSON documents; ``--out``
defaults to stdout.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import gauge_experiment
from .embedding import Embedding, embed_complete, embed_problem, unembed
from .gauge import SecretKey, decode_sampleset, encode_problem, keygen
from .io import dumps, read_json
from .ising import IsingProblem, SampleSet
from .problems import NbmfInstance, nbmf_column_ising, random_nbmf_instance, ran1
from .protocol import LoopbackEndpoint, SolverService, TcpEndpoint, client_solve, serve
from .samplers import AnnealParams, simulated_annealing
from .topology import Topology, chimera


def _emit(obj, out: str | None) -> None:
    text = obj if isinstance(obj, str) else dumps(obj) + "\n"
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _topology(args) -> Topology:
    if getattr(args, "topology", None):
        return Topology.from_dict(read_json(args.topology))
    return chimera(args.chimera)


def _params(args) -> AnnealParams:
    return AnnealParams(args.reads, args.sweeps, args.beta_init, args.beta_final, args.seed)


def _add_anneal(p: argparse.ArgumentParser) -> None:
    p.add_argument("--reads", type=int, default=100)
    p.add_argument("--sweeps", type=int, default=1000)
    p.add_argument("--beta-init", type=float, default=0.1)
    p.add_argument("--beta-final", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)


def _add_topology(p: argparse.ArgumentParser, default_m: int | None = 16) -> None:
    p.add_argument("--chimera", type=int, default=default_m, metavar="M", help="use chimera(M)")
    p.add_argument("--topology", help="topology JSON file (overrides --chimera)")


def cmd_keygen(args):
    n = args.n if args.n is not None else IsingProblem.from_dict(read_json(args.problem)).n
    _emit(keygen(n, args.seed).to_dict(), args.out)


def cmd_encode(args):
    p = IsingProblem.from_dict(read_json(args.problem))
    k = SecretKey.from_dict(read_json(args.key))
    _emit(encode_problem(p, k).to_dict(), args.out)


def cmd_decode(args):
    p = IsingProblem.from_dict(read_json(args.problem))
    k = SecretKey.from_dict(read_json(args.key))
    ss = SampleSet.from_dict(read_json(args.samples))
    _emit(decode_sampleset(ss, k, p).to_dict(), args.out)


def cmd_embed(args):
    p = IsingProblem.from_dict(read_json(args.problem))
    t = _topology(args)
    e = Embedding.from_dict(read_json(args.embedding)) if args.embedding else embed_complete(p.n, t)
    if args.embedding_out:
        Path(args.embedding_out).write_text(dumps(e.to_dict()) + "\n", encoding="utf-8")
    _emit(embed_problem(p, e, t, args.chain_strength).to_dict(), args.out)


def cmd_unembed(args):
    p = IsingProblem.from_dict(read_json(args.problem))
    e = Embedding.from_dict(read_json(args.embedding))
    ss = SampleSet.from_dict(read_json(args.samples))
    logical, stats = unembed(ss, e, p)
    logging.info("chain break fraction %.6f, max chain length %d", stats.break_fraction, stats.max_chain_length)
    _emit(logical.to_dict(), args.out)


def cmd_gen_ran1(args):
    _emit(ran1(_topology(args), args.seed).to_dict(), args.out)


def _read_matrix(path: str) -> np.ndarray:
    with open(path, newline="") as fh:
        return np.array([[float(x) for x in row] for row in csv.reader(fh) if row])


def cmd_gen_nbmf(args):
    if args.instance:
        inst = NbmfInstance.from_dict(read_json(args.instance))
    elif args.A and args.B:
        inst = NbmfInstance(_read_matrix(args.A), _read_matrix(args.B))
    else:
        inst = random_nbmf_instance(args.rows, args.cols, args.k, args.seed)
    _emit(nbmf_column_ising(inst, args.col).to_dict(), args.out)


def cmd_sample(args):
    p = IsingProblem.from_dict(read_json(args.problem))
    init = read_json(args.reverse_init) if args.reverse_init else None
    _emit(simulated_annealing(p, _params(args), init).to_dict(), args.out)


def cmd_solve(args):
    p = IsingProblem.from_dict(read_json(args.problem))
    k = SecretKey.from_dict(read_json(args.key))
    if args.endpoint == "loopback":
        endpoint = LoopbackEndpoint(SolverService(transcript=args.transcript))
    else:
        endpoint = TcpEndpoint.parse(args.endpoint)
    embedding = topology = None
    if args.embed:
        topology = _topology(args)
        if args.embedding:
            embedding = Embedding.from_dict(read_json(args.embedding))
        else:
            embedding = embed_complete(p.n, topology)
    init = read_json(args.reverse_init) if args.reverse_init else None
    ss = client_solve(p, k, endpoint, _params(args), embedding, topology, args.chain_strength, init)
    _emit(ss.to_dict(), args.out)


def cmd_serve(args):
    host, _, port = args.bind.rpartition(":")
    service = SolverService(args.sampler, args.transcript)
    logging.info("serving on %s:%s", host or "127.0.0.1", port)
    try:
        serve((host or "127.0.0.1", int(port)), service, background=False)
    except KeyboardInterrupt:
        pass


def cmd_analyze(args):
    p = IsingProblem.from_dict(read_json(args.problem))
    report = gauge_experiment(
        p,
        num_transforms=args.transforms,
        reads=args.reads,
        params=_params(args),
        seed=args.seed,
        sampler=args.sampler,
    )
    if args.csv:
        Path(args.csv).write_text(report.to_csv(), encoding="utf-8")
    _emit(report.to_dict(), args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="isingcrypt", description="Spin reversal encryption for Ising-model annealing.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate a secret key")
    p.add_argument("--n", type=int)
    p.add_argument("--problem", help="take the key length from this problem")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("encode", help="encrypt a problem with a key")
    p.add_argument("--problem", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decrypt a sample set and check its energies")
    p.add_argument("--samples", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--problem", required=True, help="the original (plaintext) problem")
    p.add_argument("--out")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("embed", help="embed a logical problem into a topology")
    p.add_argument("--problem", required=True)
    _add_topology(p)
    p.add_argument("--embedding", help="embedding JSON; default is the complete-graph layout")
    p.add_argument("--embedding-out", help="write the embedding used here")
    p.add_argument("--chain-strength", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("unembed", help="project physical samples to logical ones")
    p.add_argument("--samples", required=True)
    p.add_argument("--embedding", required=True)
    p.add_argument("--problem", required=True, help="logical problem for energies")
    p.add_argument("--out")
    p.set_defaults(func=cmd_unembed)

    p = sub.add_parser("gen-ran1", help="RAN1 instance on a topology")
    _add_topology(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_ran1)

    p = sub.add_parser("gen-nbmf", help="Ising problem for one NBMF column update")
    p.add_argument("--instance", help="JSON with A and B")
    p.add_argument("--A", help="CSV file with A")
    p.add_argument("--B", help="CSV file with B")
    p.add_argument("--rows", type=int, default=20, help="random instance: rows of A")
    p.add_argument("--cols", type=int, default=5, help="random instance: columns of A")
    p.add_argument("--k", type=int, default=8, help="random instance: inner dimension")
    p.add_argument("--col", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_nbmf)

    p = sub.add_parser("sample", help="simulated annealing on a problem")
    p.add_argument("--problem", required=True)
    p.add_argument("--reverse-init", help="JSON spin list used as every read's start")
    _add_anneal(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("solve", help="encrypt, send to a solver, decrypt")
    p.add_argument("--problem", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--endpoint", default="loopback", help="HOST:PORT or 'loopback'")
    p.add_argument("--transcript", help="loopback only: solver transcript file")
    p.add_argument("--embed", action="store_true", help="embed before sending")
    _add_topology(p)
    p.add_argument("--embedding")
    p.add_argument("--chain-strength", type=float)
    p.add_argument("--reverse-init", help="JSON plaintext spin list for reverse annealing")
    _add_anneal(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("serve", help="run an (untrusted) solver")
    p.add_argument("--bind", default="127.0.0.1:7878")
    p.add_argument("--sampler", choices=["sa", "exact"], default="sa")
    p.add_argument("--transcript", default="oscar_transcript.bin")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("analyze", help="plain vs encrypted sampling comparison")
    p.add_argument("--problem", required=True)
    p.add_argument("--transforms", type=int, default=10)
    p.add_argument("--sampler", choices=["sa", "exact"], default="sa")
    _add_anneal(p)
    p.set_defaults(reads=10_000)
    p.add_argument("--csv", help="write series,energy,cum_prob rows here")
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    if args.command == "keygen" and args.n is None and not args.problem:
        build_parser().error("keygen needs --n or --problem")
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
