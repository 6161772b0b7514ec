import csv
import json

import numpy as np
import pytest

from isingcrypt import (
    AnnealParams,
    Embedding,
    IsingProblem,
    SampleSet,
    SecretKey,
    brute_force_min,
    chimera,
    encode_problem,
    simulated_annealing,
)
from isingcrypt.cli import main
from isingcrypt.io import write_json
from isingcrypt.protocol import read_transcript


@pytest.fixture
def problem_file(tmp_path):
    p = IsingProblem(4, {0: 1.0, 2: -0.5}, {(0, 1): -1.0, (1, 2): 1.0, (2, 3): -2.0, (0, 3): 0.5})
    path = tmp_path / "p.json"
    write_json(path, p.to_dict())
    return p, path


def load(path):
    return json.loads(path.read_text())


def test_keygen_from_n_and_problem(tmp_path, problem_file):
    _, pf = problem_file
    main(["keygen", "--n", "6", "--seed", "1", "--out", str(tmp_path / "a.json")])
    main(["keygen", "--problem", str(pf), "--seed", "1", "--out", str(tmp_path / "b.json")])
    assert SecretKey.from_dict(load(tmp_path / "a.json")).n == 6
    assert SecretKey.from_dict(load(tmp_path / "b.json")).n == 4


def test_keygen_requires_length():
    with pytest.raises(SystemExit):
        main(["keygen"])


def test_encode_decode_round_trip(tmp_path, problem_file):
    p, pf = problem_file
    kf, ef, sf, df = (tmp_path / f for f in ("k.json", "e.json", "s.json", "d.json"))
    main(["keygen", "--n", "4", "--seed", "9", "--out", str(kf)])
    main(["encode", "--problem", str(pf), "--key", str(kf), "--out", str(ef)])
    k = SecretKey.from_dict(load(kf))
    assert IsingProblem.from_dict(load(ef)) == encode_problem(p, k)
    main(["sample", "--problem", str(ef), "--reads", "20", "--sweeps", "50", "--out", str(sf)])
    main(["decode", "--samples", str(sf), "--key", str(kf), "--problem", str(pf), "--out", str(df)])
    decoded = SampleSet.from_dict(load(df))
    assert decoded.num_reads == 20
    assert decoded.energies.min() == brute_force_min(p)[1]


def test_sample_matches_library(tmp_path, problem_file):
    p, pf = problem_file
    out = tmp_path / "s.json"
    main(["sample", "--problem", str(pf), "--reads", "7", "--sweeps", "15", "--seed", "4", "--out", str(out)])
    assert SampleSet.from_dict(load(out)) == simulated_annealing(p, AnnealParams(7, 15, seed=4))


def test_sample_stdout(capsys, problem_file):
    _, pf = problem_file
    main(["sample", "--problem", str(pf), "--reads", "2", "--sweeps", "2"])
    assert len(json.loads(capsys.readouterr().out)["samples"]) == 2


def test_gen_ran1(tmp_path):
    out = tmp_path / "r.json"
    main(["gen-ran1", "--chimera", "2", "--seed", "3", "--out", str(out)])
    p = IsingProblem.from_dict(load(out))
    assert p.n == 32 and len(p.J) == 80 and p.h == {}


def test_gen_ran1_from_topology_file(tmp_path):
    tf = tmp_path / "t.json"
    write_json(tf, chimera(1).to_dict())
    out = tmp_path / "r.json"
    main(["gen-ran1", "--topology", str(tf), "--out", str(out)])
    assert len(IsingProblem.from_dict(load(out)).J) == 16


def test_gen_nbmf_random_and_csv(tmp_path):
    out = tmp_path / "n.json"
    main(["gen-nbmf", "--rows", "5", "--cols", "2", "--k", "3", "--out", str(out)])
    assert IsingProblem.from_dict(load(out)).n == 3
    (tmp_path / "A.csv").write_text("1,0\n0,1\n")
    (tmp_path / "B.csv").write_text("1,0.5\n0,1\n")
    main(["gen-nbmf", "--A", str(tmp_path / "A.csv"), "--B", str(tmp_path / "B.csv"), "--col", "1", "--out", str(out)])
    assert IsingProblem.from_dict(load(out)).n == 2


def test_embed_then_unembed(tmp_path, problem_file):
    p, pf = problem_file
    phys, emb, raw, logical = (tmp_path / f for f in ("phys.json", "emb.json", "raw.json", "log.json"))
    main(["embed", "--problem", str(pf), "--chimera", "1", "--embedding-out", str(emb), "--out", str(phys)])
    assert IsingProblem.from_dict(load(phys)).n == 8
    Embedding.from_dict(load(emb))
    main(["sample", "--problem", str(phys), "--reads", "30", "--sweeps", "300", "--out", str(raw)])
    main(["unembed", "--samples", str(raw), "--embedding", str(emb), "--problem", str(pf), "--out", str(logical)])
    ss = SampleSet.from_dict(load(logical))
    assert ss.num_variables == 4
    assert ss.energies.min() == brute_force_min(p)[1]


def test_solve_loopback_with_transcript(tmp_path, problem_file):
    p, pf = problem_file
    kf, out, tr = tmp_path / "k.json", tmp_path / "o.json", tmp_path / "t.bin"
    main(["keygen", "--n", "4", "--seed", "2", "--out", str(kf)])
    main(["solve", "--problem", str(pf), "--key", str(kf), "--transcript", str(tr),
          "--reads", "30", "--sweeps", "200", "--out", str(out)])
    ss = SampleSet.from_dict(load(out))
    assert ss.energies.min() == brute_force_min(p)[1]
    request, reply = read_transcript(tr)
    assert request["type"] == reply["type"] == "solve"
    assert IsingProblem.from_dict(request["body"]["problem"]) == encode_problem(p, SecretKey.from_dict(load(kf)))


def test_solve_embedded(tmp_path, problem_file):
    p, pf = problem_file
    kf, out = tmp_path / "k.json", tmp_path / "o.json"
    main(["keygen", "--n", "4", "--seed", "5", "--out", str(kf)])
    main(["solve", "--problem", str(pf), "--key", str(kf), "--embed", "--chimera", "1",
          "--reads", "50", "--sweeps", "300", "--out", str(out)])
    assert SampleSet.from_dict(load(out)).energies.min() == brute_force_min(p)[1]


def test_solve_reverse_init(tmp_path, problem_file):
    _, pf = problem_file
    kf, init, out = tmp_path / "k.json", tmp_path / "i.json", tmp_path / "o.json"
    main(["keygen", "--n", "4", "--seed", "5", "--out", str(kf)])
    init.write_text("[1, -1, 1, 1]")
    main(["solve", "--problem", str(pf), "--key", str(kf), "--reverse-init", str(init),
          "--reads", "3", "--sweeps", "1", "--beta-init", "50", "--beta-final", "50", "--out", str(out)])
    ss = SampleSet.from_dict(load(out))
    assert ss.num_reads == 3


def test_analyze_exact_writes_csv(tmp_path, problem_file):
    _, pf = problem_file
    out, cf = tmp_path / "r.json", tmp_path / "r.csv"
    main(["analyze", "--problem", str(pf), "--sampler", "exact", "--transforms", "3", "--csv", str(cf), "--out", str(out)])
    report = load(out)
    assert report["avg_diff_percent"] == 0.0
    with open(cf, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert {r["series"] for r in rows} == {"baseline", "transform_0", "transform_1", "transform_2"}


def test_analyze_sa(tmp_path, problem_file):
    _, pf = problem_file
    out = tmp_path / "r.json"
    main(["analyze", "--problem", str(pf), "--transforms", "2", "--reads", "200", "--sweeps", "20", "--out", str(out)])
    report = load(out)
    assert len(report["per_transform_diffs"]) == 2
    assert np.isfinite(report["avg_diff_percent"])


def test_unknown_fields_rejected(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": 2, "h": [], "J": [], "offset": 0.0, "key": [0, 1]}')
    with pytest.raises(ValueError):
        main(["sample", "--problem", str(bad)])
