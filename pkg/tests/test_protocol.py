import json
import socket
import struct
import threading

import numpy as np
import pytest
from scipy.stats import chisquare

from conftest import random_problem
from isingcrypt import (
    AnnealParams,
    IntegrityError,
    IsingProblem,
    SecretKey,
    brute_force_min,
    chimera,
    decode_sample,
    decode_sampleset,
    embed_complete,
    encode_problem,
    exact_boltzmann,
    keygen,
    simulated_annealing,
)
from isingcrypt.protocol import (
    CombineRequest,
    LoopbackEndpoint,
    ProtocolError,
    SolveRequest,
    SolveResponse,
    SolverError,
    SolverService,
    TcpEndpoint,
    client_solve,
    combine_and_solve,
    decode_message,
    encode_message,
    frame,
    read_transcript,
    recv_frame,
    serve,
    solve_plain,
)
from isingcrypt.samplers import enumerate_states

PARAMS = AnnealParams(num_reads=50, sweeps=200, seed=3)


@pytest.fixture
def loopback(tmp_path):
    return LoopbackEndpoint(SolverService("sa", tmp_path / "oscar.bin"))


@pytest.fixture
def tcp_server(tmp_path):
    server = serve(("127.0.0.1", 0), SolverService("sa", tmp_path / "tcp.bin"))
    yield server
    server.shutdown()
    server.server_close()


# --- schema -----------------------------------------------------------------


def test_message_types_round_trip(rng):
    p = random_problem(rng, 5, integer=False)
    req = SolveRequest(p, PARAMS, (1, -1, 1, 1, -1))
    assert SolveRequest.from_dict(json.loads(json.dumps(req.to_dict()))) == req
    comb = CombineRequest((p, p), PARAMS)
    assert CombineRequest.from_dict(json.loads(json.dumps(comb.to_dict()))) == comb
    ss = simulated_annealing(p, AnnealParams(num_reads=3, sweeps=2))
    resp = SolveResponse(ss, "info")
    again = SolveResponse.from_dict(json.loads(json.dumps(resp.to_dict())))
    assert again.sampleset == ss and again.solver_info == "info"


@pytest.mark.parametrize(
    "cls,body",
    [
        (SolveRequest, {"problem": {"n": 1}, "params": {}, "key": {"x": [1]}}),
        (SolveRequest, {"problem": {"n": 1, "x": [1]}, "params": {}}),
        (SolveRequest, {"problem": {"n": 1}, "params": {"x": [1]}}),
        (CombineRequest, {"problems": [{"n": 1}, {"n": 1}], "params": {}, "shared_key": [0]}),
        (SolveResponse, {"sampleset": {"samples": [{"s": [1], "energy": 0.0, "x": [0]}]}}),
    ],
)
def test_schemas_cannot_carry_a_key(cls, body):
    with pytest.raises(ValueError):
        cls.from_dict(body)


def test_request_types_have_no_key_field():
    import dataclasses

    for cls in (SolveRequest, CombineRequest, SolveResponse):
        names = {f.name for f in dataclasses.fields(cls)}
        assert not any("key" in n for n in names)


def test_reverse_init_length_checked():
    with pytest.raises(ValueError):
        SolveRequest(IsingProblem(3), PARAMS, (1, 1))


# --- framing ----------------------------------------------------------------


def test_frame_layout():
    payload = encode_message("solve", {"a": 1})
    framed = frame(payload)
    assert framed[:4] == struct.pack("!I", len(payload))
    assert decode_message(framed[4:]) == ("solve", {"a": 1})


def test_recv_frame_over_socketpair():
    a, b = socket.socketpair()
    with a, b:
        a.sendall(frame(b"hello") + frame(b""))
        assert recv_frame(b) == b"hello"
        assert recv_frame(b) == b""
        a.close()
        assert recv_frame(b) is None


def test_recv_frame_truncated():
    a, b = socket.socketpair()
    with b:
        a.sendall(struct.pack("!I", 10) + b"abc")
        a.close()
        with pytest.raises(ProtocolError):
            recv_frame(b)


def test_recv_frame_oversized_header():
    a, b = socket.socketpair()
    with a, b:
        a.sendall(struct.pack("!I", 2**32 - 1))
        with pytest.raises(ProtocolError) as err:
            recv_frame(b)
        assert err.value.code == "too_large"


# --- service error handling -------------------------------------------------


@pytest.mark.parametrize(
    "payload,code",
    [
        (b"\xff\xfe", "bad_json"),
        (b"{not json", "bad_json"),
        (b'{"type": "solve"}', "bad_envelope"),
        (b'{"type": "launch", "body": {}}', "unknown_type"),
        (b'{"type": "solve", "body": {"problem": {"n": 2}}}', "bad_request"),
        (b'{"type": "solve", "body": {"problem": {"n": 2, "J": [[0, 0, 1]]}, "params": {}}}', "bad_request"),
        (b'{"type": "solve", "body": {"problem": {"n": 1}, "params": {"num_reads": 0}}}', "bad_request"),
        (b'{"type": "combine", "body": {"problems": [{"n": 1}, {"n": 2}], "params": {}}}', "dimension"),
    ],
)
def test_service_answers_errors(payload, code):
    service = SolverService()
    kind, body = decode_message(service.handle(payload))
    assert kind == "error"
    assert body["code"] == code


def test_service_keeps_running_after_errors(tcp_server):
    host, port = tcp_server.server_address
    with socket.create_connection((host, port)) as sock:
        sock.sendall(frame(b"garbage"))
        kind, _ = decode_message(recv_frame(sock))
        assert kind == "error"
        sock.sendall(frame(encode_message("solve", SolveRequest(IsingProblem(2), PARAMS).to_dict())))
        kind, body = decode_message(recv_frame(sock))
        assert kind == "solve" and len(body["sampleset"]["samples"]) == PARAMS.num_reads


def test_client_raises_solver_error(loopback):
    with pytest.raises(SolverError):
        combine_and_solve([IsingProblem(1, {0: 1.0}), IsingProblem(1)], _Broken())


class _Broken:
    def exchange(self, payload):
        return encode_message("error", {"code": "internal", "message": "boom"})


# --- client workflow --------------------------------------------------------


def test_zero_key_equals_direct_sampling(loopback, rng):
    p = random_problem(rng, 8)
    out = client_solve(p, SecretKey.zeros(8), loopback, PARAMS)
    assert out == simulated_annealing(p, PARAMS)


def test_random_key_recovers_ground_state(loopback, tmp_path, rng):
    p = random_problem(rng, 8)
    k = keygen(8, rng)
    out = client_solve(p, k, loopback, PARAMS)
    _, emin, _ = brute_force_min(p)
    request, reply = read_transcript(tmp_path / "oscar.bin")
    raw_energies = [x["energy"] for x in reply["body"]["sampleset"]["samples"]]
    enc_min = brute_force_min(IsingProblem.from_dict(request["body"]["problem"]))[1]
    assert enc_min == emin
    if min(raw_energies) == enc_min:
        assert out.energies.min() == emin
    assert sorted(out.energies.tolist()) == sorted(raw_energies)


def test_tcp_endpoint_end_to_end(tcp_server, rng):
    host, port = tcp_server.server_address
    p = random_problem(rng, 10)
    k = keygen(10, rng)
    out = client_solve(p, k, TcpEndpoint(host, port), PARAMS)
    assert out.num_reads == PARAMS.num_reads
    assert TcpEndpoint.parse(f"{host}:{port}").port == port


def test_concurrent_clients(tcp_server, rng):
    host, port = tcp_server.server_address
    problems = [random_problem(rng, 8) for _ in range(6)]
    keys = [keygen(8, rng) for _ in range(6)]
    results = [None] * 6

    def work(i):
        results[i] = client_solve(problems[i], keys[i], TcpEndpoint(host, port), PARAMS)

    threads = [threading.Thread(target=work, args=(i,)) for i in range(6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for p, r in zip(problems, results):
        assert r == simulated_annealing(p, PARAMS)


def test_embedded_k4_end_to_end(loopback, tmp_path, rng):
    t = chimera(1)
    e = embed_complete(4, t)
    p = random_problem(rng, 4, density=1.0)
    k = keygen(4, rng)
    out = client_solve(p, k, loopback, AnnealParams(num_reads=100, sweeps=500, seed=1), e, t)
    assert out.num_variables == 4
    assert out.energies.min() == brute_force_min(p)[1]
    request, _ = read_transcript(tmp_path / "oscar.bin")
    assert request["body"]["problem"]["n"] == 8


def test_reverse_init_is_encrypted(loopback, tmp_path):
    p = IsingProblem(6, {}, {(i, i + 1): -1.0 for i in range(5)})
    k = SecretKey((1, 0, 1, 1, 0, 0))
    s0 = np.ones(6, dtype=int)
    params = AnnealParams(num_reads=5, sweeps=3, beta_initial=30.0, beta_final=30.0, seed=0)
    out = client_solve(p, k, loopback, params, reverse_init=s0)
    request, _ = read_transcript(tmp_path / "oscar.bin")
    assert request["body"]["reverse_init"] == decode_sample(s0, k).tolist()
    assert np.all(out.states == 1)


def test_client_rejects_key_length(loopback):
    with pytest.raises(ValueError):
        client_solve(IsingProblem(3), SecretKey((0, 1)), loopback)


# --- multi-party combination ------------------------------------------------


def test_combine_with_zero_problem_matches_single(loopback, rng):
    p = random_problem(rng, 6)
    k = keygen(6, rng)
    p_star = encode_problem(p, k)
    combined = combine_and_solve([p_star, IsingProblem.zero(6)], loopback, PARAMS)
    assert combined == solve_plain(p_star, loopback, PARAMS)


def _halves(rng):
    p = random_problem(rng, 6, density=1.0)
    items = list(p.J.items())
    alice = IsingProblem(6, p.h, dict(items[::2]))
    bob = IsingProblem(6, {}, dict(items[1::2]), p.offset)
    return alice, bob


def test_two_parties_shared_key(loopback, rng):
    alice, bob = _halves(rng)
    k = keygen(6, rng)
    ss = combine_and_solve(
        [encode_problem(alice, k), encode_problem(bob, k)], loopback, AnnealParams(num_reads=100, sweeps=300)
    )
    total = alice + bob
    decoded = decode_sampleset(ss, k, total)
    _, emin, _ = brute_force_min(total)
    assert decoded.energies.min() == emin


def test_two_parties_mismatched_keys_fail_integrity(loopback):
    alice = IsingProblem(3, {0: 1.0}, {(0, 1): 1.0})
    bob = IsingProblem(3, {1: 2.0, 2: -1.0}, {(1, 2): 1.0})
    k_alice = SecretKey((0, 1, 0))
    k_bob = SecretKey((0, 0, 0))  # differs in the bit of qubit 1, which Bob's problem uses
    ss = combine_and_solve([encode_problem(alice, k_alice), encode_problem(bob, k_bob)], loopback, PARAMS)
    with pytest.raises(IntegrityError):
        decode_sampleset(ss, k_alice, alice + bob)


# --- transcripts ------------------------------------------------------------


def test_transcript_oblivious_to_encryption(tmp_path, rng):
    p = random_problem(rng, 9)
    k = keygen(9, rng)
    client_solve(p, k, LoopbackEndpoint(SolverService("sa", tmp_path / "a.bin")), PARAMS)
    solve_plain(encode_problem(p, k), LoopbackEndpoint(SolverService("sa", tmp_path / "b.bin")), PARAMS)
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()


def test_transcript_never_contains_key(tmp_path, rng):
    p = random_problem(rng, 9)
    k = keygen(9, rng)
    client_solve(p, k, LoopbackEndpoint(SolverService("sa", tmp_path / "a.bin")), PARAMS)
    data = (tmp_path / "a.bin").read_bytes()
    assert json.dumps(k.to_dict()).encode() not in data
    assert json.dumps(k.to_dict(), separators=(",", ":")).encode() not in data
    for msg in read_transcript(tmp_path / "a.bin"):
        assert '"x"' not in json.dumps(msg)


def test_exact_service_matches_direct_distribution(tmp_path, rng):
    p = random_problem(rng, 5)
    k = keygen(5, rng)
    params = AnnealParams(num_reads=20_000, sweeps=1, beta_initial=0.5, beta_final=0.5, seed=12)
    out = client_solve(p, k, LoopbackEndpoint(SolverService("exact")), params)
    probs = exact_boltzmann(p, 0.5).probabilities
    index = {tuple(s): i for i, s in enumerate(enumerate_states(5).tolist())}
    counts = np.zeros(32)
    for s in out.states.tolist():
        counts[index[tuple(s)]] += 1
    assert chisquare(counts, probs * counts.sum()).pvalue > 0.001
