"""Client/solver protocol for encrypted annealing.

Wire format: each message is a 4-byte big-endian length followed by that many
bytes of UTF-8 JSON, ``{"type": ..., "body": ...}``.  Requests have type
``"solve"`` or ``"combine"``; a successful reply repeats the request type and
carries a :class:`SolveResponse`; failures reply with type ``"error"`` and a
body ``{"code": ..., "message": ...}``.

None of the message types has a field for a key, and parsing rejects unknown
fields, so a key cannot travel to the solver.  The solver appends every
request and reply frame, byte for byte, to its transcript: that file is all
the untrusted party ever sees.
"""
from __future__ import annotations

import json
import logging
import socket
import socketserver
import struct
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .embedding import Embedding, embed_problem, unembed
from .gauge import SecretKey, combine_encrypted, decode_sampleset, encode_initial_state, encode_problem
from .io import dumps
from .ising import DimensionError, IsingProblem, SampleSet, as_spins
from .samplers import AnnealParams, sample_exact, simulated_annealing
from .topology import Topology

__all__ = [
    "CombineRequest",
    "LoopbackEndpoint",
    "ProtocolError",
    "SolveRequest",
    "SolveResponse",
    "SolverError",
    "SolverService",
    "TcpEndpoint",
    "client_solve",
    "combine_and_solve",
    "read_transcript",
    "serve",
    "solve_plain",
]

log = logging.getLogger(__name__)

HEADER = struct.Struct("!I")
MAX_MESSAGE = 256 * 1024 * 1024


class ProtocolError(ValueError):
    """A message that does not follow the wire format or schema."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class SolverError(RuntimeError):
    """The solver answered with an error message."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


def frame(payload: bytes) -> bytes:
    if len(payload) > MAX_MESSAGE:
        raise ProtocolError("too_large", f"message of {len(payload)} bytes exceeds limit")
    return HEADER.pack(len(payload)) + payload


def encode_message(kind: str, body) -> bytes:
    return dumps({"type": kind, "body": body}).encode("utf-8")


def decode_message(payload: bytes) -> tuple[str, dict]:
    try:
        msg = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError("bad_json", str(exc)) from None
    if not isinstance(msg, dict) or set(msg) != {"type", "body"}:
        raise ProtocolError("bad_envelope", "expected an object with exactly 'type' and 'body'")
    return msg["type"], msg["body"]


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return bytes(buf)


def recv_frame(sock: socket.socket) -> bytes | None:
    """Read one framed payload; None on a clean close before the header."""
    header = _recv_exact(sock, HEADER.size)
    if header is None:
        return None
    (size,) = HEADER.unpack(header)
    if size > MAX_MESSAGE:
        raise ProtocolError("too_large", f"announced message of {size} bytes exceeds limit")
    payload = _recv_exact(sock, size)
    if payload is None:
        raise ProtocolError("truncated", "connection closed mid-message")
    return payload


def _only(body, allowed: set[str], required: set[str]) -> Mapping:
    if not isinstance(body, dict):
        raise ProtocolError("bad_request", "body must be an object")
    extra = set(body) - allowed
    if extra:
        raise ProtocolError("bad_request", f"unexpected fields {sorted(extra)}")
    missing = required - set(body)
    if missing:
        raise ProtocolError("bad_request", f"missing fields {sorted(missing)}")
    return body


@dataclass(frozen=True)
class SolveRequest:
    problem: IsingProblem
    params: AnnealParams = field(default_factory=AnnealParams)
    reverse_init: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.reverse_init is not None:
            s = as_spins(self.reverse_init, self.problem.n)
            object.__setattr__(self, "reverse_init", tuple(int(x) for x in s))

    def to_dict(self) -> dict:
        d = {"problem": self.problem.to_dict(), "params": self.params.to_dict()}
        if self.reverse_init is not None:
            d["reverse_init"] = list(self.reverse_init)
        return d

    @classmethod
    def from_dict(cls, body) -> "SolveRequest":
        body = _only(body, {"problem", "params", "reverse_init"}, {"problem", "params"})
        return cls(
            IsingProblem.from_dict(body["problem"]),
            AnnealParams.from_dict(body["params"]),
            body.get("reverse_init"),
        )


@dataclass(frozen=True)
class CombineRequest:
    """Encoded problems from several parties to be summed and solved."""

    problems: tuple[IsingProblem, ...]
    params: AnnealParams = field(default_factory=AnnealParams)

    def to_dict(self) -> dict:
        return {"problems": [p.to_dict() for p in self.problems], "params": self.params.to_dict()}

    @classmethod
    def from_dict(cls, body) -> "CombineRequest":
        body = _only(body, {"problems", "params"}, {"problems", "params"})
        problems = tuple(IsingProblem.from_dict(p) for p in body["problems"])
        if len(problems) < 2:
            raise ProtocolError("bad_request", "combine needs at least two problems")
        return cls(problems, AnnealParams.from_dict(body["params"]))


@dataclass(frozen=True, eq=False)
class SolveResponse:
    sampleset: SampleSet
    solver_info: str = ""

    def to_dict(self) -> dict:
        return {"sampleset": self.sampleset.to_dict(), "solver_info": self.solver_info}

    @classmethod
    def from_dict(cls, body) -> "SolveResponse":
        body = _only(body, {"sampleset", "solver_info"}, {"sampleset"})
        return cls(SampleSet.from_dict(body["sampleset"]), body.get("solver_info", ""))


class SolverService:
    """The untrusted solver: samples whatever problem it receives.

    Args:
        sampler: ``"sa"`` for simulated annealing, ``"exact"`` to draw from
            the exact Gibbs distribution at ``params.beta_final``.
        transcript: File that receives every request and reply frame.
    """

    def __init__(self, sampler: str = "sa", transcript: str | Path | None = None):
        if sampler not in ("sa", "exact"):
            raise ValueError(f"unknown sampler {sampler!r}")
        self.sampler = sampler
        self.transcript = Path(transcript) if transcript is not None else None
        self._lock = threading.Lock()

    def _sample(self, problem: IsingProblem, params: AnnealParams, reverse_init=None) -> SampleSet:
        if self.sampler == "exact":
            return sample_exact(problem, params.beta_final, params.num_reads, params.seed)
        return simulated_annealing(problem, params, reverse_init)

    def _dispatch(self, kind: str, body) -> SolveResponse:
        if kind == "solve":
            req = SolveRequest.from_dict(body)
            ss = self._sample(req.problem, req.params, req.reverse_init)
        elif kind == "combine":
            req = CombineRequest.from_dict(body)
            try:
                combined = combine_encrypted(*req.problems)
            except DimensionError as exc:
                raise ProtocolError("dimension", str(exc)) from None
            ss = self._sample(combined, req.params)
        else:
            raise ProtocolError("unknown_type", f"unknown message type {kind!r}")
        return SolveResponse(ss, f"isingcrypt-{self.sampler}")

    def handle(self, payload: bytes) -> bytes:
        """Answer one request payload; never raises."""
        try:
            kind, body = decode_message(payload)
            reply = encode_message(kind, self._dispatch(kind, body).to_dict())
        except ProtocolError as exc:
            reply = encode_message("error", {"code": exc.code, "message": str(exc)})
        except (ValueError, KeyError, TypeError) as exc:
            reply = encode_message("error", {"code": "bad_request", "message": str(exc)})
        except Exception as exc:  # keep serving
            log.exception("solver failure")
            reply = encode_message("error", {"code": "internal", "message": str(exc)})
        self._record(payload, reply)
        return reply

    def _record(self, request: bytes, reply: bytes) -> None:
        if self.transcript is None:
            return
        with self._lock, open(self.transcript, "ab") as fh:
            fh.write(frame(request))
            fh.write(frame(reply))


def read_transcript(path: str | Path) -> list[dict]:
    """Decode a transcript file into its alternating request/reply messages."""
    data = Path(path).read_bytes()
    out, pos = [], 0
    while pos < len(data):
        (size,) = HEADER.unpack_from(data, pos)
        pos += HEADER.size
        out.append(json.loads(data[pos : pos + size].decode("utf-8")))
        pos += size
    return out


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        service: SolverService = self.server.service  # type: ignore[attr-defined]
        while True:
            try:
                payload = recv_frame(self.request)
            except ProtocolError as exc:
                err = encode_message("error", {"code": exc.code, "message": str(exc)})
                self.request.sendall(frame(err))
                return
            except OSError:
                return
            if payload is None:
                return
            self.request.sendall(frame(service.handle(payload)))


class _Server(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


def serve(address: tuple[str, int], service: SolverService, background: bool = True) -> socketserver.ThreadingTCPServer:
    """Start a TCP solver.

    With ``background=True`` the server runs in a daemon thread and is
    returned; call ``shutdown()`` and ``server_close()`` to stop it.  Port 0
    picks a free port, available as ``server.server_address``.
    """
    server = _Server(address, _Handler)
    server.service = service  # type: ignore[attr-defined]
    if background:
        threading.Thread(target=server.serve_forever, daemon=True).start()
    else:
        server.serve_forever()
    return server


class LoopbackEndpoint:
    """In-process endpoint that still goes through the byte-level protocol."""

    def __init__(self, service: SolverService):
        self.service = service

    def exchange(self, payload: bytes) -> bytes:
        return self.service.handle(payload)


class TcpEndpoint:
    def __init__(self, host: str, port: int, timeout: float | None = 600.0):
        self.host, self.port, self.timeout = host, int(port), timeout

    @classmethod
    def parse(cls, text: str) -> "TcpEndpoint":
        host, _, port = text.rpartition(":")
        return cls(host or "127.0.0.1", int(port))

    def exchange(self, payload: bytes) -> bytes:
        with socket.create_connection((self.host, self.port), timeout=self.timeout) as sock:
            sock.sendall(frame(payload))
            reply = recv_frame(sock)
        if reply is None:
            raise ConnectionError("solver closed the connection without replying")
        return reply


def _roundtrip(endpoint, kind: str, body: dict) -> SampleSet:
    reply_kind, reply = decode_message(endpoint.exchange(encode_message(kind, body)))
    if reply_kind == "error":
        raise SolverError(reply.get("code", "unknown"), reply.get("message", ""))
    if reply_kind != kind:
        raise ProtocolError("bad_reply", f"asked {kind!r}, got {reply_kind!r}")
    return SolveResponse.from_dict(reply).sampleset


def solve_plain(problem: IsingProblem, endpoint, params: AnnealParams | None = None, reverse_init=None) -> SampleSet:
    """Send ``problem`` as is, without encryption, and return the raw samples."""
    req = SolveRequest(problem, params or AnnealParams(), reverse_init)
    ss = _roundtrip(endpoint, "solve", req.to_dict())
    if ss.num_variables != problem.n:
        raise DimensionError(f"solver returned {ss.num_variables} spins for n={problem.n}")
    return ss


def client_solve(
    p: IsingProblem,
    key: SecretKey,
    endpoint,
    params: AnnealParams | None = None,
    embedding: Embedding | None = None,
    topology: Topology | None = None,
    chain_strength: float | None = None,
    reverse_init=None,
) -> SampleSet:
    """Solve ``p`` on an untrusted solver without revealing it.

    Encodes ``p`` with ``key``, embeds the encoded logical problem when an
    embedding is given, sends it, unembeds the reply and decodes it.  The
    returned samples are plaintext logical states with energies under ``p``.

    Raises:
        IntegrityError: decoded energies disagree with the reported ones.
    """
    if key.n != p.n:
        raise DimensionError(f"key of length {key.n} for problem with n={p.n}")
    if (embedding is None) != (topology is None):
        raise ValueError("embedding and topology go together")
    encoded = encode_problem(p, key)
    sent = encoded
    init = None if reverse_init is None else encode_initial_state(reverse_init, key)
    if embedding is not None:
        sent = embed_problem(encoded, embedding, topology, chain_strength)
        if init is not None:
            init = _spread_state(init, embedding, topology.num_qubits)
    raw = solve_plain(sent, endpoint, params, init)
    if embedding is not None:
        raw, stats = unembed(raw, embedding, encoded)
        log.debug("chain break fraction %.4f", stats.break_fraction)
    return decode_sampleset(raw, key, p)


def _spread_state(state, e: Embedding, num_qubits: int) -> np.ndarray:
    out = np.ones(num_qubits, dtype=np.int8)
    for v, chain in e.chains.items():
        out[list(chain)] = state[v]
    return out


def combine_and_solve(
    problems: Sequence[IsingProblem],
    endpoint,
    params: AnnealParams | None = None,
) -> SampleSet:
    """Have the solver sum several parties' encoded problems and sample the sum.

    Returns the encrypted samples; any holder of the shared key decodes them
    with ``decode_sampleset`` against the sum of the plaintext problems.
    """
    ns = {p.n for p in problems}
    if len(ns) != 1:
        raise DimensionError(f"problems have different sizes {sorted(ns)}")
    req = CombineRequest(tuple(problems), params or AnnealParams())
    return _roundtrip(endpoint, "combine", req.to_dict())
