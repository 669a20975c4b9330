"""Succinct relation testing with late statement reveal.

A prover holding a long witness ``w`` convinces a verifier that
``R(x, w) = 1`` while the wire traffic stays *succinct*: the witness
itself never has to cross the channel, and the statement input ``x``
is revealed only after the prover is bound to its witness.  The flow:

1. the verifier samples a fresh compressing hash ``h`` and sends it;
2. the prover answers with the digest ``c = h(w)``;
3. an argument of knowledge for "I know ``w`` with ``h(w) = c``";
4. the verifier reveals ``x``;
5. an argument of knowledge for "I know ``w`` with ``R(x, w) = 1``
   and ``h(w) = c``";
6. the verifier sends its accept/reject flag.

The late reveal is the point of the protocol: the digest plus the
first argument pin the witness down before ``x`` is known, which is
what lets larger protocols built on top treat the prover's long
output as committed.  :func:`assert_reveal_after_binding` checks this
ordering on recorded transcripts.

Arguments of knowledge are pluggable byte-accounted backends.  Two
ship:

* ``reveal`` — the prover transmits ``w`` outright.  Sound and
  complete, but each argument costs ``~witness_bits/8`` bytes: the
  baseline that makes succinctness measurable.
* ``merkle-oracle`` — the prover Merkle-commits to the witness bits
  (tree padded to a fixed leaf capacity, so proofs have constant
  depth) and opens a fixed number of verifier-chosen leaves.  Wire
  bytes are *independent of the witness length*.  Soundness is
  supplied by a harness shortcut: the verifier checks the full
  witness through an in-process oracle the prover registers.  This
  keeps the byte accounting honest while standing in for a real
  succinct argument, and it is why this backend only works in
  process — over TCP the oracle is absent and raises
  :class:`~sfslab.errors.OracleAccessError`.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import bits
from .errors import OracleAccessError, ProtocolOrderError, SfsLabError, WidthError
from .primitives import (
    HashFn,
    hash_eval,
    hash_from_bytes,
    hash_to_bytes,
    merkle_build,
    merkle_depth,
    merkle_prove,
    merkle_verify,
    sample_hash,
)
from .runtime import TAG_CONTROL, ChannelEndpoint, SessionResult, Transcript, run_session

__all__ = [
    "RelationSpec",
    "AokBackend",
    "RevealAok",
    "MerkleOracleAok",
    "WitnessOracle",
    "get_aok_backend",
    "AOK_BACKENDS",
    "STATEMENT_PREIMAGE",
    "STATEMENT_RELATION",
    "encode_preimage_statement",
    "encode_relation_statement",
    "succ_test_client",
    "succ_test_server",
    "run_succ_test",
    "assert_reveal_after_binding",
    "MERKLE_LEAF_CAP",
    "MERKLE_CHALLENGES",
]

MERKLE_LEAF_CAP = 2048
MERKLE_CHALLENGES = 16

STATEMENT_PREIMAGE = 0x01
STATEMENT_RELATION = 0x02


@dataclass(frozen=True)
class RelationSpec:
    """A relation ``R(x, w)`` with a fixed witness width.

    ``x`` stays an opaque byte string at this layer; ``check`` decodes
    it and decides the relation.  Only the verifier evaluates
    ``check`` — the backends' job is to bind the prover to ``w``.
    """

    name: str
    witness_bits: int
    check: Callable[[bytes, np.ndarray], bool]


def encode_preimage_statement(h: HashFn, c: np.ndarray) -> bytes:
    """Statement bytes for "exists w with h(w) = c"."""
    return bytes([STATEMENT_PREIMAGE]) + hash_to_bytes(h) + bits.pack_bits(c)


def encode_relation_statement(h: HashFn, c: np.ndarray, x_payload: bytes) -> bytes:
    """Statement bytes for "exists w with R(x, w) = 1 and h(w) = c"."""
    return (
        bytes([STATEMENT_RELATION])
        + hash_to_bytes(h)
        + bits.pack_bits(c)
        + len(x_payload).to_bytes(4, "big")
        + x_payload
    )


# ---------------------------------------------------------------------------
# Argument-of-knowledge backends
# ---------------------------------------------------------------------------


class AokBackend:
    """Interface: a prover/verifier pair bound to a byte-encoded statement."""

    name: str = "abstract"

    def prove(
        self,
        chan: ChannelEndpoint,
        rng: np.random.Generator,
        label: str,
        statement: bytes,
        w: np.ndarray,
    ) -> None:
        raise NotImplementedError

    def verify(
        self,
        chan: ChannelEndpoint,
        rng: np.random.Generator,
        label: str,
        statement: bytes,
        witness_bits: int,
        predicate: Callable[[np.ndarray], bool],
    ) -> bool:
        raise NotImplementedError


class RevealAok(AokBackend):
    """Transmit the witness; the verifier checks the predicate directly."""

    name = "reveal"

    def prove(self, chan, rng, label, statement, w):
        chan.send(f"{label}.witness", bits.pack_bits(w))

    def verify(self, chan, rng, label, statement, witness_bits, predicate):
        data = chan.recv(f"{label}.witness")
        try:
            w = bits.unpack_bits(data, witness_bits)
        except WidthError:
            return False
        return bool(predicate(w))


class WitnessOracle:
    """In-process side channel granting the verifier the prover's witness.

    A stand-in for the knowledge extractor of a real argument system:
    it exists so the laboratory can enforce soundness while measuring
    only the succinct wire bytes.  Nothing crosses the network — over
    TCP the verifier's read fails.
    """

    def __init__(self) -> None:
        self._store: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    def put(self, label: str, w: np.ndarray) -> None:
        with self._lock:
            self._store[label] = bits.as_bits(w).copy()

    def get(self, label: str) -> np.ndarray:
        with self._lock:
            if label not in self._store:
                raise OracleAccessError(
                    f"no witness registered under {label!r}; the merkle-oracle "
                    "backend only works in process (use the reveal backend over TCP)"
                )
            return self._store[label]


class MerkleOracleAok(AokBackend):
    """Constant-size Merkle spot-checks plus the harness witness oracle.

    The tree is always padded to ``leaf_cap`` leaves, so roots and
    opening proofs have the same size for every witness length up to
    the cap — the property the byte-accounting experiments measure.
    """

    name = "merkle-oracle"

    def __init__(
        self,
        oracle: WitnessOracle | None = None,
        leaf_cap: int = MERKLE_LEAF_CAP,
        n_challenges: int = MERKLE_CHALLENGES,
    ):
        self.oracle = oracle if oracle is not None else WitnessOracle()
        self.leaf_cap = leaf_cap
        self.n_challenges = n_challenges
        self.depth = merkle_depth(leaf_cap)

    def _leaves(self, w: np.ndarray) -> list[bytes]:
        if w.size > self.leaf_cap:
            raise WidthError(
                f"witness of {w.size} bits exceeds the leaf capacity {self.leaf_cap}"
            )
        pad = self.leaf_cap - w.size
        return [bytes([int(b)]) for b in w] + [b"\xff"] * pad

    def prove(self, chan, rng, label, statement, w):
        w = bits.as_bits(w)
        self.oracle.put(label, w)
        tree = merkle_build(self._leaves(w))
        chan.send(f"{label}.root", tree.root)
        data = chan.recv(f"{label}.challenge")
        if len(data) != 4 * self.n_challenges:
            raise WidthError(
                f"expected {self.n_challenges} u32 challenges, got {len(data)} bytes"
            )
        for j in range(self.n_challenges):
            idx = int.from_bytes(data[4 * j : 4 * j + 4], "big")
            if not 0 <= idx < w.size:
                raise WidthError(f"challenge index {idx} outside the witness")
            proof = b"".join(merkle_prove(tree, idx))
            chan.send(f"{label}.proof", bytes([int(w[idx])]) + proof)

    def verify(self, chan, rng, label, statement, witness_bits, predicate):
        root = chan.recv(f"{label}.root")
        indices = [int(v) for v in rng.integers(0, witness_bits, size=self.n_challenges)]
        chan.send(
            f"{label}.challenge",
            b"".join(idx.to_bytes(4, "big") for idx in indices),
        )
        opened: list[tuple[int, int]] = []
        ok = len(root) == 32
        for idx in indices:
            data = chan.recv(f"{label}.proof")
            if len(data) != 1 + 32 * self.depth or data[0] not in (0, 1):
                ok = False
                continue
            leaf, path = data[:1], [
                data[1 + 32 * i : 1 + 32 * (i + 1)] for i in range(self.depth)
            ]
            if not merkle_verify(root, self.leaf_cap, idx, leaf, path):
                ok = False
            opened.append((idx, data[0]))
        # Soundness shortcut: read the full witness through the harness
        # oracle and hold the opened leaves to it.
        w = self.oracle.get(label)
        if w.size != witness_bits:
            return False
        for idx, bit in opened:
            if int(w[idx]) != bit:
                ok = False
        return ok and bool(predicate(w))


AOK_BACKENDS = ("reveal", "merkle-oracle")


def get_aok_backend(name: str, oracle: WitnessOracle | None = None) -> AokBackend:
    """Instantiate a backend by name (CLI and config entry point)."""
    if name == "reveal":
        return RevealAok()
    if name == "merkle-oracle":
        return MerkleOracleAok(oracle=oracle)
    raise SfsLabError(f"unknown argument backend {name!r}; choose from {AOK_BACKENDS}")


# ---------------------------------------------------------------------------
# The protocol
# ---------------------------------------------------------------------------


def succ_test_client(
    chan: ChannelEndpoint,
    rng: np.random.Generator,
    relation: RelationSpec,
    x_payload: bytes,
    kappa: int,
    backend: AokBackend,
    label: str = "succ",
) -> bool:
    """Verifier side: sample the hash, check both arguments, reveal late."""
    h = sample_hash(rng, relation.witness_bits, kappa)
    chan.send(f"{label}.hash", hash_to_bytes(h))
    c_data = chan.recv(f"{label}.digest")
    try:
        c = bits.unpack_bits(c_data, kappa)
    except WidthError:
        c = None
    if c is None:
        chan.send(f"{label}.flag", b"\x00", tag=TAG_CONTROL)
        return False
    stmt1 = encode_preimage_statement(h, c)
    ok1 = backend.verify(
        chan,
        rng,
        f"{label}.aok1",
        stmt1,
        relation.witness_bits,
        lambda w: bits.bits_equal(hash_eval(h, w), c),
    )
    if not ok1:
        chan.send(f"{label}.flag", b"\x00", tag=TAG_CONTROL)
        return False
    chan.send(f"{label}.reveal", x_payload)
    stmt2 = encode_relation_statement(h, c, x_payload)
    ok2 = backend.verify(
        chan,
        rng,
        f"{label}.aok2",
        stmt2,
        relation.witness_bits,
        lambda w: bool(relation.check(x_payload, w))
        and bits.bits_equal(hash_eval(h, w), c),
    )
    chan.send(f"{label}.flag", b"\x01" if ok2 else b"\x00", tag=TAG_CONTROL)
    return ok2


def succ_test_server(
    chan: ChannelEndpoint,
    rng: np.random.Generator,
    w: np.ndarray,
    backend: AokBackend,
    label: str = "succ",
    witness_map: Callable[[str, np.ndarray], np.ndarray] | None = None,
) -> bool:
    """Prover side: bind to the witness, then prove the revealed relation.

    ``witness_map`` (labels ``"aok1"``/``"aok2"``) substitutes the
    witness handed to each argument of knowledge — an honest prover
    leaves it unset; a cheating prover can use it to try swapping
    witnesses after binding.  Returns the verifier's flag
    (True = accepted).
    """
    w = bits.as_bits(w)
    h = hash_from_bytes(chan.recv(f"{label}.hash"))
    if h.in_bits != w.size:
        raise WidthError(
            f"verifier hashed {h.in_bits} witness bits, prover holds {w.size}"
        )
    c = hash_eval(h, w)
    chan.send(f"{label}.digest", bits.pack_bits(c))
    w1 = w if witness_map is None else bits.as_bits(witness_map("aok1", w))
    backend.prove(chan, rng, f"{label}.aok1", encode_preimage_statement(h, c), w1)
    tag, payload = chan.recv_any(f"{label}.reveal")
    if tag == TAG_CONTROL:
        return payload == b"\x01"
    x_payload = payload
    w2 = w if witness_map is None else bits.as_bits(witness_map("aok2", w))
    backend.prove(
        chan, rng, f"{label}.aok2", encode_relation_statement(h, c, x_payload), w2
    )
    flag = chan.recv(f"{label}.flag", expect_tag=TAG_CONTROL)
    return flag == b"\x01"


def run_succ_test(
    relation: RelationSpec,
    x_payload: bytes,
    w: np.ndarray,
    seed: int,
    kappa: int = 16,
    backend_name: str = "reveal",
) -> SessionResult:
    """Run one complete protocol in process (shared oracle wired up)."""
    oracle = WitnessOracle()
    client_backend = get_aok_backend(backend_name, oracle)
    server_backend = (
        client_backend
        if backend_name != "merkle-oracle"
        else MerkleOracleAok(oracle=oracle)
    )

    def client_fn(chan, rng):
        return succ_test_client(chan, rng, relation, x_payload, kappa, client_backend)

    def server_fn(chan, rng):
        return succ_test_server(chan, rng, w, server_backend)

    return run_session(client_fn, server_fn, seed)


def assert_reveal_after_binding(transcript: Transcript) -> None:
    """Check the late-reveal ordering on a recorded transcript.

    For every ``<prefix>.reveal`` entry there must be an earlier
    ``<prefix>.digest`` and at least one earlier ``<prefix>.aok1*``
    entry since the most recent ``<prefix>.hash``.  Raises
    :class:`~sfslab.errors.ProtocolOrderError` on violation.
    """
    digest_seen: dict[str, bool] = {}
    aok1_seen: dict[str, bool] = {}
    for entry in transcript.entries:
        step = entry.step
        if step.endswith(".hash"):
            prefix = step[: -len(".hash")]
            digest_seen[prefix] = False
            aok1_seen[prefix] = False
        elif step.endswith(".digest"):
            digest_seen[step[: -len(".digest")]] = True
        elif ".aok1" in step:
            aok1_seen[step.split(".aok1", 1)[0]] = True
        elif step.endswith(".reveal"):
            prefix = step[: -len(".reveal")]
            if not digest_seen.get(prefix) or not aok1_seen.get(prefix):
                raise ProtocolOrderError(
                    f"statement revealed at {step!r} before the prover was bound"
                )
