"""Verifiable evaluation of a function on a private client input.

Two layers on top of the sampling protocol:

**Private evaluation** (:func:`run_sfvp`): the client wants the server
to end up with ``y = f(x)`` without learning ``x``.  The parties run
the *randomized* sampling protocol on the garbling map — the input is
the input-wire randomness ``rho``, the coins garble the tables — so
that the server's long output is a garbled circuit for ``f`` while
the client keeps ``rho``.  The client then encodes its private ``x``
under ``rho`` into per-wire keys, sends those (short, input-sized),
and the server degarbles to ``y``.  The server never sees ``x``; the
client never sees the tables; the sampling protocol's soundness says
the tables are honestly distributed, and degarbling authenticates
every row via its zero tag.

**Verified evaluation against a commitment** (:func:`run_sfvp2`): the
client has previously committed to ``x``.  After an evaluation phase
(the garbled path above when ``f`` is a circuit, or the chosen-input
sampling protocol when ``f`` is a native function), the server holds
``y`` and wants evidence that ``y = f(x)`` for the *committed* ``x``.
Each verification round, the server draws a fresh short hash ``h``,
sends ``(h, h(y))``, and the client proves knowledge of an opening
``(x, r)`` of the commitment with ``h(f(x)) = h(y)`` through a
pluggable argument-of-knowledge backend.  A client that evaluated on
some other input fails the digest comparison; one that opens a
different input fails the commitment check.  The first failed round
aborts the protocol.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from . import bits
from .circuits import Circuit
from .corpus import FunctionSpec, as_function
from .errors import DegarbleError, ProtocolOrderError, SfsLabError, WidthError
from .garbling import (
    circuit_encoding_bits,
    circuit_encoding_from_bits,
    circuit_encoding_to_bits,
    circuit_randomness_bits,
    degarble,
    garble_circuit,
    garble_input,
    input_encoding_bits,
    input_encoding_from_bits,
    input_encoding_to_bits,
    input_randomness_bits,
)
from .primitives import (
    CommitParams,
    commit,
    hash_eval,
    hash_from_bytes,
    hash_to_bytes,
    sample_commit_params,
    sample_commit_randomness,
    sample_hash,
    verify_opening,
)
from .runtime import TAG_CONTROL, ChannelEndpoint, SessionResult, run_session
from .sfs import (
    AdversaryHooks,
    SfsParams,
    derandomized_function,
    sfs_full_client,
    sfs_full_server,
    _make_backends,
)
from .succ_test import AokBackend

__all__ = [
    "SfvpOutcome",
    "sfvp_schedule",
    "garbling_function",
    "sfvp_client",
    "sfvp_server",
    "run_sfvp",
    "Sfvp2Setup",
    "Sfvp2ClientHooks",
    "consistency_rounds",
    "sfvp2_client",
    "sfvp2_server",
    "run_sfvp2",
]

logger = logging.getLogger("sfslab.sfvp")

_STATUS_CONTINUE = b"\x01"
_STATUS_ABORT = b"\x00"


@dataclass
class SfvpOutcome:
    """One party's view of a verifiable-evaluation run."""

    accepted: bool
    reason: str | None = None
    x: np.ndarray | None = None
    y: np.ndarray | None = None
    rounds: int = 0
    extra: dict[str, Any] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Private evaluation over the garbling map
# ---------------------------------------------------------------------------


def garbling_function(circuit: Circuit, kappa: int) -> FunctionSpec:
    """The randomized map whose output is a garbled circuit.

    Input: input-wire randomness (``n_inputs * kappa`` bits) followed
    by table coins (``2 * kappa * n_gates`` bits).  Output: the
    serialized tables and decode map.
    """
    n_rho = input_randomness_bits(circuit.n_inputs, kappa)
    n_coins = circuit_randomness_bits(len(circuit.gates), kappa)

    def batch(z: np.ndarray) -> np.ndarray:
        rows = []
        for row in z:
            ce = garble_circuit(circuit, row[:n_rho], row[n_rho:], kappa)
            rows.append(circuit_encoding_to_bits(ce))
        return (
            np.stack(rows)
            if rows
            else np.zeros((0, circuit_encoding_bits(circuit, kappa)), dtype=np.uint8)
        )

    return FunctionSpec(
        name=f"garble[{circuit.n_inputs}in,{len(circuit.gates)}g]",
        n_in=n_rho + n_coins,
        n_out=circuit_encoding_bits(circuit, kappa),
        batch=batch,
    )


def sfvp_schedule(circuit: Circuit, base: SfsParams) -> SfsParams:
    """Adapt a parameter set to the garbling map's arities.

    Tolerances, caps, and ``kappa`` carry over from ``base``; the
    input width becomes the input-wire randomness length and the
    output width the serialized-tables length.
    """
    return replace(
        base,
        n=input_randomness_bits(circuit.n_inputs, base.kappa),
        m=circuit_encoding_bits(circuit, base.kappa),
    )


def sfvp_client(
    chan: ChannelEndpoint,
    rng: np.random.Generator,
    circuit: Circuit,
    x: np.ndarray,
    schedule: SfsParams,
    backend: AokBackend,
    label: str = "",
) -> SfvpOutcome:
    """Client side: sample the garbling, keep rho, send the encoded input."""
    x = bits.as_bits(x)
    if x.size != circuit.n_inputs:
        raise WidthError(f"{circuit.name} takes {circuit.n_inputs} bits, got {x.size}")
    g = derandomized_function(garbling_function(circuit, schedule.kappa), schedule.n,
                              schedule.kappa)
    g_params = replace(schedule, n=schedule.n + schedule.kappa)
    out = sfs_full_client(chan, rng, g, g_params, backend, label=label)
    if not out.accepted:
        return SfvpOutcome(False, reason=f"sampling failed: {out.reason}")
    if out.x is None:
        chan.send(f"{label}sfvp.ie", _STATUS_ABORT, tag=TAG_CONTROL)
        return SfvpOutcome(False, reason="sampling carried no computation round")
    rho = out.x[: schedule.n]
    ie = garble_input(x, rho, schedule.kappa)
    chan.send(f"{label}sfvp.ie", bits.pack_bits(input_encoding_to_bits(ie)))
    return SfvpOutcome(True, x=x, extra={"rho": rho})


def sfvp_server(
    chan: ChannelEndpoint,
    rng: np.random.Generator,
    circuit: Circuit,
    schedule: SfsParams,
    backend: AokBackend,
    label: str = "",
    hooks: AdversaryHooks | None = None,
) -> SfvpOutcome:
    """Server side: receive the garbling, then degarble the encoded input."""
    g = derandomized_function(garbling_function(circuit, schedule.kappa), schedule.n,
                              schedule.kappa)
    g_params = replace(schedule, n=schedule.n + schedule.kappa)
    out = sfs_full_server(chan, rng, g, g_params, backend, label=label, hooks=hooks)
    if not out.accepted:
        return SfvpOutcome(False, reason=f"sampling failed: {out.reason}")
    tag, payload = chan.recv_any(f"{label}sfvp.ie")
    if tag == TAG_CONTROL:
        return SfvpOutcome(False, reason="sampling carried no computation round")
    if out.y is None:
        raise ProtocolOrderError("client sent an input encoding without an output")
    ce = circuit_encoding_from_bits(out.y, circuit, schedule.kappa)
    ie_bits = bits.unpack_bits(
        payload, input_encoding_bits(circuit.n_inputs, schedule.kappa)
    )
    ie = input_encoding_from_bits(ie_bits, circuit.n_inputs, schedule.kappa)
    try:
        y = degarble(circuit, ce, ie)
    except DegarbleError as exc:
        return SfvpOutcome(False, reason=f"degarble: {exc}")
    return SfvpOutcome(True, y=y)


def run_sfvp(
    f,
    x: np.ndarray,
    params: SfsParams,
    seed: int,
    backend_name: str = "reveal",
    hooks: AdversaryHooks | None = None,
) -> SessionResult:
    """Private evaluation in process.

    ``f`` must carry a circuit (garbling needs gates, not a black
    box).  ``params.n``/``params.m`` are adapted to the garbling map
    via :func:`sfvp_schedule`; tolerances and caps pass through.
    """
    f_spec = as_function(f)
    if f_spec.circuit is None:
        raise SfsLabError(f"{f_spec.name} has no circuit; private evaluation garbles gates")
    circuit = f_spec.circuit
    schedule = sfvp_schedule(circuit, params)
    cb, sb = _make_backends(backend_name)

    def client_fn(chan, rng):
        return sfvp_client(chan, rng, circuit, x, schedule, cb)

    def server_fn(chan, rng):
        return sfvp_server(chan, rng, circuit, schedule, sb, hooks=hooks)

    return run_session(client_fn, server_fn, seed)


# ---------------------------------------------------------------------------
# Verified evaluation against a commitment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Sfvp2Setup:
    """The commitment phase: public parameters, commitment, and opening.

    ``pp`` and ``com`` are public; ``x`` and ``r`` are the client's
    opening.  In the lab both parties receive the whole record and the
    server-side code reads only the public fields.
    """

    pp: CommitParams
    com: np.ndarray
    x: np.ndarray
    r: np.ndarray

    @classmethod
    def create(cls, x: np.ndarray, kappa: int, seed: int) -> "Sfvp2Setup":
        x = bits.as_bits(x)
        rng = np.random.Generator(np.random.PCG64(seed))
        pp = sample_commit_params(rng, x.size, kappa)
        r = sample_commit_randomness(rng, pp)
        return cls(pp=pp, com=commit(x, r, pp), x=x, r=r)


@dataclass
class Sfvp2ClientHooks:
    """Client-side deviations for soundness experiments.

    ``eval_input`` substitutes the input used in the evaluation phase;
    ``reveal_opening`` substitutes the opening presented in the
    verification rounds.  A hooked client also skips the honest
    self-check that would make it abort before being caught.
    """

    name: str = "honest"
    eval_input: np.ndarray | None = None
    reveal_opening: tuple[np.ndarray, np.ndarray] | None = None


def consistency_rounds(eps: float, cap: int | None) -> int:
    """Verification-round schedule, with the experimenters' cap."""
    rounds = math.ceil(256.0 / eps**3)
    if cap is not None and cap < rounds:
        logger.info(
            "verification capped at %d rounds (schedule wants %d)", cap, rounds
        )
        rounds = cap
    return rounds


def _opening_statement(h, c: np.ndarray, com: np.ndarray) -> bytes:
    return b"\x03" + hash_to_bytes(h) + bytes(bits.pack_bits(c)) + bytes(
        bits.pack_bits(com)
    )


def sfvp2_client(
    chan: ChannelEndpoint,
    rng: np.random.Generator,
    f: FunctionSpec,
    setup: Sfvp2Setup,
    params: SfsParams,
    backend: AokBackend,
    rounds_cap: int | None = None,
    hooks: Sfvp2ClientHooks | None = None,
    label: str = "",
) -> SfvpOutcome:
    """Client side: evaluation phase, then prove the committed opening."""
    hooks = hooks or Sfvp2ClientHooks()
    x_eval = setup.x if hooks.eval_input is None else bits.as_bits(hooks.eval_input)
    # --- evaluation phase ---
    if f.circuit is not None:
        schedule = sfvp_schedule(f.circuit, params)
        ev = sfvp_client(
            chan, rng, f.circuit, x_eval, schedule, backend, label=f"{label}e."
        )
    else:
        out = sfs_full_client(
            chan,
            rng,
            f,
            params,
            backend,
            label=f"{label}e.",
            chosen_inputs=(x_eval, x_eval),
        )
        ev = SfvpOutcome(out.accepted, reason=out.reason, x=out.x)
        if out.accepted and out.x is None:
            ev = SfvpOutcome(False, reason="sampling carried no computation round")
    if not ev.accepted:
        return SfvpOutcome(False, reason=f"evaluation: {ev.reason}")
    # --- verification phase ---
    x_rev, r_rev = (
        (setup.x, setup.r) if hooks.reveal_opening is None else hooks.reveal_opening
    )
    witness = bits.concat_bits(bits.as_bits(x_rev), bits.as_bits(r_rev))
    rounds = consistency_rounds(params.eps, rounds_cap)
    for j in range(rounds):
        data = chan.recv(f"{label}v{j}.hash")
        h = hash_from_bytes(data[: 24])
        c = bits.unpack_bits(data[24:], params.kappa)
        if hooks.eval_input is None and hooks.reveal_opening is None:
            # honest self-check: the server's digest must match f(x)
            if not bits.bits_equal(hash_eval(h, f.evaluate(setup.x)), c):
                chan.send(f"{label}v{j}.status", _STATUS_ABORT, tag=TAG_CONTROL)
                return SfvpOutcome(False, reason="server output mismatch", rounds=j)
        chan.send(f"{label}v{j}.status", _STATUS_CONTINUE, tag=TAG_CONTROL)
        backend.prove(
            chan, rng, f"{label}v{j}.aok", _opening_statement(h, c, setup.com), witness
        )
        flag = chan.recv(f"{label}v{j}.flag", expect_tag=TAG_CONTROL)
        if flag != b"\x01":
            return SfvpOutcome(False, reason="rejected", rounds=j + 1)
    return SfvpOutcome(True, x=setup.x, rounds=rounds)


def sfvp2_server(
    chan: ChannelEndpoint,
    rng: np.random.Generator,
    f: FunctionSpec,
    pp: CommitParams,
    com: np.ndarray,
    params: SfsParams,
    backend: AokBackend,
    rounds_cap: int | None = None,
    hooks: AdversaryHooks | None = None,
    label: str = "",
) -> SfvpOutcome:
    """Server side: obtain y, then verify it matches the commitment."""
    # --- evaluation phase ---
    if f.circuit is not None:
        schedule = sfvp_schedule(f.circuit, params)
        ev = sfvp_server(
            chan, rng, f.circuit, schedule, backend, label=f"{label}e.", hooks=hooks
        )
    else:
        out = sfs_full_server(
            chan, rng, f, params, backend, label=f"{label}e.", hooks=hooks
        )
        ev = SfvpOutcome(out.accepted, reason=out.reason, y=out.y)
        if out.accepted and out.y is None:
            ev = SfvpOutcome(False, reason="sampling carried no computation round")
    if not ev.accepted:
        return SfvpOutcome(False, reason=f"evaluation: {ev.reason}")
    y = ev.y
    # --- verification phase ---
    witness_bits = pp.n_bits + pp.randomness_bits
    rounds = consistency_rounds(params.eps, rounds_cap)
    for j in range(rounds):
        h = sample_hash(rng, f.n_out, params.kappa)
        c = hash_eval(h, y)
        chan.send(f"{label}v{j}.hash", hash_to_bytes(h) + bytes(bits.pack_bits(c)))
        status = chan.recv(f"{label}v{j}.status", expect_tag=TAG_CONTROL)
        if status != _STATUS_CONTINUE:
            return SfvpOutcome(False, reason="client abort", y=y, rounds=j)

        def predicate(w: np.ndarray, h=h, c=c) -> bool:
            x_w, r_w = w[: pp.n_bits], w[pp.n_bits :]
            return verify_opening(com, x_w, r_w, pp) and bits.bits_equal(
                hash_eval(h, f.evaluate(x_w)), c
            )

        ok = backend.verify(
            chan,
            rng,
            f"{label}v{j}.aok",
            _opening_statement(h, c, com),
            witness_bits,
            predicate,
        )
        chan.send(f"{label}v{j}.flag", b"\x01" if ok else b"\x00", tag=TAG_CONTROL)
        if not ok:
            return SfvpOutcome(False, reason="opening rejected", y=y, rounds=j + 1)
    return SfvpOutcome(True, y=y, rounds=rounds)


def run_sfvp2(
    f,
    setup: Sfvp2Setup,
    params: SfsParams,
    seed: int,
    backend_name: str = "reveal",
    rounds_cap: int | None = None,
    client_hooks: Sfvp2ClientHooks | None = None,
    server_hooks: AdversaryHooks | None = None,
) -> SessionResult:
    """Verified evaluation in process.

    ``params`` drives the evaluation phase (``n``/``m`` must match
    ``f`` for native functions; the garbled path adapts them) and its
    ``eps`` sets the verification-round schedule, truncatable via
    ``rounds_cap``.
    """
    f_spec = as_function(f)
    if f_spec.circuit is None and (params.n, params.m) != (f_spec.n_in, f_spec.n_out):
        raise WidthError(
            f"params are {params.n}->{params.m} but {f_spec.name} is "
            f"{f_spec.n_in}->{f_spec.n_out}"
        )
    if setup.pp.n_bits != f_spec.n_in:
        raise WidthError("commitment width does not match the function input")
    cb, sb = _make_backends(backend_name)

    def client_fn(chan, rng):
        return sfvp2_client(
            chan, rng, f_spec, setup, params, cb, rounds_cap, client_hooks
        )

    def server_fn(chan, rng):
        return sfvp2_server(
            chan,
            rng,
            f_spec,
            setup.pp,
            setup.com,
            params,
            sb,
            rounds_cap,
            server_hooks,
        )

    return run_session(client_fn, server_fn, seed)
