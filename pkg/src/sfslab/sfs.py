"""Secure sampling of long function outputs over a short quantum channel.

The client wants a server to end up holding ``y = f(x)`` for an input
``x`` the client controls, with three properties at once: the wire
traffic stays *short* (independent of the output length ``m``), the
server learns nothing about ``x`` beyond ``f``'s public description,
and a cheating server that deviates from the honest evaluation gets
caught.  The protocol comes in two session types sharing steps 1–2:

1. The client prepares a two-branch state over registers
   ``(sub, in, inpad, outpad)``: branch ``b`` carries a selection bit
   ``b``, a candidate input ``x_b``, and two private pads.  Width is
   ``1 + n + 2*kappa`` — no output register travels.

2. The server appends an ``m``-qubit zero register, XORs ``f`` of the
   input register into it, then measures ``(in, inpad)`` in the
   Hadamard basis and reports the outcome ``d``.  This consumes the
   input register while teleporting its influence into branch phases
   ``theta_b = d_in . x_b  XOR  d_inpad . r_b_in``; the client fails
   the session if ``d_inpad = 0`` (the pad no longer hides ``x_b``'s
   contribution), which for honest servers happens with probability
   ``2^-kappa``.

*Test* sessions then flip a coin and ask the server to measure its
residual state ``(sub, outpad, out)`` in either the computational
basis (checking the outcome is a branch-consistent
``b || r_b_out || f(x_b)``) or the Hadamard basis (checking the
outcome parity against ``theta_0 XOR theta_1`` — an interference
check no classical cheating strategy passes reliably).  Either check
is settled by the succinct relation test
(:mod:`sfslab.succ_test`), so the long measurement outcome never
crosses the wire.

*Computation* sessions instead measure only ``(sub, outpad)``; the
reported ``b || pad`` authenticates which branch survived, the client
keeps ``x_b``, and the server's residual ``out`` register holds
``f(x_b)`` — the long output, sampled without ever being transmitted.

Amplification runs many sessions and keeps one computation round: an
inner stage mixes test rounds in with probability ``p`` and returns a
uniformly chosen computation round, and an outer stage repeats the
inner stage and keeps one repetition.  Round counts follow fixed
polynomial schedules in the tolerance gap; experiments override them
with explicit caps (always logged).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable

import numpy as np

from . import bits
from .corpus import FunctionSpec, as_function
from .errors import ProtocolOrderError, SfsLabError, WidthError
from .primitives import prg_expand
from .runtime import (
    TAG_CONTROL,
    TAG_STATE,
    ChannelEndpoint,
    SessionResult,
    run_session,
)
from .sparse_qsim import (
    RegisterLayout,
    SparseState,
    append_zero_segment,
    apply_classical_oracle,
    basis_from_segments,
    deserialize_state,
    make_branch_pair,
    measure_computational,
    measure_hadamard,
    serialize_state,
)
from .succ_test import (
    AokBackend,
    MerkleOracleAok,
    RelationSpec,
    WitnessOracle,
    get_aok_backend,
    succ_test_client,
    succ_test_server,
)

__all__ = [
    "SfsParams",
    "ClientSecrets",
    "SfsOutcome",
    "AdversaryHooks",
    "state_layout",
    "sample_secrets",
    "build_client_state",
    "branch_phases",
    "make_comp_relation",
    "make_had_relation",
    "sfs_test_client",
    "sfs_test_server",
    "sfs_comp_client",
    "sfs_comp_server",
    "sfs_temp_client",
    "sfs_temp_server",
    "sfs_full_client",
    "sfs_full_server",
    "run_sfs_test",
    "run_sfs_comp",
    "run_sfs_temp",
    "run_sfs",
    "run_sfs_randomized",
    "derandomized_function",
    "MODE_COMP_TEST",
    "MODE_HAD_TEST",
    "MODE_COMP_RUN",
]

logger = logging.getLogger("sfslab.sfs")

MODE_COMP_TEST = 0x00
MODE_HAD_TEST = 0x01
MODE_COMP_RUN = 0x02

_FINAL_ABORT = 0x00
_FINAL_SELECT = 0x01
_FINAL_DEGENERATE = 0x02


@dataclass(frozen=True)
class SfsParams:
    """Protocol parameters shared by both parties.

    ``eps`` is the soundness tolerance the amplified protocol should
    reach and ``eps0`` the base tolerance granted to a single session;
    when ``eps0`` is omitted it defaults to ``delta ** 0.25``, a
    heuristic that keeps the schedules finite for lab-sized ``delta``.
    ``rounds_cap``/``reps_cap`` truncate the inner/outer schedules for
    experiments (every truncation is logged), and ``test_prob``
    overrides the computed test-round probability.
    """

    n: int
    m: int
    kappa: int = 16
    eps: float = 0.5
    delta: float = 0.01
    eps0: float | None = None
    rounds_cap: int | None = None
    reps_cap: int | None = None
    test_prob: float | None = None

    def __post_init__(self) -> None:
        if self.n < 1 or self.m < 1 or self.kappa < 1:
            raise SfsLabError("n, m, kappa must all be >= 1")
        if not 0 < self.delta < 1:
            raise SfsLabError("delta must be in (0, 1)")
        if not 0 < self.eps <= 1:
            raise SfsLabError("eps must be in (0, 1]")

    @property
    def base_tolerance(self) -> float:
        eps0 = self.eps0 if self.eps0 is not None else self.delta**0.25
        if not 0 <= eps0 < self.eps:
            raise SfsLabError(
                f"base tolerance {eps0} must be below the target {self.eps}"
            )
        return eps0

    def temp_schedule(self) -> tuple[int, float]:
        """(round count, test probability) for the inner amplification stage."""
        gap = self.eps - self.base_tolerance
        rounds = math.ceil(512.0 / (self.delta * gap**3))
        if self.rounds_cap is not None and self.rounds_cap < rounds:
            logger.info(
                "inner stage capped at %d rounds (schedule wants %d)",
                self.rounds_cap,
                rounds,
            )
            rounds = self.rounds_cap
        p = gap / 8.0
        if self.test_prob is not None:
            logger.info(
                "test probability overridden to %g (schedule wants %g)",
                self.test_prob,
                p,
            )
            p = self.test_prob
        return rounds, p

    def full_schedule(self) -> tuple[int, "SfsParams"]:
        """(repetition count, inner-stage parameters) for the outer stage."""
        eps0 = self.base_tolerance
        gap = self.eps - eps0
        reps = math.ceil(1728.0 / gap**3)
        if self.reps_cap is not None and self.reps_cap < reps:
            logger.info(
                "outer stage capped at %d repetitions (schedule wants %d)",
                self.reps_cap,
                reps,
            )
            reps = self.reps_cap
        inner = replace(self, eps=(self.eps + eps0) / 2.0)
        return reps, inner


@dataclass(frozen=True)
class ClientSecrets:
    """One session's private draw: branch inputs and the four pads."""

    x0: np.ndarray
    x1: np.ndarray
    r0_in: np.ndarray
    r1_in: np.ndarray
    r0_out: np.ndarray
    r1_out: np.ndarray


@dataclass
class SfsOutcome:
    """What one party walks away with.

    The client's view carries ``chosen_bit``/``x`` after computation
    rounds; the server's view carries ``y`` (the long output).  Test
    sessions set only the verdict.
    """

    accepted: bool
    reason: str | None = None
    mode: str | None = None
    chosen_bit: int | None = None
    x: np.ndarray | None = None
    y: np.ndarray | None = None
    selected_round: int | None = None
    selected_rep: int | None = None
    n_test_rounds: int = 0
    n_comp_rounds: int = 0
    extra: dict[str, Any] = field(default_factory=dict)


@dataclass
class AdversaryHooks:
    """Server-side deviation points; ``None`` means honest behaviour.

    * ``step2_process`` rewrites the server state after the oracle and
      before the Hadamard report (e.g. stash a basis copy of the
      input register).
    * ``comp_test_response`` / ``had_test_response`` produce the
      witness for the respective test instead of the honest
      measurement; they return (witness bits, remaining state).
    * ``comp_mode_response`` produces the ``b || pad`` report of a
      computation round: (report bits, remaining state).
    * ``witness_map`` rewrites the witness per argument-of-knowledge
      call (labels ``"aok1"``/``"aok2"``), modelling a prover that
      tries to swap witnesses after binding.
    """

    name: str = "honest"
    step2_process: (
        Callable[[SparseState, np.random.Generator], SparseState] | None
    ) = None
    comp_test_response: (
        Callable[[SparseState, np.random.Generator], tuple[np.ndarray, SparseState]]
        | None
    ) = None
    had_test_response: (
        Callable[[SparseState, np.random.Generator], tuple[np.ndarray, SparseState]]
        | None
    ) = None
    comp_mode_response: (
        Callable[[SparseState, np.random.Generator], tuple[np.ndarray, SparseState]]
        | None
    ) = None
    witness_map: Callable[[str, np.ndarray], np.ndarray] | None = None


# ---------------------------------------------------------------------------
# State construction and bookkeeping
# ---------------------------------------------------------------------------


def state_layout(n: int, kappa: int) -> RegisterLayout:
    """The client-side register layout; the output register is appended later."""
    return RegisterLayout.of(("sub", 1), ("in", n), ("inpad", kappa), ("outpad", kappa))


def sample_secrets(
    rng: np.random.Generator,
    n: int,
    kappa: int,
    x0: np.ndarray | None = None,
    x1: np.ndarray | None = None,
) -> ClientSecrets:
    """Draw a session's secrets; pass ``x0``/``x1`` to fix the branch inputs.

    Draw order is fixed (x0, x1, then the four pads) so equal seeds
    give equal sessions; fixed inputs are simply not drawn.
    """
    x0 = bits.random_bits(rng, n) if x0 is None else bits.as_bits(x0)
    x1 = bits.random_bits(rng, n) if x1 is None else bits.as_bits(x1)
    if x0.size != n or x1.size != n:
        raise WidthError(f"branch inputs must have {n} bits")
    return ClientSecrets(
        x0=x0,
        x1=x1,
        r0_in=bits.random_bits(rng, kappa),
        r1_in=bits.random_bits(rng, kappa),
        r0_out=bits.random_bits(rng, kappa),
        r1_out=bits.random_bits(rng, kappa),
    )


def build_client_state(secrets: ClientSecrets, kappa: int) -> SparseState:
    """The two-branch session state: branch b holds (b, x_b, pads_b)."""
    n = secrets.x0.size
    layout = state_layout(n, kappa)
    v0 = basis_from_segments(
        layout,
        {
            "sub": bits.zeros(1),
            "in": secrets.x0,
            "inpad": secrets.r0_in,
            "outpad": secrets.r0_out,
        },
    )
    v1 = basis_from_segments(
        layout,
        {
            "sub": np.ones(1, dtype=np.uint8),
            "in": secrets.x1,
            "inpad": secrets.r1_in,
            "outpad": secrets.r1_out,
        },
    )
    return make_branch_pair(layout, v0, v1)


def branch_phases(
    secrets: ClientSecrets, d_in: np.ndarray, d_inpad: np.ndarray
) -> tuple[int, int]:
    """The phases both parties' views must agree on after step 2."""
    theta0 = bits.dot2(d_in, secrets.x0) ^ bits.dot2(d_inpad, secrets.r0_in)
    theta1 = bits.dot2(d_in, secrets.x1) ^ bits.dot2(d_inpad, secrets.r1_in)
    return theta0, theta1


# ---------------------------------------------------------------------------
# Test relations (verified through the succinct relation test)
# ---------------------------------------------------------------------------


def comp_payload(secrets: ClientSecrets, kappa: int) -> bytes:
    """Reveal payload of the computational-basis test: inputs and out-pads."""
    return bytes(
        bits.pack_bits(
            bits.concat_bits(secrets.x0, secrets.x1, secrets.r0_out, secrets.r1_out)
        )
    )


def had_payload(secrets: ClientSecrets, kappa: int, theta_xor: int) -> bytes:
    """Reveal payload of the Hadamard-basis test: adds the phase parity."""
    return bytes(
        bits.pack_bits(
            bits.concat_bits(
                secrets.x0,
                secrets.x1,
                secrets.r0_out,
                secrets.r1_out,
                np.array([theta_xor], dtype=np.uint8),
            )
        )
    )


def make_comp_relation(
    f: FunctionSpec, n: int, m: int, kappa: int
) -> RelationSpec:
    """Accept outcomes ``b || r_b_out || f(x_b)`` for either branch b.

    The relation evaluates ``f`` itself from the short reveal payload,
    so the payload stays independent of the output length.
    """
    witness_bits = 1 + kappa + m

    def check(x_payload: bytes, w: np.ndarray) -> bool:
        try:
            p = bits.unpack_bits(x_payload, 2 * n + 2 * kappa)
        except WidthError:
            return False
        x0, x1 = p[:n], p[n : 2 * n]
        r0, r1 = p[2 * n : 2 * n + kappa], p[2 * n + kappa :]
        b = int(w[0])
        rpad, y = w[1 : 1 + kappa], w[1 + kappa :]
        x, r = (x0, r0) if b == 0 else (x1, r1)
        return bits.bits_equal(rpad, r) and bits.bits_equal(y, f.evaluate(x))

    return RelationSpec(f"comp-test[{f.name}]", witness_bits, check)


def make_had_relation(f: FunctionSpec, n: int, m: int, kappa: int) -> RelationSpec:
    """Accept Hadamard outcomes satisfying the interference parity.

    ``w`` is the outcome over ``(sub, outpad, out)``; the relation is
    ``w_sub XOR w_outpad.(r0+r1) XOR w_out.(f(x0)+f(x1)) = theta_parity``.
    """
    witness_bits = 1 + kappa + m

    def check(x_payload: bytes, w: np.ndarray) -> bool:
        try:
            p = bits.unpack_bits(x_payload, 2 * n + 2 * kappa + 1)
        except WidthError:
            return False
        x0, x1 = p[:n], p[n : 2 * n]
        r0 = p[2 * n : 2 * n + kappa]
        r1 = p[2 * n + kappa : 2 * n + 2 * kappa]
        theta_parity = int(p[-1])
        lhs = (
            int(w[0])
            ^ bits.dot2(w[1 : 1 + kappa], bits.xor_bits(r0, r1))
            ^ bits.dot2(
                w[1 + kappa :], bits.xor_bits(f.evaluate(x0), f.evaluate(x1))
            )
        )
        return lhs == theta_parity

    return RelationSpec(f"had-test[{f.name}]", witness_bits, check)


# ---------------------------------------------------------------------------
# Shared steps
# ---------------------------------------------------------------------------


def _client_steps12(
    chan: ChannelEndpoint,
    rng: np.random.Generator,
    params: SfsParams,
    label: str,
    secrets: ClientSecrets,
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Send the state, receive d; returns (d_in, d_inpad, pad_ok)."""
    state = build_client_state(secrets, params.kappa)
    chan.send_state(f"{label}sfs.state", serialize_state(state))
    d_data = chan.recv(f"{label}sfs.d")
    d = bits.unpack_bits(d_data, params.n + params.kappa)
    d_in, d_inpad = d[: params.n], d[params.n :]
    return d_in, d_inpad, bool(d_inpad.any())


def _server_steps12(
    chan: ChannelEndpoint,
    rng: np.random.Generator,
    f: FunctionSpec,
    params: SfsParams,
    label: str,
    state_bytes: bytes,
    hooks: AdversaryHooks,
) -> SparseState:
    """Deserialize, attach the output register, evaluate f, report d."""
    layout = state_layout(params.n, params.kappa)
    state = deserialize_state(state_bytes, layout)
    state = append_zero_segment(state, "out", params.m)
    state = apply_classical_oracle(state, f, "in", "out")
    if hooks.step2_process is not None:
        state = hooks.step2_process(state, rng)
    d, state = measure_hadamard(state, ["in", "inpad"], rng)
    chan.send(f"{label}sfs.d", bits.pack_bits(d))
    return state


# ---------------------------------------------------------------------------
# Test sessions
# ---------------------------------------------------------------------------


def sfs_test_client(
    chan: ChannelEndpoint,
    rng: np.random.Generator,
    f: FunctionSpec,
    params: SfsParams,
    backend: AokBackend,
    label: str = "",
    mode: str | None = None,
    secrets: ClientSecrets | None = None,
) -> SfsOutcome:
    """Run one test session as the client; ``mode`` forces the basis coin."""
    if secrets is None:
        secrets = sample_secrets(rng, params.n, params.kappa)
    d_in, d_inpad, pad_ok = _client_steps12(chan, rng, params, label, secrets)
    theta0, theta1 = branch_phases(secrets, d_in, d_inpad)
    if mode is None:
        mode = "had" if int(rng.integers(0, 2)) else "comp"
    if mode not in ("comp", "had"):
        raise SfsLabError(f"unknown test mode {mode!r}")
    chan.send(
        f"{label}sfs.mode",
        bytes([MODE_HAD_TEST if mode == "had" else MODE_COMP_TEST]),
    )
    if mode == "comp":
        relation = make_comp_relation(f, params.n, params.m, params.kappa)
        payload = comp_payload(secrets, params.kappa)
    else:
        relation = make_had_relation(f, params.n, params.m, params.kappa)
        payload = had_payload(secrets, params.kappa, theta0 ^ theta1)
    flag = succ_test_client(
        chan, rng, relation, payload, params.kappa, backend, label=f"{label}succ"
    )
    if not pad_ok:
        return SfsOutcome(False, reason="zero-inpad", mode=f"{mode}-test")
    if not flag:
        return SfsOutcome(False, reason="relation-reject", mode=f"{mode}-test")
    return SfsOutcome(True, mode=f"{mode}-test")


def sfs_test_server(
    chan: ChannelEndpoint,
    rng: np.random.Generator,
    f: FunctionSpec,
    params: SfsParams,
    backend: AokBackend,
    label: str = "",
    hooks: AdversaryHooks | None = None,
    state_bytes: bytes | None = None,
) -> SfsOutcome:
    """Run one test session as the server (honest unless hooked)."""
    hooks = hooks or AdversaryHooks()
    if state_bytes is None:
        state_bytes = chan.recv(f"{label}sfs.state", expect_tag=TAG_STATE)
    state = _server_steps12(chan, rng, f, params, label, state_bytes, hooks)
    mode_byte = chan.recv(f"{label}sfs.mode")[0]
    if mode_byte == MODE_COMP_TEST:
        if hooks.comp_test_response is not None:
            w, state = hooks.comp_test_response(state, rng)
        else:
            w, state = measure_computational(state, ["sub", "outpad", "out"], rng)
        mode = "comp-test"
    elif mode_byte == MODE_HAD_TEST:
        if hooks.had_test_response is not None:
            w, state = hooks.had_test_response(state, rng)
        else:
            w, state = measure_hadamard(state, ["sub", "outpad", "out"], rng)
        mode = "had-test"
    else:
        raise ProtocolOrderError(f"expected a test mode byte, got {mode_byte:#x}")
    flag = succ_test_server(
        chan,
        rng,
        w,
        backend,
        label=f"{label}succ",
        witness_map=hooks.witness_map,
    )
    return SfsOutcome(flag, mode=mode)


# ---------------------------------------------------------------------------
# Computation sessions
# ---------------------------------------------------------------------------


def sfs_comp_client(
    chan: ChannelEndpoint,
    rng: np.random.Generator,
    params: SfsParams,
    label: str = "",
    secrets: ClientSecrets | None = None,
) -> SfsOutcome:
    """Run one computation session as the client."""
    if secrets is None:
        secrets = sample_secrets(rng, params.n, params.kappa)
    _d_in, _d_inpad, pad_ok = _client_steps12(chan, rng, params, label, secrets)
    chan.send(f"{label}sfs.mode", bytes([MODE_COMP_RUN]))
    c_data = chan.recv(f"{label}sfs.c")
    try:
        c = bits.unpack_bits(c_data, 1 + params.kappa)
    except WidthError:
        return SfsOutcome(False, reason="bad-report", mode="comp-run")
    if not pad_ok:
        return SfsOutcome(False, reason="zero-inpad", mode="comp-run")
    if bits.bits_equal(secrets.r0_out, secrets.r1_out):
        logger.info("out-pads collide; branch authentication is degenerate")
    b = int(c[0])
    rpad = c[1:]
    expected = secrets.r0_out if b == 0 else secrets.r1_out
    if not bits.bits_equal(rpad, expected):
        return SfsOutcome(False, reason="pad-auth", mode="comp-run")
    x = secrets.x0 if b == 0 else secrets.x1
    return SfsOutcome(True, mode="comp-run", chosen_bit=b, x=x.copy())


def sfs_comp_server(
    chan: ChannelEndpoint,
    rng: np.random.Generator,
    f: FunctionSpec,
    params: SfsParams,
    label: str = "",
    hooks: AdversaryHooks | None = None,
    state_bytes: bytes | None = None,
) -> SfsOutcome:
    """Run one computation session as the server; the outcome carries y."""
    hooks = hooks or AdversaryHooks()
    if state_bytes is None:
        state_bytes = chan.recv(f"{label}sfs.state", expect_tag=TAG_STATE)
    state = _server_steps12(chan, rng, f, params, label, state_bytes, hooks)
    mode_byte = chan.recv(f"{label}sfs.mode")[0]
    if mode_byte != MODE_COMP_RUN:
        raise ProtocolOrderError(f"expected the computation mode byte, got {mode_byte:#x}")
    if hooks.comp_mode_response is not None:
        c, state = hooks.comp_mode_response(state, rng)
    else:
        c, state = measure_computational(state, ["sub", "outpad"], rng)
    chan.send(f"{label}sfs.c", bits.pack_bits(c))
    y, _state = measure_computational(state, ["out"], rng)
    return SfsOutcome(True, mode="comp-run", y=y)


# ---------------------------------------------------------------------------
# Amplification: inner stage
# ---------------------------------------------------------------------------


def _decide_test_round(rng: np.random.Generator, p: float) -> bool:
    if p >= 1.0:
        return True
    if p <= 0.0:
        return False
    return bool(rng.random() < p)


def sfs_temp_client(
    chan: ChannelEndpoint,
    rng: np.random.Generator,
    f: FunctionSpec,
    params: SfsParams,
    backend: AokBackend,
    label: str = "",
    chosen_inputs: tuple[np.ndarray, np.ndarray] | None = None,
) -> SfsOutcome:
    """Inner amplification stage, client side.

    Runs the scheduled number of rounds, each a test round with the
    scheduled probability and a computation round otherwise.  Aborts
    on the first failed round.  On success, selects one computation
    round uniformly, tells the server, and adopts its outputs.
    """
    rounds, p = params.temp_schedule()
    comp_results: list[tuple[int, SfsOutcome]] = []
    n_test = 0
    for j in range(rounds):
        round_label = f"{label}r{j}."
        if _decide_test_round(rng, p):
            n_test += 1
            res = sfs_test_client(chan, rng, f, params, backend, label=round_label)
        else:
            secrets = sample_secrets(
                rng,
                params.n,
                params.kappa,
                x0=None if chosen_inputs is None else chosen_inputs[0],
                x1=None if chosen_inputs is None else chosen_inputs[1],
            )
            res = sfs_comp_client(chan, rng, params, label=round_label, secrets=secrets)
            if res.accepted:
                comp_results.append((j, res))
        if not res.accepted:
            chan.send(f"{label}sfs.final", bytes([_FINAL_ABORT]), tag=TAG_CONTROL)
            return SfsOutcome(
                False,
                reason=f"round {j}: {res.reason}",
                n_test_rounds=n_test,
                n_comp_rounds=len(comp_results),
            )
    if not comp_results:
        logger.info("all %d rounds were tests; passing with no output", rounds)
        chan.send(f"{label}sfs.final", bytes([_FINAL_DEGENERATE]), tag=TAG_CONTROL)
        return SfsOutcome(
            True, reason="degenerate-all-tests", n_test_rounds=n_test, n_comp_rounds=0
        )
    if len(comp_results) == 1:
        pick = 0
    else:
        pick = int(rng.integers(0, len(comp_results)))
    j_sel, selected = comp_results[pick]
    chan.send(
        f"{label}sfs.final",
        bytes([_FINAL_SELECT]) + j_sel.to_bytes(4, "big"),
        tag=TAG_CONTROL,
    )
    return SfsOutcome(
        True,
        mode="comp-run",
        chosen_bit=selected.chosen_bit,
        x=selected.x,
        selected_round=j_sel,
        n_test_rounds=n_test,
        n_comp_rounds=len(comp_results),
    )


def sfs_temp_server(
    chan: ChannelEndpoint,
    rng: np.random.Generator,
    f: FunctionSpec,
    params: SfsParams,
    backend: AokBackend,
    label: str = "",
    hooks: AdversaryHooks | None = None,
) -> SfsOutcome:
    """Inner amplification stage, server side."""
    hooks = hooks or AdversaryHooks()
    rounds, _p = params.temp_schedule()
    y_by_round: dict[int, np.ndarray] = {}
    j = 0
    while True:
        tag, payload = chan.recv_any(f"{label}r{j}.sfs.state")
        if tag == TAG_CONTROL:
            kind = payload[0]
            if kind == _FINAL_ABORT:
                return SfsOutcome(False, reason="client-abort")
            if kind == _FINAL_DEGENERATE:
                return SfsOutcome(True, reason="degenerate-all-tests")
            if kind != _FINAL_SELECT or len(payload) != 5:
                raise ProtocolOrderError("malformed final frame")
            idx = int.from_bytes(payload[1:], "big")
            if idx not in y_by_round:
                raise ProtocolOrderError(
                    f"client selected round {idx}, which was not a computation round"
                )
            return SfsOutcome(
                True, mode="comp-run", y=y_by_round[idx], selected_round=idx
            )
        if tag != TAG_STATE:
            raise ProtocolOrderError(f"unexpected frame tag {tag:#x} between rounds")
        if j >= rounds:
            raise ProtocolOrderError(f"client started round {j}, schedule has {rounds}")
        round_label = f"{label}r{j}."
        state_bytes = payload
        # Peek the mode after the shared steps to dispatch the round type.
        state = _server_steps12(
            chan, rng, f, params, round_label, state_bytes, hooks
        )
        mode_byte = chan.recv(f"{round_label}sfs.mode")[0]
        if mode_byte == MODE_COMP_RUN:
            if hooks.comp_mode_response is not None:
                c, state = hooks.comp_mode_response(state, rng)
            else:
                c, state = measure_computational(state, ["sub", "outpad"], rng)
            chan.send(f"{round_label}sfs.c", bits.pack_bits(c))
            y, _ = measure_computational(state, ["out"], rng)
            y_by_round[j] = y
        elif mode_byte in (MODE_COMP_TEST, MODE_HAD_TEST):
            if mode_byte == MODE_COMP_TEST:
                if hooks.comp_test_response is not None:
                    w, state = hooks.comp_test_response(state, rng)
                else:
                    w, state = measure_computational(
                        state, ["sub", "outpad", "out"], rng
                    )
            else:
                if hooks.had_test_response is not None:
                    w, state = hooks.had_test_response(state, rng)
                else:
                    w, state = measure_hadamard(state, ["sub", "outpad", "out"], rng)
            succ_test_server(
                chan,
                rng,
                w,
                backend,
                label=f"{round_label}succ",
                witness_map=hooks.witness_map,
            )
        else:
            raise ProtocolOrderError(f"unknown mode byte {mode_byte:#x}")
        j += 1


# ---------------------------------------------------------------------------
# Amplification: outer stage
# ---------------------------------------------------------------------------


def sfs_full_client(
    chan: ChannelEndpoint,
    rng: np.random.Generator,
    f: FunctionSpec,
    params: SfsParams,
    backend: AokBackend,
    label: str = "",
    chosen_inputs: tuple[np.ndarray, np.ndarray] | None = None,
) -> SfsOutcome:
    """Outer amplification stage, client side."""
    reps, inner = params.full_schedule()
    results: list[SfsOutcome] = []
    for i in range(reps):
        res = sfs_temp_client(
            chan,
            rng,
            f,
            inner,
            backend,
            label=f"{label}p{i}.",
            chosen_inputs=chosen_inputs,
        )
        if not res.accepted:
            return SfsOutcome(
                False, reason=f"repetition {i}: {res.reason}", selected_rep=i
            )
        results.append(res)
    i_sel = 0 if reps == 1 else int(rng.integers(0, reps))
    chan.send(f"{label}sfs.select", i_sel.to_bytes(4, "big"), tag=TAG_CONTROL)
    selected = results[i_sel]
    if selected.x is None:
        logger.info("selected repetition %d carried no computation round", i_sel)
    return SfsOutcome(
        True,
        mode=selected.mode,
        chosen_bit=selected.chosen_bit,
        x=selected.x,
        selected_round=selected.selected_round,
        selected_rep=i_sel,
        n_test_rounds=sum(r.n_test_rounds for r in results),
        n_comp_rounds=sum(r.n_comp_rounds for r in results),
    )


def sfs_full_server(
    chan: ChannelEndpoint,
    rng: np.random.Generator,
    f: FunctionSpec,
    params: SfsParams,
    backend: AokBackend,
    label: str = "",
    hooks: AdversaryHooks | None = None,
) -> SfsOutcome:
    """Outer amplification stage, server side."""
    reps, inner = params.full_schedule()
    results: list[SfsOutcome] = []
    for i in range(reps):
        res = sfs_temp_server(
            chan, rng, f, inner, backend, label=f"{label}p{i}.", hooks=hooks
        )
        if not res.accepted:
            return SfsOutcome(False, reason=f"repetition {i}: {res.reason}")
        results.append(res)
    sel = chan.recv(f"{label}sfs.select", expect_tag=TAG_CONTROL)
    if len(sel) != 4:
        raise ProtocolOrderError("malformed selection frame")
    i_sel = int.from_bytes(sel, "big")
    if not 0 <= i_sel < reps:
        raise ProtocolOrderError(f"selected repetition {i_sel} out of range")
    selected = results[i_sel]
    return SfsOutcome(
        True, mode=selected.mode, y=selected.y, selected_rep=i_sel
    )


# ---------------------------------------------------------------------------
# Session drivers
# ---------------------------------------------------------------------------


def _make_backends(backend_name: str) -> tuple[AokBackend, AokBackend]:
    """Client and server backends sharing a witness oracle when needed."""
    oracle = WitnessOracle()
    client_backend = get_aok_backend(backend_name, oracle)
    if backend_name == "merkle-oracle":
        server_backend = MerkleOracleAok(oracle=oracle)
    else:
        server_backend = client_backend
    return client_backend, server_backend


def run_sfs_test(
    f,
    params: SfsParams,
    seed: int,
    mode: str | None = None,
    backend_name: str = "reveal",
    hooks: AdversaryHooks | None = None,
) -> SessionResult:
    """One test session in process; ``mode`` forces the basis coin."""
    f_spec = as_function(f)
    cb, sb = _make_backends(backend_name)

    def client_fn(chan, rng):
        return sfs_test_client(chan, rng, f_spec, params, cb, mode=mode)

    def server_fn(chan, rng):
        return sfs_test_server(chan, rng, f_spec, params, sb, hooks=hooks)

    return run_session(client_fn, server_fn, seed)


def run_sfs_comp(
    f,
    params: SfsParams,
    seed: int,
    hooks: AdversaryHooks | None = None,
    x0: np.ndarray | None = None,
    x1: np.ndarray | None = None,
) -> SessionResult:
    """One computation session in process; optionally fix the branch inputs."""
    f_spec = as_function(f)

    def client_fn(chan, rng):
        secrets = sample_secrets(rng, params.n, params.kappa, x0=x0, x1=x1)
        return sfs_comp_client(chan, rng, params, secrets=secrets)

    def server_fn(chan, rng):
        return sfs_comp_server(chan, rng, f_spec, params, hooks=hooks)

    return run_session(client_fn, server_fn, seed)


def run_sfs_temp(
    f,
    params: SfsParams,
    seed: int,
    backend_name: str = "reveal",
    hooks: AdversaryHooks | None = None,
    chosen_inputs: tuple[np.ndarray, np.ndarray] | None = None,
) -> SessionResult:
    """One inner amplification stage in process."""
    f_spec = as_function(f)
    cb, sb = _make_backends(backend_name)

    def client_fn(chan, rng):
        return sfs_temp_client(
            chan, rng, f_spec, params, cb, chosen_inputs=chosen_inputs
        )

    def server_fn(chan, rng):
        return sfs_temp_server(chan, rng, f_spec, params, sb, hooks=hooks)

    return run_session(client_fn, server_fn, seed)


def run_sfs(
    f,
    params: SfsParams,
    seed: int,
    backend_name: str = "reveal",
    hooks: AdversaryHooks | None = None,
    chosen_inputs: tuple[np.ndarray, np.ndarray] | None = None,
) -> SessionResult:
    """The fully amplified protocol in process."""
    f_spec = as_function(f)
    cb, sb = _make_backends(backend_name)

    def client_fn(chan, rng):
        return sfs_full_client(chan, rng, f_spec, params, cb, chosen_inputs=chosen_inputs)

    def server_fn(chan, rng):
        return sfs_full_server(chan, rng, f_spec, params, sb, hooks=hooks)

    return run_session(client_fn, server_fn, seed)


def derandomized_function(f, n: int, kappa: int) -> FunctionSpec:
    """Turn ``f(x || coins)`` into ``g(x || s) = f(x || PRG(s))``.

    ``f`` takes ``n`` input bits followed by any number of coin bits;
    ``g`` takes ``n + kappa`` bits, expanding the ``kappa``-bit seed
    half into the coins.  Running the deterministic protocol on ``g``
    and discarding the seed half afterwards samples the randomized
    function with coins neither party controls or retains.
    """
    f_spec = as_function(f)
    coin_bits = f_spec.n_in - n
    if coin_bits < 1:
        raise WidthError(f"{f_spec.name} has no coin bits beyond the {n} input bits")

    def g_batch(z: np.ndarray) -> np.ndarray:
        rows = []
        for row in z:
            coins = prg_expand(row[n:], coin_bits)
            rows.append(f_spec.evaluate(bits.concat_bits(row[:n], coins)))
        return np.stack(rows) if rows else np.zeros((0, f_spec.n_out), dtype=np.uint8)

    return FunctionSpec(
        name=f"derandomized[{f_spec.name}]",
        n_in=n + kappa,
        n_out=f_spec.n_out,
        batch=g_batch,
    )


def run_sfs_randomized(
    f,
    params: SfsParams,
    seed: int,
    coin_bits: int,
    backend_name: str = "reveal",
    hooks: AdversaryHooks | None = None,
) -> SessionResult:
    """Sample a *randomized* function's output.

    ``f`` must take ``params.n + coin_bits`` input bits (input, then
    coins).  The session runs the deterministic protocol on the
    derandomized map ``g(x || s) = f(x || PRG(s))`` with a
    ``kappa``-bit seed register; afterwards the client keeps only the
    ``x`` half and discards the seed, so the server's output is
    ``f(x; coins)`` for coins neither party controls or retains.
    """
    f_spec = as_function(f)
    if f_spec.n_in != params.n + coin_bits:
        raise WidthError(
            f"{f_spec.name} takes {f_spec.n_in} bits; expected n + coin_bits = "
            f"{params.n + coin_bits}"
        )
    g = derandomized_function(f_spec, params.n, params.kappa)
    g_params = replace(params, n=params.n + params.kappa)
    result = run_sfs(g, g_params, seed, backend_name=backend_name, hooks=hooks)
    outcome: SfsOutcome = result.client
    if outcome.accepted and outcome.x is not None:
        seed_half = outcome.x[params.n :]
        outcome.extra["_discarded_seed"] = seed_half
        outcome.x = outcome.x[: params.n]
    return result
