"""Two-party computation with communication independent of output length.

Alice (input ``x_A``) and Bob (input ``x_B``) each receive a possibly
long private output — ``y_A = f_A(x_A, x_B)`` for Alice and
``y_B = f_B(x_A, x_B)`` for Bob — over a channel whose traffic grows
with the input lengths and the security parameter, never with the
output lengths.

**Setup** runs through a pluggable sub-protocol backend; the default
is an in-process ideal dealer standing in for a short-input,
short-output secure computation.  The dealer

(a) samples per-direction commitment public parameters,
(b) samples commitment randomness,
(c) samples input-wire garbling randomness ``r_A``, ``r_B`` over the
    *joint* input plus internal-coin seeds ``s_A``, ``s_B``,
(d) commits each prover to the material it will evaluate on — Bob
    receives the opening of ``com_A = commit(r_A || s_A)`` because
    Bob garbles Alice's circuit, and symmetrically — and
(e) delivers the encoding of the joint input under each garbling:
    ``ie_A = garble_input(x_A || x_B, r_A)`` goes to Alice.

Every piece is polynomial in the input lengths and security
parameter; :meth:`Step1Outputs.material_bits` records the exact
sizes so tests can assert the bookkeeping.

**Deliveries** are two verified-evaluation runs at tolerance
``eps/2`` each.  In the first, Bob — committed to ``r_A || s_A`` —
evaluates the garbling map ``g_A(r, s) = tables of f_A under
(r, PRG(s))`` so that Alice receives the garbled tables as her
sampling output, checked against ``com_A``; she degarbles locally
with ``ie_A``.  The second run is the mirror image for ``f_B``.  The
tables themselves never cross the wire: the receiver samples them.

Abort coupling follows the ideal functionality's delivery order: a
failed first delivery stops the protocol before the second starts
(both flags false); a failed second delivery leaves Alice's output
standing and denies Bob's.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Protocol

import numpy as np

from . import bits
from .circuits import Circuit
from .corpus import FunctionSpec
from .errors import DegarbleError, SfsLabError, WidthError
from .garbling import (
    InputEncoding,
    circuit_encoding_bits,
    circuit_encoding_from_bits,
    degarble,
    garble_input,
    input_randomness_bits,
)
from .primitives import (
    CommitParams,
    commit,
    sample_commit_params,
    sample_commit_randomness,
)
from .runtime import (
    TAG_CLASSICAL,
    TAG_CONTROL,
    ChannelEndpoint,
    SessionResult,
    Transcript,
    run_session,
)
from .sfs import AdversaryHooks, SfsParams, _make_backends, derandomized_function
from .sfvp import (
    Sfvp2ClientHooks,
    Sfvp2Setup,
    garbling_function,
    sfvp2_client,
    sfvp2_server,
)
from .succ_test import AokBackend

__all__ = [
    "DEALER_BACKENDS",
    "Step1Outputs",
    "AliceView",
    "BobView",
    "TwopcOutcome",
    "TwopcResult",
    "dealer_step1",
    "garbling_map",
    "delivery_params",
    "alice_fn",
    "bob_fn",
    "run_twopc",
    "assert_dealer_precedes_protocol",
]

DEALER_BACKENDS = ("ideal-dealer", "external")

_STEP_OK = b"\x01"
_STEP_FAIL = b"\x00"


# ---------------------------------------------------------------------------
# Setup phase
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AliceView:
    """What the dealer hands Alice: public values, her input encoding,
    and the opening she will later prove (she garbles Bob's circuit)."""

    pp_a: CommitParams
    pp_b: CommitParams
    com_a: np.ndarray
    com_b: np.ndarray
    ie_a: InputEncoding
    r_b: np.ndarray
    s_b: np.ndarray
    r_com_b: np.ndarray


@dataclass(frozen=True)
class BobView:
    """What the dealer hands Bob: public values, his input encoding,
    and the opening of Alice's commitment (he garbles her circuit)."""

    pp_a: CommitParams
    pp_b: CommitParams
    com_a: np.ndarray
    com_b: np.ndarray
    ie_b: InputEncoding
    r_a: np.ndarray
    s_a: np.ndarray
    r_com_a: np.ndarray


@dataclass(frozen=True)
class Step1Outputs:
    """The full setup record, annotated by owner.

    ``pp_*`` and ``com_*`` are public.  Alice additionally owns
    ``ie_a`` and the opening of ``com_b``; Bob owns ``ie_b`` and the
    opening of ``com_a``.  The party functions consume only their
    :meth:`alice_view` / :meth:`bob_view` slices.
    """

    pp_a: CommitParams
    pp_b: CommitParams
    r_com_a: np.ndarray
    r_com_b: np.ndarray
    r_a: np.ndarray
    r_b: np.ndarray
    s_a: np.ndarray
    s_b: np.ndarray
    com_a: np.ndarray
    com_b: np.ndarray
    ie_a: InputEncoding
    ie_b: InputEncoding

    def alice_view(self) -> AliceView:
        return AliceView(
            pp_a=self.pp_a,
            pp_b=self.pp_b,
            com_a=self.com_a,
            com_b=self.com_b,
            ie_a=self.ie_a,
            r_b=self.r_b,
            s_b=self.s_b,
            r_com_b=self.r_com_b,
        )

    def bob_view(self) -> BobView:
        return BobView(
            pp_a=self.pp_a,
            pp_b=self.pp_b,
            com_a=self.com_a,
            com_b=self.com_b,
            ie_b=self.ie_b,
            r_a=self.r_a,
            s_a=self.s_a,
            r_com_a=self.r_com_a,
        )

    def material_bits(self) -> dict[str, int]:
        """Exact bit counts of each setup delivery, for the bookkeeping."""
        public = (
            self.pp_a.pp.size
            + self.pp_b.pp.size
            + self.com_a.size
            + self.com_b.size
        )
        return {
            "public": public,
            "ie_a": self.ie_a.labels.size + self.ie_a.pointers.size,
            "ie_b": self.ie_b.labels.size + self.ie_b.pointers.size,
            "opening_a": self.r_a.size + self.s_a.size + self.r_com_a.size,
            "opening_b": self.r_b.size + self.s_b.size + self.r_com_b.size,
        }


def dealer_step1(
    x_a: np.ndarray,
    x_b: np.ndarray,
    kappa: int,
    rng: np.random.Generator | int,
    backend: str = "ideal-dealer",
) -> Step1Outputs:
    """Run the setup through the named sub-protocol backend.

    Only the in-process ideal dealer is implemented; ``"external"``
    names the slot where a real short-input secure computation would
    plug in and raises until one exists.
    """
    if backend not in DEALER_BACKENDS:
        raise SfsLabError(
            f"unknown setup backend {backend!r}; choose from {DEALER_BACKENDS}"
        )
    if backend == "external":
        raise SfsLabError("setup backend 'external' is a placeholder; none is wired in")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    x_a = bits.as_bits(x_a)
    x_b = bits.as_bits(x_b)
    joint = bits.concat_bits(x_a, x_b)
    n_joint = joint.size
    msg_len = input_randomness_bits(n_joint, kappa) + kappa  # r || s
    # (a) commitment public parameters, one instance per direction
    pp_a = sample_commit_params(rng, msg_len, kappa)
    pp_b = sample_commit_params(rng, msg_len, kappa)
    # (b) commitment randomness
    r_com_a = sample_commit_randomness(rng, pp_a)
    r_com_b = sample_commit_randomness(rng, pp_b)
    # (c) independent garbling randomness and coin seeds per direction
    r_a = bits.random_bits(rng, input_randomness_bits(n_joint, kappa))
    r_b = bits.random_bits(rng, input_randomness_bits(n_joint, kappa))
    s_a = bits.random_bits(rng, kappa)
    s_b = bits.random_bits(rng, kappa)
    # (d) commitments binding each prover to its garbling material
    com_a = commit(bits.concat_bits(r_a, s_a), r_com_a, pp_a)
    com_b = commit(bits.concat_bits(r_b, s_b), r_com_b, pp_b)
    # (e) input encodings of the joint input, one per receiving party
    ie_a = garble_input(joint, r_a, kappa)
    ie_b = garble_input(joint, r_b, kappa)
    return Step1Outputs(
        pp_a=pp_a,
        pp_b=pp_b,
        r_com_a=r_com_a,
        r_com_b=r_com_b,
        r_a=r_a,
        r_b=r_b,
        s_a=s_a,
        s_b=s_b,
        com_a=com_a,
        com_b=com_b,
        ie_a=ie_a,
        ie_b=ie_b,
    )


def _record_dealer_entries(transcript: Transcript, step1: Step1Outputs) -> None:
    """Book the setup deliveries as pseudo-frames ahead of wire traffic.

    These entries carry dealer directions (``D->A`` / ``D->B``) so the
    accounting can separate setup material from protocol frames, and so
    a transcript check can assert the input encodings landed before any
    table delivery started.
    """
    sizes = step1.material_bits()
    deliveries = [
        ("D->A", "dealer.public", sizes["public"]),
        ("D->B", "dealer.public", sizes["public"]),
        ("D->A", "dealer.ie_a", sizes["ie_a"]),
        ("D->B", "dealer.ie_b", sizes["ie_b"]),
        ("D->B", "dealer.opening_a", sizes["opening_a"]),
        ("D->A", "dealer.opening_b", sizes["opening_b"]),
    ]
    for direction, step, n_bits in deliveries:
        transcript.add(direction, step, bits.packed_size(n_bits), TAG_CLASSICAL)


# ---------------------------------------------------------------------------
# Delivery phases
# ---------------------------------------------------------------------------


def garbling_map(circuit: Circuit, n_joint: int, kappa: int) -> FunctionSpec:
    """The committed map one party evaluates for the other.

    ``g(r || s)`` garbles ``circuit`` with input-wire randomness ``r``
    and internal coins ``PRG(s)``; its input width is exactly the
    committed message length ``(n_joint + 1) * kappa``.
    """
    if circuit.n_inputs != n_joint:
        raise WidthError(
            f"circuit takes {circuit.n_inputs} inputs, joint input has {n_joint}"
        )
    return derandomized_function(
        garbling_function(circuit, kappa), input_randomness_bits(n_joint, kappa), kappa
    )


def delivery_params(circuit: Circuit, base: SfsParams, msg_len: int) -> SfsParams:
    """Parameters for one verified delivery at half the overall tolerance."""
    return replace(
        base,
        n=msg_len,
        m=circuit_encoding_bits(circuit, base.kappa),
        eps=base.eps / 2.0,
    )


@dataclass
class TwopcOutcome:
    """One party's local view: its flag, its (long) output, a reason."""

    flag: bool
    y: np.ndarray | None = None
    reason: str | None = None


class PartyFn(Protocol):
    def __call__(
        self, chan: ChannelEndpoint, rng: np.random.Generator
    ) -> TwopcOutcome: ...


def alice_fn(
    chan: ChannelEndpoint,
    rng: np.random.Generator,
    view: AliceView,
    f_a: Circuit,
    f_b: Circuit,
    params: SfsParams,
    backend: AokBackend,
    cons_rounds_cap: int | None = None,
    client_hooks: Sfvp2ClientHooks | None = None,
    server_hooks: AdversaryHooks | None = None,
) -> TwopcOutcome:
    """Alice: verify and receive her delivery, then prove Bob's.

    After the first delivery she tells Bob (control frame ``s2.ok``)
    whether to proceed — only she can see a degarbling failure.
    """
    n_joint = f_a.n_inputs
    msg_len = view.pp_a.n_bits
    # --- first delivery: Bob proves, Alice receives the tables of f_a
    out2 = sfvp2_server(
        chan,
        rng,
        garbling_map(f_a, n_joint, params.kappa),
        view.pp_a,
        view.com_a,
        delivery_params(f_a, params, msg_len),
        backend,
        rounds_cap=cons_rounds_cap,
        hooks=server_hooks,
        label="s2.",
    )
    y_a: np.ndarray | None = None
    reason: str | None = None
    if not out2.accepted:
        reason = f"first delivery: {out2.reason}"
    else:
        try:
            ce_a = circuit_encoding_from_bits(out2.y, f_a, params.kappa)
            y_a = degarble(f_a, ce_a, view.ie_a)
        except DegarbleError as exc:
            reason = f"first delivery degarble: {exc}"
    chan.send("s2.ok", _STEP_FAIL if reason else _STEP_OK, tag=TAG_CONTROL)
    if reason is not None:
        return TwopcOutcome(False, reason=reason)
    # --- second delivery: Alice proves her committed garbling of f_b
    setup_b = Sfvp2Setup(
        pp=view.pp_b,
        com=view.com_b,
        x=bits.concat_bits(view.r_b, view.s_b),
        r=view.r_com_b,
    )
    out3 = sfvp2_client(
        chan,
        rng,
        garbling_map(f_b, n_joint, params.kappa),
        setup_b,
        delivery_params(f_b, params, msg_len),
        backend,
        rounds_cap=cons_rounds_cap,
        hooks=client_hooks,
        label="s3.",
    )
    if not out3.accepted:
        # Alice's own output already stands; only Bob's delivery failed.
        return TwopcOutcome(True, y=y_a, reason=f"second delivery: {out3.reason}")
    return TwopcOutcome(True, y=y_a)


def bob_fn(
    chan: ChannelEndpoint,
    rng: np.random.Generator,
    view: BobView,
    f_a: Circuit,
    f_b: Circuit,
    params: SfsParams,
    backend: AokBackend,
    cons_rounds_cap: int | None = None,
    client_hooks: Sfvp2ClientHooks | None = None,
    server_hooks: AdversaryHooks | None = None,
) -> TwopcOutcome:
    """Bob: prove Alice's delivery, then verify and receive his own."""
    n_joint = f_a.n_inputs
    msg_len = view.pp_a.n_bits
    # --- first delivery: Bob is the prover, committed to (r_a || s_a)
    setup_a = Sfvp2Setup(
        pp=view.pp_a,
        com=view.com_a,
        x=bits.concat_bits(view.r_a, view.s_a),
        r=view.r_com_a,
    )
    out2 = sfvp2_client(
        chan,
        rng,
        garbling_map(f_a, n_joint, params.kappa),
        setup_a,
        delivery_params(f_a, params, msg_len),
        backend,
        rounds_cap=cons_rounds_cap,
        hooks=client_hooks,
        label="s2.",
    )
    proceed = chan.recv("s2.ok", expect_tag=TAG_CONTROL)
    if proceed != _STEP_OK:
        reason = out2.reason if not out2.accepted else "receiver aborted"
        return TwopcOutcome(False, reason=f"first delivery: {reason}")
    if not out2.accepted:
        # the receiver proceeded past a delivery this side saw fail
        return TwopcOutcome(False, reason=f"first delivery: {out2.reason}")
    # --- second delivery: roles swap, Bob receives the tables of f_b
    out3 = sfvp2_server(
        chan,
        rng,
        garbling_map(f_b, n_joint, params.kappa),
        view.pp_b,
        view.com_b,
        delivery_params(f_b, params, msg_len),
        backend,
        rounds_cap=cons_rounds_cap,
        hooks=server_hooks,
        label="s3.",
    )
    if not out3.accepted:
        return TwopcOutcome(False, reason=f"second delivery: {out3.reason}")
    try:
        ce_b = circuit_encoding_from_bits(out3.y, f_b, params.kappa)
        y_b = degarble(f_b, ce_b, view.ie_b)
    except DegarbleError as exc:
        return TwopcOutcome(False, reason=f"second delivery degarble: {exc}")
    return TwopcOutcome(True, y=y_b)


# ---------------------------------------------------------------------------
# Full run
# ---------------------------------------------------------------------------


@dataclass
class TwopcResult:
    """Both flags and outputs, plus the session they came from."""

    flag_a: bool
    y_a: np.ndarray | None
    flag_b: bool
    y_b: np.ndarray | None
    session: SessionResult

    @property
    def alice(self) -> TwopcOutcome:
        return self.session.client

    @property
    def bob(self) -> TwopcOutcome:
        return self.session.server


def run_twopc(
    x_a: np.ndarray,
    x_b: np.ndarray,
    f_a: Circuit,
    f_b: Circuit,
    params: SfsParams,
    seed: int,
    backend_name: str = "reveal",
    dealer_backend: str = "ideal-dealer",
    cons_rounds_cap: int | None = None,
    alice_impl: Callable[..., TwopcOutcome] | None = None,
    bob_impl: Callable[..., TwopcOutcome] | None = None,
    alice_client_hooks: Sfvp2ClientHooks | None = None,
    bob_client_hooks: Sfvp2ClientHooks | None = None,
    alice_server_hooks: AdversaryHooks | None = None,
    bob_server_hooks: AdversaryHooks | None = None,
) -> TwopcResult:
    """Setup plus both deliveries, in process.

    Alice is the runtime client, so the canonical transcript is hers;
    the dealer's deliveries appear at its head as pseudo-entries.
    ``params.eps`` covers the whole protocol and is halved per
    delivery; pick ``eps0`` (or ``delta``) so the base tolerance stays
    below ``eps/2``.  ``alice_impl`` / ``bob_impl`` replace the honest
    party functions wholesale; the hook arguments deviate inside them.
    """
    x_a = bits.as_bits(x_a)
    x_b = bits.as_bits(x_b)
    n_joint = x_a.size + x_b.size
    for circ, tag in ((f_a, "first"), (f_b, "second")):
        if circ.n_inputs != n_joint:
            raise WidthError(
                f"the {tag} circuit takes {circ.n_inputs} inputs; "
                f"the joint input has {n_joint} bits"
            )
    dealer_rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([seed, 0xD_EA1]))
    )
    step1 = dealer_step1(x_a, x_b, params.kappa, dealer_rng, backend=dealer_backend)
    client_backend, server_backend = _make_backends(backend_name)

    def alice(chan: ChannelEndpoint, rng: np.random.Generator) -> TwopcOutcome:
        _record_dealer_entries(chan.transcript, step1)
        impl = alice_impl or alice_fn
        return impl(
            chan,
            rng,
            view=step1.alice_view(),
            f_a=f_a,
            f_b=f_b,
            params=params,
            backend=client_backend,
            cons_rounds_cap=cons_rounds_cap,
            client_hooks=alice_client_hooks,
            server_hooks=alice_server_hooks,
        )

    def bob(chan: ChannelEndpoint, rng: np.random.Generator) -> TwopcOutcome:
        impl = bob_impl or bob_fn
        return impl(
            chan,
            rng,
            view=step1.bob_view(),
            f_a=f_a,
            f_b=f_b,
            params=params,
            backend=server_backend,
            cons_rounds_cap=cons_rounds_cap,
            client_hooks=bob_client_hooks,
            server_hooks=bob_server_hooks,
        )

    session = run_session(alice, bob, seed)
    a: TwopcOutcome = session.client
    b: TwopcOutcome = session.server
    return TwopcResult(flag_a=a.flag, y_a=a.y, flag_b=b.flag, y_b=b.y, session=session)


def assert_dealer_precedes_protocol(transcript: Transcript) -> None:
    """Every setup delivery — the input encodings included — must be
    booked before the first wire frame, so the encodings provably
    predate any table delivery."""
    seen_wire = False
    seen_ie = False
    for entry in transcript.entries:
        if entry.dir.startswith("D->"):
            if seen_wire:
                raise SfsLabError(
                    f"setup delivery {entry.step!r} recorded after wire traffic"
                )
            if entry.step.startswith("dealer.ie_"):
                seen_ie = True
        else:
            seen_wire = True
    if not seen_ie:
        raise SfsLabError("transcript carries no input-encoding deliveries")
