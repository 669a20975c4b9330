"""Cheating-server strategies and the experiments that measure them.

Each strategy is a factory returning fresh
:class:`~sfslab.sfs.AdversaryHooks` (factories, because some
strategies carry per-session state such as a measured branch bit).
The point of the bundled experiments:

* a server that *copies* the input register before honestly following
  the protocol keeps passing every computational-basis check, but the
  stored copy destroys the interference the Hadamard-basis check
  measures, so it passes that check with probability exactly 1/2 —
  overall pass rate 3/4 when the client mixes the two checks evenly;
* a server that *collapses* the state by measuring the selection
  qubit up front produces the same rates for the same reason;
* a prover that binds to one witness and then tries to *swap* in
  another during the relation argument is caught by the digest check.

``check_interference_identity`` verifies the 1/2 is forced by
interference rather than tuned: it computes the exact Hadamard-basis
outcome distribution of honest and copy-augmented states on the dense
simulator and confirms the parity relation holds on all of the honest
support but exactly half of the copying support.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import bits
from .corpus import FunctionSpec, as_function
from .sfs import (
    AdversaryHooks,
    SfsParams,
    branch_phases,
    build_client_state,
    run_sfs_test,
    sample_secrets,
)
from .sparse_qsim import (
    append_zero_segment,
    apply_classical_oracle,
    copy_registers,
    measure_computational,
    measure_hadamard,
    to_dense,
)
from .errors import SfsLabError

__all__ = [
    "ADVERSARIES",
    "make_hooks",
    "honest_hooks",
    "copying_hooks",
    "single_branch_hooks",
    "witness_swap_hooks",
    "WilsonInterval",
    "wilson_interval",
    "SoundnessReport",
    "run_soundness_experiment",
    "check_interference_identity",
]


# ---------------------------------------------------------------------------
# Strategies
# ---------------------------------------------------------------------------


def honest_hooks() -> AdversaryHooks:
    """Follow the protocol exactly."""
    return AdversaryHooks(name="honest")


def copying_hooks() -> AdversaryHooks:
    """Store a computational-basis copy of the input register.

    The copy commutes with every computational-basis measurement, so
    the computational check still passes with probability 1; but the
    copied register purifies the branches, so the Hadamard-basis
    outcome is uniform instead of parity-constrained and that check
    passes with probability 1/2 (plus 2^-n for colliding branch
    inputs).
    """

    def step2(state, rng):
        n = state.layout.width_of("in")
        state = append_zero_segment(state, "copy", n)
        return copy_registers(state, "in", "copy")

    return AdversaryHooks(name="copying", step2_process=step2)


def single_branch_hooks() -> AdversaryHooks:
    """Measure the selection qubit up front, collapsing to one branch.

    The server then knows (x_b, pads_b) outright — maximal leakage —
    and can answer every computational-basis check perfectly, but no
    single-branch state carries the cross-branch phase the Hadamard
    check verifies, so that check is a coin flip.
    """
    stored: dict[str, int] = {}

    def step2(state, rng):
        b, state = measure_computational(state, "sub", rng)
        stored["b"] = int(b[0])
        return state

    def comp_test(state, rng):
        w_rest, state = measure_computational(state, ["outpad", "out"], rng)
        b = np.array([stored["b"]], dtype=np.uint8)
        return bits.concat_bits(b, w_rest), state

    def had_test(state, rng):
        d_rest, state = measure_hadamard(state, ["outpad", "out"], rng)
        guess = np.array([rng.integers(0, 2)], dtype=np.uint8)
        return bits.concat_bits(guess, d_rest), state

    def comp_mode(state, rng):
        rpad, state = measure_computational(state, "outpad", rng)
        b = np.array([stored["b"]], dtype=np.uint8)
        return bits.concat_bits(b, rpad), state

    return AdversaryHooks(
        name="single-branch",
        step2_process=step2,
        comp_test_response=comp_test,
        had_test_response=had_test,
        comp_mode_response=comp_mode,
    )


def witness_swap_hooks() -> AdversaryHooks:
    """Bind to the honest witness, then swap a bit in the second argument.

    The digest pins the witness before the statement is revealed;
    presenting any other witness afterwards fails the digest check,
    whatever the relation would have said.
    """

    def swap(label: str, w: np.ndarray) -> np.ndarray:
        if label != "aok2":
            return w
        w2 = w.copy()
        w2[0] ^= 1
        return w2

    return AdversaryHooks(name="witness-swap", witness_map=swap)


ADVERSARIES = {
    "honest": honest_hooks,
    "copying": copying_hooks,
    "single-branch": single_branch_hooks,
    "witness-swap": witness_swap_hooks,
}


def make_hooks(name: str) -> AdversaryHooks:
    """Fresh hooks for a named strategy (fresh, because some hold state)."""
    try:
        factory = ADVERSARIES[name]
    except KeyError:
        raise SfsLabError(
            f"unknown adversary {name!r}; choose from {sorted(ADVERSARIES)}"
        ) from None
    return factory()


# ---------------------------------------------------------------------------
# Interval arithmetic for the reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WilsonInterval:
    """Wilson score interval for a binomial proportion."""

    point: float
    lo: float
    hi: float
    trials: int

    def contains(self, p: float) -> bool:
        return self.lo <= p <= self.hi


def wilson_interval(successes: int, trials: int, z: float = 1.96) -> WilsonInterval:
    """The 95% (by default) Wilson score interval for ``successes/trials``."""
    if trials <= 0:
        raise SfsLabError("need at least one trial")
    if not 0 <= successes <= trials:
        raise SfsLabError(f"successes {successes} outside [0, {trials}]")
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return WilsonInterval(point=p, lo=center - half, hi=center + half, trials=trials)


# ---------------------------------------------------------------------------
# Soundness experiments
# ---------------------------------------------------------------------------


@dataclass
class SoundnessReport:
    """Pass/reject statistics of an adversary over many test sessions."""

    adversary: str
    mode: str
    trials: int
    passes: int
    interval: WilsonInterval
    reject_reasons: dict[str, int] = field(default_factory=dict)

    @property
    def pass_rate(self) -> float:
        return self.passes / self.trials

    def summary_line(self) -> str:
        return (
            f"{self.adversary:>14s} mode={self.mode:<5s} trials={self.trials:<6d} "
            f"pass={self.pass_rate:.4f} wilson=[{self.interval.lo:.4f}, "
            f"{self.interval.hi:.4f}]"
        )


def run_soundness_experiment(
    adversary: str,
    f,
    params: SfsParams,
    trials: int,
    seed: int,
    mode: str | None = None,
    backend_name: str = "reveal",
) -> SoundnessReport:
    """Measured pass rate of a strategy over independent test sessions.

    ``mode`` forces the client's basis coin (``"comp"``/``"had"``);
    leave it unset for the even mixture.  Per-trial seeds derive from
    ``seed``, so reports are reproducible.
    """
    f_spec = as_function(f)
    trial_seeds = np.random.SeedSequence(seed).generate_state(trials, dtype=np.uint64)
    passes = 0
    reasons: Counter[str] = Counter()
    for i in range(trials):
        hooks = make_hooks(adversary)
        res = run_sfs_test(
            f_spec,
            params,
            seed=int(trial_seeds[i]),
            mode=mode,
            backend_name=backend_name,
            hooks=hooks,
        )
        if res.client.accepted:
            passes += 1
        else:
            reasons[res.client.reason or "unknown"] += 1
    return SoundnessReport(
        adversary=adversary,
        mode=mode or "mixed",
        trials=trials,
        passes=passes,
        interval=wilson_interval(passes, trials),
        reject_reasons=dict(reasons),
    )


# ---------------------------------------------------------------------------
# Exact interference identity
# ---------------------------------------------------------------------------


def check_interference_identity(seed: int = 0) -> dict[str, float]:
    """Exact dense-simulator account of why copying halves the pass rate.

    Builds one honest session state over tiny registers, runs the
    server steps with and without the input-register copy, and
    computes the full Hadamard-basis outcome distribution of the
    residual state.  Returns exact support sizes and the probability
    that the parity relation holds in each case; the honest value is
    1.0 and the copying value exactly 0.5.
    """
    n = m = kappa = 2
    rng = np.random.Generator(np.random.PCG64(seed))
    f = as_function(
        lambda x: np.array([x[0] ^ x[1], x[0] & x[1]], dtype=np.uint8),
        name="tiny",
        n_in=n,
        n_out=m,
    )
    secrets = sample_secrets(
        rng,
        n,
        kappa,
        x0=np.array([0, 0], dtype=np.uint8),
        x1=np.array([0, 1], dtype=np.uint8),
    )

    def residual_distribution(copy_input: bool):
        state = build_client_state(secrets, kappa)
        state = append_zero_segment(state, "out", m)
        state = apply_classical_oracle(state, f, "in", "out")
        if copy_input:
            state = append_zero_segment(state, "copy", n)
            state = copy_registers(state, "in", "copy")
        d = np.ones(n + kappa, dtype=np.uint8)  # any forced value is in-support
        _, state = measure_hadamard(state, ["in", "inpad"], forced=d)
        theta0, theta1 = branch_phases(secrets, d[:n], d[n:])
        dense = to_dense(state)
        probs = dense.hadamard_all().probabilities(range(dense.width))
        return state.layout, probs, theta0 ^ theta1

    rel_diff_pad = bits.xor_bits(secrets.r0_out, secrets.r1_out)
    rel_diff_out = bits.xor_bits(f.evaluate(secrets.x0), f.evaluate(secrets.x1))

    results: dict[str, float] = {}
    for name, copy_input in (("honest", False), ("copying", True)):
        layout, probs, target = residual_distribution(copy_input)
        width = layout.total_width
        support = 0
        pass_prob = 0.0
        sub_pos = layout.positions("sub")
        pad_pos = layout.positions("outpad")
        out_pos = layout.positions("out")
        for idx, p in enumerate(probs):
            if p <= 1e-12:
                continue
            support += 1
            dprime = bits.int_to_bits(idx, width)
            parity = (
                int(dprime[sub_pos[0]])
                ^ bits.dot2(dprime[pad_pos], rel_diff_pad)
                ^ bits.dot2(dprime[out_pos], rel_diff_out)
            )
            if parity == target:
                pass_prob += p
        results[f"{name}_support"] = float(support)
        results[f"{name}_pass"] = round(float(pass_prob), 12)
    return results
