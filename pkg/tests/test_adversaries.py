"""Server deviations and their statistically predicted pass rates.

The copying deviation passes the computational test perfectly but can
only pass the Hadamard test half the time (the copy destroys the
interference the parity check relies on); mixing the two test bases
therefore caps any such server at 3/4 per round.  These are checked
against a Wilson interval at frozen seeds and against the exact dense
computation in ``check_interference_identity``.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from sfslab import adversaries as adv
from sfslab.corpus import get_function
from sfslab.errors import SfsLabError
from sfslab.sfs import SfsParams

F = get_function("prg:4:16")


def _params() -> SfsParams:
    return SfsParams(
        n=4, m=16, kappa=8, eps=0.5, delta=0.01, eps0=0.1,
        rounds_cap=1, reps_cap=1, test_prob=1.0,
    )


def _wilson_oracle(successes: int, trials: int, z: float = 1.96):
    """Direct transcription of the Wilson score interval formula."""
    p = successes / trials
    denom = 1 + z**2 / trials
    center = (p + z**2 / (2 * trials)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / trials + z**2 / (4 * trials**2))
    return center - half, center + half


def test_registry_contents_and_freshness():
    assert set(adv.ADVERSARIES) == {
        "honest", "copying", "single-branch", "witness-swap",
    }
    a = adv.make_hooks("copying")
    b = adv.make_hooks("copying")
    assert a is not b  # no state bleeds between trials
    with pytest.raises(SfsLabError):
        adv.make_hooks("nonesuch")


@pytest.mark.parametrize("bad", [(1, 0), (-1, 10), (11, 10)])
def test_wilson_interval_validates(bad):
    with pytest.raises(SfsLabError):
        adv.wilson_interval(*bad)


@pytest.mark.parametrize("successes,trials", [(155, 200), (0, 50), (50, 50), (333, 1000)])
def test_wilson_interval_matches_formula(successes, trials):
    got = adv.wilson_interval(successes, trials)
    lo, hi = _wilson_oracle(successes, trials)
    assert got.lo == pytest.approx(lo, abs=1e-12)
    assert got.hi == pytest.approx(hi, abs=1e-12)
    assert got.lo <= got.point <= got.hi


def test_honest_server_always_passes():
    rep = adv.run_soundness_experiment("honest", F, _params(), trials=60, seed=11)
    assert rep.passes == rep.trials == 60
    assert not rep.reject_reasons


def test_copying_server_mixed_rate_near_three_quarters():
    rep = adv.run_soundness_experiment("copying", F, _params(), trials=600, seed=2026)
    rate = rep.passes / rep.trials
    assert abs(rate - 0.75) < 0.05, rate
    assert rep.interval.lo <= 0.75 <= rep.interval.hi


def test_copying_server_hadamard_only_rate_near_half():
    rep = adv.run_soundness_experiment(
        "copying", F, _params(), trials=600, seed=2027, mode="had"
    )
    rate = rep.passes / rep.trials
    assert abs(rate - 0.5) < 0.06, rate


def test_copying_server_computational_test_perfect():
    rep = adv.run_soundness_experiment(
        "copying", F, _params(), trials=120, seed=5, mode="comp"
    )
    assert rep.passes == rep.trials  # the copy is invisible in this basis


def test_single_branch_server_same_profile_as_copying():
    mixed = adv.run_soundness_experiment(
        "single-branch", F, _params(), trials=600, seed=31
    )
    had = adv.run_soundness_experiment(
        "single-branch", F, _params(), trials=600, seed=32, mode="had"
    )
    assert abs(mixed.passes / mixed.trials - 0.75) < 0.05
    assert abs(had.passes / had.trials - 0.5) < 0.06


def test_witness_swap_server_rejected_by_relation_check():
    rep = adv.run_soundness_experiment(
        "witness-swap", F, _params(), trials=100, seed=41, mode="comp"
    )
    assert rep.passes < rep.trials  # swapped witnesses fail the relation
    assert rep.reject_reasons  # with recorded reasons


def test_reports_carry_reject_reasons():
    rep = adv.run_soundness_experiment("copying", F, _params(), trials=150, seed=51)
    assert rep.passes < rep.trials
    assert sum(rep.reject_reasons.values()) == rep.trials - rep.passes
    line = rep.summary_line()
    assert "copying" in line and str(rep.trials) in line


def test_experiment_is_seed_deterministic():
    a = adv.run_soundness_experiment("copying", F, _params(), trials=80, seed=7)
    b = adv.run_soundness_experiment("copying", F, _params(), trials=80, seed=7)
    assert a.passes == b.passes
    assert a.reject_reasons == b.reject_reasons


def test_interference_identity_is_exact():
    res = adv.check_interference_identity(seed=3)
    assert res["honest_pass"] == 1.0
    assert res["copying_pass"] == 0.5
    # copying enlarges the support fourfold: the residual copy register
    # decoheres the branch pair instead of interfering it away
    assert res["copying_support"] == 4 * res["honest_support"]


def test_amplified_rejection_tracks_analytic_curve():
    # One quick point of the 1-(3/4)^T curve; the acceptance suite
    # sweeps T in {4, 8, 16} at higher trial counts.
    from sfslab.sfs import run_sfs

    T = 4
    params = SfsParams(
        n=4, m=16, kappa=8, eps=0.5, delta=0.01, eps0=0.1,
        rounds_cap=T, reps_cap=1, test_prob=1.0,
    )
    hooks_name = "copying"
    rejects = 0
    trials = 300
    seeds = np.random.SeedSequence(3004).generate_state(trials, dtype=np.uint64)
    for s in seeds:
        res = run_sfs(F, params, seed=int(s), hooks=adv.make_hooks(hooks_name))
        rejects += 0 if res.client.accepted else 1
    want = 1 - 0.75**T
    assert abs(rejects / trials - want) < 0.07
