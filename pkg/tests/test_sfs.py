"""Secure function sampling: client state, test/computation modes,
amplification, and the randomized-function wrapper."""

from __future__ import annotations

import numpy as np
import pytest

from sfslab import sfs as sf
from sfslab.bits import concat_bits, dot2
from sfslab.corpus import get_function
from sfslab.errors import SfsLabError, WidthError
from sfslab.primitives import prg_expand

F44 = get_function("prg:4:16")


def _params(**over) -> sf.SfsParams:
    base = dict(
        n=4, m=16, kappa=8, eps=0.5, delta=0.01, eps0=0.1,
        rounds_cap=2, reps_cap=2, test_prob=0.5,
    )
    base.update(over)
    return sf.SfsParams(**base)


# ---------------------------------------------------------------------------
# Client state structure
# ---------------------------------------------------------------------------


def test_state_layout_segments():
    lay = sf.state_layout(4, 8)
    assert [(nm, lay.width_of(nm)) for nm in lay.names()] == [
        ("sub", 1), ("in", 4), ("inpad", 8), ("outpad", 8),
    ]


def test_client_state_is_branch_pair_keyed_by_subscript():
    rng = np.random.default_rng(0)
    sec = sf.sample_secrets(rng, 4, 8)
    st = sf.build_client_state(sec, 8)
    assert st.k == 2
    by_sub = {int(b.basis[0]): b for b in st.branches}
    assert set(by_sub) == {0, 1}
    b0, b1 = by_sub[0].basis, by_sub[1].basis
    assert np.array_equal(b0[1:5], sec.x0) and np.array_equal(b1[1:5], sec.x1)
    assert np.array_equal(b0[5:13], sec.r0_in) and np.array_equal(b1[5:13], sec.r1_in)
    assert np.array_equal(b0[13:], sec.r0_out) and np.array_equal(b1[13:], sec.r1_out)
    assert by_sub[0].sign == 1 and by_sub[1].sign == 1


def test_sample_secrets_honors_chosen_inputs():
    rng = np.random.default_rng(1)
    x0 = np.array([1, 0, 1, 0], dtype=np.uint8)
    x1 = np.array([0, 1, 1, 1], dtype=np.uint8)
    sec = sf.sample_secrets(rng, 4, 8, x0=x0, x1=x1)
    assert np.array_equal(sec.x0, x0) and np.array_equal(sec.x1, x1)


def test_branch_phases_are_pad_dot_products():
    rng = np.random.default_rng(2)
    sec = sf.sample_secrets(rng, 4, 8)
    d_in = rng.integers(0, 2, size=4).astype(np.uint8)
    d_inpad = rng.integers(0, 2, size=8).astype(np.uint8)
    t0, t1 = sf.branch_phases(sec, d_in, d_inpad)
    assert t0 == (dot2(d_in, sec.x0) ^ dot2(d_inpad, sec.r0_in))
    assert t1 == (dot2(d_in, sec.x1) ^ dot2(d_inpad, sec.r1_in))


# ---------------------------------------------------------------------------
# Test mode
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("mode", ["comp", "had", None])
def test_honest_test_sessions_pass(mode):
    for seed in range(15):
        res = sf.run_sfs_test(F44, _params(), seed=seed, mode=mode)
        assert res.client.accepted, res.client.reason
        assert res.server.accepted


def test_hadamard_test_is_exact_for_honest_server():
    # The parity identity holds with certainty, not with high probability.
    for seed in range(100):
        res = sf.run_sfs_test(F44, _params(), seed=seed, mode="had")
        assert res.client.accepted, f"seed {seed}: {res.client.reason}"


def test_unknown_mode_rejected():
    with pytest.raises(SfsLabError):
        sf.run_sfs_test(F44, _params(), seed=0, mode="bogus")


def test_test_mode_transcript_has_mode_byte_and_state():
    res = sf.run_sfs_test(F44, _params(), seed=4, mode="comp")
    steps = res.transcript.steps()
    assert any(s.endswith("sfs.mode") for s in steps)
    assert any(s.endswith("sfs.state") for s in steps)


# ---------------------------------------------------------------------------
# Computation mode
# ---------------------------------------------------------------------------


def test_comp_run_delivers_function_output_to_server():
    for seed in range(20):
        res = sf.run_sfs_comp(F44, _params(), seed=seed)
        c, s = res.client, res.server
        assert c.accepted and s.accepted
        assert c.x is not None and c.y is None  # client never learns y
        assert s.y is not None and s.x is None  # server never learns x
        assert np.array_equal(s.y, F44.evaluate(c.x))


def test_comp_run_chosen_inputs_select_branch_inputs():
    x0 = np.array([0, 0, 1, 1], dtype=np.uint8)
    x1 = np.array([1, 1, 0, 0], dtype=np.uint8)
    seen = set()
    for seed in range(12):
        res = sf.run_sfs_comp(F44, _params(), seed=seed, x0=x0, x1=x1)
        assert res.client.accepted
        chosen = res.client.x
        assert np.array_equal(chosen, x0) or np.array_equal(chosen, x1)
        seen.add(int(res.client.chosen_bit))
    assert seen == {0, 1}  # both branches actually occur


# ---------------------------------------------------------------------------
# Amplified protocol
# ---------------------------------------------------------------------------


def test_full_protocol_honest_end_to_end():
    for seed in range(10):
        res = sf.run_sfs(F44, _params(), seed=seed)
        c = res.client
        assert c.accepted, c.reason
        if c.x is not None:  # a computation round was selected
            assert np.array_equal(res.server.y, F44.evaluate(c.x))
            assert c.selected_round is not None and c.selected_rep is not None


def test_full_protocol_all_test_rounds_degenerates_to_pass():
    res = sf.run_sfs(F44, _params(test_prob=1.0, rounds_cap=3, reps_cap=1), seed=5)
    assert res.client.accepted
    assert res.client.x is None and res.server.y is None
    assert res.client.n_test_rounds == 3 and res.client.n_comp_rounds == 0


def test_full_protocol_no_test_rounds_always_computes():
    res = sf.run_sfs(F44, _params(test_prob=0.0, rounds_cap=3, reps_cap=1), seed=6)
    assert res.client.accepted
    assert res.client.n_test_rounds == 0 and res.client.n_comp_rounds == 3
    assert res.client.x is not None


def test_round_counts_add_up():
    res = sf.run_sfs(F44, _params(rounds_cap=4, reps_cap=2), seed=7)
    c = res.client
    assert c.n_test_rounds + c.n_comp_rounds == 4 * 2


def test_temp_protocol_with_chosen_inputs():
    x = np.array([1, 0, 1, 0], dtype=np.uint8)
    res = sf.run_sfs_temp(
        F44, _params(test_prob=0.0, rounds_cap=1, reps_cap=1), seed=8,
        chosen_inputs=(x, x),
    )
    assert res.client.accepted
    assert np.array_equal(res.client.x, x)
    assert np.array_equal(res.server.y, F44.evaluate(x))


def test_full_protocol_deterministic_per_seed():
    a = sf.run_sfs(F44, _params(), seed=9)
    b = sf.run_sfs(F44, _params(), seed=9)
    assert a.transcript.to_jsonl() == b.transcript.to_jsonl()
    assert a.client.accepted == b.client.accepted
    assert (a.client.x is None) == (b.client.x is None)
    if a.client.x is not None:
        assert np.array_equal(a.client.x, b.client.x)


# ---------------------------------------------------------------------------
# Randomized functions
# ---------------------------------------------------------------------------


def test_derandomized_function_expands_seed_half():
    g = sf.derandomized_function(F44, 2, 8)
    assert g.n_in == 2 + 8 and g.n_out == 16
    rng = np.random.default_rng(10)
    x = rng.integers(0, 2, size=2).astype(np.uint8)
    s = rng.integers(0, 2, size=8).astype(np.uint8)
    want = F44.evaluate(concat_bits(x, prg_expand(s, 2)))
    assert np.array_equal(g.evaluate(concat_bits(x, s)), want)


def test_derandomized_function_needs_coin_bits():
    with pytest.raises(WidthError):
        sf.derandomized_function(F44, 4, 8)  # no coins left


def test_run_sfs_randomized_discards_seed_half():
    params = sf.SfsParams(
        n=2, m=16, kappa=8, eps=0.5, delta=0.01, eps0=0.1,
        rounds_cap=1, reps_cap=2, test_prob=0.0,
    )
    res = sf.run_sfs_randomized(F44, params, seed=7, coin_bits=2)
    c = res.client
    assert c.accepted and c.x is not None and c.x.size == 2
    seed_half = c.extra["_discarded_seed"]
    assert seed_half.size == params.kappa
    full = concat_bits(c.x, prg_expand(seed_half, 2))
    assert np.array_equal(res.server.y, F44.evaluate(full))


def test_run_sfs_randomized_checks_arity():
    params = sf.SfsParams(n=3, m=16, kappa=8)
    with pytest.raises(WidthError):
        sf.run_sfs_randomized(F44, params, seed=0, coin_bits=2)  # 3+2 != 4


# ---------------------------------------------------------------------------
# Parameter validation
# ---------------------------------------------------------------------------


def test_params_reject_bad_values():
    with pytest.raises(SfsLabError):
        sf.SfsParams(n=0, m=4)
    with pytest.raises(SfsLabError):
        sf.SfsParams(n=4, m=0)
    with pytest.raises(SfsLabError):
        sf.SfsParams(n=4, m=4, eps=0.0)
    with pytest.raises(SfsLabError):
        sf.SfsParams(n=4, m=4, kappa=0)
    with pytest.raises(SfsLabError):
        sf.SfsParams(n=4, m=4, delta=0)
