"""Incompressibility experiment: no compressor beats the counting bound.

A compressor maps m-bit strings to t < m bits; on uniform inputs no
decompressor can invert more than a 2^(t-m) fraction — checked both
empirically (with sampling slack) and exactly via the exhaustive
optimal decompressor.  A pseudorandom distribution breaks the bound,
demonstrating why the argument needs genuinely uniform challenges.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from sfslab import impossibility as imp
from sfslab.bits import bits_to_int, random_bits
from sfslab.errors import SfsLabError


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# Pair construction and validation
# ---------------------------------------------------------------------------


def test_pair_validation():
    with pytest.raises(SfsLabError):
        imp.CompressorPair("bad", t=5, m=4, coin_bits=0,
                           compress=lambda u, c: u[:5], decompress=lambda z, c: z)
    with pytest.raises(SfsLabError):
        imp.truncate_pad_pair(0, 4)


def test_identity_pair_always_succeeds():
    pair = imp.identity_pair(6)
    res = imp.run_incompressibility_experiment(pair, trials=200, rng=_rng(1))
    assert res.successes == res.trials
    assert res.rate == 1.0
    assert res.within_bound  # t == m makes the bound vacuous


def test_round_trip_checks_widths():
    pair = imp.truncate_pad_pair(3, 6)
    # Wrong-width input and wrong-width coins both fail loudly.
    with pytest.raises(SfsLabError):
        pair.round_trip(np.zeros(5, dtype=np.uint8), np.zeros(0, dtype=np.uint8))
    with pytest.raises(SfsLabError):
        pair.round_trip(np.zeros(6, dtype=np.uint8), np.zeros(3, dtype=np.uint8))
    # A pair whose compress/decompress emit the wrong widths is rejected too.
    u = np.zeros(6, dtype=np.uint8)
    coins = np.zeros(0, dtype=np.uint8)
    short_code = imp.CompressorPair(
        name="short-code",
        t=3,
        m=6,
        coin_bits=0,
        compress=lambda u, c: u[:2],
        decompress=lambda z, c: np.zeros(6, dtype=np.uint8),
    )
    with pytest.raises(SfsLabError):
        short_code.round_trip(u, coins)
    long_rebuild = imp.CompressorPair(
        name="long-rebuild",
        t=3,
        m=6,
        coin_bits=0,
        compress=lambda u, c: u[:3],
        decompress=lambda z, c: np.zeros(7, dtype=np.uint8),
    )
    with pytest.raises(SfsLabError):
        long_rebuild.round_trip(u, coins)


def test_deterministic_flag():
    assert imp.truncate_pad_pair(3, 6).deterministic
    assert not imp.masked_truncate_pair(3, 6).deterministic


# ---------------------------------------------------------------------------
# Counting bound
# ---------------------------------------------------------------------------


def test_counting_bound_formula():
    assert imp.counting_bound(8, 16) == 2.0 ** (8 - 16)
    assert imp.counting_bound(4, 4) == 1.0


def test_success_ceiling_adds_three_sigma():
    t, m, trials = 8, 16, 4000
    p = imp.counting_bound(t, m)
    want = p + 3 * math.sqrt(p * (1 - p) / trials)
    assert imp.success_ceiling(t, m, trials) == pytest.approx(want)


@pytest.mark.parametrize("maker", [
    imp.truncate_pad_pair, imp.masked_truncate_pair, imp.constant_pair,
], ids=["truncate", "masked", "constant"])
def test_shipped_pairs_respect_ceiling_at_8_16(maker):
    pair = maker(8, 16)
    res = imp.run_incompressibility_experiment(pair, trials=4000, rng=_rng(2026))
    assert res.within_bound, res.summary_line()


def test_prg_inverter_respects_ceiling_on_uniform():
    pair = imp.prg_inverter_pair(8, 8, 16)
    res = imp.run_incompressibility_experiment(pair, trials=4000, rng=_rng(2027))
    assert res.within_bound, res.summary_line()


def test_masked_pair_rate_tracks_bound_exactly_in_expectation():
    # The masked truncation succeeds iff the masked-away bits hit one
    # fixed pattern: expected rate exactly 2^(t-m).
    pair = imp.masked_truncate_pair(4, 8)
    res = imp.run_incompressibility_experiment(pair, trials=6000, rng=_rng(5))
    p = imp.counting_bound(4, 8)
    sigma = math.sqrt(p * (1 - p) / 6000)
    assert abs(res.rate - p) <= 3.5 * sigma


# ---------------------------------------------------------------------------
# The pseudorandom switch
# ---------------------------------------------------------------------------


def test_prg_inverter_wins_on_pseudorandom_inputs():
    n, t, m = 8, 8, 16
    pair = imp.prg_inverter_pair(n, t, m)
    sampler = imp.prg_image_sampler(n, m)
    res = imp.run_incompressibility_experiment(
        pair, trials=500, rng=_rng(7), sampler=sampler, distribution="prg-image"
    )
    assert res.rate == 1.0  # every image point inverts exactly
    assert res.bound == 1.0  # the counting bound does not apply here
    assert res.distribution == "prg-image"


def test_prg_image_sampler_emits_images():
    from sfslab.primitives import prg_expand

    sampler = imp.prg_image_sampler(6, 12)
    rng = _rng(8)
    for _ in range(20):
        u = sampler(rng)
        assert u.size == 12
        # membership: some 6-bit seed expands to u
        hits = sum(
            np.array_equal(prg_expand(np.array(
                [(s >> i) & 1 for i in range(5, -1, -1)], dtype=np.uint8), 12), u)
            for s in range(64)
        )
        assert hits >= 1


# ---------------------------------------------------------------------------
# Exhaustive optimum
# ---------------------------------------------------------------------------


def test_exhaustive_optimum_is_exactly_counting_bound():
    pair = imp.truncate_pad_pair(2, 4)
    dec = imp.optimal_decompressor_exhaustive(pair)
    assert dec.optimum == imp.counting_bound(2, 4)
    assert dec.covered == 2**2  # one preimage recovered per codeword


def test_exhaustive_optimum_for_constant_compressor():
    pair = imp.constant_pair(2, 4)
    dec = imp.optimal_decompressor_exhaustive(pair)
    assert dec.covered == 1  # a single codeword can name one preimage
    assert dec.optimum == 1 / 16


def test_exhaustive_decoder_achieves_its_optimum():
    pair = imp.truncate_pad_pair(3, 6)
    dec = imp.optimal_decompressor_exhaustive(pair)
    wins = 0
    total = 2**6
    for v in range(total):
        u = np.array([(v >> i) & 1 for i in range(5, -1, -1)], dtype=np.uint8)
        code = pair.compress(u, np.zeros(0, dtype=np.uint8))
        if np.array_equal(dec.decode(code), u):
            wins += 1
    assert wins / total == dec.optimum


def test_empirical_never_beats_exhaustive_optimum_beyond_noise():
    trials = 2000
    for maker in (imp.truncate_pad_pair, imp.constant_pair):
        pair = maker(3, 6)
        dec = imp.optimal_decompressor_exhaustive(pair)
        res = imp.run_incompressibility_experiment(pair, trials=trials, rng=_rng(9))
        sigma = math.sqrt(dec.optimum * (1 - dec.optimum) / trials)
        assert res.rate <= dec.optimum + 3 * sigma


def test_exhaustive_rejects_large_or_randomized_pairs():
    with pytest.raises(SfsLabError):
        imp.optimal_decompressor_exhaustive(imp.truncate_pad_pair(4, imp.EXHAUSTIVE_M_CAP + 1))
    with pytest.raises(SfsLabError):
        imp.optimal_decompressor_exhaustive(imp.masked_truncate_pair(3, 6))


# ---------------------------------------------------------------------------
# Suite plumbing
# ---------------------------------------------------------------------------


def test_default_pairs_cover_the_strategies():
    pairs = imp.default_pairs(8, 16)
    names = [p.name for p in pairs]
    assert len(names) == len(set(names)) == 4
    for p in pairs:
        assert p.t == 8 and p.m == 16


def test_summary_line_is_stable():
    pair = imp.truncate_pad_pair(4, 8)
    a = imp.run_incompressibility_experiment(pair, trials=500, rng=_rng(10))
    b = imp.run_incompressibility_experiment(pair, trials=500, rng=_rng(10))
    assert a.summary_line() == b.summary_line()
    assert pair.name in a.summary_line()
