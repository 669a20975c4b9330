"""Why no classical one-message protocol can do what the sampler does.

A classical server that convinces a classical client of an ``m``-bit
output while sending only ``t < m`` bits is, information-
theoretically, a compressor: whatever the client reconstructs is a
function of the ``t``-bit message (and shared coins), so at most
``2^t`` of the ``2^m`` candidate outputs can ever be reproduced.
This module makes that counting argument executable:

* a :class:`CompressorPair` is any compress/decompress scheme with
  shared coins;
* :func:`run_incompressibility_experiment` measures how often a pair
  round-trips a uniform ``m``-bit string — never beating
  ``2^(t-m)`` beyond sampling error;
* :func:`optimal_decompressor_exhaustive` computes, at toy sizes, the
  *best possible* decompressor for a fixed deterministic compressor,
  giving a tight ceiling every concrete pair must sit under;
* the pair library includes a PRG-table inverter that round-trips
  pseudorandom inputs perfectly yet still fails on uniform ones —
  the distinguishing step that turns the counting bound into a
  contradiction with pseudorandomness, at table-enumerable scale.

The quantum protocols in this package escape the bound because the
server's answer is sampled from a verified state rather than
reconstructed from the transcript; nothing here quantifies over all
protocols — it demonstrates the counting core, not a universal
impossibility checker.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import bits
from .errors import SfsLabError, WidthError
from .primitives import prg_expand

__all__ = [
    "CompressorPair",
    "ExperimentResult",
    "OptimalDecoder",
    "identity_pair",
    "truncate_pad_pair",
    "masked_truncate_pair",
    "constant_pair",
    "prg_inverter_pair",
    "default_pairs",
    "counting_bound",
    "success_ceiling",
    "run_incompressibility_experiment",
    "prg_image_sampler",
    "optimal_decompressor_exhaustive",
    "EXHAUSTIVE_M_CAP",
]

EXHAUSTIVE_M_CAP = 10


# ---------------------------------------------------------------------------
# The interface
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CompressorPair:
    """A one-message classical reconstruction scheme.

    ``compress(u, coins)`` maps an ``m``-bit string to a ``t``-bit
    message; ``decompress(code, coins)`` tries to rebuild ``u`` from
    the message alone.  Both sides see the same ``coin_bits``-bit
    coin string (shared randomness never helps the counting bound).
    ``t < m`` is the nontrivial regime; ``t = m`` is allowed so the
    identity pair can calibrate the harness.
    """

    name: str
    t: int
    m: int
    coin_bits: int
    compress: Callable[[np.ndarray, np.ndarray], np.ndarray]
    decompress: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def __post_init__(self) -> None:
        if self.t < 1 or self.m < 1:
            raise WidthError("t and m must be positive")
        if self.t > self.m:
            raise WidthError(f"message longer than the payload (t={self.t} > m={self.m})")
        if self.coin_bits < 0:
            raise WidthError("coin_bits must be nonnegative")

    @property
    def deterministic(self) -> bool:
        return self.coin_bits == 0

    def round_trip(self, u: np.ndarray, coins: np.ndarray) -> bool:
        """Does ``u`` survive compress→decompress under these coins?"""
        u = bits.as_bits(u)
        if u.size != self.m:
            raise WidthError(f"{self.name}: input has {u.size} bits, wants {self.m}")
        coins = bits.as_bits(coins)
        if coins.size != self.coin_bits:
            raise WidthError(
                f"{self.name}: got {coins.size} coin bits, wants {self.coin_bits}"
            )
        code = bits.as_bits(self.compress(u, coins))
        if code.size != self.t:
            raise WidthError(
                f"{self.name}: compress produced {code.size} bits, wants {self.t}"
            )
        rebuilt = bits.as_bits(self.decompress(code, coins))
        if rebuilt.size != self.m:
            raise WidthError(
                f"{self.name}: decompress produced {rebuilt.size} bits, wants {self.m}"
            )
        return bits.bits_equal(rebuilt, u)


# ---------------------------------------------------------------------------
# Pair library
# ---------------------------------------------------------------------------


def identity_pair(m: int) -> CompressorPair:
    """t = m: lossless, succeeds always — the calibration point."""
    return CompressorPair(
        name=f"identity[{m}]",
        t=m,
        m=m,
        coin_bits=0,
        compress=lambda u, _c: u,
        decompress=lambda code, _c: code,
    )


def truncate_pad_pair(t: int, m: int) -> CompressorPair:
    """Keep the first ``t`` bits, pad the rest with zeros on rebuild."""

    def compress(u: np.ndarray, _c: np.ndarray) -> np.ndarray:
        return bits.as_bits(u)[:t]

    def decompress(code: np.ndarray, _c: np.ndarray) -> np.ndarray:
        return bits.concat_bits(bits.as_bits(code), bits.zeros(m - t))

    return CompressorPair(
        name=f"truncate-pad[{t},{m}]", t=t, m=m, coin_bits=0,
        compress=compress, decompress=decompress,
    )


def masked_truncate_pair(t: int, m: int) -> CompressorPair:
    """Truncation under a shared one-time mask.

    Succeeds exactly when the unsent tail of ``u`` happens to equal
    the mask's tail — probability ``2^(t-m)`` on the nose, showing
    shared coins shuffle the winners without adding any.
    """

    def compress(u: np.ndarray, coins: np.ndarray) -> np.ndarray:
        return bits.xor_bits(bits.as_bits(u), coins)[:t]

    def decompress(code: np.ndarray, coins: np.ndarray) -> np.ndarray:
        padded = bits.concat_bits(bits.as_bits(code), bits.zeros(m - t))
        return bits.xor_bits(padded, coins)

    return CompressorPair(
        name=f"masked-truncate[{t},{m}]", t=t, m=m, coin_bits=m,
        compress=compress, decompress=decompress,
    )


def constant_pair(t: int, m: int) -> CompressorPair:
    """Single codeword: the floor case, succeeding only on one input."""
    return CompressorPair(
        name=f"constant[{t},{m}]",
        t=t,
        m=m,
        coin_bits=0,
        compress=lambda _u, _c: bits.zeros(t),
        decompress=lambda _code, _c: bits.zeros(m),
    )


def prg_inverter_pair(n: int, t: int, m: int) -> CompressorPair:
    """Invert an ``n``-bit-seed PRG by table lookup.

    On inputs drawn from the PRG image the pair round-trips
    perfectly: the seed fits in the message with room to spare.  On
    uniform inputs it can only ever win on the image — at most
    ``2^n`` strings out of ``2^m`` — so the same pair that looks like
    a working compressor against pseudorandomness collapses against
    true randomness.  Table-building keeps ``n`` small.
    """
    if n > 16:
        raise SfsLabError(f"PRG table with 2^{n} rows is past the toy-scale cap")
    if t < n:
        raise WidthError(f"the seed does not fit the message (t={t} < n={n})")
    table: dict[bytes, int] = {}
    for x_val in range(2 ** n):
        image = prg_expand(bits.int_to_bits(x_val, n), m)
        table.setdefault(bits.pack_bits(image), x_val)

    def compress(u: np.ndarray, _c: np.ndarray) -> np.ndarray:
        x_val = table.get(bits.pack_bits(bits.as_bits(u)), 0)
        return bits.int_to_bits(x_val, t)

    def decompress(code: np.ndarray, _c: np.ndarray) -> np.ndarray:
        seed = bits.as_bits(code)[t - n :]  # the seed sits in the low-order bits
        return prg_expand(seed, m)

    return CompressorPair(
        name=f"prg-inverter[{n};{t},{m}]", t=t, m=m, coin_bits=0,
        compress=compress, decompress=decompress,
    )


def default_pairs(t: int, m: int, prg_seed_bits: int | None = None) -> list[CompressorPair]:
    """The standard experiment suite at a given (t, m)."""
    n = prg_seed_bits if prg_seed_bits is not None else min(t, 8)
    pairs = [
        truncate_pad_pair(t, m),
        masked_truncate_pair(t, m),
        constant_pair(t, m),
        prg_inverter_pair(n, t, m),
    ]
    return pairs


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


def counting_bound(t: int, m: int) -> float:
    """At most 2^t of the 2^m strings can ever round-trip: 2^(t-m)."""
    return 2.0 ** (t - m)


def success_ceiling(t: int, m: int, trials: int) -> float:
    """Counting bound plus three binomial standard errors."""
    p = counting_bound(t, m)
    sigma = math.sqrt(p * (1.0 - p) / trials)
    return p + 3.0 * sigma


@dataclass
class ExperimentResult:
    """Empirical round-trip rate of one pair against one input law."""

    pair: str
    t: int
    m: int
    distribution: str
    trials: int
    successes: int
    bound: float

    @property
    def rate(self) -> float:
        return self.successes / self.trials

    @property
    def within_bound(self) -> bool:
        return self.rate <= self.bound

    def summary_line(self) -> str:
        return (
            f"{self.pair:>28s}  {self.distribution:>9s}  "
            f"rate {self.rate:.6f}  bound {self.bound:.6f}  "
            f"({self.successes}/{self.trials})"
        )


def prg_image_sampler(n: int, m: int) -> Callable[[np.random.Generator], np.ndarray]:
    """Input law u = PRG(x) on a uniform ``n``-bit seed."""

    def sample(rng: np.random.Generator) -> np.ndarray:
        return prg_expand(bits.random_bits(rng, n), m)

    return sample


def run_incompressibility_experiment(
    pair: CompressorPair,
    trials: int,
    rng: np.random.Generator | int,
    sampler: Callable[[np.random.Generator], np.ndarray] | None = None,
    distribution: str = "uniform",
) -> ExperimentResult:
    """Round-trip rate over ``trials`` fresh (input, coins) draws.

    With the default uniform sampler, the reported ``bound`` is the
    counting ceiling ``2^(t-m) + 3σ`` and honest pairs stay below it;
    a non-uniform ``sampler`` (e.g. :func:`prg_image_sampler`) sets
    the bound to 1 since the ceiling only speaks about uniform
    inputs.
    """
    if trials < 1:
        raise SfsLabError("trials must be positive")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    draw = sampler if sampler is not None else (lambda g: bits.random_bits(g, pair.m))
    bound = success_ceiling(pair.t, pair.m, trials) if sampler is None else 1.0
    successes = 0
    for _ in range(trials):
        u = draw(rng)
        coins = bits.random_bits(rng, pair.coin_bits)
        if pair.round_trip(u, coins):
            successes += 1
    return ExperimentResult(
        pair=pair.name,
        t=pair.t,
        m=pair.m,
        distribution=distribution if sampler is not None else "uniform",
        trials=trials,
        successes=successes,
        bound=bound,
    )


# ---------------------------------------------------------------------------
# The tight ceiling at toy sizes
# ---------------------------------------------------------------------------


@dataclass
class OptimalDecoder:
    """The best decompressor for a fixed deterministic compressor.

    ``table[c]`` is the ``m``-bit string decoded from codeword ``c``
    (indexed as an integer); ``optimum`` is its exact success rate on
    uniform inputs, which no decompressor can beat.
    """

    t: int
    m: int
    covered: int
    optimum: float
    table: np.ndarray  # (2^t, m) uint8

    def decode(self, code: np.ndarray) -> np.ndarray:
        return self.table[bits.bits_to_int(bits.as_bits(code))]


def optimal_decompressor_exhaustive(pair: CompressorPair) -> OptimalDecoder:
    """Exact optimum over all decompressor tables, input-by-input.

    A decompressor's success splits into independent per-codeword
    terms — each codeword decodes to exactly one string, recovering
    at most one preimage — so choosing any one preimage per used
    codeword is exhaustively optimal: success = (number of nonempty
    preimage classes, necessarily at most ``2^t``) / ``2^m``.  The
    explicit table realizes the optimum and is re-checked against
    every input.
    """
    if not pair.deterministic:
        raise SfsLabError(f"{pair.name} uses coins; the exhaustive oracle is for deterministic pairs")
    if pair.m > EXHAUSTIVE_M_CAP:
        raise SfsLabError(
            f"m={pair.m} exceeds the exhaustive cap {EXHAUSTIVE_M_CAP}"
        )
    no_coins = bits.zeros(0)
    table = np.zeros((2 ** pair.t, pair.m), dtype=np.uint8)
    claimed = np.zeros(2 ** pair.t, dtype=bool)
    for u_val in range(2 ** pair.m):
        u = bits.int_to_bits(u_val, pair.m)
        code = bits.as_bits(pair.compress(u, no_coins))
        if code.size != pair.t:
            raise WidthError(
                f"{pair.name}: compress produced {code.size} bits, wants {pair.t}"
            )
        c_val = bits.bits_to_int(code)
        if not claimed[c_val]:
            claimed[c_val] = True
            table[c_val] = u
    covered = int(claimed.sum())
    covered = min(covered, 2 ** pair.t)
    optimum = covered / 2 ** pair.m
    # re-check: the explicit table achieves exactly the claimed optimum
    wins = 0
    for u_val in range(2 ** pair.m):
        u = bits.int_to_bits(u_val, pair.m)
        code = bits.as_bits(pair.compress(u, no_coins))
        if bits.bits_equal(table[bits.bits_to_int(code)], u):
            wins += 1
    if wins != covered:
        raise SfsLabError(
            f"{pair.name}: table achieves {wins}/2^{pair.m}, counting says {covered}"
        )
    return OptimalDecoder(
        t=pair.t, m=pair.m, covered=covered, optimum=optimum, table=table
    )
