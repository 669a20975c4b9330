"""Classical cryptographic building blocks and the collapsing game.

Everything here is instantiated from SHA-256 and is meant for
*laboratory* use: the constructions have the right interfaces, sizes,
and correctness behaviour, and the statistical experiments in this
package exercise them, but no security proof is claimed at these
parameter sizes.

Contents:

* a keyed compressing hash family (:func:`sample_hash`,
  :func:`hash_eval`) with a fixed-size wire encoding;
* a pseudorandom generator on bit strings (:func:`prg_expand`);
* a per-bit statistically-binding commitment (:func:`commit`,
  :func:`verify_opening`) in the common-random-string model;
* Merkle trees with domain-separated leaf/node hashing
  (:func:`merkle_build`, :func:`merkle_prove`, :func:`merkle_verify`);
* the collapsing game for hash functions on few-branch states
  (:func:`collapsing_game`), with a collision-pair adversary that
  achieves a large gap and honest adversaries that achieve exactly
  zero.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import bits
from .errors import SfsLabError, StateError, WidthError
from .sparse_qsim import (
    RegisterLayout,
    SparseState,
    append_zero_segment,
    apply_classical_oracle,
    copy_registers,
    make_basis_state,
    make_branch_pair,
    measure_computational,
    measure_hadamard,
)

__all__ = [
    "HASH_KEY_BYTES",
    "HashFn",
    "sample_hash",
    "hash_eval",
    "hash_to_bytes",
    "hash_from_bytes",
    "prg_expand",
    "CommitParams",
    "sample_commit_params",
    "sample_commit_randomness",
    "commit",
    "verify_opening",
    "MerkleTree",
    "merkle_build",
    "merkle_prove",
    "merkle_verify",
    "CollapsingGameResult",
    "collapsing_game",
    "collision_pair_adversary",
    "distinct_digest_adversary",
    "honest_basis_adversary",
]

HASH_KEY_BYTES = 16

_PRG_DOMAIN = b"sfslab-prg-v1\x00\x00\x00"
assert len(_PRG_DOMAIN) == HASH_KEY_BYTES


def _sha_stream(prefix: bytes, n_bits: int, counter_bytes: int = 8) -> np.ndarray:
    """First ``n_bits`` bits of SHA-256(prefix || counter) in counter mode."""
    if n_bits < 0:
        raise WidthError(f"cannot produce {n_bits} bits")
    need = bits.packed_size(n_bits)
    out = bytearray()
    counter = 0
    while len(out) < need:
        out += hashlib.sha256(prefix + counter.to_bytes(counter_bytes, "big")).digest()
        counter += 1
    arr = np.unpackbits(np.frombuffer(bytes(out[:need]), dtype=np.uint8))
    return arr[:n_bits].astype(np.uint8)


# ---------------------------------------------------------------------------
# Keyed compressing hash family
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HashFn:
    """One member of the keyed hash family: in_bits -> out_bits."""

    key: bytes
    in_bits: int
    out_bits: int

    def __post_init__(self) -> None:
        if len(self.key) != HASH_KEY_BYTES:
            raise WidthError(f"hash key must be {HASH_KEY_BYTES} bytes")
        if self.in_bits < 1 or self.out_bits < 1:
            raise WidthError("hash widths must be >= 1")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return hash_eval(self, x)


def sample_hash(rng: np.random.Generator, in_bits: int, out_bits: int) -> HashFn:
    """Sample a fresh member of the hash family."""
    key = rng.integers(0, 256, size=HASH_KEY_BYTES, dtype=np.uint8).tobytes()
    return HashFn(key, in_bits, out_bits)


def hash_eval(h: HashFn, x: np.ndarray) -> np.ndarray:
    """Evaluate the keyed hash on ``in_bits`` input bits."""
    x = bits.as_bits(x)
    if x.size != h.in_bits:
        raise WidthError(f"hash expects {h.in_bits} input bits, got {x.size}")
    prefix = (
        h.key
        + h.in_bits.to_bytes(4, "big")
        + h.out_bits.to_bytes(4, "big")
        + bits.pack_bits(x)
    )
    return _sha_stream(prefix, h.out_bits, counter_bytes=4)


def hash_to_bytes(h: HashFn) -> bytes:
    """Fixed 24-byte wire encoding: key || u32 in_bits || u32 out_bits."""
    return h.key + h.in_bits.to_bytes(4, "big") + h.out_bits.to_bytes(4, "big")


def hash_from_bytes(data: bytes) -> HashFn:
    if len(data) != HASH_KEY_BYTES + 8:
        raise WidthError(f"hash encoding must be {HASH_KEY_BYTES + 8} bytes, got {len(data)}")
    key = data[:HASH_KEY_BYTES]
    in_bits = int.from_bytes(data[HASH_KEY_BYTES : HASH_KEY_BYTES + 4], "big")
    out_bits = int.from_bytes(data[HASH_KEY_BYTES + 4 :], "big")
    return HashFn(key, in_bits, out_bits)


# ---------------------------------------------------------------------------
# Pseudorandom generator
# ---------------------------------------------------------------------------


def prg_expand(seed: np.ndarray, n_out: int) -> np.ndarray:
    """Deterministically expand a seed bit string to ``n_out`` bits.

    The seed length is bound into the hash input, so seeds of
    different lengths that pack to the same bytes expand differently.
    """
    seed = bits.as_bits(seed)
    prefix = (
        _PRG_DOMAIN + seed.size.to_bytes(4, "big") + bits.pack_bits(seed)
    )
    return _sha_stream(prefix, n_out, counter_bytes=8)


# ---------------------------------------------------------------------------
# Commitment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CommitParams:
    """Public parameters for the per-bit commitment.

    ``pp`` is a common random string of ``3 * n_bits * kappa`` bits;
    message bit i uses the slice ``pp[3*kappa*i : 3*kappa*(i+1)]``.
    """

    n_bits: int
    kappa: int
    pp: np.ndarray

    def __post_init__(self) -> None:
        pp = bits.as_bits(self.pp)
        if pp.size != 3 * self.n_bits * self.kappa:
            raise WidthError(
                f"pp must have {3 * self.n_bits * self.kappa} bits, got {pp.size}"
            )
        pp.setflags(write=False)
        object.__setattr__(self, "pp", pp)

    @property
    def randomness_bits(self) -> int:
        return self.n_bits * self.kappa

    @property
    def commitment_bits(self) -> int:
        return 3 * self.n_bits * self.kappa


def sample_commit_params(
    rng: np.random.Generator, n_bits: int, kappa: int
) -> CommitParams:
    return CommitParams(n_bits, kappa, bits.random_bits(rng, 3 * n_bits * kappa))


def sample_commit_randomness(rng: np.random.Generator, params: CommitParams) -> np.ndarray:
    return bits.random_bits(rng, params.randomness_bits)


def commit(msg: np.ndarray, r: np.ndarray, params: CommitParams) -> np.ndarray:
    """Commit to ``msg`` bit by bit.

    Bit i expands its ``kappa``-bit slice of ``r`` to ``3*kappa``
    pseudorandom bits G_i; the commitment slice is G_i itself for a 0
    bit and G_i XOR pp_i for a 1 bit.
    """
    msg = bits.as_bits(msg)
    r = bits.as_bits(r)
    if msg.size != params.n_bits:
        raise WidthError(f"message must have {params.n_bits} bits, got {msg.size}")
    if r.size != params.randomness_bits:
        raise WidthError(
            f"randomness must have {params.randomness_bits} bits, got {r.size}"
        )
    kappa = params.kappa
    out = np.empty(params.commitment_bits, dtype=np.uint8)
    for i in range(params.n_bits):
        g = prg_expand(r[i * kappa : (i + 1) * kappa], 3 * kappa)
        slice_ = slice(3 * kappa * i, 3 * kappa * (i + 1))
        if msg[i]:
            out[slice_] = np.bitwise_xor(g, params.pp[slice_])
        else:
            out[slice_] = g
    return out


def verify_opening(
    com: np.ndarray, msg: np.ndarray, r: np.ndarray, params: CommitParams
) -> bool:
    """Check that ``(msg, r)`` opens the commitment ``com``."""
    com = bits.as_bits(com)
    if com.size != params.commitment_bits:
        return False
    try:
        expected = commit(msg, r, params)
    except WidthError:
        return False
    return bool(np.array_equal(com, expected))


# ---------------------------------------------------------------------------
# Merkle trees
# ---------------------------------------------------------------------------


def _leaf_hash(leaf: bytes) -> bytes:
    return hashlib.sha256(b"\x00" + leaf).digest()


def _node_hash(left: bytes, right: bytes) -> bytes:
    return hashlib.sha256(b"\x01" + left + right).digest()


def merkle_depth(n_leaves: int) -> int:
    """Number of sibling digests in a proof for a tree of ``n_leaves``."""
    if n_leaves < 1:
        raise WidthError("merkle tree needs at least one leaf")
    depth = 0
    while (1 << depth) < n_leaves:
        depth += 1
    return depth


@dataclass(frozen=True)
class MerkleTree:
    """A built tree: ``levels[0]`` are leaf hashes, the last level is the root."""

    n_leaves: int
    levels: tuple[tuple[bytes, ...], ...]

    @property
    def root(self) -> bytes:
        return self.levels[-1][0]


def merkle_build(leaves: Sequence[bytes]) -> MerkleTree:
    """Hash leaves and combine pairwise; an odd last node pairs with itself."""
    if not leaves:
        raise WidthError("merkle tree needs at least one leaf")
    level = tuple(_leaf_hash(leaf) for leaf in leaves)
    levels = [level]
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level), 2):
            left = level[i]
            right = level[i + 1] if i + 1 < len(level) else level[i]
            nxt.append(_node_hash(left, right))
        level = tuple(nxt)
        levels.append(level)
    return MerkleTree(len(leaves), tuple(levels))


def merkle_prove(tree: MerkleTree, index: int) -> list[bytes]:
    """Sibling digests from leaf level to just below the root."""
    if not 0 <= index < tree.n_leaves:
        raise WidthError(f"leaf index {index} out of range [0, {tree.n_leaves})")
    path = []
    idx = index
    for level in tree.levels[:-1]:
        sibling = idx ^ 1
        path.append(level[sibling] if sibling < len(level) else level[idx])
        idx //= 2
    return path


def merkle_verify(
    root: bytes, n_leaves: int, index: int, leaf: bytes, path: Sequence[bytes]
) -> bool:
    """Check a leaf/path pair against a root for a tree of ``n_leaves``."""
    if not 0 <= index < n_leaves:
        return False
    if len(path) != merkle_depth(n_leaves):
        return False
    h = _leaf_hash(leaf)
    idx = index
    for sibling in path:
        if idx % 2 == 0:
            h = _node_hash(h, sibling)
        else:
            h = _node_hash(sibling, h)
        idx //= 2
    return h == root


# ---------------------------------------------------------------------------
# Collapsing game
# ---------------------------------------------------------------------------

# An adversary is a callable (rng, h) -> (state, distinguish) where
# ``state`` lives on the single-segment layout [("w", h.in_bits)] and
# ``distinguish(rng, post_state) -> int`` guesses 1 for the
# digest-measurement branch of the game and 0 for the full-register
# measurement branch.
CollapsingAdversary = Callable[
    [np.random.Generator, HashFn],
    tuple[SparseState, Callable[[np.random.Generator, SparseState], int]],
]


@dataclass(frozen=True)
class CollapsingGameResult:
    name: str
    trials: int
    in_bits: int
    out_bits: int
    eval_hits: int
    collapse_hits: int

    @property
    def p_eval(self) -> float:
        return self.eval_hits / self.trials

    @property
    def p_collapse(self) -> float:
        return self.collapse_hits / self.trials

    @property
    def gap(self) -> float:
        return self.p_eval - self.p_collapse


def collapsing_game(
    adversary: CollapsingAdversary,
    *,
    in_bits: int,
    out_bits: int,
    trials: int,
    seed: int,
    name: str = "adversary",
) -> CollapsingGameResult:
    """Run the two-branch collapsing experiment against the hash family.

    Per trial the adversary prepares a state on register ``w`` (all of
    whose branches should share a digest for the state to be a valid
    preimage superposition — nothing enforces this; a sloppy adversary
    just faces a digest measurement that collapses its state).  The
    challenger then runs *both* game branches from identical RNG
    streams (common random numbers):

    * digest branch: append a digest register, apply the hash as a
      classical oracle, measure the digest;
    * full branch: append a copy register, basis-copy ``w`` into it,
      measure the copy.

    Both branches end on the original single-segment layout and hand
    the post-state to the adversary's distinguisher.  The paired
    streams make the two branches *exactly* identical whenever the
    post-measurement states coincide draw for draw — single-branch
    states and distinct-digest superpositions give gap exactly 0, not
    just 0 in expectation.
    """
    if trials < 1:
        raise SfsLabError("collapsing game needs at least one trial")
    layout = RegisterLayout.of(("w", in_bits))
    eval_hits = 0
    collapse_hits = 0
    for child in np.random.SeedSequence(seed).spawn(trials):
        adv_seed, game_seed = child.spawn(2)
        rng_adv = np.random.Generator(np.random.PCG64(adv_seed))
        h = sample_hash(rng_adv, in_bits, out_bits)
        state, distinguish = adversary(rng_adv, h)
        if state.layout != layout:
            raise StateError("adversary state must live on the single segment 'w'")

        rng_digest = np.random.Generator(np.random.PCG64(game_seed))
        st = append_zero_segment(state, "digest", out_bits)
        st = apply_classical_oracle(st, lambda row: hash_eval(h, row), "w", "digest")
        _, post = measure_computational(st, "digest", rng_digest)
        eval_hits += 1 if distinguish(rng_digest, post) == 1 else 0

        rng_full = np.random.Generator(np.random.PCG64(game_seed))
        st = append_zero_segment(state, "copy", in_bits)
        st = copy_registers(st, "w", "copy")
        _, post = measure_computational(st, "copy", rng_full)
        collapse_hits += 1 if distinguish(rng_full, post) == 1 else 0

    return CollapsingGameResult(name, trials, in_bits, out_bits, eval_hits, collapse_hits)


def _hadamard_parity_distinguisher(delta: np.ndarray):
    """Guess "digest branch" iff the Hadamard outcome is orthogonal to delta.

    An intact two-branch superposition with basis difference ``delta``
    and equal signs only ever yields orthogonal outcomes; a collapsed
    single branch yields a uniform outcome, orthogonal half the time.
    """

    def distinguish(rng: np.random.Generator, post: SparseState) -> int:
        d, _ = measure_hadamard(post, "w", rng)
        return 1 if bits.dot2(d, delta) == 0 else 0

    return distinguish


def collision_pair_adversary(rng: np.random.Generator, h: HashFn):
    """Superpose two colliding preimages; distinguish with a Hadamard parity.

    Finds a collision by exhausting the input space, so it needs
    ``2**in_bits > 2**out_bits`` and small ``in_bits``.  Wins the game
    with probability 1 on the digest branch and 1/2 on the full
    branch: the canonical nonzero collapsing gap.
    """
    seen: dict[bytes, np.ndarray] = {}
    pair = None
    for v in range(1 << h.in_bits):
        w = bits.int_to_bits(v, h.in_bits)
        c = bits.pack_bits(hash_eval(h, w))
        if c in seen:
            pair = (seen[c], w)
            break
        seen[c] = w
    if pair is None:
        raise StateError(
            f"no collision in a {h.in_bits}->{h.out_bits} bit hash; "
            "the adversary needs a compressing hash"
        )
    w0, w1 = pair
    layout = RegisterLayout.of(("w", h.in_bits))
    state = make_branch_pair(layout, w0, w1)
    return state, _hadamard_parity_distinguisher(bits.xor_bits(w0, w1))


def distinct_digest_adversary(rng: np.random.Generator, h: HashFn):
    """Superpose two inputs with *different* digests.

    The digest measurement already collapses this state, and the
    common-random-number coupling makes both game branches produce the
    same surviving branch from the same draws, so the gap is exactly 0
    trial by trial.
    """
    while True:
        w0 = bits.random_bits(rng, h.in_bits)
        w1 = bits.random_bits(rng, h.in_bits)
        if not np.array_equal(w0, w1) and not np.array_equal(
            hash_eval(h, w0), hash_eval(h, w1)
        ):
            break
    layout = RegisterLayout.of(("w", h.in_bits))
    state = make_branch_pair(layout, w0, w1)
    return state, _hadamard_parity_distinguisher(bits.xor_bits(w0, w1))


def honest_basis_adversary(rng: np.random.Generator, h: HashFn):
    """A classical (single-branch) state: both game branches are identical."""
    w = bits.random_bits(rng, h.in_bits)
    state = make_basis_state(RegisterLayout.of(("w", h.in_bits)), w)
    return state, _hadamard_parity_distinguisher(np.where(w == 0, 1, 0).astype(np.uint8))
