"""Exact simulator for few-branch computational-basis superpositions.

Every quantum state the protocols in this package touch is of the form

    (1/sqrt(k)) * sum_i  s_i |v_i>,     s_i in {+1, -1},

for k distinct basis strings ``v_i`` over a named register layout —
one or two branches in every protocol flow, general ``k`` only in
experiments.  This module represents such states exactly at arbitrary
width and implements the handful of operations the protocols need:
classical-oracle application, computational- and Hadamard-basis
measurements, phase flips keyed on basis predicates, and basis-copies
into ancilla registers.

Complex phases are unreachable by these operations and rejected at
construction.  Measurements *remove* the measured segments from the
state and layout; outcome probabilities are exact rationals over ``k``
or uniform over outcome sets, so sampling is exact.

The dense simulator (:mod:`sfslab.dense`) provides the independent
cross-check oracle at small widths, and the fallback path for
Hadamard measurements of states with more than two branches.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from . import bits
from .dense import DENSE_MAX_QUBITS, DenseState
from .errors import (
    LayoutError,
    StateError,
    StateFormatError,
    UnsupportedStateError,
    WidthError,
)

__all__ = [
    "RegisterLayout",
    "Branch",
    "SparseState",
    "make_branch_pair",
    "make_basis_state",
    "basis_from_segments",
    "apply_classical_oracle",
    "measure_computational",
    "measure_hadamard",
    "apply_phase_flip",
    "copy_registers",
    "append_zero_segment",
    "serialize_state",
    "deserialize_state",
    "to_dense",
    "from_dense",
    "STATE_MAGIC",
    "STATE_VERSION",
]

STATE_MAGIC = b"QSFS"
STATE_VERSION = 1


@dataclass(frozen=True)
class RegisterLayout:
    """Ordered named segments partitioning ``[0, total_width)``.

    ``segments`` is a tuple of ``(name, width)`` pairs; positions are
    assigned left to right, so the first segment occupies the leftmost
    (most significant) bits of every basis string.
    """

    segments: tuple[tuple[str, int], ...]

    def __post_init__(self) -> None:
        names = [name for name, _ in self.segments]
        if len(set(names)) != len(names):
            raise LayoutError(f"duplicate segment names in {names}")
        for name, width in self.segments:
            if width < 1:
                raise LayoutError(f"segment {name!r} must have width >= 1, got {width}")

    @classmethod
    def of(cls, *segments: tuple[str, int]) -> "RegisterLayout":
        return cls(tuple((str(n), int(w)) for n, w in segments))

    @property
    def total_width(self) -> int:
        return sum(w for _, w in self.segments)

    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.segments)

    def width_of(self, name: str) -> int:
        for n, w in self.segments:
            if n == name:
                return w
        raise LayoutError(f"no segment named {name!r}")

    def span(self, name: str) -> tuple[int, int]:
        """Half-open position range ``[start, stop)`` of a segment."""
        start = 0
        for n, w in self.segments:
            if n == name:
                return start, start + w
            start += w
        raise LayoutError(f"no segment named {name!r}")

    def positions(self, names: str | Sequence[str]) -> np.ndarray:
        """Positions of the named segments, concatenated in the order given."""
        if isinstance(names, str):
            names = (names,)
        spans = [self.span(n) for n in names]
        if not spans:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate([np.arange(a, b, dtype=np.int64) for a, b in spans])

    def remove(self, names: str | Sequence[str]) -> "RegisterLayout":
        if isinstance(names, str):
            names = (names,)
        for n in names:
            self.span(n)  # raise on unknown names
        drop = set(names)
        return RegisterLayout(tuple(s for s in self.segments if s[0] not in drop))

    def append(self, name: str, width: int) -> "RegisterLayout":
        return RegisterLayout(self.segments + ((name, width),))


class Branch:
    """One basis term: a bit string over the full layout plus a ±1 sign."""

    __slots__ = ("basis", "sign")

    def __init__(self, basis: np.ndarray, sign: int):
        basis = bits.as_bits(basis)
        if sign not in (1, -1):
            raise StateError(f"branch sign must be +1 or -1, got {sign!r}")
        basis.setflags(write=False)
        self.basis = basis
        self.sign = int(sign)

    def key(self) -> bytes:
        return self.basis.tobytes()

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Branch)
            and self.sign == other.sign
            and np.array_equal(self.basis, other.basis)
        )

    def __hash__(self) -> int:
        return hash((self.key(), self.sign))

    def __repr__(self) -> str:
        return f"Branch({bits.bits_to_str(self.basis)!r}, {'+' if self.sign > 0 else '-'})"


class SparseState:
    """An equal-magnitude ±1-signed superposition over a register layout."""

    def __init__(self, layout: RegisterLayout, branches: Sequence[Branch]):
        branches = tuple(branches)
        if not branches:
            raise StateError("state needs at least one branch")
        width = layout.total_width
        keys = set()
        for br in branches:
            if br.basis.size != width:
                raise WidthError(
                    f"branch width {br.basis.size} does not match layout width {width}"
                )
            keys.add(br.key())
        if len(keys) != len(branches):
            raise StateError("branch basis strings must be pairwise distinct")
        self.layout = layout
        self.branches = branches

    @property
    def k(self) -> int:
        return len(self.branches)

    @property
    def width(self) -> int:
        return self.layout.total_width

    def segment_values(self, name: str) -> list[np.ndarray]:
        """The named segment's bits on each branch, in branch order."""
        a, b = self.layout.span(name)
        return [br.basis[a:b].copy() for br in self.branches]

    def common_segment(self, name: str) -> np.ndarray:
        """The named segment's bits, required to agree across branches."""
        values = self.segment_values(name)
        for v in values[1:]:
            if not np.array_equal(v, values[0]):
                raise StateError(f"segment {name!r} differs between branches")
        return values[0]

    def __eq__(self, other: object) -> bool:
        """Exact equality: same layout and the same set of signed branches."""
        if not isinstance(other, SparseState):
            return NotImplemented
        return (
            self.layout == other.layout
            and {(b.key(), b.sign) for b in self.branches}
            == {(b.key(), b.sign) for b in other.branches}
        )

    def __hash__(self) -> int:
        return hash((self.layout, frozenset((b.key(), b.sign) for b in self.branches)))

    def same_ray(self, other: "SparseState") -> bool:
        """Equality up to a global ±1 sign."""
        if self == other:
            return True
        flipped = SparseState(
            other.layout, [Branch(b.basis, -b.sign) for b in other.branches]
        )
        return self == flipped

    def __repr__(self) -> str:
        inner = " ".join(
            f"{'+' if b.sign > 0 else '-'}|{bits.bits_to_str(b.basis)}>" for b in self.branches
        )
        return f"SparseState(k={self.k}, {inner})"


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------


def make_branch_pair(
    layout: RegisterLayout,
    v0: np.ndarray,
    v1: np.ndarray,
    sign0: int = 1,
    sign1: int = 1,
) -> SparseState:
    """The two-branch state ``(sign0·|v0> + sign1·|v1>)/sqrt(2)``."""
    v0 = bits.as_bits(v0)
    v1 = bits.as_bits(v1)
    if v0.size != layout.total_width or v1.size != layout.total_width:
        raise WidthError("branch width does not match layout")
    if np.array_equal(v0, v1):
        raise StateError("branch pair needs two distinct basis strings")
    return SparseState(layout, [Branch(v0, sign0), Branch(v1, sign1)])


def make_basis_state(layout: RegisterLayout, v: np.ndarray, sign: int = 1) -> SparseState:
    """The single-branch (classical) state ``sign·|v>``."""
    return SparseState(layout, [Branch(bits.as_bits(v), sign)])


def basis_from_segments(layout: RegisterLayout, values: dict[str, np.ndarray]) -> np.ndarray:
    """Assemble a full-width basis string from per-segment values.

    Every segment of the layout must be given exactly once.
    """
    if set(values) != set(layout.names()):
        raise LayoutError(
            f"segment values {sorted(values)} do not cover layout {sorted(layout.names())}"
        )
    parts = []
    for name, width in layout.segments:
        v = bits.as_bits(values[name])
        if v.size != width:
            raise WidthError(f"segment {name!r} expects {width} bits, got {v.size}")
        parts.append(v)
    return bits.concat_bits(*parts)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def _batch_eval(f, x: np.ndarray) -> np.ndarray:
    """Evaluate ``f`` on a batch of inputs, duck-typing the function kind."""
    if hasattr(f, "evaluate_batch"):
        return np.asarray(f.evaluate_batch(x), dtype=np.uint8)
    if callable(f):
        if len(x) == 0:
            raise StateError("cannot infer oracle arity from an empty batch")
        return np.stack([bits.as_bits(f(row)) for row in x])
    raise StateError(f"cannot evaluate {type(f).__name__} as a classical oracle")


def apply_classical_oracle(
    state: SparseState,
    f,
    in_segs: str | Sequence[str],
    out_seg: str,
) -> SparseState:
    """XOR ``f``(input segments) into the output segment, per branch.

    ``f`` may be a :class:`~sfslab.circuits.Circuit`, anything with an
    ``evaluate_batch`` method, or a plain callable on single bit
    arrays.  Signs and branch count are unchanged (the update is the
    reversible permutation ``|in, out> -> |in, out XOR f(in)>``).
    """
    in_pos = state.layout.positions(in_segs)
    out_a, out_b = state.layout.span(out_seg)
    x = np.stack([br.basis[in_pos] for br in state.branches])
    y = _batch_eval(f, x)
    if y.shape != (state.k, out_b - out_a):
        raise WidthError(
            f"oracle output shape {y.shape} does not match segment {out_seg!r} "
            f"width {out_b - out_a}"
        )
    new_branches = []
    for br, row in zip(state.branches, y):
        basis = br.basis.copy()
        basis[out_a:out_b] ^= row
        new_branches.append(Branch(basis, br.sign))
    return SparseState(state.layout, new_branches)


def _rest_positions(layout: RegisterLayout, names: str | Sequence[str]) -> np.ndarray:
    if isinstance(names, str):
        names = (names,)
    measured = set()
    for n in names:
        a, b = layout.span(n)
        measured.update(range(a, b))
    return np.array(
        [p for p in range(layout.total_width) if p not in measured], dtype=np.int64
    )


def measure_computational(
    state: SparseState,
    segs: str | Sequence[str],
    rng: np.random.Generator | None = None,
    forced: np.ndarray | None = None,
) -> tuple[np.ndarray, SparseState]:
    """Measure the named segments in the computational basis.

    Branches grouped by their restriction to the measured positions
    form the outcome classes; a class of size ``c`` has probability
    ``c/k``.  The post-state keeps the surviving class, restricted to
    the unmeasured positions (which also leave the layout).  A
    surviving single branch is canonicalized to sign +1 (global
    phase); multi-branch survivors keep their relative signs.

    No randomness is consumed when the outcome is deterministic, so
    honest and adversarial runs stay seed-aligned.
    """
    pos = state.layout.positions(segs)
    rest_pos = _rest_positions(state.layout, segs)
    rest_layout = state.layout.remove(segs)

    class_order: list[bytes] = []
    classes: dict[bytes, list[Branch]] = {}
    for br in state.branches:
        key = br.basis[pos].tobytes()
        if key not in classes:
            classes[key] = []
            class_order.append(key)
        classes[key].append(br)

    if forced is not None:
        forced = bits.as_bits(forced)
        if forced.size != pos.size:
            raise WidthError("forced outcome width mismatch")
        key = forced.astype(np.uint8).tobytes()
        if key not in classes:
            raise StateError("forced outcome has zero probability")
    elif len(class_order) == 1:
        key = class_order[0]
    else:
        if rng is None:
            raise StateError("need rng or forced outcome")
        probs = np.array([len(classes[c]) for c in class_order], dtype=np.float64)
        probs /= probs.sum()
        key = class_order[int(rng.choice(len(class_order), p=probs))]

    survivors = classes[key]
    outcome = survivors[0].basis[pos].copy()
    if rest_layout.total_width == 0:
        post = SparseState(rest_layout, [Branch(bits.zeros(0), 1)])
    elif len(survivors) == 1:
        post = SparseState(rest_layout, [Branch(survivors[0].basis[rest_pos], 1)])
    else:
        post = SparseState(
            rest_layout, [Branch(br.basis[rest_pos], br.sign) for br in survivors]
        )
    return outcome, post


def _sample_affine(
    rng: np.random.Generator | None,
    delta: np.ndarray,
    target: int,
    forced: np.ndarray | None,
) -> np.ndarray:
    """Sample d uniformly from {d : d·delta = target (mod 2)}."""
    n = delta.size
    if forced is not None:
        forced = bits.as_bits(forced)
        if forced.size != n:
            raise WidthError("forced outcome width mismatch")
        if bits.dot2(forced, delta) != target:
            raise StateError("forced outcome has zero probability")
        return forced
    pivot = int(np.flatnonzero(delta)[0])
    if rng is None:
        raise StateError("need rng or forced outcome")
    d = np.zeros(n, dtype=np.uint8)
    if n > 1:
        free = np.concatenate([np.arange(0, pivot), np.arange(pivot + 1, n)])
        d[free] = bits.random_bits(rng, n - 1)
    d[pivot] = (target ^ bits.dot2(d, delta)) & 1
    return d


def measure_hadamard(
    state: SparseState,
    segs: str | Sequence[str],
    rng: np.random.Generator | None = None,
    forced: np.ndarray | None = None,
) -> tuple[np.ndarray, SparseState]:
    """Measure the named segments in the Hadamard basis.

    Exact sparse rules (write the branch signs as ``(-1)^phi``):

    * one branch: the outcome ``d`` is uniform; the post-state is the
      branch restricted to the unmeasured positions;
    * two branches whose unmeasured parts differ: ``d`` is uniform,
      and the branches pick up signs ``(-1)^(phi_i XOR d·v_i)`` where
      ``v_i`` is branch i's measured part;
    * two branches whose unmeasured parts agree (includes full
      measurement): ``d`` is uniform over the affine set
      ``{d : d·(v0 XOR v1) = phi0 XOR phi1}``, and the single
      surviving rest branch is canonicalized to sign +1;
    * more than two branches: falls back to the dense simulator when
      the state fits, otherwise raises
      :class:`~sfslab.errors.UnsupportedStateError`.
    """
    pos = state.layout.positions(segs)
    rest_pos = _rest_positions(state.layout, segs)
    rest_layout = state.layout.remove(segs)

    def rest_state_single(basis_rest: np.ndarray) -> SparseState:
        if rest_layout.total_width == 0:
            return SparseState(rest_layout, [Branch(bits.zeros(0), 1)])
        return SparseState(rest_layout, [Branch(basis_rest, 1)])

    if state.k == 1:
        br = state.branches[0]
        if forced is not None:
            d = bits.as_bits(forced)
            if d.size != pos.size:
                raise WidthError("forced outcome width mismatch")
        elif pos.size == 0:
            d = bits.zeros(0)
        else:
            if rng is None:
                raise StateError("need rng or forced outcome")
            d = bits.random_bits(rng, pos.size)
        return d, rest_state_single(br.basis[rest_pos])

    if state.k == 2:
        a, b = state.branches
        phi0 = 0 if a.sign > 0 else 1
        phi1 = 0 if b.sign > 0 else 1
        a_meas, b_meas = a.basis[pos], b.basis[pos]
        a_rest, b_rest = a.basis[rest_pos], b.basis[rest_pos]
        if not np.array_equal(a_rest, b_rest):
            if forced is not None:
                d = bits.as_bits(forced)
                if d.size != pos.size:
                    raise WidthError("forced outcome width mismatch")
            else:
                if rng is None:
                    raise StateError("need rng or forced outcome")
                d = bits.random_bits(rng, pos.size)
            s0 = phi0 ^ bits.dot2(d, a_meas)
            s1 = phi1 ^ bits.dot2(d, b_meas)
            post = SparseState(
                rest_layout,
                [
                    Branch(a_rest, 1 if s0 == 0 else -1),
                    Branch(b_rest, 1 if s1 == 0 else -1),
                ],
            )
            return d, post
        delta = np.bitwise_xor(a_meas, b_meas)
        d = _sample_affine(rng, delta, phi0 ^ phi1, forced)
        return d, rest_state_single(a_rest)

    # General k: exact dense fallback at small width.
    if state.width > DENSE_MAX_QUBITS:
        raise UnsupportedStateError(
            f"Hadamard measurement supports k<=2 branches above {DENSE_MAX_QUBITS} qubits; "
            f"state has k={state.k}, width={state.width}"
        )
    dstate = to_dense(state)
    outcome, dpost = dstate.measure_hadamard(pos.tolist(), rng, forced)
    try:
        bases, signs = dpost.to_branches()
    except StateError as exc:
        raise UnsupportedStateError(
            f"post-measurement state left the sparse class: {exc}"
        ) from exc
    if rest_layout.total_width == 0:
        post = SparseState(rest_layout, [Branch(bits.zeros(0), 1)])
    elif len(bases) == 1:
        post = SparseState(rest_layout, [Branch(bases[0], 1)])
    else:
        post = SparseState(
            rest_layout, [Branch(v, s) for v, s in zip(bases, signs)]
        )
    return outcome, post


def apply_phase_flip(
    state: SparseState, predicate: Callable[[np.ndarray], bool]
) -> SparseState:
    """Negate the sign of branches whose basis string satisfies the predicate."""
    new_branches = [
        Branch(br.basis, -br.sign if predicate(br.basis) else br.sign)
        for br in state.branches
    ]
    return SparseState(state.layout, new_branches)


def copy_registers(
    state: SparseState, src_segs: str | Sequence[str], dst_seg: str
) -> SparseState:
    """Basis-copy source segments into a zeroed destination segment.

    Models a server that stores a classical copy of register contents;
    the destination must be all-zero on every branch so the copy is
    the reversible CNOT ladder.
    """
    src_pos = state.layout.positions(src_segs)
    dst_a, dst_b = state.layout.span(dst_seg)
    if dst_b - dst_a != src_pos.size:
        raise WidthError(
            f"destination {dst_seg!r} width {dst_b - dst_a} does not match "
            f"source width {src_pos.size}"
        )
    new_branches = []
    for br in state.branches:
        if br.basis[dst_a:dst_b].any():
            raise StateError(f"destination segment {dst_seg!r} is not zero on some branch")
        basis = br.basis.copy()
        basis[dst_a:dst_b] = br.basis[src_pos]
        new_branches.append(Branch(basis, br.sign))
    return SparseState(state.layout, new_branches)


def append_zero_segment(state: SparseState, name: str, width: int) -> SparseState:
    """Extend the layout with a fresh zero-initialized segment."""
    new_layout = state.layout.append(name, width)
    pad = bits.zeros(width)
    new_branches = [
        Branch(bits.concat_bits(br.basis, pad), br.sign) for br in state.branches
    ]
    return SparseState(new_layout, new_branches)


# ---------------------------------------------------------------------------
# Dense interop
# ---------------------------------------------------------------------------


def to_dense(state: SparseState) -> DenseState:
    """Exact dense embedding (raises above the dense width cap)."""
    return DenseState.from_branches(
        state.width,
        [br.basis for br in state.branches],
        [br.sign for br in state.branches],
    )


def from_dense(dstate: DenseState, layout: RegisterLayout) -> SparseState:
    """Reconstruct a sparse state from a dense vector (must be sparse-class)."""
    if layout.total_width != dstate.width:
        raise WidthError("layout width does not match dense state")
    bases, signs = dstate.to_branches()
    return SparseState(layout, [Branch(v, s) for v, s in zip(bases, signs)])


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def serialize_state(state: SparseState) -> bytes:
    """Serialize to the wire format.

    ``"QSFS"`` + version u8 + total_width u32 BE + k u32 BE, then per
    branch a sign byte (0x00 = +, 0x01 = -) followed by the basis bits
    packed MSB-first.  The layout is contextual and not serialized.
    """
    out = bytearray()
    out += STATE_MAGIC
    out.append(STATE_VERSION)
    out += state.width.to_bytes(4, "big")
    out += state.k.to_bytes(4, "big")
    for br in state.branches:
        out.append(0x00 if br.sign > 0 else 0x01)
        out += bits.pack_bits(br.basis)
    return bytes(out)


def deserialize_state(data: bytes, layout: RegisterLayout) -> SparseState:
    """Parse the wire format against an expected layout.

    Raises :class:`~sfslab.errors.StateFormatError` on any structural
    problem: bad magic or version, width mismatch, truncated or
    oversized buffer, invalid sign byte, or nonzero padding bits.
    """
    if len(data) < 13:
        raise StateFormatError("state buffer too short for header")
    if data[:4] != STATE_MAGIC:
        raise StateFormatError(f"bad magic {data[:4]!r}")
    if data[4] != STATE_VERSION:
        raise StateFormatError(f"unsupported version {data[4]}")
    width = int.from_bytes(data[5:9], "big")
    k = int.from_bytes(data[9:13], "big")
    if width != layout.total_width:
        raise StateFormatError(
            f"serialized width {width} does not match layout width {layout.total_width}"
        )
    if k < 1:
        raise StateFormatError("branch count must be >= 1")
    stride = 1 + bits.packed_size(width)
    expected = 13 + k * stride
    if len(data) != expected:
        raise StateFormatError(f"expected {expected} bytes, got {len(data)}")
    branches = []
    offset = 13
    for _ in range(k):
        sign_byte = data[offset]
        if sign_byte not in (0x00, 0x01):
            raise StateFormatError(f"invalid sign byte {sign_byte:#x}")
        try:
            basis = bits.unpack_bits(
                data[offset + 1 : offset + stride], width
            )
        except WidthError as exc:
            raise StateFormatError(str(exc)) from exc
        branches.append(Branch(basis, 1 if sign_byte == 0x00 else -1))
        offset += stride
    try:
        return SparseState(layout, branches)
    except (StateError, WidthError) as exc:
        raise StateFormatError(str(exc)) from exc
