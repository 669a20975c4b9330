"""Dense statevector reference simulator.

A brute-force simulator over at most :data:`DENSE_MAX_QUBITS` qubits,
used as the independent oracle the sparse simulator is validated
against, and as the exact linear-algebra engine for the
interference-identity experiment.  Amplitudes are real float64: every
state reachable in this laboratory has real ±1-signed amplitudes, and
the Hadamard transform keeps them real.

Qubit indexing matches :mod:`sfslab.bits`: position 0 is the leftmost
bit of a basis string and the *most* significant bit of the basis
index.  Measurements remove the measured qubits from the state, like
the sparse simulator.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from . import bits
from .errors import StateError, UnsupportedStateError, WidthError

__all__ = ["DENSE_MAX_QUBITS", "DenseState"]

DENSE_MAX_QUBITS = 12

_NORM_TOL = 1e-9


@lru_cache(maxsize=None)
def _index_bits(width: int) -> np.ndarray:
    """uint8 matrix (2^width, width): row i = bits of index i, MSB first."""
    if width == 0:
        return np.zeros((1, 0), dtype=np.uint8)
    idx = np.arange(1 << width, dtype=np.uint64)
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
    return ((idx[:, None] >> shifts[None, :]) & 1).astype(np.uint8)


def _weights(width: int) -> np.ndarray:
    """Index weights per position: position j contributes 2^(width-1-j)."""
    return (1 << np.arange(width - 1, -1, -1, dtype=np.int64)).astype(np.int64)


class DenseState:
    """Immutable dense state over ``width`` qubits (float64 amplitudes)."""

    def __init__(self, width: int, vector: np.ndarray):
        if width > DENSE_MAX_QUBITS:
            raise UnsupportedStateError(
                f"dense simulator capped at {DENSE_MAX_QUBITS} qubits, got {width}"
            )
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (1 << width,):
            raise WidthError(f"vector length {vector.shape} does not match width {width}")
        norm = float(np.dot(vector, vector))
        if abs(norm - 1.0) > 1e-6:
            raise StateError(f"state not normalized: |v|^2 = {norm}")
        self.width = width
        self.vector = vector
        self.vector.setflags(write=False)

    # -- construction -------------------------------------------------------

    @classmethod
    def from_branches(
        cls, width: int, bases: Sequence[np.ndarray], signs: Sequence[int]
    ) -> "DenseState":
        """Build (1/sqrt(k)) * sum_i signs[i] |bases[i]> from raw arrays."""
        k = len(bases)
        if k == 0:
            raise StateError("need at least one branch")
        vec = np.zeros(1 << width, dtype=np.float64)
        amp = 1.0 / np.sqrt(k)
        seen = set()
        for basis, sign in zip(bases, signs):
            basis = bits.as_bits(basis)
            if basis.size != width:
                raise WidthError("branch width mismatch")
            idx = bits.bits_to_int(basis)
            if idx in seen:
                raise StateError("duplicate branch basis")
            seen.add(idx)
            vec[idx] = float(sign) * amp
        return cls(width, vec)

    def to_branches(self, tol: float = 1e-9) -> tuple[list[np.ndarray], list[int]]:
        """Decompose into equal-magnitude ±1-signed branches.

        Raises :class:`StateError` if amplitudes are not all of equal
        magnitude with ± signs (i.e. the state left the sparse class).
        """
        nz = np.flatnonzero(np.abs(self.vector) > tol)
        if nz.size == 0:
            raise StateError("zero state")
        mags = np.abs(self.vector[nz])
        if not np.allclose(mags, mags[0], atol=tol, rtol=0):
            raise StateError("amplitudes are not equal-magnitude")
        expected = 1.0 / np.sqrt(nz.size)
        if abs(mags[0] - expected) > 1e-6:
            raise StateError("amplitude magnitude inconsistent with branch count")
        bases = [bits.int_to_bits(int(i), self.width) for i in nz]
        signs = [1 if self.vector[i] > 0 else -1 for i in nz]
        return bases, signs

    # -- unitaries and oracles ----------------------------------------------

    def apply_classical_oracle(
        self,
        batch_eval: Callable[[np.ndarray], np.ndarray],
        in_pos: Sequence[int],
        out_pos: Sequence[int],
    ) -> "DenseState":
        """XOR ``f(in bits)`` into the out positions (permutation unitary)."""
        in_pos = list(in_pos)
        out_pos = list(out_pos)
        table = _index_bits(self.width)
        y = np.asarray(batch_eval(table[:, in_pos]), dtype=np.uint8)
        if y.shape != (1 << self.width, len(out_pos)):
            raise WidthError("oracle output shape mismatch")
        new_bits = table.copy()
        new_bits[:, out_pos] ^= y
        new_idx = new_bits.astype(np.int64) @ _weights(self.width)
        new_vec = np.zeros_like(self.vector)
        new_vec[new_idx] = self.vector
        return DenseState(self.width, new_vec)

    def apply_phase_flip(self, predicate: Callable[[np.ndarray], bool]) -> "DenseState":
        """Negate the amplitude of basis strings satisfying the predicate."""
        table = _index_bits(self.width)
        flips = np.array([bool(predicate(row)) for row in table])
        new_vec = self.vector.copy()
        new_vec[flips] = -new_vec[flips]
        return DenseState(self.width, new_vec)

    def copy_positions(self, src_pos: Sequence[int], dst_pos: Sequence[int]) -> "DenseState":
        """CNOT ladder: XOR source bits into destination bits."""
        src_pos = list(src_pos)
        dst_pos = list(dst_pos)
        if len(src_pos) != len(dst_pos):
            raise WidthError("copy width mismatch")
        table = _index_bits(self.width)
        new_bits = table.copy()
        new_bits[:, dst_pos] ^= table[:, src_pos]
        new_idx = new_bits.astype(np.int64) @ _weights(self.width)
        new_vec = np.zeros_like(self.vector)
        new_vec[new_idx] = self.vector
        return DenseState(self.width, new_vec)

    def expand_zero(self, extra: int) -> "DenseState":
        """Append ``extra`` zero-initialized qubits at the end."""
        new_vec = np.zeros((1 << self.width) << extra, dtype=np.float64)
        new_vec[:: 1 << extra] = self.vector
        return DenseState(self.width + extra, new_vec)

    def _hadamard_at(self, vector: np.ndarray, pos: int) -> np.ndarray:
        tensor = vector.reshape((2,) * self.width) if self.width else vector
        moved = np.moveaxis(tensor, pos, 0)
        inv = 1.0 / np.sqrt(2.0)
        new = np.stack([(moved[0] + moved[1]) * inv, (moved[0] - moved[1]) * inv])
        return np.moveaxis(new, 0, pos).reshape(-1)

    def hadamard(self, positions: Sequence[int]) -> "DenseState":
        """Apply a Hadamard gate at each listed position."""
        vec = self.vector
        for p in positions:
            vec = self._hadamard_at(vec, p)
        return DenseState(self.width, vec)

    def hadamard_all(self) -> "DenseState":
        return self.hadamard(range(self.width))

    # -- measurement ---------------------------------------------------------

    def probabilities(self, pos: Sequence[int]) -> np.ndarray:
        """Exact outcome distribution of a computational measurement of ``pos``."""
        pos = list(pos)
        table = _index_bits(self.width)
        w = _weights(len(pos))
        keys = table[:, pos].astype(np.int64) @ w
        return np.bincount(keys, weights=self.vector**2, minlength=1 << len(pos))

    def measure_computational(
        self,
        pos: Sequence[int],
        rng: np.random.Generator | None = None,
        forced: np.ndarray | None = None,
    ) -> tuple[np.ndarray, "DenseState"]:
        """Measure listed positions; outcome bits follow the listed order.

        Measured qubits are removed from the returned post-state.  Pass
        ``forced`` to condition on a specific outcome (the oracle role).
        """
        pos = list(pos)
        probs = self.probabilities(pos)
        if forced is not None:
            forced = bits.as_bits(forced)
            key = bits.bits_to_int(forced)
            if probs[key] < _NORM_TOL:
                raise StateError("forced outcome has zero probability")
        else:
            if rng is None:
                raise StateError("need rng or forced outcome")
            key = int(rng.choice(probs.size, p=probs / probs.sum()))
        outcome = bits.int_to_bits(key, len(pos))
        table = _index_bits(self.width)
        keys = table[:, pos].astype(np.int64) @ _weights(len(pos))
        mask = keys == key
        rest_pos = [p for p in range(self.width) if p not in pos]
        rest_w = len(rest_pos)
        rest_idx = table[mask][:, rest_pos].astype(np.int64) @ _weights(rest_w)
        post = np.zeros(1 << rest_w, dtype=np.float64)
        post[rest_idx] = self.vector[mask] / np.sqrt(probs[key])
        return outcome, DenseState(rest_w, post)

    def measure_hadamard(
        self,
        pos: Sequence[int],
        rng: np.random.Generator | None = None,
        forced: np.ndarray | None = None,
    ) -> tuple[np.ndarray, "DenseState"]:
        """Measure listed positions in the Hadamard basis (then remove them)."""
        return self.hadamard(pos).measure_computational(pos, rng, forced)

    # -- comparison ----------------------------------------------------------

    def same_ray(self, other: "DenseState", tol: float = 1e-9) -> bool:
        """True iff the states are equal up to a global ±1 sign."""
        if self.width != other.width:
            return False
        a, b = self.vector, other.vector
        i = int(np.argmax(np.abs(a)))
        if np.abs(a[i]) < tol and np.abs(b).max(initial=0.0) < tol:
            return True
        sign = 1.0 if a[i] * b[i] >= 0 else -1.0
        return bool(np.allclose(a, sign * b, atol=tol, rtol=0))

    def __repr__(self) -> str:
        return f"DenseState(width={self.width})"
