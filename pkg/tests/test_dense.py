"""Dense statevector reference simulator.

The dense simulator is itself the oracle for the sparse one, so its
own core operations are checked here against first principles: explicit
Hadamard matrix algebra on few qubits and hand-computed distributions.
"""

from __future__ import annotations

import numpy as np
import pytest

from sfslab.dense import DENSE_MAX_QUBITS, DenseState
from sfslab.errors import StateError, UnsupportedStateError


def _uniform_pair(v0, v1, s0=1, s1=1):
    return DenseState.from_branches(
        len(v0),
        [np.array(v0, dtype=np.uint8), np.array(v1, dtype=np.uint8)],
        [s0, s1],
    )


def _hadamard_matrix(width: int, positions) -> np.ndarray:
    h = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
    eye = np.eye(2)
    m = np.array([[1.0]])
    for q in range(width):
        m = np.kron(m, h if q in set(positions) else eye)
    return m


def test_from_branches_normalizes():
    d = _uniform_pair([0, 0], [1, 1])
    assert np.isclose(np.linalg.norm(d.vector), 1.0)
    assert np.isclose(abs(d.vector[0]), abs(d.vector[3]))


def test_to_branches_roundtrip_with_signs():
    d = _uniform_pair([0, 1, 0], [1, 1, 0], 1, -1)
    bases, signs = d.to_branches()
    got = {(tuple(b.tolist()), s) for b, s in zip(bases, signs)}
    assert got == {((0, 1, 0), 1), ((1, 1, 0), -1)}


def test_hadamard_matches_matrix_oracle():
    rng = np.random.default_rng(21)
    for _ in range(12):
        width = int(rng.integers(1, 4))
        v = rng.integers(0, 2, size=width).astype(np.uint8)
        pos = sorted(
            rng.choice(width, size=int(rng.integers(1, width + 1)), replace=False)
        )
        d = DenseState.from_branches(width, [v], [1])
        got = d.hadamard(pos).vector
        want = _hadamard_matrix(width, pos) @ DenseState.from_branches(
            width, [v], [1]
        ).vector
        assert np.allclose(got, want)


def test_hadamard_twice_is_identity():
    d = _uniform_pair([0, 1, 1], [1, 0, 1], 1, -1)
    back = d.hadamard([0, 1, 2]).hadamard([0, 1, 2])
    assert d.same_ray(back)


def test_hadamard_all_equals_hadamard_everywhere():
    d = _uniform_pair([0, 1], [1, 0])
    assert np.allclose(d.hadamard_all().vector, d.hadamard([0, 1]).vector)


def test_probabilities_of_branch_pair():
    d = _uniform_pair([0, 0], [1, 0])
    probs = d.probabilities([0])
    assert np.allclose(probs, [0.5, 0.5])
    probs_both = d.probabilities([0, 1])
    assert np.allclose(probs_both, [0.5, 0.0, 0.5, 0.0])
    assert np.isclose(probs_both.sum(), 1.0)


def test_measure_computational_forced_and_posterior():
    d = _uniform_pair([0, 0], [1, 1])
    out, post = d.measure_computational([0], forced=np.array([1], dtype=np.uint8))
    assert out.tolist() == [1]
    # surviving branch is |1> on the remaining qubit
    bases, signs = post.to_branches()
    assert len(bases) == 1 and bases[0].tolist() == [1]


def test_measure_removes_positions():
    d = _uniform_pair([0, 1, 0], [1, 1, 0])
    _, post = d.measure_computational([1], forced=np.array([1], dtype=np.uint8))
    assert post.width == 2


def test_measure_forced_zero_probability_raises():
    d = DenseState.from_branches(2, [np.array([0, 0], dtype=np.uint8)], [1])
    with pytest.raises(StateError):
        d.measure_computational([0], forced=np.array([1], dtype=np.uint8))


def test_measure_requires_rng_or_forced():
    d = _uniform_pair([0, 0], [1, 0])
    with pytest.raises(StateError):
        d.measure_computational([0])


def test_measure_hadamard_uniform_on_single_branch():
    d = DenseState.from_branches(3, [np.array([1, 0, 1], dtype=np.uint8)], [1])
    probs = d.hadamard([0, 1, 2]).probabilities([0, 1, 2])
    assert np.allclose(probs, np.full(8, 1 / 8))


def test_measure_hadamard_parity_constraint_on_pair():
    # Full Hadamard measurement of (|v0> - |v1>)/sqrt(2): outcomes d with
    # d.(v0 xor v1) = 1 (mod 2) carry all the probability.
    v0, v1 = [0, 0], [1, 0]
    d = _uniform_pair(v0, v1, 1, -1)
    probs = d.hadamard([0, 1]).probabilities([0, 1])
    diff = np.array([1, 0])
    for idx in range(4):
        dbits = np.array([(idx >> 1) & 1, idx & 1])
        parity = int(dbits @ diff) % 2
        if parity == 1:
            assert probs[idx] > 1e-9
        else:
            assert probs[idx] < 1e-12


def test_apply_classical_oracle_xors_outputs():
    d = _uniform_pair([0, 1, 0], [1, 1, 1])

    def batch(x):
        return x[:, :1] ^ x[:, 1:2]  # out = x0 xor x1

    got = d.apply_classical_oracle(batch, [0, 1], [2])
    bases, _ = got.to_branches()
    have = {tuple(b.tolist()) for b in bases}
    assert have == {(0, 1, 1), (1, 1, 1)}  # 0^1=1 flips pos2; 1^1=0 keeps


def test_copy_positions_is_cnot_ladder():
    d = _uniform_pair([0, 1, 0, 0], [1, 0, 0, 0])
    got = d.copy_positions([0, 1], [2, 3])
    bases, _ = got.to_branches()
    have = {tuple(b.tolist()) for b in bases}
    assert have == {(0, 1, 0, 1), (1, 0, 1, 0)}


def test_expand_zero_appends_zero_qubits():
    d = _uniform_pair([0, 1], [1, 1])
    got = d.expand_zero(2)
    assert got.width == 4
    bases, _ = got.to_branches()
    assert {tuple(b.tolist()) for b in bases} == {(0, 1, 0, 0), (1, 1, 0, 0)}


def test_phase_flip_changes_relative_sign():
    d = _uniform_pair([0, 0], [1, 1])
    got = d.apply_phase_flip(lambda b: bool(b[0]))
    bases, signs = got.to_branches()
    m = {tuple(b.tolist()): s for b, s in zip(bases, signs)}
    assert m[(0, 0)] == -m[(1, 1)]


def test_same_ray_tolerates_global_sign_only():
    d = _uniform_pair([0, 0], [1, 1])
    flipped = DenseState(d.width, -d.vector)
    other = _uniform_pair([0, 0], [1, 1], 1, -1)
    assert d.same_ray(flipped)
    assert not d.same_ray(other)


def test_width_cap_enforced():
    w = DENSE_MAX_QUBITS + 1
    with pytest.raises(UnsupportedStateError):
        DenseState.from_branches(w, [np.zeros(w, dtype=np.uint8)], [1])
