"""Circuit builders, evaluation, and the text format.

Builder outputs are checked against oracles written here from the
intended arithmetic/logic meaning, independently of the registry's own
reference functions.
"""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sfslab import circuits as C
from sfslab.errors import CircuitError, CircuitParseError


def _all_inputs(n: int) -> np.ndarray:
    xs = np.arange(2**n)[:, None] >> np.arange(n - 1, -1, -1)[None, :]
    return (xs & 1).astype(np.uint8)


def _int_of(bits_row) -> int:
    return int("".join(str(int(b)) for b in bits_row), 2)


def test_basic_gates_truth_tables():
    cases = [
        (C.and_circuit(), lambda a, b: a and b),
        (C.or_circuit(), lambda a, b: a or b),
        (C.xor_circuit(), lambda a, b: a != b),
    ]
    for circ, fn in cases:
        for row in _all_inputs(2):
            got = circ.evaluate(row)
            assert got.tolist() == [int(fn(bool(row[0]), bool(row[1])))]
    notc = C.not_circuit()
    assert notc.evaluate(np.array([0], dtype=np.uint8)).tolist() == [1]
    assert notc.evaluate(np.array([1], dtype=np.uint8)).tolist() == [0]


@pytest.mark.parametrize("n", [1, 2, 5, 8])
def test_parity_circuit(n):
    circ = C.parity_circuit(n)
    for row in _all_inputs(n):
        assert circ.evaluate(row).tolist() == [int(row.sum()) % 2]


def test_majority3_circuit():
    circ = C.majority3_circuit()
    for row in _all_inputs(3):
        assert circ.evaluate(row).tolist() == [int(int(row.sum()) > 1)]


def test_mux_circuit_selects():
    circ = C.mux_circuit()
    for row in _all_inputs(3):
        sel, a, b = int(row[0]), int(row[1]), int(row[2])
        assert circ.evaluate(row).tolist() == [b if sel else a]


@pytest.mark.parametrize("k", [2, 3, 4])
def test_adder_circuit_is_integer_addition(k):
    circ = C.adder_circuit(k)
    assert circ.n_inputs == 2 * k and circ.n_outputs == k + 1
    for row in _all_inputs(2 * k):
        a, b = _int_of(row[:k]), _int_of(row[k:])
        assert _int_of(circ.evaluate(row)) == a + b


@pytest.mark.parametrize("k", [2, 3, 4])
def test_comparator_circuit_is_less_than(k):
    circ = C.comparator_circuit(k)
    for row in _all_inputs(2 * k):
        a, b = _int_of(row[:k]), _int_of(row[k:])
        assert circ.evaluate(row).tolist() == [int(a < b)]


def test_identity_circuit_passes_through():
    circ = C.identity_circuit(5)
    rng = np.random.default_rng(5)
    x = rng.integers(0, 2, size=5).astype(np.uint8)
    assert np.array_equal(circ.evaluate(x), x)


def test_toy_prg_circuit_expands_deterministically():
    circ = C.toy_prg_circuit()
    assert circ.n_inputs == 8 and circ.n_outputs == 16
    x = np.array([1, 0, 1, 1, 0, 0, 1, 0], dtype=np.uint8)
    y1, y2 = circ.evaluate(x), circ.evaluate(x)
    assert np.array_equal(y1, y2) and y1.size == 16


def test_evaluate_batch_matches_single():
    rng = np.random.default_rng(11)
    circ = C.random_circuit(rng, n_inputs=6, n_gates=30, n_outputs=4)
    batch = rng.integers(0, 2, size=(20, 6)).astype(np.uint8)
    out = circ.evaluate_batch(batch)
    for row, y in zip(batch, out):
        assert np.array_equal(circ.evaluate(row), y)


@given(st.integers(0, 2**30))
def test_parse_emit_roundtrip(seed):
    rng = np.random.default_rng(seed)
    circ = C.random_circuit(rng, n_inputs=4, n_gates=12, n_outputs=3)
    text = C.emit_circuit(circ)
    back = C.parse_circuit(text)
    assert back.n_inputs == circ.n_inputs
    assert back.output_wires == circ.output_wires
    xs = _all_inputs(4)
    assert np.array_equal(back.evaluate_batch(xs), circ.evaluate_batch(xs))


def test_load_circuit_reads_files(tmp_path):
    circ = C.adder_circuit(2)
    p = tmp_path / "add2.txt"
    p.write_text(C.emit_circuit(circ))
    back = C.load_circuit(p)
    xs = _all_inputs(4)
    assert np.array_equal(back.evaluate_batch(xs), circ.evaluate_batch(xs))


def test_parse_rejects_malformed_text():
    with pytest.raises(CircuitParseError):
        C.parse_circuit("this is not a circuit")
    with pytest.raises(CircuitParseError):
        C.parse_circuit("inputs 2\ngates 1\nFROB 0 1 -> 2\noutputs 2\n")


def test_gate_wire_validation():
    with pytest.raises(CircuitError):
        C.Circuit(
            n_inputs=2,
            gates=(C.Gate("AND", (0, 5), 2),),  # arg 5 not yet defined
            output_wires=(2,),
        )
    with pytest.raises(CircuitError):
        C.Circuit(
            n_inputs=2,
            gates=(C.Gate("NOT", (0, 1), 2),),  # NOT takes one arg
            output_wires=(2,),
        )
    with pytest.raises(CircuitError):
        C.Circuit(n_inputs=2, gates=(), output_wires=(9,))  # dangling output


def test_random_circuit_shape():
    rng = np.random.default_rng(0)
    circ = C.random_circuit(rng, n_inputs=5, n_gates=17, n_outputs=6)
    assert circ.n_inputs == 5
    assert len(circ.gates) == 17
    assert circ.n_outputs == 6
