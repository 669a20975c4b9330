"""Boolean-circuit IR, text-format parser, evaluator, and builders.

Circuits are the public descriptions of the functions ``f`` and ``g``
the protocols compute, and the only function representation the
garbler accepts.  The IR is deliberately small:

* gate set ``{AND, XOR, NOT, OR}`` (NOT has fan-in 1, the rest 2);
* wires are integers, dense in ``[0, n_inputs + gate_count)``;
* gate ``g`` writes wire ``n_inputs + g`` (topological by construction);
* outputs are an ordered list of wire ids (repeats allowed).

Text format (line-based, ``#`` starts a comment)::

    inputs <n>
    outputs <m>
    gate <OP> <in...> -> <out>
    out <wire...>

Evaluation runs through :mod:`sfslab._kernels`, so single calls and
large batches share one code path (numba-compiled when available).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _kernels, bits
from .errors import CircuitError, CircuitParseError, WidthError

__all__ = [
    "Gate",
    "Circuit",
    "parse_circuit",
    "emit_circuit",
    "load_circuit",
    "and_circuit",
    "or_circuit",
    "xor_circuit",
    "not_circuit",
    "parity_circuit",
    "majority3_circuit",
    "mux_circuit",
    "adder_circuit",
    "comparator_circuit",
    "toy_prg_circuit",
    "identity_circuit",
    "random_circuit",
]

GATE_ARITY = {"AND": 2, "XOR": 2, "NOT": 1, "OR": 2}
_OP_CODES = {
    "AND": _kernels.OP_AND,
    "XOR": _kernels.OP_XOR,
    "NOT": _kernels.OP_NOT,
    "OR": _kernels.OP_OR,
}


@dataclass(frozen=True)
class Gate:
    """One gate: ``op`` applied to input wires ``args``, writing ``out``."""

    op: str
    args: tuple[int, ...]
    out: int


class Circuit:
    """A validated combinational circuit.

    Parameters
    ----------
    n_inputs:
        number of input wires (ids ``0 .. n_inputs-1``).
    gates:
        gates in topological order; gate ``g`` must write wire
        ``n_inputs + g`` and read only earlier wires.
    output_wires:
        ordered wire ids read off as the circuit output.
    """

    def __init__(self, n_inputs: int, gates: Sequence[Gate], output_wires: Sequence[int]):
        if n_inputs < 0:
            raise CircuitError("n_inputs must be nonnegative")
        gates = tuple(gates)
        output_wires = tuple(int(w) for w in output_wires)
        n_wires = n_inputs + len(gates)
        for g, gate in enumerate(gates):
            if gate.op not in GATE_ARITY:
                raise CircuitError(f"gate {g}: unknown op {gate.op!r}")
            if len(gate.args) != GATE_ARITY[gate.op]:
                raise CircuitError(
                    f"gate {g}: op {gate.op} takes {GATE_ARITY[gate.op]} inputs, got {len(gate.args)}"
                )
            expected_out = n_inputs + g
            if gate.out != expected_out:
                raise CircuitError(
                    f"gate {g}: output wire must be {expected_out} (dense ordering), got {gate.out}"
                )
            for a in gate.args:
                if not 0 <= a < gate.out:
                    raise CircuitError(
                        f"gate {g}: input wire {a} is not an earlier wire (out={gate.out})"
                    )
        for w in output_wires:
            if not 0 <= w < n_wires:
                raise CircuitError(f"output wire {w} out of range [0, {n_wires})")
        self.n_inputs = n_inputs
        self.gates = gates
        self.output_wires = output_wires
        self._gate_array = np.zeros((len(gates), 4), dtype=np.int32)
        for g, gate in enumerate(gates):
            a = gate.args[0]
            b = gate.args[1] if len(gate.args) == 2 else -1
            self._gate_array[g] = (_OP_CODES[gate.op], a, b, gate.out)

    @property
    def n_outputs(self) -> int:
        return len(self.output_wires)

    @property
    def n_gates(self) -> int:
        return len(self.gates)

    @property
    def n_wires(self) -> int:
        return self.n_inputs + len(self.gates)

    def gate_array(self) -> np.ndarray:
        """The int32 ``(G, 4)`` kernel representation (read-only view)."""
        return self._gate_array

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Evaluate on a single input bit array of length ``n_inputs``."""
        x = bits.as_bits(x)
        if x.size != self.n_inputs:
            raise WidthError(f"circuit takes {self.n_inputs} bits, got {x.size}")
        wires = _kernels.evaluate_wires(self._gate_array, x[None, :], self.n_wires)
        return wires[0, list(self.output_wires)].astype(np.uint8)

    def evaluate_batch(self, x: np.ndarray) -> np.ndarray:
        """Evaluate on a batch: uint8 ``(B, n_inputs)`` -> ``(B, n_outputs)``."""
        x = np.asarray(x, dtype=np.uint8)
        if x.ndim != 2 or x.shape[1] != self.n_inputs:
            raise WidthError(f"batch shape {x.shape} does not match {self.n_inputs} inputs")
        wires = _kernels.evaluate_wires(self._gate_array, x, self.n_wires)
        return wires[:, list(self.output_wires)].astype(np.uint8)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Circuit)
            and self.n_inputs == other.n_inputs
            and self.gates == other.gates
            and self.output_wires == other.output_wires
        )

    def __hash__(self) -> int:
        return hash((self.n_inputs, self.gates, self.output_wires))

    def __repr__(self) -> str:
        return (
            f"Circuit(n_inputs={self.n_inputs}, n_outputs={self.n_outputs}, "
            f"n_gates={self.n_gates})"
        )


def parse_circuit(text: str) -> Circuit:
    """Parse circuit text (format in the module docstring).

    Raises :class:`CircuitParseError` with a 1-based line number on any
    syntax problem, and :class:`CircuitError` on topology violations.
    """
    n_inputs: int | None = None
    n_outputs: int | None = None
    gates: list[Gate] = []
    output_wires: list[int] | None = None

    def fail(lineno: int, msg: str) -> CircuitParseError:
        return CircuitParseError(f"line {lineno}: {msg}")

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        keyword = tokens[0]
        if keyword == "inputs":
            if n_inputs is not None:
                raise fail(lineno, "duplicate 'inputs' line")
            if len(tokens) != 2 or not tokens[1].isdigit():
                raise fail(lineno, "expected 'inputs <n>'")
            n_inputs = int(tokens[1])
        elif keyword == "outputs":
            if n_inputs is None:
                raise fail(lineno, "'outputs' before 'inputs'")
            if n_outputs is not None:
                raise fail(lineno, "duplicate 'outputs' line")
            if len(tokens) != 2 or not tokens[1].isdigit():
                raise fail(lineno, "expected 'outputs <m>'")
            n_outputs = int(tokens[1])
        elif keyword == "gate":
            if n_inputs is None or n_outputs is None:
                raise fail(lineno, "'gate' before 'inputs'/'outputs'")
            if output_wires is not None:
                raise fail(lineno, "'gate' after 'out'")
            if "->" not in tokens:
                raise fail(lineno, "expected 'gate <OP> <in...> -> <out>'")
            arrow = tokens.index("->")
            if arrow < 2 or len(tokens) != arrow + 2:
                raise fail(lineno, "expected 'gate <OP> <in...> -> <out>'")
            op = tokens[1]
            if op not in GATE_ARITY:
                raise fail(lineno, f"unknown gate op {op!r}")
            try:
                args = tuple(int(t) for t in tokens[2:arrow])
                out = int(tokens[arrow + 1])
            except ValueError:
                raise fail(lineno, "wire ids must be integers") from None
            if len(args) != GATE_ARITY[op]:
                raise fail(lineno, f"op {op} takes {GATE_ARITY[op]} inputs, got {len(args)}")
            gates.append(Gate(op, args, out))
        elif keyword == "out":
            if n_inputs is None or n_outputs is None:
                raise fail(lineno, "'out' before 'inputs'/'outputs'")
            if output_wires is not None:
                raise fail(lineno, "duplicate 'out' line")
            try:
                output_wires = [int(t) for t in tokens[1:]]
            except ValueError:
                raise fail(lineno, "wire ids must be integers") from None
            if len(output_wires) != n_outputs:
                raise fail(
                    lineno,
                    f"'out' lists {len(output_wires)} wires but 'outputs' declared {n_outputs}",
                )
        else:
            raise fail(lineno, f"unknown keyword {keyword!r}")

    if n_inputs is None or n_outputs is None:
        raise CircuitParseError("missing 'inputs'/'outputs' header")
    if output_wires is None:
        raise CircuitParseError("missing 'out' line")
    return Circuit(n_inputs, gates, output_wires)


def emit_circuit(circuit: Circuit) -> str:
    """Render a circuit in the canonical text format (parse inverse)."""
    lines = [f"inputs {circuit.n_inputs}", f"outputs {circuit.n_outputs}"]
    for gate in circuit.gates:
        args = " ".join(str(a) for a in gate.args)
        lines.append(f"gate {gate.op} {args} -> {gate.out}")
    lines.append("out " + " ".join(str(w) for w in circuit.output_wires))
    return "\n".join(lines) + "\n"


def load_circuit(path: str) -> Circuit:
    """Parse a circuit from a file path."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_circuit(fh.read())


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


class _Builder:
    """Incremental circuit builder handing out fresh wire ids."""

    def __init__(self, n_inputs: int):
        self.n_inputs = n_inputs
        self.gates: list[Gate] = []

    def gate(self, op: str, *args: int) -> int:
        out = self.n_inputs + len(self.gates)
        self.gates.append(Gate(op, tuple(args), out))
        return out

    def AND(self, a: int, b: int) -> int:
        return self.gate("AND", a, b)

    def OR(self, a: int, b: int) -> int:
        return self.gate("OR", a, b)

    def XOR(self, a: int, b: int) -> int:
        return self.gate("XOR", a, b)

    def NOT(self, a: int) -> int:
        return self.gate("NOT", a)

    def finish(self, output_wires: Iterable[int]) -> Circuit:
        return Circuit(self.n_inputs, self.gates, tuple(output_wires))


def and_circuit() -> Circuit:
    b = _Builder(2)
    return b.finish([b.AND(0, 1)])


def or_circuit() -> Circuit:
    b = _Builder(2)
    return b.finish([b.OR(0, 1)])


def xor_circuit() -> Circuit:
    b = _Builder(2)
    return b.finish([b.XOR(0, 1)])


def not_circuit() -> Circuit:
    b = _Builder(1)
    return b.finish([b.NOT(0)])


def identity_circuit(n: int) -> Circuit:
    """n-bit identity (no gates; outputs are the inputs)."""
    return Circuit(n, [], list(range(n)))


def parity_circuit(n: int) -> Circuit:
    """XOR of all ``n`` inputs (n >= 1)."""
    if n < 1:
        raise CircuitError("parity needs at least 1 input")
    b = _Builder(n)
    acc = 0
    for i in range(1, n):
        acc = b.XOR(acc, i)
    return b.finish([acc])


def majority3_circuit() -> Circuit:
    """Majority of 3 inputs: (a AND b) OR (a AND c) OR (b AND c)."""
    b = _Builder(3)
    ab = b.AND(0, 1)
    ac = b.AND(0, 2)
    bc = b.AND(1, 2)
    return b.finish([b.OR(b.OR(ab, ac), bc)])


def mux_circuit() -> Circuit:
    """2-to-1 multiplexer: inputs (sel, a, b) -> a if sel=0 else b."""
    b = _Builder(3)
    nsel = b.NOT(0)
    take_a = b.AND(nsel, 1)
    take_b = b.AND(0, 2)
    return b.finish([b.OR(take_a, take_b)])


def adder_circuit(k: int) -> Circuit:
    """Ripple-carry adder: inputs a (k bits) then b (k bits), output a+b (k+1 bits).

    Input and output bit arrays are MSB-first, matching
    :func:`sfslab.bits.bits_to_int`.
    """
    if k < 1:
        raise CircuitError("adder needs k >= 1")
    b = _Builder(2 * k)
    carry: int | None = None
    sums: list[int] = []
    # Process least-significant bit first: that is index k-1 of each operand.
    for i in range(k - 1, -1, -1):
        ai, bi = i, k + i
        s = b.XOR(ai, bi)
        if carry is None:
            sums.append(s)
            carry = b.AND(ai, bi)
        else:
            s2 = b.XOR(s, carry)
            sums.append(s2)
            carry = b.OR(b.AND(ai, bi), b.AND(s, carry))
        # sums collected LSB-first
    outputs = [carry] + sums[::-1]
    return b.finish(outputs)


def comparator_circuit(k: int) -> Circuit:
    """Unsigned comparator: inputs a (k bits) then b (k bits), output [a < b].

    MSB-first scan: a < b iff at the first differing bit, a has 0.
    """
    if k < 1:
        raise CircuitError("comparator needs k >= 1")
    b = _Builder(2 * k)
    lt: int | None = None
    eq: int | None = None
    for i in range(k):
        ai, bi = i, k + i
        na = b.NOT(ai)
        bit_lt = b.AND(na, bi)
        bit_eq = b.NOT(b.XOR(ai, bi))
        if lt is None:
            lt, eq = bit_lt, bit_eq
        else:
            lt = b.OR(lt, b.AND(eq, bit_lt))
            eq = b.AND(eq, bit_eq)
    return b.finish([lt])


def toy_prg_circuit(n_in: int = 8, n_out: int = 16) -> Circuit:
    """A fixed toy expanding map as a circuit: out_j = (x_a AND x_d) XOR x_c.

    The index table (a, c, d) per output bit is a fixed affine
    recurrence over ``n_in``, making the map mildly nonlinear and
    deterministic.  :func:`sfslab.corpus.toy_prg_eval` reimplements the
    same formula directly and serves as the test oracle.
    """
    if n_in < 3:
        raise CircuitError("toy PRG needs n_in >= 3")
    b = _Builder(n_in)
    outs = []
    for j in range(n_out):
        a = (5 * j + 1) % n_in
        c = (3 * j + 2) % n_in
        d = (7 * j + 4) % n_in
        if d == a:
            d = (d + 1) % n_in
        outs.append(b.XOR(b.AND(a, d), c))
    return b.finish(outs)


def random_circuit(rng: np.random.Generator, n_inputs: int, n_gates: int, n_outputs: int) -> Circuit:
    """Sample a random valid circuit (used by round-trip and fuzz tests)."""
    ops = ["AND", "XOR", "NOT", "OR"]
    b = _Builder(n_inputs)
    for g in range(n_gates):
        op = ops[int(rng.integers(0, len(ops)))]
        avail = n_inputs + g
        if op == "NOT":
            b.gate(op, int(rng.integers(0, avail)))
        else:
            b.gate(op, int(rng.integers(0, avail)), int(rng.integers(0, avail)))
    n_wires = n_inputs + n_gates
    outs = [int(rng.integers(0, n_wires)) for _ in range(n_outputs)]
    return b.finish(outs)
