"""Pointer-bit garbled circuits over the laboratory PRG.

A garbling of a circuit assigns every wire two ``kappa``-bit labels
(one per wire value) plus a secret mask bit; the *pointer* of a value
is the value XOR the mask, so pointers order table rows without
leaking values.  All key material is derived deterministically from
two randomness strings via :func:`~sfslab.primitives.prg_expand`:

* input wire ``i`` uses the ``kappa``-bit block ``r[i*kappa:(i+1)*kappa]``;
* the wire written by gate ``g`` uses the ``2*kappa``-bit block
  ``r_gcin[2*kappa*g : 2*kappa*(g+1)]``.

From a wire's block, label ``b`` is ``prg_expand(block || [b], kappa)``
and the mask is ``prg_expand(block, 1)``.  A binary gate's table has
four rows indexed by the incoming pointer pair; row payloads are
``out_label || out_pointer || 0^kappa`` XORed with a keystream expanded
from the incoming labels and the gate index.  The ``kappa`` zero bits
authenticate decryption: a wrong key yields a nonzero tag except with
probability ``2^-kappa``.  Unary NOT gates use two rows keyed by the
single incoming label.

The module also ships simulators that produce fake encodings from the
output value alone — the standard privacy witness, and the ingredient
verifiable-evaluation protocols use to argue the evaluator learns
nothing beyond ``f(x)``.

Encodings have deterministic, header-free bit serializations (their
lengths depend only on the circuit shape and ``kappa``), which is what
protocols put on quantum registers; a self-describing byte format
(:func:`package_to_bytes`) serves files and the CLI.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bits
from .circuits import Circuit
from .errors import DegarbleError, SfsLabError, StateFormatError, WidthError
from .primitives import prg_expand

__all__ = [
    "KAPPA_DEFAULT",
    "InputEncoding",
    "CircuitEncoding",
    "input_randomness_bits",
    "circuit_randomness_bits",
    "garble_input",
    "garble_circuit",
    "degarble",
    "sim_input_encoding",
    "sim_circuit_encoding",
    "input_encoding_bits",
    "input_encoding_to_bits",
    "input_encoding_from_bits",
    "circuit_encoding_bits",
    "circuit_encoding_to_bits",
    "circuit_encoding_from_bits",
    "package_to_bytes",
    "package_from_bytes",
    "PACKAGE_MAGIC",
    "PACKAGE_VERSION",
]

KAPPA_DEFAULT = 16

PACKAGE_MAGIC = b"QGCE"
PACKAGE_VERSION = 1

_GATE_FN = {
    "AND": lambda a, b: a & b,
    "XOR": lambda a, b: a ^ b,
    "OR": lambda a, b: a | b,
}


def input_randomness_bits(n_inputs: int, kappa: int) -> int:
    """Length of the input-encoding randomness string."""
    return n_inputs * kappa


def circuit_randomness_bits(n_gates: int, kappa: int) -> int:
    """Length of the internal-wire randomness string."""
    return 2 * kappa * n_gates


@dataclass(frozen=True)
class InputEncoding:
    """Active input-wire keys: one label and pointer bit per input."""

    kappa: int
    labels: np.ndarray  # (n_inputs, kappa) uint8 bits
    pointers: np.ndarray  # (n_inputs,) uint8 bits

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels, dtype=np.uint8)
        pointers = bits.as_bits(self.pointers)
        if labels.ndim != 2 or labels.shape[1] != self.kappa:
            raise WidthError(f"labels shape {labels.shape} does not match kappa={self.kappa}")
        if pointers.size != labels.shape[0]:
            raise WidthError("one pointer bit per label row required")
        labels.setflags(write=False)
        pointers.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "pointers", pointers)

    @property
    def n_inputs(self) -> int:
        return self.labels.shape[0]


@dataclass(frozen=True)
class CircuitEncoding:
    """Garbled tables plus the output decode map.

    ``tables[g]`` has one row per incoming pointer combination (four
    for binary gates, two for NOT), each row ``2*kappa + 1`` bits:
    ciphertext of ``out_label || out_pointer || 0^kappa``.  ``decode``
    holds one mask bit per output *position*; the cleartext output bit
    is the recovered pointer XOR the mask.
    """

    kappa: int
    n_inputs: int
    tables: tuple[np.ndarray, ...]
    decode: np.ndarray  # (n_outputs,) uint8 bits

    def __post_init__(self) -> None:
        decode = bits.as_bits(self.decode)
        decode.setflags(write=False)
        object.__setattr__(self, "decode", decode)
        frozen = []
        for rows in self.tables:
            rows = np.asarray(rows, dtype=np.uint8)
            if rows.ndim != 2 or rows.shape[1] != 2 * self.kappa + 1:
                raise WidthError(
                    f"table row width {rows.shape} does not match kappa={self.kappa}"
                )
            rows.setflags(write=False)
            frozen.append(rows)
        object.__setattr__(self, "tables", tuple(frozen))

    @property
    def n_outputs(self) -> int:
        return self.decode.size


def _wire_keys(block: np.ndarray, kappa: int) -> tuple[np.ndarray, np.ndarray, int]:
    """Derive (label0, label1, mask) for one wire from its seed block."""
    zero = np.zeros(1, dtype=np.uint8)
    one = np.ones(1, dtype=np.uint8)
    label0 = prg_expand(bits.concat_bits(block, zero), kappa)
    label1 = prg_expand(bits.concat_bits(block, one), kappa)
    mask = int(prg_expand(block, 1)[0])
    return label0, label1, mask


def _all_wire_keys(
    circuit: Circuit, r: np.ndarray, r_gcin: np.ndarray, kappa: int
) -> tuple[np.ndarray, np.ndarray]:
    """Key material for every wire: labels (n_wires, 2, kappa) and masks."""
    n = circuit.n_inputs
    labels = np.empty((circuit.n_wires, 2, kappa), dtype=np.uint8)
    masks = np.empty(circuit.n_wires, dtype=np.uint8)
    for i in range(n):
        l0, l1, m = _wire_keys(r[i * kappa : (i + 1) * kappa], kappa)
        labels[i, 0], labels[i, 1], masks[i] = l0, l1, m
    for g in range(circuit.n_gates):
        block = r_gcin[2 * kappa * g : 2 * kappa * (g + 1)]
        l0, l1, m = _wire_keys(block, kappa)
        w = n + g
        labels[w, 0], labels[w, 1], masks[w] = l0, l1, m
    return labels, masks


def _keystream(keys: list[np.ndarray], gate_index: int, kappa: int) -> np.ndarray:
    seed = bits.concat_bits(*keys, bits.int_to_bits(gate_index, 32))
    return prg_expand(seed, 2 * kappa + 1)


def _row_payload(out_label: np.ndarray, out_ptr: int, kappa: int) -> np.ndarray:
    return bits.concat_bits(
        out_label, np.array([out_ptr], dtype=np.uint8), bits.zeros(kappa)
    )


def garble_input(
    x: np.ndarray, r: np.ndarray, kappa: int = KAPPA_DEFAULT
) -> InputEncoding:
    """Encode the input ``x`` under randomness ``r`` (``n*kappa`` bits)."""
    x = bits.as_bits(x)
    r = bits.as_bits(r)
    if r.size != input_randomness_bits(x.size, kappa):
        raise WidthError(
            f"input randomness must have {input_randomness_bits(x.size, kappa)} bits, "
            f"got {r.size}"
        )
    labels = np.empty((x.size, kappa), dtype=np.uint8)
    pointers = np.empty(x.size, dtype=np.uint8)
    for i in range(x.size):
        l0, l1, m = _wire_keys(r[i * kappa : (i + 1) * kappa], kappa)
        labels[i] = l1 if x[i] else l0
        pointers[i] = m ^ int(x[i])
    return InputEncoding(kappa, labels, pointers)


def garble_circuit(
    circuit: Circuit,
    r: np.ndarray,
    r_gcin: np.ndarray,
    kappa: int = KAPPA_DEFAULT,
) -> CircuitEncoding:
    """Garble a circuit.

    ``r`` is the shared input-wire randomness (``n_inputs*kappa``
    bits, the same string :func:`garble_input` consumes) and
    ``r_gcin`` the internal-wire randomness (``2*kappa*n_gates``
    bits).
    """
    r = bits.as_bits(r)
    r_gcin = bits.as_bits(r_gcin)
    if r.size != input_randomness_bits(circuit.n_inputs, kappa):
        raise WidthError(
            f"input randomness must have "
            f"{input_randomness_bits(circuit.n_inputs, kappa)} bits, got {r.size}"
        )
    if r_gcin.size != circuit_randomness_bits(circuit.n_gates, kappa):
        raise WidthError(
            f"internal randomness must have "
            f"{circuit_randomness_bits(circuit.n_gates, kappa)} bits, got {r_gcin.size}"
        )
    labels, masks = _all_wire_keys(circuit, r, r_gcin, kappa)
    tables = []
    for g, gate in enumerate(circuit.gates):
        out_w = circuit.n_inputs + g
        if gate.op == "NOT":
            a = gate.args[0]
            rows = np.zeros((2, 2 * kappa + 1), dtype=np.uint8)
            for va in (0, 1):
                vo = va ^ 1
                idx = int(masks[a]) ^ va
                ks = _keystream([labels[a, va]], g, kappa)
                payload = _row_payload(labels[out_w, vo], int(masks[out_w]) ^ vo, kappa)
                rows[idx] = np.bitwise_xor(ks, payload)
        else:
            a, b = gate.args
            fn = _GATE_FN[gate.op]
            rows = np.zeros((4, 2 * kappa + 1), dtype=np.uint8)
            for va in (0, 1):
                for vb in (0, 1):
                    vo = fn(va, vb)
                    idx = 2 * (int(masks[a]) ^ va) + (int(masks[b]) ^ vb)
                    ks = _keystream([labels[a, va], labels[b, vb]], g, kappa)
                    payload = _row_payload(
                        labels[out_w, vo], int(masks[out_w]) ^ vo, kappa
                    )
                    rows[idx] = np.bitwise_xor(ks, payload)
        tables.append(rows)
    decode = np.array([masks[w] for w in circuit.output_wires], dtype=np.uint8)
    return CircuitEncoding(kappa, circuit.n_inputs, tuple(tables), decode)


def degarble(
    circuit: Circuit, ce: CircuitEncoding, ie: InputEncoding
) -> np.ndarray:
    """Evaluate a garbled circuit on an encoded input.

    Raises :class:`~sfslab.errors.DegarbleError` if the encodings do
    not fit the circuit or any row fails its zero-tag check.
    """
    if ie.kappa != ce.kappa:
        raise DegarbleError("input and circuit encodings use different kappa")
    if ie.n_inputs != circuit.n_inputs or ce.n_inputs != circuit.n_inputs:
        raise DegarbleError("encoding arity does not match circuit")
    if len(ce.tables) != circuit.n_gates or ce.n_outputs != circuit.n_outputs:
        raise DegarbleError("encoding shape does not match circuit")
    kappa = ce.kappa
    active_label: list[np.ndarray] = [ie.labels[i] for i in range(ie.n_inputs)]
    active_ptr: list[int] = [int(p) for p in ie.pointers]
    for g, gate in enumerate(circuit.gates):
        rows = ce.tables[g]
        if gate.op == "NOT":
            if rows.shape[0] != 2:
                raise DegarbleError(f"gate {g} expects 2 rows, got {rows.shape[0]}")
            a = gate.args[0]
            idx = active_ptr[a]
            ks = _keystream([active_label[a]], g, kappa)
        else:
            if rows.shape[0] != 4:
                raise DegarbleError(f"gate {g} expects 4 rows, got {rows.shape[0]}")
            a, b = gate.args
            idx = 2 * active_ptr[a] + active_ptr[b]
            ks = _keystream([active_label[a], active_label[b]], g, kappa)
        plain = np.bitwise_xor(rows[idx], ks)
        if plain[kappa + 1 :].any():
            raise DegarbleError(f"authentication tag mismatch at gate {g}")
        active_label.append(plain[:kappa])
        active_ptr.append(int(plain[kappa]))
    y = np.array(
        [active_ptr[w] ^ int(ce.decode[j]) for j, w in enumerate(circuit.output_wires)],
        dtype=np.uint8,
    )
    return y


# ---------------------------------------------------------------------------
# Simulators (privacy witnesses)
# ---------------------------------------------------------------------------


def sim_input_encoding(
    rng: np.random.Generator, n_inputs: int, kappa: int = KAPPA_DEFAULT
) -> InputEncoding:
    """A fake input encoding: fresh uniform labels and pointer bits."""
    labels = bits.random_bits(rng, n_inputs * kappa).reshape(n_inputs, kappa)
    pointers = bits.random_bits(rng, n_inputs)
    return InputEncoding(kappa, labels, pointers)


def sim_circuit_encoding(
    rng: np.random.Generator,
    circuit: Circuit,
    ie: InputEncoding,
    y: np.ndarray,
    kappa: int = KAPPA_DEFAULT,
) -> CircuitEncoding:
    """A fake circuit encoding that decodes to the planted output ``y``.

    Only the row addressed by the active pointers is a real
    ciphertext (of a fresh random label and pointer); every other row
    is uniform bits.  The decode map is chosen so the active pointers
    decode to ``y``.  Together with :func:`sim_input_encoding` this
    builds a garbled package from ``(circuit shape, y)`` alone —
    no input and no wire truth values — which is exactly the privacy
    claim for honest-garbler pointer-bit schemes.
    """
    y = bits.as_bits(y)
    if ie.kappa != kappa:
        raise WidthError("simulated input encoding uses a different kappa")
    if ie.n_inputs != circuit.n_inputs:
        raise WidthError("simulated input encoding arity does not match circuit")
    if y.size != circuit.n_outputs:
        raise WidthError(f"planted output needs {circuit.n_outputs} bits, got {y.size}")
    active_label: list[np.ndarray] = [ie.labels[i] for i in range(ie.n_inputs)]
    active_ptr: list[int] = [int(p) for p in ie.pointers]
    tables = []
    for g, gate in enumerate(circuit.gates):
        n_rows = 2 if gate.op == "NOT" else 4
        rows = bits.random_bits(rng, n_rows * (2 * kappa + 1)).reshape(
            n_rows, 2 * kappa + 1
        )
        out_label = bits.random_bits(rng, kappa)
        out_ptr = int(bits.random_bits(rng, 1)[0])
        if gate.op == "NOT":
            a = gate.args[0]
            idx = active_ptr[a]
            ks = _keystream([active_label[a]], g, kappa)
        else:
            a, b = gate.args
            idx = 2 * active_ptr[a] + active_ptr[b]
            ks = _keystream([active_label[a], active_label[b]], g, kappa)
        rows[idx] = np.bitwise_xor(ks, _row_payload(out_label, out_ptr, kappa))
        tables.append(rows)
        active_label.append(out_label)
        active_ptr.append(out_ptr)
    decode = np.array(
        [active_ptr[w] ^ int(y[j]) for j, w in enumerate(circuit.output_wires)],
        dtype=np.uint8,
    )
    return CircuitEncoding(kappa, circuit.n_inputs, tuple(tables), decode)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def input_encoding_bits(n_inputs: int, kappa: int) -> int:
    """Bit length of a serialized input encoding: label then pointer per wire."""
    return n_inputs * (kappa + 1)


def input_encoding_to_bits(ie: InputEncoding) -> np.ndarray:
    parts = []
    for i in range(ie.n_inputs):
        parts.append(ie.labels[i])
        parts.append(ie.pointers[i : i + 1])
    return bits.concat_bits(*parts) if parts else bits.zeros(0)


def input_encoding_from_bits(
    data: np.ndarray, n_inputs: int, kappa: int
) -> InputEncoding:
    data = bits.as_bits(data)
    if data.size != input_encoding_bits(n_inputs, kappa):
        raise WidthError(
            f"input encoding needs {input_encoding_bits(n_inputs, kappa)} bits, "
            f"got {data.size}"
        )
    stride = kappa + 1
    labels = np.empty((n_inputs, kappa), dtype=np.uint8)
    pointers = np.empty(n_inputs, dtype=np.uint8)
    for i in range(n_inputs):
        chunk = data[i * stride : (i + 1) * stride]
        labels[i] = chunk[:kappa]
        pointers[i] = chunk[kappa]
    return InputEncoding(kappa, labels, pointers)


def _table_rows(circuit: Circuit) -> int:
    return sum(2 if gate.op == "NOT" else 4 for gate in circuit.gates)


def circuit_encoding_bits(circuit: Circuit, kappa: int) -> int:
    """Bit length of a serialized circuit encoding (tables then decode map)."""
    return _table_rows(circuit) * (2 * kappa + 1) + circuit.n_outputs


def circuit_encoding_to_bits(ce: CircuitEncoding) -> np.ndarray:
    parts = [rows.reshape(-1) for rows in ce.tables]
    parts.append(ce.decode)
    return bits.concat_bits(*parts)


def circuit_encoding_from_bits(
    data: np.ndarray, circuit: Circuit, kappa: int
) -> CircuitEncoding:
    data = bits.as_bits(data)
    if data.size != circuit_encoding_bits(circuit, kappa):
        raise WidthError(
            f"circuit encoding needs {circuit_encoding_bits(circuit, kappa)} bits, "
            f"got {data.size}"
        )
    width = 2 * kappa + 1
    tables = []
    offset = 0
    for gate in circuit.gates:
        n_rows = 2 if gate.op == "NOT" else 4
        rows = data[offset : offset + n_rows * width].reshape(n_rows, width)
        tables.append(rows.copy())
        offset += n_rows * width
    decode = data[offset:].copy()
    return CircuitEncoding(kappa, circuit.n_inputs, tuple(tables), decode)


def package_to_bytes(
    circuit: Circuit, ce: CircuitEncoding, ie: InputEncoding
) -> bytes:
    """Self-describing byte format for a (circuit encoding, input encoding) pair."""
    if ce.kappa != ie.kappa:
        raise SfsLabError("package requires matching kappa")
    ce_bits = circuit_encoding_to_bits(ce)
    ie_bits = input_encoding_to_bits(ie)
    out = bytearray()
    out += PACKAGE_MAGIC
    out.append(PACKAGE_VERSION)
    out += circuit.n_inputs.to_bytes(4, "big")
    out += circuit.n_outputs.to_bytes(4, "big")
    out += circuit.n_gates.to_bytes(4, "big")
    out += ce.kappa.to_bytes(4, "big")
    for payload_bits in (ce_bits, ie_bits):
        packed = bits.pack_bits(payload_bits)
        out += len(packed).to_bytes(4, "big")
        out += packed
    return bytes(out)


def package_from_bytes(
    data: bytes, circuit: Circuit
) -> tuple[CircuitEncoding, InputEncoding]:
    """Parse a package and validate it against the circuit it garbles."""
    if len(data) < 21:
        raise StateFormatError("package too short for header")
    if data[:4] != PACKAGE_MAGIC:
        raise StateFormatError(f"bad package magic {data[:4]!r}")
    if data[4] != PACKAGE_VERSION:
        raise StateFormatError(f"unsupported package version {data[4]}")
    n_in = int.from_bytes(data[5:9], "big")
    n_out = int.from_bytes(data[9:13], "big")
    n_gates = int.from_bytes(data[13:17], "big")
    kappa = int.from_bytes(data[17:21], "big")
    if (n_in, n_out, n_gates) != (
        circuit.n_inputs,
        circuit.n_outputs,
        circuit.n_gates,
    ):
        raise StateFormatError(
            f"package header ({n_in}, {n_out}, {n_gates}) does not match circuit "
            f"({circuit.n_inputs}, {circuit.n_outputs}, {circuit.n_gates})"
        )
    offset = 21
    payloads = []
    for n_bits in (circuit_encoding_bits(circuit, kappa), input_encoding_bits(n_in, kappa)):
        if offset + 4 > len(data):
            raise StateFormatError("package truncated before length field")
        length = int.from_bytes(data[offset : offset + 4], "big")
        offset += 4
        if length != bits.packed_size(n_bits):
            raise StateFormatError(
                f"payload length {length} does not match expected "
                f"{bits.packed_size(n_bits)} bytes"
            )
        if offset + length > len(data):
            raise StateFormatError("package truncated inside payload")
        try:
            payloads.append(bits.unpack_bits(data[offset : offset + length], n_bits))
        except WidthError as exc:
            raise StateFormatError(str(exc)) from exc
        offset += length
    if offset != len(data):
        raise StateFormatError(f"{len(data) - offset} trailing bytes in package")
    ce = circuit_encoding_from_bits(payloads[0], circuit, kappa)
    ie = input_encoding_from_bits(payloads[1], n_in, kappa)
    return ce, ie
