"""Function registry and fixture circuit corpus.

Protocols treat the computed function as a black box that maps ``n``
input bits to ``m`` output bits; only the garbler needs an actual
:class:`~sfslab.circuits.Circuit`.  This module provides:

* :class:`FunctionSpec` — the uniform wrapper (name, arities, single
  and batch evaluators, optional circuit);
* a registry of named functions: the shipped circuit corpus (loaded
  from ``sfslab/corpus/*.txt`` fixture files) plus native function
  families such as ``prg:<n>:<m>``;
* independent *oracles* for every corpus entry (integer addition,
  comparison, parity, the toy expanding map) and
  :func:`corpus_verify`, which checks every circuit against its oracle
  exhaustively.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import Callable

import numpy as np

from . import bits, circuits, primitives
from .errors import SfsLabError, WidthError

__all__ = [
    "FunctionSpec",
    "as_function",
    "get_function",
    "corpus_names",
    "load_corpus_circuit",
    "corpus_verify",
    "toy_prg_eval",
    "CORPUS_BUILDERS",
]


@dataclass(frozen=True)
class FunctionSpec:
    """A named boolean function with single and batch evaluation."""

    name: str
    n_in: int
    n_out: int
    batch: Callable[[np.ndarray], np.ndarray]
    circuit: circuits.Circuit | None = None

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = bits.as_bits(x)
        if x.size != self.n_in:
            raise WidthError(f"{self.name} takes {self.n_in} bits, got {x.size}")
        return self.batch(x[None, :])[0]

    def evaluate_batch(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.uint8)
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise WidthError(f"batch shape {x.shape} does not match {self.n_in} inputs")
        y = self.batch(x)
        if y.shape != (x.shape[0], self.n_out):
            raise WidthError(
                f"{self.name} produced shape {y.shape}, expected {(x.shape[0], self.n_out)}"
            )
        return y.astype(np.uint8)


def as_function(
    f,
    name: str = "anonymous",
    n_in: int | None = None,
    n_out: int | None = None,
) -> FunctionSpec:
    """Wrap a Circuit, FunctionSpec, or callable into a FunctionSpec.

    Raw callables map a single bit array to a bit array and require
    explicit arities.
    """
    if isinstance(f, FunctionSpec):
        return f
    if isinstance(f, circuits.Circuit):
        return FunctionSpec(
            name=name,
            n_in=f.n_inputs,
            n_out=f.n_outputs,
            batch=f.evaluate_batch,
            circuit=f,
        )
    if callable(f):
        if n_in is None or n_out is None:
            raise SfsLabError("wrapping a raw callable requires n_in and n_out")

        def batch(x: np.ndarray) -> np.ndarray:
            return np.stack([bits.as_bits(f(row)) for row in x]) if len(x) else np.zeros(
                (0, n_out), dtype=np.uint8
            )

        return FunctionSpec(name=name, n_in=n_in, n_out=n_out, batch=batch)
    raise SfsLabError(f"cannot interpret {type(f).__name__} as a function")


# ---------------------------------------------------------------------------
# Oracles: independent reference implementations for the corpus
# ---------------------------------------------------------------------------


def toy_prg_eval(x: np.ndarray, n_out: int = 16) -> np.ndarray:
    """Reference implementation of the toy expanding map.

    Must match :func:`sfslab.circuits.toy_prg_circuit`: output ``j`` is
    ``(x_a AND x_d) XOR x_c`` with the same fixed index recurrence.
    """
    x = bits.as_bits(x)
    n_in = x.size
    out = np.zeros(n_out, dtype=np.uint8)
    for j in range(n_out):
        a = (5 * j + 1) % n_in
        c = (3 * j + 2) % n_in
        d = (7 * j + 4) % n_in
        if d == a:
            d = (d + 1) % n_in
        out[j] = (x[a] & x[d]) ^ x[c]
    return out


def _oracle_and(x):
    return np.array([x[0] & x[1]], dtype=np.uint8)


def _oracle_or(x):
    return np.array([x[0] | x[1]], dtype=np.uint8)


def _oracle_xor(x):
    return np.array([x[0] ^ x[1]], dtype=np.uint8)


def _oracle_not(x):
    return np.array([x[0] ^ 1], dtype=np.uint8)


def _oracle_parity(x):
    return np.array([int(x.sum()) & 1], dtype=np.uint8)


def _oracle_majority3(x):
    return np.array([1 if int(x.sum()) >= 2 else 0], dtype=np.uint8)


def _oracle_mux(x):
    return np.array([x[2] if x[0] else x[1]], dtype=np.uint8)


def _oracle_adder4(x):
    a = bits.bits_to_int(x[:4])
    b = bits.bits_to_int(x[4:])
    return bits.int_to_bits(a + b, 5)


def _oracle_comparator4(x):
    a = bits.bits_to_int(x[:4])
    b = bits.bits_to_int(x[4:])
    return np.array([1 if a < b else 0], dtype=np.uint8)


def _oracle_prg_toy8(x):
    return toy_prg_eval(x, 16)


# name -> (builder, oracle)
CORPUS_BUILDERS: dict[str, tuple[Callable[[], circuits.Circuit], Callable]] = {
    "and2": (circuits.and_circuit, _oracle_and),
    "or2": (circuits.or_circuit, _oracle_or),
    "xor2": (circuits.xor_circuit, _oracle_xor),
    "not1": (circuits.not_circuit, _oracle_not),
    "parity8": (lambda: circuits.parity_circuit(8), _oracle_parity),
    "majority3": (circuits.majority3_circuit, _oracle_majority3),
    "mux3": (circuits.mux_circuit, _oracle_mux),
    "adder4": (lambda: circuits.adder_circuit(4), _oracle_adder4),
    "comparator4": (lambda: circuits.comparator_circuit(4), _oracle_comparator4),
    "prg_toy8": (lambda: circuits.toy_prg_circuit(8, 16), _oracle_prg_toy8),
}


def corpus_names() -> list[str]:
    """Names of the shipped corpus circuits, in registry order."""
    return list(CORPUS_BUILDERS)


def load_corpus_circuit(name: str) -> circuits.Circuit:
    """Load one corpus circuit from its fixture file."""
    if name not in CORPUS_BUILDERS:
        raise SfsLabError(f"unknown corpus circuit {name!r}")
    text = resources.files("sfslab").joinpath(f"corpus/{name}.txt").read_text("utf-8")
    return circuits.parse_circuit(text)


def get_function(name: str) -> FunctionSpec:
    """Look up a function by registry name.

    Recognized forms:

    * a corpus circuit name (e.g. ``adder4``) — backed by the fixture
      circuit;
    * ``prg:<n>:<m>`` — the native pseudorandom expander
      ``x -> prg_expand(x, m)``, which exists at any output length and
      never has a circuit (protocols treat it as a black box).
    """
    if name in CORPUS_BUILDERS:
        return as_function(load_corpus_circuit(name), name=name)
    if name.startswith("prg:"):
        parts = name.split(":")
        if len(parts) != 3 or not parts[1].isdigit() or not parts[2].isdigit():
            raise SfsLabError(f"bad PRG function name {name!r}; want prg:<n>:<m>")
        n_in, n_out = int(parts[1]), int(parts[2])

        def batch(x: np.ndarray) -> np.ndarray:
            return np.stack([primitives.prg_expand(row, n_out) for row in x]) if len(
                x
            ) else np.zeros((0, n_out), dtype=np.uint8)

        return FunctionSpec(name=name, n_in=n_in, n_out=n_out, batch=batch)
    raise SfsLabError(f"unknown function {name!r}")


@dataclass(frozen=True)
class CorpusReport:
    """Exhaustive verification result for one corpus entry."""

    name: str
    n_in: int
    n_out: int
    ok: bool
    mismatches: int


def corpus_verify() -> list[CorpusReport]:
    """Check every corpus circuit against its oracle, exhaustively.

    All corpus entries have at most 10 inputs, so full truth tables are
    cheap.  Returns one report per entry; a mismatch count of 0 means
    the circuit is faithful.
    """
    reports = []
    for name, (_builder, oracle) in CORPUS_BUILDERS.items():
        circuit = load_corpus_circuit(name)
        n = circuit.n_inputs
        xs = np.array(
            [[(v >> (n - 1 - i)) & 1 for i in range(n)] for v in range(2**n)],
            dtype=np.uint8,
        )
        got = circuit.evaluate_batch(xs)
        want = np.stack([bits.as_bits(oracle(row)) for row in xs])
        mismatches = int((got != want).any(axis=1).sum())
        reports.append(
            CorpusReport(
                name=name,
                n_in=n,
                n_out=circuit.n_outputs,
                ok=mismatches == 0,
                mismatches=mismatches,
            )
        )
    return reports
