"""Hot kernels for batch circuit evaluation.

Circuit evaluation over many inputs at once is the one genuinely hot
loop in this package (exhaustive garbling checks, adversary Monte
Carlo, oracle application across branches and dense basis vectors).
The kernel is compiled with numba when available; a pure-numpy path
evaluates gate-by-gate with vectorized batch columns and is selected
when numba is missing or when the environment variable
``SFSLAB_PURE_NUMPY=1`` is set.

Gate arrays are int32 matrices of shape ``(G, 4)`` with rows
``[op, a, b, out]``; ``op`` codes are AND=0, XOR=1, NOT=2 (with
``b = -1`` unused), OR=3.  Wire storage is a uint8 matrix of shape
``(B, n_wires)`` whose first ``n_inputs`` columns are the inputs.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "HAS_NUMBA",
    "USE_NUMBA",
    "OP_AND",
    "OP_XOR",
    "OP_NOT",
    "OP_OR",
    "evaluate_wires",
    "evaluate_wires_numpy",
    "evaluate_wires_numba",
]

OP_AND = 0
OP_XOR = 1
OP_NOT = 2
OP_OR = 3

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised via SFSLAB_PURE_NUMPY
    njit = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and os.environ.get("SFSLAB_PURE_NUMPY", "") != "1"


def evaluate_wires_numpy(gates: np.ndarray, x: np.ndarray, n_wires: int) -> np.ndarray:
    """Pure-numpy batch evaluation: one vectorized pass per gate."""
    n_batch, n_inputs = x.shape
    wires = np.zeros((n_batch, n_wires), dtype=np.uint8)
    wires[:, :n_inputs] = x
    for g in range(gates.shape[0]):
        op, a, b, out = gates[g]
        if op == OP_AND:
            np.bitwise_and(wires[:, a], wires[:, b], out=wires[:, out])
        elif op == OP_XOR:
            np.bitwise_xor(wires[:, a], wires[:, b], out=wires[:, out])
        elif op == OP_NOT:
            np.bitwise_xor(wires[:, a], 1, out=wires[:, out])
        else:
            np.bitwise_or(wires[:, a], wires[:, b], out=wires[:, out])
    return wires


if HAS_NUMBA:

    @njit(cache=True)
    def _eval_wires_jit(gates, x, n_wires):  # pragma: no cover - compiled
        n_batch = x.shape[0]
        n_inputs = x.shape[1]
        wires = np.zeros((n_batch, n_wires), dtype=np.uint8)
        for i in range(n_batch):
            for j in range(n_inputs):
                wires[i, j] = x[i, j]
        for g in range(gates.shape[0]):
            op = gates[g, 0]
            a = gates[g, 1]
            b = gates[g, 2]
            out = gates[g, 3]
            if op == OP_AND:
                for i in range(n_batch):
                    wires[i, out] = wires[i, a] & wires[i, b]
            elif op == OP_XOR:
                for i in range(n_batch):
                    wires[i, out] = wires[i, a] ^ wires[i, b]
            elif op == OP_NOT:
                for i in range(n_batch):
                    wires[i, out] = wires[i, a] ^ 1
            else:
                for i in range(n_batch):
                    wires[i, out] = wires[i, a] | wires[i, b]
        return wires

    def evaluate_wires_numba(gates: np.ndarray, x: np.ndarray, n_wires: int) -> np.ndarray:
        """Numba batch evaluation (explicit loops, jit-compiled)."""
        gates = np.ascontiguousarray(gates, dtype=np.int32)
        x = np.ascontiguousarray(x, dtype=np.uint8)
        return _eval_wires_jit(gates, x, n_wires)

else:  # pragma: no cover - exercised when numba is absent
    evaluate_wires_numba = None


def evaluate_wires(gates: np.ndarray, x: np.ndarray, n_wires: int) -> np.ndarray:
    """Evaluate a gate array over a batch of inputs.

    Parameters
    ----------
    gates:
        int32 array of shape (G, 4); rows ``[op, a, b, out]``.
    x:
        uint8 array of shape (B, n_inputs).
    n_wires:
        total wire count (inputs + gates).

    Returns
    -------
    uint8 array of shape (B, n_wires) holding every wire value.
    """
    if USE_NUMBA:
        return evaluate_wires_numba(gates, x, n_wires)
    return evaluate_wires_numpy(gates, x, n_wires)
