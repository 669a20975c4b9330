"""Benchmark: compiled vs pure-numpy batch circuit evaluation.

The one genuinely hot loop in the package is gate-by-gate evaluation
of a boolean circuit over a batch of inputs (exhaustive garbling
checks, adversary Monte Carlo, oracle application across branches).
This script times the numba-compiled kernel against the pure-numpy
fallback on the same workloads and prints a small table.

Run from the repository root::

    python3 benchmarks/bench_circuit_eval.py
    SFSLAB_PURE_NUMPY=1 python3 benchmarks/bench_circuit_eval.py  # force the fallback

The toggle is read at import time, so the two configurations are
separate processes; this script instead calls both kernel entry
points directly so one run shows the comparison.
"""

from __future__ import annotations

import time

import numpy as np

from sfslab import _kernels
from sfslab.circuits import random_circuit, toy_prg_circuit


def _gate_matrix(circuit) -> np.ndarray:
    rows = []
    for gate in circuit.gates:
        op = {"AND": _kernels.OP_AND, "XOR": _kernels.OP_XOR,
              "NOT": _kernels.OP_NOT, "OR": _kernels.OP_OR}[gate.op]
        a = gate.args[0]
        b = gate.args[1] if len(gate.args) > 1 else -1
        rows.append((op, a, b, gate.out))
    return np.asarray(rows, dtype=np.int32).reshape(-1, 4)


def _time(fn, *args, repeats: int = 5) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    rng = np.random.default_rng(0)
    workloads = []
    prg = toy_prg_circuit(8, 16)
    workloads.append(("toy-prg 8->16", prg, 4096))
    for n_gates, batch in ((64, 4096), (256, 4096), (1024, 1024)):
        circ = random_circuit(rng, n_inputs=16, n_gates=n_gates, n_outputs=16)
        workloads.append((f"random {n_gates}g", circ, batch))

    print(f"numba available: {_kernels.HAS_NUMBA}   "
          f"selected at import: {'numba' if _kernels.USE_NUMBA else 'pure-numpy'}")
    header = f"{'workload':>16}  {'batch':>6}  {'numpy ms':>10}  {'numba ms':>10}  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, circ, batch in workloads:
        gates = _gate_matrix(circ)
        n_wires = circ.n_inputs + len(circ.gates)
        x = rng.integers(0, 2, size=(batch, circ.n_inputs), dtype=np.uint8)
        t_np = _time(_kernels.evaluate_wires_numpy, gates, x, n_wires)
        if _kernels.HAS_NUMBA:
            _kernels.evaluate_wires_numba(gates, x, n_wires)  # compile outside the timer
            t_nb = _time(_kernels.evaluate_wires_numba, gates, x, n_wires)
            ref = _kernels.evaluate_wires_numpy(gates, x, n_wires)
            got = _kernels.evaluate_wires_numba(gates, x, n_wires)
            assert np.array_equal(ref, got), "kernel outputs diverge"
            print(f"{name:>16}  {batch:>6}  {t_np * 1e3:>10.3f}  {t_nb * 1e3:>10.3f}  "
                  f"{t_np / t_nb:>7.1f}x")
        else:
            print(f"{name:>16}  {batch:>6}  {t_np * 1e3:>10.3f}  {'-':>10}  {'-':>8}")


if __name__ == "__main__":
    main()
