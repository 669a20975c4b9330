"""Independent reference machinery shared across the test suite.

The exactness tests drive the sparse simulator and the dense
statevector simulator through the *same* randomly generated register
program and compare states after every operation.  The generator only
emits operations under which an exact few-branch description remains
valid — classical oracles, phase flips, basis copies, fresh zero
registers, and partial measurements in either basis — which is
precisely the regime the sparse simulator promises to cover exactly.

Measurement outcomes are drawn once on the sparse side and *forced*
onto the dense side, so a disagreement about an outcome's support
surfaces as a hard error rather than a silent divergence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sfslab import sparse_qsim as sq
from sfslab.dense import DenseState

MAX_QUBITS = 12


def _pack_rows(x: np.ndarray) -> np.ndarray:
    """Big-endian integer value of each row of a 0/1 matrix."""
    w = x.shape[-1]
    weights = 1 << np.arange(w - 1, -1, -1, dtype=np.int64)
    return np.asarray(x, dtype=np.int64) @ weights


def random_layout(
    rng: np.random.Generator, *, min_total: int = 2, max_total: int = 8
) -> sq.RegisterLayout:
    """A layout of 1–4 named segments with ``min_total..max_total`` qubits."""
    total = int(rng.integers(min_total, max_total + 1))
    n_cuts = int(rng.integers(0, min(3, total - 1) + 1))
    cuts = sorted(rng.choice(np.arange(1, total), size=n_cuts, replace=False).tolist())
    bounds = [0, *cuts, total]
    segs = tuple(
        (f"r{i}", bounds[i + 1] - bounds[i]) for i in range(len(bounds) - 1)
    )
    return sq.RegisterLayout.of(*segs)


def random_state(rng: np.random.Generator, layout: sq.RegisterLayout) -> sq.SparseState:
    """A random one- or two-branch state over ``layout``."""
    w = layout.total_width
    v0 = rng.integers(0, 2, size=w).astype(np.uint8)
    if rng.random() < 0.35:
        return sq.make_basis_state(layout, v0)
    while True:
        v1 = rng.integers(0, 2, size=w).astype(np.uint8)
        if not np.array_equal(v0, v1):
            break
    return sq.make_branch_pair(layout, v0, v1, sign0=1, sign1=int(rng.choice((1, -1))))


@dataclass
class MirrorPair:
    """A sparse state and its dense shadow, kept position-aligned."""

    state: sq.SparseState
    dense: DenseState
    fresh: int = 0  # counter for unique appended-segment names

    @classmethod
    def create(cls, rng: np.random.Generator) -> "MirrorPair":
        layout = random_layout(rng)
        state = random_state(rng, layout)
        return cls(state=state, dense=sq.to_dense(state))

    def check(self) -> None:
        ref = sq.to_dense(self.state)
        assert ref.same_ray(self.dense), "sparse and dense post-states diverged"

    # -- operations; each applies the same map to both sides -------------

    def op_oracle(self, rng: np.random.Generator) -> str:
        names = list(self.state.layout.names())
        if len(names) < 2:
            return "skip"
        out_seg = names[int(rng.integers(len(names)))]
        in_pool = [n for n in names if n != out_seg]
        k = int(rng.integers(1, len(in_pool) + 1))
        in_segs = list(rng.choice(in_pool, size=k, replace=False))
        in_w = sum(self.state.layout.width_of(n) for n in in_segs)
        out_w = self.state.layout.width_of(out_seg)
        table = rng.integers(0, 2, size=(2**in_w, out_w)).astype(np.uint8)

        def f(xbits: np.ndarray) -> np.ndarray:
            return table[int(_pack_rows(xbits[None, :])[0])]

        def batch(xrows: np.ndarray) -> np.ndarray:
            return table[_pack_rows(xrows)]

        in_pos = self.state.layout.positions(in_segs)
        out_pos = self.state.layout.positions(out_seg)
        self.state = sq.apply_classical_oracle(self.state, f, in_segs, out_seg)
        self.dense = self.dense.apply_classical_oracle(batch, in_pos, out_pos)
        return f"oracle[{','.join(in_segs)}->{out_seg}]"

    def op_phase(self, rng: np.random.Generator) -> str:
        w = self.state.width
        table = rng.integers(0, 2, size=2**w).astype(bool)

        def pred(basis: np.ndarray) -> bool:
            return bool(table[int(_pack_rows(basis[None, :])[0])])

        self.state = sq.apply_phase_flip(self.state, pred)
        self.dense = self.dense.apply_phase_flip(pred)
        return "phase"

    def op_copy(self, rng: np.random.Generator) -> str:
        names = list(self.state.layout.names())
        k = int(rng.integers(1, len(names) + 1))
        src = list(rng.choice(names, size=k, replace=False))
        ws = sum(self.state.layout.width_of(n) for n in src)
        if self.state.width + ws > MAX_QUBITS:
            return "skip"
        dst = f"c{self.fresh}"
        self.fresh += 1
        old_w = self.state.width
        self.state = sq.append_zero_segment(self.state, dst, ws)
        self.dense = self.dense.expand_zero(ws)
        src_pos = self.state.layout.positions(src)
        dst_pos = list(range(old_w, old_w + ws))
        self.state = sq.copy_registers(self.state, src, dst)
        self.dense = self.dense.copy_positions(src_pos, dst_pos)
        return f"copy[{','.join(src)}->{dst}]"

    def op_append(self, rng: np.random.Generator) -> str:
        ws = int(rng.integers(1, 3))
        if self.state.width + ws > MAX_QUBITS:
            return "skip"
        name = f"z{self.fresh}"
        self.fresh += 1
        self.state = sq.append_zero_segment(self.state, name, ws)
        self.dense = self.dense.expand_zero(ws)
        return f"append[{name}]"

    def op_measure(self, rng: np.random.Generator, hadamard: bool) -> str:
        names = list(self.state.layout.names())
        if len(names) < 2:
            return "skip"  # keep at least one unmeasured segment
        k = int(rng.integers(1, len(names)))
        segs = list(rng.choice(names, size=k, replace=False))
        pos = self.state.layout.positions(segs)
        if hadamard:
            out, self.state = sq.measure_hadamard(self.state, segs, rng=rng)
            dout, self.dense = self.dense.measure_hadamard(pos, forced=out)
        else:
            out, self.state = sq.measure_computational(self.state, segs, rng=rng)
            dout, self.dense = self.dense.measure_computational(pos, forced=out)
        assert np.array_equal(out, dout)
        basis = "had" if hadamard else "comp"
        return f"measure-{basis}[{','.join(segs)}]"


_OPS = ("oracle", "phase", "copy", "append", "mcomp", "mhad")
_WEIGHTS = np.array([0.30, 0.20, 0.12, 0.08, 0.15, 0.15])


def run_mirror_program(seed: int, n_ops: int = 8) -> list[str]:
    """Run one random program on both simulators, checking after each op.

    Returns the trace of executed operation labels.
    """
    rng = np.random.default_rng(seed)
    pair = MirrorPair.create(rng)
    pair.check()
    trace: list[str] = []
    for _ in range(n_ops):
        op = rng.choice(_OPS, p=_WEIGHTS)
        if op == "oracle":
            label = pair.op_oracle(rng)
        elif op == "phase":
            label = pair.op_phase(rng)
        elif op == "copy":
            label = pair.op_copy(rng)
        elif op == "append":
            label = pair.op_append(rng)
        elif op == "mcomp":
            label = pair.op_measure(rng, hadamard=False)
        else:
            label = pair.op_measure(rng, hadamard=True)
        if label != "skip":
            pair.check()
            trace.append(label)
    return trace


def measurement_distribution_pvalue(
    seed: int, draws: int = 1500, hadamard: bool | None = None
) -> tuple[float, int]:
    """Chi-square p-value of sparse measurement frequencies vs dense.

    Builds one random state, picks a measured subset of segments and a
    basis, computes the exact outcome distribution on the dense oracle,
    then samples ``draws`` outcomes from the sparse implementation.
    Returns ``(p_value, n_support)``; outcomes outside the dense
    support fail immediately.
    """
    from scipy import stats

    rng = np.random.default_rng(seed)
    layout = random_layout(rng, min_total=2, max_total=6)
    state = random_state(rng, layout)
    names = list(layout.names())
    k = int(rng.integers(1, len(names) + 1)) if len(names) > 1 else 1
    k = min(k, len(names) - 1) if len(names) > 1 else 1
    if len(names) == 1:
        # measuring everything is fine for the distribution check only
        segs = names
    else:
        segs = list(rng.choice(names, size=max(k, 1), replace=False))
    pos = layout.positions(segs)
    use_had = bool(rng.integers(2)) if hadamard is None else hadamard

    dense = sq.to_dense(state)
    if use_had:
        dense = dense.hadamard(pos)
    probs = dense.probabilities(pos)

    counts = np.zeros(probs.size, dtype=np.int64)
    measure = sq.measure_hadamard if use_had else sq.measure_computational
    for _ in range(draws):
        out, _ = measure(state, segs, rng=rng)
        counts[int(_pack_rows(out[None, :])[0])] += 1

    support = probs > 1e-12
    assert counts[~support].sum() == 0, "sparse outcome outside dense support"
    n_support = int(support.sum())
    if n_support == 1:
        return 1.0, 1  # deterministic outcome; nothing to test
    chi2, p = stats.chisquare(counts[support], probs[support] * draws)
    return float(p), n_support
