"""Verified function evaluation, both variants.

The one-shot variant garbles the client's circuit so the server can
decode exactly the chosen output; the committed variant adds repeated
consistency rounds in which the client proves, in zero travel beyond
the argument bytes, that its evaluation input matches a commitment
fixed before the protocol began.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from sfslab import sfvp as sv
from sfslab.circuits import adder_circuit, majority3_circuit, xor_circuit
from sfslab.corpus import get_function
from sfslab.errors import WidthError
from sfslab.garbling import circuit_encoding_bits, circuit_randomness_bits, input_randomness_bits
from sfslab.sfs import SfsParams

PRG = get_function("prg:8:32")


def _params(n=4, m=5, **over) -> SfsParams:
    base = dict(
        n=n, m=m, kappa=8, eps=0.8, delta=0.01, eps0=0.1,
        rounds_cap=1, reps_cap=1, test_prob=0.0,
    )
    base.update(over)
    return SfsParams(**base)


# ---------------------------------------------------------------------------
# Scheduling and the garbled-delivery function
# ---------------------------------------------------------------------------


def test_garbling_function_arities():
    c = adder_circuit(2)
    g = sv.garbling_function(c, 8)
    assert g.n_in == input_randomness_bits(c.n_inputs, 8) + circuit_randomness_bits(
        len(c.gates), 8
    )
    assert g.n_out == circuit_encoding_bits(c, 8)


def test_sfvp_schedule_replaces_arities():
    # The sampled register is the input-wire randomness; the delivered
    # output is the serialized gate tables.
    c = adder_circuit(2)
    base = _params()
    sched = sv.sfvp_schedule(c, base)
    assert sched.n == input_randomness_bits(c.n_inputs, base.kappa)
    assert sched.m == circuit_encoding_bits(c, base.kappa)
    assert sched.kappa == base.kappa and sched.eps == base.eps


def test_consistency_rounds_formula():
    assert sv.consistency_rounds(0.8, None) == math.ceil(256 / 0.8**3)
    assert sv.consistency_rounds(0.8, 3) == 3
    assert sv.consistency_rounds(2.0, None) == 32  # ceil(256/8)


# ---------------------------------------------------------------------------
# One-shot verified evaluation
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "circuit", [xor_circuit(), majority3_circuit(), adder_circuit(2)],
    ids=["xor", "maj3", "adder2"],
)
def test_sfvp_delivers_circuit_output(circuit):
    rng = np.random.default_rng(1)
    for seed in range(6):
        x = rng.integers(0, 2, size=circuit.n_inputs).astype(np.uint8)
        res = sv.run_sfvp(circuit, x, _params(n=circuit.n_inputs, m=circuit.n_outputs), seed=seed)
        assert res.client.accepted and res.server.accepted
        assert np.array_equal(res.server.y, circuit.evaluate(x))
        assert res.server.x is None  # input stays with the client


def test_sfvp_exhaustive_small_circuit():
    circuit = majority3_circuit()
    p = _params(n=3, m=1)
    for val in range(8):
        x = np.array([(val >> 2) & 1, (val >> 1) & 1, val & 1], dtype=np.uint8)
        res = sv.run_sfvp(circuit, x, p, seed=100 + val)
        assert np.array_equal(res.server.y, circuit.evaluate(x))


def test_sfvp_client_keeps_input_randomness():
    c = adder_circuit(2)
    x = np.array([1, 0, 1, 1], dtype=np.uint8)
    res = sv.run_sfvp(c, x, _params(), seed=3)
    rho = res.client.extra["rho"]
    assert rho.size == input_randomness_bits(c.n_inputs, 8)


# ---------------------------------------------------------------------------
# Committed-input variant
# ---------------------------------------------------------------------------


def _setup_for(x, seed=1):
    return sv.Sfvp2Setup.create(x, 8, seed=seed)


def test_sfvp2_native_function_end_to_end():
    x = np.array([1, 0, 1, 1, 0, 0, 1, 0], dtype=np.uint8)
    setup = _setup_for(x)
    res = sv.run_sfvp2(PRG, setup, _params(n=8, m=32), seed=3, rounds_cap=2)
    assert res.client.accepted and res.server.accepted
    assert res.client.rounds == 2
    assert np.array_equal(res.server.y, PRG.evaluate(x))


def test_sfvp2_circuit_function_end_to_end():
    c = adder_circuit(2)
    x = np.array([1, 0, 1, 1], dtype=np.uint8)
    res = sv.run_sfvp2(c, _setup_for(x, seed=2), _params(), seed=4, rounds_cap=2)
    assert res.server.accepted
    assert np.array_equal(res.server.y, c.evaluate(x))


def test_sfvp2_round_count_honors_cap():
    x = np.array([1, 0, 1, 1, 0, 0, 1, 0], dtype=np.uint8)
    res = sv.run_sfvp2(PRG, _setup_for(x), _params(n=8, m=32), seed=5, rounds_cap=3)
    assert res.client.rounds == 3
    hashes = res.transcript.count_steps(lambda s: s.endswith(".hash"))
    assert hashes == 3


def test_sfvp2_rejects_opening_for_different_input():
    x = np.array([1, 0, 1, 1, 0, 0, 1, 0], dtype=np.uint8)
    setup = _setup_for(x)
    lying = sv.Sfvp2ClientHooks(name="wrong-opening", reveal_opening=(x ^ 1, setup.r))
    res = sv.run_sfvp2(
        PRG, setup, _params(n=8, m=32), seed=3, rounds_cap=2, client_hooks=lying
    )
    assert res.server.accepted is False
    assert res.client.accepted is False


def test_sfvp2_rejects_evaluation_input_mismatching_commitment():
    # Client evaluates on x' != committed x, then opens honestly: the
    # server's digest of f(x') cannot match the proven opening of x.
    x = np.array([1, 0, 1, 1, 0, 0, 1, 0], dtype=np.uint8)
    setup = _setup_for(x)
    swapped = sv.Sfvp2ClientHooks(name="swap-eval", eval_input=x ^ 1)
    res = sv.run_sfvp2(
        PRG, setup, _params(n=8, m=32), seed=3, rounds_cap=2, client_hooks=swapped
    )
    assert res.server.accepted is False
    assert res.server.reason == "opening rejected"


def test_sfvp2_malicious_rejection_is_reliable_across_seeds():
    x = np.array([1, 0, 1, 1, 0, 0, 1, 0], dtype=np.uint8)
    setup = _setup_for(x)
    lying = sv.Sfvp2ClientHooks(name="wrong-opening", reveal_opening=(x ^ 1, setup.r))
    for seed in range(25):
        res = sv.run_sfvp2(
            PRG, setup, _params(n=8, m=32), seed=seed, rounds_cap=1, client_hooks=lying
        )
        assert res.server.accepted is False


def test_sfvp2_setup_and_params_validation():
    x8 = np.array([1, 0, 1, 1, 0, 0, 1, 0], dtype=np.uint8)
    x4 = np.array([1, 0, 1, 1], dtype=np.uint8)
    with pytest.raises(WidthError):
        sv.run_sfvp2(PRG, _setup_for(x4, seed=2), _params(n=8, m=32), seed=1)
    with pytest.raises(WidthError):
        sv.run_sfvp2(PRG, _setup_for(x8), _params(n=4, m=5), seed=1)


def test_sfvp2_setup_commitment_opens_correctly():
    from sfslab.primitives import verify_opening
    from sfslab.bits import concat_bits

    x = np.array([1, 1, 0, 1], dtype=np.uint8)
    setup = _setup_for(x, seed=9)
    msg = concat_bits(setup.x, np.array([], dtype=np.uint8)) if setup.x.size else setup.x
    assert verify_opening(setup.com, setup.x, setup.r, setup.pp) or verify_opening(
        setup.com, msg, setup.r, setup.pp
    )
