"""sfslab: a desk-scale laboratory for quantum secure-computation protocols.

The package implements, exercises, and attacks a family of two-party
protocols in which a client drives a server to hold a *long* output
(``m`` bits) while keeping the total communication short (polynomial in
the input length ``n`` and a security parameter ``kappa`` only):

* secure function sampling (``sfs``): the client ends with a random
  input ``x``, the server with ``f(x)``, certified by test rounds;
* secure function-value preparation (``sfvp``, ``sfvp2``): the client
  chooses ``x``, optionally under commitment;
* full two-party computation (``twopc``) built from the above plus
  garbled circuits;
* the succinct relation-testing subprotocol (``succ_test``);
* the counting experiment showing classical protocols cannot do this
  (``impossibility``).

Every quantum state used by these protocols is a superposition of at
most two computational-basis strings with equal magnitudes and ``+/-1``
signs; :mod:`sfslab.sparse_qsim` simulates such states exactly at
arbitrary width, with a dense reference simulator
(:mod:`sfslab.dense`) as a cross-check oracle at small width.
"""

__version__ = "0.1.0"

__all__ = [
    "bits",
    "circuits",
    "corpus",
    "dense",
    "sparse_qsim",
    "primitives",
    "garbling",
    "runtime",
    "succ_test",
    "sfs",
    "sfvp",
    "twopc",
    "adversaries",
    "impossibility",
    "errors",
]
