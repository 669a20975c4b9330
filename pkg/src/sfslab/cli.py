"""Command-line front end for the protocol laboratory.

One subcommand per experiment family::

    sfslab sfs            sample a long function output over a short channel
    sfslab sfvp           private evaluation via garbling
    sfslab sfvp2          verified evaluation against a commitment
    sfslab twopc          two-party computation with two deliveries
    sfslab attack         measured pass rates of canned adversaries
    sfslab impossibility  the classical counting-bound experiments
    sfslab garble         garble / degarble a corpus or file circuit
    sfslab report         aggregate a saved transcript

Common flags: ``--seed`` fixes every coin; ``--transcript PATH``
writes the session's frame log as JSON lines; ``--config PATH`` reads
``key=value`` defaults (command-line flags win); ``--tcp HOST:PORT``
runs this process as the connecting party against a peer started
with ``--listen HOST:PORT``.  Reports are plain text and boringly
deterministic: the same seed prints the same bytes.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from typing import Any, Callable, Sequence

import numpy as np

from . import bits
from .adversaries import ADVERSARIES, run_soundness_experiment
from .circuits import Circuit, load_circuit
from .corpus import CORPUS_BUILDERS, as_function, corpus_verify, get_function, load_corpus_circuit
from .errors import SfsLabError
from .garbling import (
    circuit_encoding_bits,
    circuit_encoding_to_bits,
    degarble,
    garble_circuit,
    garble_input,
    input_encoding_bits,
    input_randomness_bits,
    circuit_randomness_bits,
    package_to_bytes,
)
from .impossibility import (
    EXHAUSTIVE_M_CAP,
    default_pairs,
    optimal_decompressor_exhaustive,
    prg_image_sampler,
    run_incompressibility_experiment,
)
from .runtime import (
    ChannelEndpoint,
    Transcript,
    client_rng_for_seed,
    run_session,
    server_rng_for_seed,
    tcp_accept_one,
    tcp_connect,
    tcp_listen_one,
)
from .sfs import (
    SfsOutcome,
    SfsParams,
    _make_backends,
    derandomized_function,
    sfs_comp_client,
    sfs_comp_server,
    sfs_full_client,
    sfs_full_server,
    sfs_temp_client,
    sfs_temp_server,
    sfs_test_client,
    sfs_test_server,
)
from .sfvp import (
    Sfvp2Setup,
    sfvp2_client,
    sfvp2_server,
    sfvp_client,
    sfvp_schedule,
    sfvp_server,
)
from .twopc import (
    alice_fn,
    assert_dealer_precedes_protocol,
    bob_fn,
    dealer_step1,
    run_twopc,
)

__all__ = ["main", "build_parser", "transcript_report"]


# ---------------------------------------------------------------------------
# Small shared pieces
# ---------------------------------------------------------------------------


def _parse_bits_arg(text: str) -> np.ndarray:
    try:
        return bits.bits_from_str(text)
    except Exception as exc:  # argparse surfaces the message
        raise argparse.ArgumentTypeError(f"not a bit string: {text!r} ({exc})")


def _fmt_bits(arr: np.ndarray | None) -> str:
    if arr is None:
        return "-"
    if arr.size <= 64:
        return bits.bits_to_str(arr)
    return f"hex:{bits.bits_to_hex(arr)}"


def _host_port(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise SfsLabError(f"expected HOST:PORT, got {text!r}")
    return host or "127.0.0.1", int(port)


def _resolve_circuit(spec: str) -> Circuit:
    """A corpus name (``adder4``) or a circuit-file path."""
    if spec in CORPUS_BUILDERS:
        return load_corpus_circuit(spec)
    return load_circuit(spec)


def _kv(key: str, value: Any) -> None:
    print(f"{key}: {value}")


def _print_transcript_summary(t: Transcript) -> None:
    c2s = sum(e.bytes for e in t.entries if e.dir == "C->S")
    s2c = sum(e.bytes for e in t.entries if e.dir == "S->C")
    dealer = sum(e.bytes for e in t.entries if e.dir.startswith("D->"))
    line = f"frames={len(t.entries)} total_bytes={t.total_bytes()} c_to_s={c2s} s_to_c={s2c}"
    if dealer:
        line += f" dealer={dealer}"
    _kv("transcript", line)


def _finish_transcript(args: argparse.Namespace, t: Transcript) -> None:
    _print_transcript_summary(t)
    if args.transcript:
        t.write_jsonl(args.transcript)
        _kv("transcript_file", args.transcript)


def _run_parties(
    args: argparse.Namespace,
    client_fn: Callable[[ChannelEndpoint, np.random.Generator], Any],
    server_fn: Callable[[ChannelEndpoint, np.random.Generator], Any],
) -> tuple[str, Any, Any, Transcript]:
    """Dispatch a two-party protocol onto the selected channel.

    Returns ``(role, client_result, server_result, transcript)``;
    over TCP only this process's result is filled in.
    """
    if args.listen and args.tcp:
        raise SfsLabError("--listen and --tcp are mutually exclusive")
    if (args.listen or args.tcp) and args.aok_backend == "merkle-oracle":
        raise SfsLabError(
            "the merkle-oracle backend shares state between the parties "
            "and only runs in process; use --aok-backend reveal over TCP"
        )
    if args.listen:
        host, port = _host_port(args.listen)
        listener, bound = tcp_listen_one(host, port)
        _kv("listening", f"{host}:{bound}")
        ep = tcp_accept_one(listener)
        try:
            result = server_fn(ep, server_rng_for_seed(args.seed))
        finally:
            ep.close()
        return "server", None, result, ep.transcript
    if args.tcp:
        host, port = _host_port(args.tcp)
        ep = tcp_connect(host, port)
        try:
            result = client_fn(ep, client_rng_for_seed(args.seed))
        finally:
            ep.close()
        return "client", result, None, ep.transcript
    session = run_session(client_fn, server_fn, args.seed)
    return "both", session.client, session.server, session.transcript


def _params_from_args(args: argparse.Namespace, n: int, m: int) -> SfsParams:
    return SfsParams(
        n=n,
        m=m,
        kappa=args.kappa,
        eps=args.eps,
        delta=args.delta,
        eps0=args.eps0,
        rounds_cap=args.rounds_cap,
        reps_cap=args.reps_cap,
        test_prob=args.test_prob,
    )


def _print_sfs_outcome(prefix: str, out: SfsOutcome) -> None:
    _kv(f"{prefix}accepted", "yes" if out.accepted else "no")
    if out.reason:
        _kv(f"{prefix}reason", out.reason)
    if out.mode:
        _kv(f"{prefix}mode", out.mode)
    if out.x is not None:
        _kv(f"{prefix}x", _fmt_bits(out.x))
    if out.y is not None:
        _kv(f"{prefix}y", _fmt_bits(out.y))
    if out.n_test_rounds or out.n_comp_rounds:
        _kv(
            f"{prefix}rounds",
            f"test={out.n_test_rounds} comp={out.n_comp_rounds}",
        )


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_sfs(args: argparse.Namespace) -> int:
    f = get_function(args.fn)
    chosen = None
    if (args.x0 is None) != (args.x1 is None):
        raise SfsLabError("--x0 and --x1 come as a pair")
    if args.x0 is not None:
        chosen = (args.x0, args.x1)

    if args.protocol_mode == "randomized":
        if args.coin_bits < 1:
            raise SfsLabError("--coin-bits must be positive for randomized mode")
        n = f.n_in - args.coin_bits
        params = _params_from_args(args, n=n, m=f.n_out)
        g = derandomized_function(f, n, args.kappa)
        run_f, run_params = g, replace(params, n=n + args.kappa)
    else:
        params = _params_from_args(args, n=f.n_in, m=f.n_out)
        run_f, run_params = f, params

    cb, sb = _make_backends(args.aok_backend)

    def client_fn(chan: ChannelEndpoint, rng: np.random.Generator) -> SfsOutcome:
        if args.protocol_mode == "test":
            return sfs_test_client(chan, rng, run_f, run_params, cb, mode=args.basis)
        if args.protocol_mode == "comp":
            return sfs_comp_client(chan, rng, run_params)
        if args.protocol_mode == "temp":
            return sfs_temp_client(
                chan, rng, run_f, run_params, cb, chosen_inputs=chosen
            )
        out = sfs_full_client(chan, rng, run_f, run_params, cb, chosen_inputs=chosen)
        if args.protocol_mode == "randomized" and out.accepted and out.x is not None:
            out.extra["_discarded_seed"] = out.x[params.n :]
            out.x = out.x[: params.n]
        return out

    def server_fn(chan: ChannelEndpoint, rng: np.random.Generator) -> SfsOutcome:
        if args.protocol_mode == "test":
            return sfs_test_server(chan, rng, run_f, run_params, sb)
        if args.protocol_mode == "comp":
            return sfs_comp_server(chan, rng, run_f, run_params)
        if args.protocol_mode == "temp":
            return sfs_temp_server(chan, rng, run_f, run_params, sb)
        return sfs_full_server(chan, rng, run_f, run_params, sb)

    role, client_out, server_out, transcript = _run_parties(args, client_fn, server_fn)
    _kv("protocol", f"sfs-{args.protocol_mode}")
    _kv("function", f.name)
    _kv(
        "params",
        f"n={params.n} m={params.m} kappa={params.kappa} eps={params.eps} "
        f"delta={params.delta} eps0={params.base_tolerance:.6g}",
    )
    if client_out is not None:
        _print_sfs_outcome("client_", client_out)
    if server_out is not None:
        _print_sfs_outcome("server_", server_out)
    _finish_transcript(args, transcript)
    accepted = client_out.accepted if client_out is not None else server_out.accepted
    return 0 if accepted else 1


def cmd_sfvp(args: argparse.Namespace) -> int:
    circuit = _resolve_circuit(args.circuit)
    if args.x.size != circuit.n_inputs:
        raise SfsLabError(
            f"--x has {args.x.size} bits; the circuit takes {circuit.n_inputs}"
        )
    params = _params_from_args(args, n=circuit.n_inputs, m=circuit.n_outputs)
    schedule = sfvp_schedule(circuit, params)
    cb, sb = _make_backends(args.aok_backend)

    def client_fn(chan, rng):
        return sfvp_client(chan, rng, circuit, args.x, schedule, cb)

    def server_fn(chan, rng):
        return sfvp_server(chan, rng, circuit, schedule, sb)

    role, client_out, server_out, transcript = _run_parties(args, client_fn, server_fn)
    _kv("protocol", "sfvp")
    _kv("circuit", args.circuit)
    if client_out is not None:
        _kv("client_accepted", "yes" if client_out.accepted else "no")
        if client_out.reason:
            _kv("client_reason", client_out.reason)
        _kv("client_x", _fmt_bits(client_out.x))
    if server_out is not None:
        _kv("server_accepted", "yes" if server_out.accepted else "no")
        if server_out.reason:
            _kv("server_reason", server_out.reason)
        _kv("server_y", _fmt_bits(server_out.y))
    _finish_transcript(args, transcript)
    accepted = (client_out or server_out).accepted
    return 0 if accepted else 1


def cmd_sfvp2(args: argparse.Namespace) -> int:
    f = get_function(args.fn)
    setup = Sfvp2Setup.create(args.x, args.kappa, args.setup_seed)
    params = _params_from_args(args, n=f.n_in, m=f.n_out)
    cb, sb = _make_backends(args.aok_backend)

    def client_fn(chan, rng):
        return sfvp2_client(
            chan, rng, f, setup, params, cb, rounds_cap=args.cons_rounds_cap
        )

    def server_fn(chan, rng):
        return sfvp2_server(
            chan,
            rng,
            f,
            setup.pp,
            setup.com,
            params,
            sb,
            rounds_cap=args.cons_rounds_cap,
        )

    role, client_out, server_out, transcript = _run_parties(args, client_fn, server_fn)
    _kv("protocol", "sfvp2")
    _kv("function", f.name)
    _kv("committed_input", _fmt_bits(setup.x))
    for prefix, out in (("client_", client_out), ("server_", server_out)):
        if out is None:
            continue
        _kv(f"{prefix}accepted", "yes" if out.accepted else "no")
        if out.reason:
            _kv(f"{prefix}reason", out.reason)
        if out.y is not None:
            _kv(f"{prefix}y", _fmt_bits(out.y))
        _kv(f"{prefix}verification_rounds", out.rounds)
    _finish_transcript(args, transcript)
    accepted = (client_out or server_out).accepted
    return 0 if accepted else 1


def cmd_twopc(args: argparse.Namespace) -> int:
    f_a = _resolve_circuit(args.fa)
    f_b = _resolve_circuit(args.fb)
    params = _params_from_args(args, n=args.xa.size + args.xb.size, m=1)

    if args.listen or args.tcp:
        # the dealer must hand both processes the same record, so it runs
        # from the shared seed on each side
        dealer_rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([args.seed, 0xD_EA1]))
        )
        step1 = dealer_step1(args.xa, args.xb, params.kappa, dealer_rng)
        cb, sb = _make_backends(args.aok_backend)

        def client_fn(chan, rng):
            from .twopc import _record_dealer_entries

            _record_dealer_entries(chan.transcript, step1)
            return alice_fn(
                chan,
                rng,
                view=step1.alice_view(),
                f_a=f_a,
                f_b=f_b,
                params=params,
                backend=cb,
                cons_rounds_cap=args.cons_rounds_cap,
            )

        def server_fn(chan, rng):
            return bob_fn(
                chan,
                rng,
                view=step1.bob_view(),
                f_a=f_a,
                f_b=f_b,
                params=params,
                backend=sb,
                cons_rounds_cap=args.cons_rounds_cap,
            )

        role, alice_out, bob_out, transcript = _run_parties(
            args, client_fn, server_fn
        )
    else:
        result = run_twopc(
            args.xa,
            args.xb,
            f_a,
            f_b,
            params,
            seed=args.seed,
            backend_name=args.aok_backend,
            cons_rounds_cap=args.cons_rounds_cap,
        )
        alice_out, bob_out = result.alice, result.bob
        transcript = result.session.transcript
        assert_dealer_precedes_protocol(transcript)
    _kv("protocol", "twopc")
    _kv("circuits", f"fa={args.fa} fb={args.fb}")
    _kv("inputs", f"xa={_fmt_bits(args.xa)} xb={_fmt_bits(args.xb)}")
    if alice_out is not None:
        _kv("alice_flag", "yes" if alice_out.flag else "no")
        _kv("alice_y", _fmt_bits(alice_out.y))
        if alice_out.reason:
            _kv("alice_reason", alice_out.reason)
    if bob_out is not None:
        _kv("bob_flag", "yes" if bob_out.flag else "no")
        _kv("bob_y", _fmt_bits(bob_out.y))
        if bob_out.reason:
            _kv("bob_reason", bob_out.reason)
    _finish_transcript(args, transcript)
    flags = [o.flag for o in (alice_out, bob_out) if o is not None]
    return 0 if all(flags) else 1


def cmd_attack(args: argparse.Namespace) -> int:
    f = get_function(args.fn)
    params = _params_from_args(args, n=f.n_in, m=f.n_out)
    mode = None if args.basis == "mixed" else args.basis
    report = run_soundness_experiment(
        args.adversary,
        f,
        params,
        trials=args.trials,
        seed=args.seed,
        mode=mode,
        backend_name=args.aok_backend,
    )
    _kv("experiment", "soundness")
    _kv("adversary", args.adversary)
    _kv("function", f.name)
    _kv("basis", args.basis)
    print(report.summary_line())
    for reason, count in sorted(report.reject_reasons.items()):
        _kv(f"reject[{reason}]", count)
    return 0


def cmd_impossibility(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    pairs = default_pairs(args.t, args.m, prg_seed_bits=args.prg_seed_bits)
    _kv("experiment", "incompressibility")
    _kv("setting", f"t={args.t} m={args.m} trials={args.trials}")
    all_within = True
    for pair in pairs:
        res = run_incompressibility_experiment(pair, args.trials, rng)
        print(res.summary_line())
        all_within = all_within and res.within_bound
    n_seed = args.prg_seed_bits if args.prg_seed_bits is not None else min(args.t, 8)
    inv = pairs[-1]
    img = run_incompressibility_experiment(
        inv,
        args.trials,
        rng,
        sampler=prg_image_sampler(n_seed, args.m),
        distribution="prg-image",
    )
    print(img.summary_line())
    _kv("image_rate", f"{img.rate:.6f}")
    if args.m <= EXHAUSTIVE_M_CAP:
        for pair in pairs:
            if pair.deterministic:
                opt = optimal_decompressor_exhaustive(pair)
                _kv(
                    f"optimum[{pair.name}]",
                    f"{opt.optimum:.6f} (covered {opt.covered}/2^{pair.m})",
                )
    _kv("all_within_bound", "yes" if all_within else "no")
    return 0 if all_within else 1


def cmd_garble(args: argparse.Namespace) -> int:
    circuit = _resolve_circuit(args.circuit)
    if args.x.size != circuit.n_inputs:
        raise SfsLabError(
            f"--x has {args.x.size} bits; the circuit takes {circuit.n_inputs}"
        )
    rng = np.random.default_rng(args.seed)
    n_r = input_randomness_bits(circuit.n_inputs, args.kappa)
    n_coins = circuit_randomness_bits(len(circuit.gates), args.kappa)
    r = bits.random_bits(rng, n_r)
    coins = bits.random_bits(rng, n_coins)
    ce = garble_circuit(circuit, r, coins, args.kappa)
    ie = garble_input(args.x, r, args.kappa)
    y = degarble(circuit, ce, ie)
    direct = as_function(circuit).evaluate(args.x)
    _kv("circuit", args.circuit)
    _kv(
        "sizes",
        f"ce_bits={circuit_encoding_bits(circuit, args.kappa)} "
        f"ie_bits={input_encoding_bits(circuit.n_inputs, args.kappa)} "
        f"randomness_bits={n_r + n_coins}",
    )
    _kv("x", _fmt_bits(args.x))
    _kv("y", _fmt_bits(y))
    _kv("matches_direct_eval", "yes" if np.array_equal(y, direct) else "no")
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(package_to_bytes(circuit, ce, ie))
        _kv("package_file", args.out)
    return 0 if np.array_equal(y, direct) else 1


def transcript_report(t: Transcript, group_by: str = "step") -> list[tuple[str, int, int]]:
    """Aggregate a transcript into (group, frames, bytes) rows plus a total."""
    if group_by not in ("step", "direction"):
        raise SfsLabError("group-by must be 'step' or 'direction'")
    groups: dict[str, tuple[int, int]] = {}
    for e in t.entries:
        key = e.step if group_by == "step" else e.dir
        frames, total = groups.get(key, (0, 0))
        groups[key] = (frames + 1, total + e.bytes)
    rows = [(k, f, b) for k, (f, b) in sorted(groups.items())]
    rows.append(("TOTAL", len(t.entries), t.total_bytes()))
    return rows


def cmd_report(args: argparse.Namespace) -> int:
    with open(args.transcript_file, "r", encoding="utf-8") as fh:
        t = Transcript.from_jsonl(fh.read())
    rows = transcript_report(t, group_by=args.group_by)
    width = max(len(r[0]) for r in rows)
    print(f"{'group':<{width}}  {'frames':>6}  {'bytes':>10}")
    for name, frames, total in rows:
        print(f"{name:<{width}}  {frames:>6}  {total:>10}")
    return 0


def cmd_corpus(args: argparse.Namespace) -> int:
    reports = corpus_verify()
    bad = 0
    for r in reports:
        status = "ok" if r.ok else f"MISMATCH({r.mismatches})"
        print(f"{r.name:>14s}  {r.n_in}->{r.n_out}  {status}")
        bad += 0 if r.ok else 1
    _kv("entries", len(reports))
    _kv("failures", bad)
    return 0 if bad == 0 else 1


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, channel: bool = True) -> None:
    p.add_argument("--seed", type=int, default=0, help="session seed (default 0)")
    p.add_argument("--config", default=None, help="key=value defaults file")
    p.add_argument(
        "--transcript", default=None, help="write the frame log to this JSONL file"
    )
    if channel:
        p.add_argument(
            "--tcp", default=None, metavar="HOST:PORT", help="connect to a listener"
        )
        p.add_argument(
            "--listen", default=None, metavar="HOST:PORT", help="serve one session"
        )
        p.add_argument(
            "--aok-backend",
            default="reveal",
            choices=("reveal", "merkle-oracle"),
            help="argument-of-knowledge backend for the test rounds",
        )


def _add_params(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kappa", type=int, default=16, help="security parameter")
    p.add_argument("--eps", type=float, default=0.5, help="target soundness tolerance")
    p.add_argument("--delta", type=float, default=0.01, help="completeness slack")
    p.add_argument("--eps0", type=float, default=None, help="base tolerance override")
    p.add_argument("--rounds-cap", type=int, default=None, help="cap inner-stage rounds")
    p.add_argument("--reps-cap", type=int, default=None, help="cap outer repetitions")
    p.add_argument(
        "--test-prob", type=float, default=None, help="override per-round test probability"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sfslab",
        description="Desk-scale laboratory for secure sampling and computation "
        "of long outputs over short channels.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sfs", help="secure function sampling")
    _add_common(p)
    _add_params(p)
    p.add_argument("--fn", default="prg:8:64", help="function name (corpus or prg:<n>:<m>)")
    p.add_argument(
        "--mode",
        dest="protocol_mode",
        default="full",
        choices=("full", "temp", "test", "comp", "randomized"),
        help="protocol stage to run",
    )
    p.add_argument(
        "--basis",
        default=None,
        choices=("comp", "had"),
        help="force the test-session basis coin (test mode only)",
    )
    p.add_argument("--x0", type=_parse_bits_arg, default=None, help="chosen branch-0 input")
    p.add_argument("--x1", type=_parse_bits_arg, default=None, help="chosen branch-1 input")
    p.add_argument(
        "--coin-bits", type=int, default=0, help="trailing coin bits (randomized mode)"
    )
    p.set_defaults(func=cmd_sfs)

    p = sub.add_parser("sfvp", help="private function evaluation")
    _add_common(p)
    _add_params(p)
    p.add_argument("--circuit", required=True, help="corpus name or circuit file")
    p.add_argument("--x", type=_parse_bits_arg, required=True, help="the evaluation input")
    p.set_defaults(func=cmd_sfvp)

    p = sub.add_parser("sfvp2", help="verified evaluation against a commitment")
    _add_common(p)
    _add_params(p)
    p.add_argument("--fn", required=True, help="function name (corpus or prg:<n>:<m>)")
    p.add_argument("--x", type=_parse_bits_arg, required=True, help="the committed input")
    p.add_argument(
        "--setup-seed", type=int, default=1, help="seed for the commitment phase"
    )
    p.add_argument(
        "--cons-rounds-cap", type=int, default=None, help="cap verification rounds"
    )
    p.set_defaults(func=cmd_sfvp2)

    p = sub.add_parser("twopc", help="two-party computation")
    _add_common(p)
    _add_params(p)
    p.add_argument("--xa", type=_parse_bits_arg, required=True, help="Alice's input bits")
    p.add_argument("--xb", type=_parse_bits_arg, required=True, help="Bob's input bits")
    p.add_argument("--fa", required=True, help="Alice's circuit (corpus name or file)")
    p.add_argument("--fb", required=True, help="Bob's circuit (corpus name or file)")
    p.add_argument(
        "--cons-rounds-cap", type=int, default=None, help="cap verification rounds"
    )
    p.set_defaults(func=cmd_twopc)

    p = sub.add_parser("attack", help="adversary pass-rate experiment")
    _add_common(p, channel=False)
    p.add_argument(
        "--aok-backend",
        default="reveal",
        choices=("reveal", "merkle-oracle"),
        help="argument-of-knowledge backend",
    )
    _add_params(p)
    p.add_argument("--fn", default="prg:8:64", help="function name")
    p.add_argument(
        "--adversary",
        required=True,
        choices=sorted(ADVERSARIES),
        help="strategy to measure",
    )
    p.add_argument("--trials", type=int, default=400, help="independent sessions")
    p.add_argument(
        "--basis",
        default="mixed",
        choices=("mixed", "comp", "had"),
        help="test-basis mixture",
    )
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("impossibility", help="classical counting-bound experiments")
    _add_common(p, channel=False)
    p.add_argument("--t", type=int, default=8, help="message length")
    p.add_argument("--m", type=int, default=16, help="payload length")
    p.add_argument("--trials", type=int, default=10000, help="round-trip trials per pair")
    p.add_argument(
        "--prg-seed-bits", type=int, default=None, help="seed bits for the PRG inverter"
    )
    p.set_defaults(func=cmd_impossibility)

    p = sub.add_parser("garble", help="garble and degarble one circuit")
    _add_common(p, channel=False)
    p.add_argument("--kappa", type=int, default=16, help="security parameter")
    p.add_argument("--circuit", required=True, help="corpus name or circuit file")
    p.add_argument("--x", type=_parse_bits_arg, required=True, help="input bits")
    p.add_argument("--out", default=None, help="write the serialized package here")
    p.set_defaults(func=cmd_garble)

    p = sub.add_parser("report", help="aggregate a saved transcript")
    _add_common(p, channel=False)
    p.add_argument("transcript_file", help="JSONL transcript to aggregate")
    p.add_argument(
        "--group-by", default="step", choices=("step", "direction"), help="row key"
    )
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("corpus", help="verify the circuit corpus against oracles")
    _add_common(p, channel=False)
    p.set_defaults(func=cmd_corpus)

    return parser


# ---------------------------------------------------------------------------
# Config file
# ---------------------------------------------------------------------------


def _load_config(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise SfsLabError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> None:
    """Install config-file values as subcommand defaults (flags still win)."""
    if "--config" not in argv:
        return
    idx = list(argv).index("--config")
    if idx + 1 >= len(argv):
        return  # argparse will report the missing value
    values = _load_config(argv[idx + 1])
    # find the chosen subparser
    sub_actions = [
        a for a in parser._actions if isinstance(a, argparse._SubParsersAction)
    ]
    if not sub_actions or not argv:
        return
    chosen = next((tok for tok in argv if tok in sub_actions[0].choices), None)
    if chosen is None:
        return
    subparser = sub_actions[0].choices[chosen]
    defaults: dict[str, Any] = {}
    for action in subparser._actions:
        if action.dest in values:
            raw = values[action.dest]
            if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
                defaults[action.dest] = raw.lower() in ("1", "true", "yes", "on")
            elif action.type is not None:
                defaults[action.dest] = action.type(raw)
            else:
                defaults[action.dest] = raw
    if defaults:
        subparser.set_defaults(**defaults)


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except SfsLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
