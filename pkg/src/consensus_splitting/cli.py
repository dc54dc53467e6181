"""Command-line entry point.

Subcommands:
    run                 execute an experiment from a config file or preset
    theory              print the certified-rate report for one configuration
    verify-compression  estimate a compressor's empirical quality
    trace               print per-round w/y/z values for tiny presets

Exit codes: 0 success, 1 configuration error, 2 divergence abort,
3 certified-rate conditions unsatisfied (theory), 4 compression
contract breached beyond tolerance.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .compression import CompressionOperator, verify_contract
from .ecl import EclNetwork
from .presets import get_preset, preset_names
from .simulator import (
    ConfigError,
    DivergenceError,
    build_graph,
    partition,
    parse_config_text,
    run,
    summary,
    to_csv,
)
from .theory import build_report

TRACE_MAX_NODES = 3
TRACE_MAX_DIM = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="consensus-splitting",
        description="Decentralized consensus optimization via primal-dual splitting.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment")
    src = p_run.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", metavar="PATH", help="flat key=value config file")
    src.add_argument("--preset", metavar="NAME",
                     help=f"named preset (one of: {', '.join(preset_names())})")
    p_run.add_argument("--out", metavar="PATH", help="write the metric CSV here")
    p_run.add_argument("--seed", type=int, help="override the config seed")
    p_run.add_argument("--quiet", action="store_true", help="suppress the summary")

    p_th = sub.add_parser("theory", help="certified-rate report")
    p_th.add_argument("--mu", type=float, required=True)
    p_th.add_argument("--L", type=float, required=True)
    p_th.add_argument("--alpha", type=float, required=True)
    p_th.add_argument("--n-min", type=int, required=True)
    p_th.add_argument("--n-max", type=int, required=True)
    p_th.add_argument("--tau", type=float, required=True)
    p_th.add_argument("--theta", type=float, default=1.0)

    p_vc = sub.add_parser("verify-compression", help="empirical quality estimate")
    p_vc.add_argument("--kind", choices=("identity", "rand-k"), default="rand-k")
    p_vc.add_argument("--k", type=float, default=100.0, help="keep percentage")
    p_vc.add_argument("--d", type=int, default=1000)
    p_vc.add_argument("--samples", type=int, default=10000)
    p_vc.add_argument("--seed", type=int, default=0)
    p_vc.add_argument("--tol", type=float, default=0.01,
                      help="allowed |empirical - contractual| gap")

    p_tr = sub.add_parser("trace", help="print w/y/z per round for a tiny preset")
    p_tr.add_argument("--preset", required=True)
    p_tr.add_argument("--seed", type=int, help="override the preset seed")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "theory":
            return _cmd_theory(args)
        if args.command == "verify-compression":
            return _cmd_verify(args)
        return _cmd_trace(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _cmd_run(args) -> int:
    if args.config:
        cfg = parse_config_text(Path(args.config).read_text())
    else:
        cfg = get_preset(args.preset)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)

    try:
        result = run(cfg)
    except DivergenceError as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        if args.out:
            Path(args.out).write_text(to_csv(exc.metrics, seed=cfg.seed))
        return 2

    csv_text = to_csv(result)
    if args.out:
        Path(args.out).write_text(csv_text)
        if not args.quiet:
            print(summary(result), end="")
    else:
        print(csv_text, end="")
        if not args.quiet:
            print(summary(result), end="", file=sys.stderr)
    return 0


def _cmd_theory(args) -> int:
    report = build_report(args.mu, args.L, args.alpha, args.n_min, args.n_max,
                          args.tau, args.theta)
    print("== certified-rate report ==")
    print(report.as_text())
    print()
    print(report.as_key_values())
    if args.tau < report.tau_min:
        print(
            f"certified conditions unsatisfied: tau={args.tau:g} is below "
            f"tau_min={report.tau_min:.12g}",
            file=sys.stderr,
        )
        return 3
    return 0


def _cmd_verify(args) -> int:
    if args.kind == "identity":
        op = CompressionOperator.identity()
    else:
        op = CompressionOperator.rand_k(args.k)
    empirical = verify_contract(op, args.d, args.samples, args.seed)
    gap = abs(empirical - op.tau)
    print(f"# seed={args.seed}")
    print(f"operator: {op.kind} (k={op.k_percent:g}%)")
    print(f"contractual tau: {op.tau!r}")
    print(f"empirical tau:   {empirical!r}")
    print(f"gap:             {gap!r} (tolerance {args.tol!r})")
    if gap > args.tol:
        print("contract breached", file=sys.stderr)
        return 4
    return 0


def _cmd_trace(args) -> int:
    cfg = get_preset(args.preset)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if cfg.algorithm not in ("ecl", "cecl"):
        print("trace supports the splitting algorithms only", file=sys.stderr)
        return 1
    graph = build_graph(cfg.graph)
    objectives = partition(cfg.problem, graph.n_nodes)
    d = objectives[0].dim
    if graph.n_nodes > TRACE_MAX_NODES or d > TRACE_MAX_DIM:
        print(
            f"trace is limited to n <= {TRACE_MAX_NODES} nodes and "
            f"d <= {TRACE_MAX_DIM}; preset has n={graph.n_nodes}, d={d}",
            file=sys.stderr,
        )
        return 1

    net = EclNetwork(graph, objectives, cfg.ecl, seed=cfg.seed)
    print(f"preset: {args.preset}")
    print(f"seed: {cfg.seed}")
    for r in range(1, cfg.rounds + 1):
        net.run_round(r - 1)
        print(f"round {r}")
        for node in net.nodes:
            print(f"  w[{node.node_id + 1}] = {_fmt_vec(node.w)}")
        for node in net.nodes:
            for j in sorted(node.duals):
                print(f"  y[{node.node_id + 1}|{j + 1}] = {_fmt_vec(node.duals[j].y)}")
        for node in net.nodes:
            for j in sorted(node.duals):
                print(f"  z[{node.node_id + 1}|{j + 1}] = {_fmt_vec(node.duals[j].z)}")
    return 0


def _fmt_vec(v) -> str:
    # node ids are displayed 1-based; values in shortest round-trip form
    if len(v) == 1:
        return repr(float(v[0]))
    return "(" + ", ".join(repr(float(x)) for x in v) + ")"


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
