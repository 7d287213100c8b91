"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 usage error.
The default seed may be set with the PTQKD_SEED environment variable;
``--seed`` takes precedence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

from ptqkd import report
from ptqkd.bb84 import run_protocol, sift
from ptqkd.errors import DomainError
from ptqkd.eve import STRATEGY_NAMES, approach2_cosines, direct_cosines
from ptqkd.montecarlo import (
    BLOCK_SIZE,
    RunConfig,
    block_rng,
    fmt,
    rows_to_csv,
    rows_to_gnuplot,
    simulate,
    sweep_alpha,
    sweep_eta,
)
from ptqkd.ptcore import ALPHA_OPT
from ptqkd.verify import format_table, run_checks

SEED_ENV = "PTQKD_SEED"

STRATEGY_FLAGS = {
    "none": (),
    "hermitian": (),
    "approach1": ("epsilon",),
    "approach2": ("alpha", "rho"),
    "approach3": ("alpha", "sigma", "omega"),
}


class UsageError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw, 0)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={raw!r} is not an integer")


def _add_strategy_params(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, help="PT alpha parameter (approach2, approach3)")
    p.add_argument("--rho", type=float, help="gate angle (approach2)")
    p.add_argument("--sigma", type=float, help="preparation angle (approach3, only pi/4)")
    p.add_argument("--omega", type=float, help="level splitting (approach3)")
    p.add_argument("--epsilon", type=float, help="distance of alpha from pi/2 (approach1)")


def _add_common(p: argparse.ArgumentParser, qubits: int) -> None:
    p.add_argument("--qubits", type=int, default=qubits)
    p.add_argument("--seed", type=lambda s: int(s, 0), default=None)
    p.add_argument("--workers", type=int, default=1, help="thread count; never changes results")
    p.add_argument("--resend", choices=("invert", "reencode"), default="invert")


def _strategy_params(args, strategy: str, allowed=None) -> dict:
    allowed = STRATEGY_FLAGS[strategy] if allowed is None else allowed
    given = {k: getattr(args, k) for k in ("alpha", "rho", "sigma", "omega", "epsilon") if getattr(args, k, None) is not None}
    extra = sorted(set(given) - set(allowed))
    if extra:
        flags = ", ".join(f"--{k}" for k in extra)
        raise UsageError(f"{flags} not valid with --strategy {strategy}")
    return given


def _resolved_params(strategy: str, params: dict) -> dict:
    """Fill strategy defaults so the report echo is complete."""
    defaults = {
        "approach1": {"epsilon": 1e-3},
        "approach2": {"alpha": math.pi / 4, "rho": 3 * math.pi / 4},
        "approach3": {"alpha": ALPHA_OPT, "sigma": math.pi / 4, "omega": 1.0},
    }
    return {**defaults.get(strategy, {}), **params}


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ptqkd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the algebraic self-checks")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=lambda s: int(s, 0), default=2024)

    p = sub.add_parser("run", help="simulate one configuration")
    p.add_argument("--strategy", choices=STRATEGY_NAMES, default="hermitian")
    _add_strategy_params(p)
    _add_common(p, 10**6)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--null", choices=("wrong", "loss"), default="wrong")
    p.add_argument("--fallback", choices=("none", "coin"), default="none")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out")
    p.add_argument("--transcript", metavar="PATH",
                   help=f"also write the transcript and sifted keys as JSON (qubits <= {BLOCK_SIZE})")

    p = sub.add_parser("sweep-alpha", help="approach-3 accuracy against alpha")
    p.add_argument("--from", dest="start", type=float, default=0.3)
    p.add_argument("--to", dest="stop", type=float, default=1.5)
    p.add_argument("--steps", type=int, default=60, help="number of grid points")
    p.add_argument("--sigma", type=float)
    p.add_argument("--omega", type=float)
    _add_common(p, 10**5)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--null", choices=("wrong", "loss"), default="wrong")
    p.add_argument("--fallback", choices=("none", "coin"), default="none")
    p.add_argument("--no-sample", action="store_true", help="exact values only")
    p.add_argument("--no-boundary", action="store_true", help="do not insert the existence boundary")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")
    p.add_argument("--gnuplot", metavar="PATH", help="also write a gnuplot-ready data file")

    p = sub.add_parser("sweep-eta", help="accuracy against discriminator efficiency")
    p.add_argument("--strategy", choices=STRATEGY_NAMES[1:], default="approach2")
    _add_strategy_params(p)
    p.add_argument("--from", dest="start", type=float, default=0.8)
    p.add_argument("--to", dest="stop", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=21, help="number of grid points")
    _add_common(p, 10**5)
    p.add_argument("--no-sample", action="store_true", help="exact values only")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")
    p.add_argument("--gnuplot", metavar="PATH", help="also write a gnuplot-ready data file")

    p = sub.add_parser("angles", help="CPT cosines after the approach-2 gate, two ways")
    p.add_argument("--alpha", type=float, default=math.pi / 4)
    p.add_argument("--rho", type=float, default=3 * math.pi / 4)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def cmd_verify(args) -> int:
    results = run_checks(args.samples, args.seed)
    print(format_table(results))
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


def _stats_csv(stats) -> str:
    d = stats.to_dict()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(d.keys())
    w.writerow(fmt(v) if not isinstance(v, int) or isinstance(v, bool) else str(v) for v in d.values())
    return buf.getvalue()


def cmd_run(args) -> int:
    params = _resolved_params(args.strategy, _strategy_params(args, args.strategy))
    seed = args.seed if args.seed is not None else _default_seed()
    cfg = RunConfig(args.qubits, args.strategy, params, args.eta, args.null, args.fallback,
                    args.resend, seed, args.workers)
    if args.transcript and args.qubits > BLOCK_SIZE:
        raise UsageError(f"--transcript needs --qubits <= {BLOCK_SIZE}")
    stats = simulate(cfg)
    if args.format == "json":
        _emit(report.dumps(report.run_report(cfg, stats)), args.out)
    else:
        _emit(_stats_csv(stats), args.out)
    if args.transcript:
        # a single block reproduces exactly the qubits counted above
        t = run_protocol(args.qubits, cfg.build_strategy(), block_rng(seed, 0))
        doc = {"config": cfg.echo(), "transcript": t.to_dict(), "sift": sift(t).to_dict()}
        with open(args.transcript, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)
    return 0


def cmd_sweep_alpha(args) -> int:
    params = _resolved_params("approach3", {k: getattr(args, k) for k in ("sigma", "omega") if getattr(args, k) is not None})
    params.pop("alpha")
    seed = args.seed if args.seed is not None else _default_seed()
    cfg = RunConfig(args.qubits, "approach3", params, args.eta, args.null, args.fallback,
                    args.resend, seed, args.workers)
    rows = sweep_alpha(args.start, args.stop, args.steps, cfg,
                       sample=not args.no_sample, include_boundary=not args.no_boundary)
    if not any(r.feasible for r in rows):
        print("warning: no feasible alpha in the grid", file=sys.stderr)
    grid = {"from": args.start, "to": args.stop, "steps": args.steps,
            "sample": not args.no_sample, "boundary": not args.no_boundary}
    if args.format == "csv":
        _emit(rows_to_csv(rows, "alpha"), args.out)
    else:
        _emit(report.dumps(report.alpha_sweep_report(cfg, grid, rows)), args.out)
    if args.gnuplot:
        comments = [f"approach3 accuracy vs alpha; seed={seed} qubits={args.qubits}",
                    f"alpha_opt={ALPHA_OPT:.9g}"]
        with open(args.gnuplot, "w", encoding="utf-8") as fh:
            fh.write(rows_to_gnuplot(rows, "alpha", comments))
    return 0


def cmd_sweep_eta(args) -> int:
    params = _resolved_params(args.strategy, _strategy_params(args, args.strategy))
    seed = args.seed if args.seed is not None else _default_seed()
    cfg = RunConfig(args.qubits, args.strategy, params, 1.0, "wrong", "none",
                    args.resend, seed, args.workers)
    sweep = sweep_eta(args.start, args.stop, args.steps, cfg, sample=not args.no_sample)
    grid = {"from": args.start, "to": args.stop, "steps": args.steps, "sample": not args.no_sample}
    if args.format == "csv":
        _emit(rows_to_csv(sweep.rows, "eta"), args.out)
    else:
        _emit(report.dumps(report.eta_sweep_report(cfg, grid, sweep)), args.out)
    line = "eta*=none" if sweep.threshold_exact is None else f"eta*={sweep.threshold_exact:.3f}"
    if sweep.threshold_sampled is not None:
        line += f" (sampled {sweep.threshold_sampled:.3f})"
    print(line, file=sys.stderr)
    if args.gnuplot:
        comments = [f"{args.strategy} accuracy vs eta; seed={seed} qubits={args.qubits}", line]
        with open(args.gnuplot, "w", encoding="utf-8") as fh:
            fh.write(rows_to_gnuplot(sweep.rows, "eta", comments))
    return 0


def angle_rows(alpha: float, rho: float) -> list[dict]:
    closed = approach2_cosines(alpha, rho)
    direct = direct_cosines(alpha, rho)
    return [
        {
            "pair": f"{x}:{y}",
            "closed_form": closed[(x, y)],
            "direct_re": direct[(x, y)].real,
            "direct_im": direct[(x, y)].imag,
            "abs_diff": abs(abs(closed[(x, y)]) - abs(direct[(x, y)])),
        }
        for (x, y) in closed
    ]


def cmd_angles(args) -> int:
    rows = angle_rows(args.alpha, args.rho)
    if args.format == "json":
        doc = {"command": "angles", "config": {"alpha": args.alpha, "rho": args.rho}, "results": rows}
        sys.stdout.write(json.dumps(doc, indent=2) + "\n")
        return 0
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(rows[0].keys())
    for r in rows:
        w.writerow([r["pair"]] + [fmt(r[k]) for k in ("closed_form", "direct_re", "direct_im", "abs_diff")])
    sys.stdout.write(buf.getvalue())
    return 0


COMMANDS = {
    "verify": cmd_verify,
    "run": cmd_run,
    "sweep-alpha": cmd_sweep_alpha,
    "sweep-eta": cmd_sweep_eta,
    "angles": cmd_angles,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, DomainError) as exc:
        parser.print_usage(sys.stderr)
        print(f"ptqkd {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
