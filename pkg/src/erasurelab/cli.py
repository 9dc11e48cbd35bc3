"""Command-line entry point: ``erasurelab {rates,simulate,verify,bounds,martingale}``.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import bounds, infotheory, protocols, resources
from .errors import ErasureLabError, InvalidConfig, SizeCap, TooFewTraces, VerificationFailed

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _prob(text: str) -> float:
    try:
        p = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= p <= 1.0:
        raise argparse.ArgumentTypeError(f"probability must lie in [0, 1], got {p}")
    return p


def _positive_int(text: str) -> int:
    try:
        v = int(float(text)) if "e" in text.lower() else int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {v}")
    return v


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def threads() -> int:
    """Worker cap from ERASURELAB_THREADS (default 1)."""
    raw = os.environ.get("ERASURELAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8", newline="\n")


def _table(rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rows, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (f"{v:.12g}" if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


# --------------------------------------------------------------------------- #
# Subcommands                                                                 #
# --------------------------------------------------------------------------- #


def closed_form_rate(p: float, strategy: str) -> float:
    s = protocols.choose_strategy(strategy, p)
    if strategy == protocols.AUTO:
        return bounds.new_lower_bound(p)
    if s == protocols.SUB2:
        return (1.0 - p) ** 2
    return (1.0 - p) / 2.0 if p <= 0.5 else (1.0 - p) / (1.0 + 2.0 * p)


def cmd_rates(args) -> int:
    grid = args.p if args.p else bounds.default_grid(args.points)
    if args.mc_messages and args.seed is None:
        raise UsageError("--mc-messages requires an explicit --seed")
    rows = []
    for p in grid:
        row = {
            "p": p,
            "strategy": args.strategy,
            "resolved": protocols.choose_strategy(args.strategy, p),
            "closed_form": closed_form_rate(p, args.strategy),
            "net_rate": resources.protocol_rate(p, args.strategy),
        }
        if args.mc_messages:
            if p >= 1.0:
                row["empirical_rate"] = 0.0
            else:
                stats = protocols.run_protocol(p, args.mc_messages, args.strategy, seed=args.seed)
                row["empirical_rate"] = stats.empirical_rate
        rows.append(row)
    _emit(_table(rows, args.format), args.out)
    return EXIT_OK


def _simulate_one(job):
    p, messages, strategy, seed, run_index = job
    return protocols.run_protocol(p, messages, strategy, seed=seed, run_index=run_index)


def cmd_simulate(args) -> int:
    jobs = [(args.p, args.messages, args.strategy, args.seed, i) for i in range(args.runs)]
    workers = min(threads(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            stats = list(pool.map(_simulate_one, jobs))
    else:
        stats = [_simulate_one(j) for j in jobs]
    if args.format == "csv":
        text = protocols.runstats_csv(stats)
    elif len(stats) == 1:
        text = stats[0].to_json()
    else:
        text = json.dumps([s.summary() for s in stats], indent=2, sort_keys=True) + "\n"
    _emit(text, args.out)
    return EXIT_OK if all(s.all_exact for s in stats) else EXIT_FAIL


def _theorem1_suite(samples: int, seed: int) -> dict:
    audits, skipped = [], 0
    for strategy in (protocols.SUB1, protocols.SUB2):
        for p in (0.0, 0.25, 0.5):
            for run in range(samples):
                try:
                    trace = infotheory.audit_run(strategy, p, 1, seed, run_index=run)
                except SizeCap:
                    skipped += 1
                    continue
                audits.append(infotheory.theorem1_audit(trace, 1))
    report = infotheory.theorem1_report(audits)
    report["theorem1"]["skipped_size_cap"] = skipped
    return report


SUITES = {
    "lemma1": lambda n, seed: infotheory.lemma1_sweep(n, seed),
    "fannes": lambda n, seed: infotheory.fannes_sweep(n, seed),
    "distance": lambda n, seed: infotheory.distance_sweep(n, seed),
    "theorem1": _theorem1_suite,
}


def _violations(suite: str, report: dict) -> int:
    if suite == "lemma1":
        return infotheory.sweep_violations(report)
    return sum(v["violations"] for v in report.values())


def cmd_verify(args) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    report, bad = {}, 0
    for name in names:
        part = SUITES[name](args.samples, args.seed)
        bad += _violations(name, part)
        report[name] = part
    report["seed"] = args.seed
    report["samples"] = args.samples
    report["total_violations"] = bad
    _emit(infotheory.dumps_report(report), args.out)
    return EXIT_OK if bad == 0 else EXIT_FAIL


def cmd_bounds(args) -> int:
    points = bounds.figure1_data(bounds.default_grid(args.points))
    if args.format == "json":
        text = json.dumps([vars(pt) for pt in points], indent=2) + "\n"
    else:
        text = bounds.figure_csv(points)
    _emit(text, args.out)
    return EXIT_OK


def cmd_martingale(args) -> int:
    if args.trials < bounds.MIN_TRACES:
        raise TooFewTraces(f"--trials must be at least {bounds.MIN_TRACES}")
    rep = bounds.azuma_experiment(args.p, args.n, args.k, args.trials, args.seed, info=args.info)
    d = rep.to_dict()
    d["seed"] = args.seed
    d["info"] = args.info
    _emit(json.dumps(d, indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK if rep.pass_ else EXIT_FAIL


# --------------------------------------------------------------------------- #
# Parser                                                                      #
# --------------------------------------------------------------------------- #


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="erasurelab",
        description="Erasure-channel protocols with back classical communication.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("rates", help="closed-form (and optionally Monte Carlo) protocol rates")
    r.add_argument("--p", type=_prob, nargs="+", help="erasure probabilities (default: grid)")
    r.add_argument("--points", type=_positive_int, default=11, help="grid size when --p is absent")
    r.add_argument("--strategy", choices=protocols.STRATEGIES, default="auto")
    r.add_argument("--mc-messages", type=_positive_int, default=0,
                   help="also simulate this many messages per p")
    r.add_argument("--seed", type=_seed)
    r.add_argument("--format", choices=("csv", "json"), default="csv")
    r.add_argument("--out")
    r.set_defaults(func=cmd_rates)

    s = sub.add_parser("simulate", help="run a protocol and report RunStats")
    s.add_argument("--p", type=_prob, required=True)
    s.add_argument("--messages", type=_positive_int, required=True)
    s.add_argument("--strategy", choices=protocols.STRATEGIES, default="auto")
    s.add_argument("--seed", type=_seed, required=True)
    s.add_argument("--runs", type=_positive_int, default=1, help="independent runs (RNG streams)")
    s.add_argument("--format", choices=("csv", "json"), default="json")
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", help="random sweeps of the entropy inequalities")
    v.add_argument("--suite", choices=(*SUITES, "all"), required=True)
    v.add_argument("--samples", type=_positive_int, default=1000)
    v.add_argument("--seed", type=_seed, required=True)
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bounds", help="emit the capacity bound curves")
    b.add_argument("--points", type=_positive_int, default=1001)
    b.add_argument("--format", choices=("csv", "json"), default="csv")
    b.add_argument("--out")
    b.set_defaults(func=cmd_bounds)

    m = sub.add_parser("martingale", help="Azuma tail experiment")
    m.add_argument("--p", type=_prob, required=True)
    m.add_argument("--n", type=_positive_int, required=True)
    m.add_argument("--k", type=float, required=True)
    m.add_argument("--trials", type=_positive_int, default=10_000)
    m.add_argument("--info", type=float, default=2.0,
                   help="constant mutual information per transmission, in [0, 2]")
    m.add_argument("--seed", type=_seed, required=True)
    m.add_argument("--out")
    m.set_defaults(func=cmd_martingale)
    return ap


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, TooFewTraces, InvalidConfig, ValueError) as exc:
        print(f"erasurelab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except VerificationFailed as exc:
        print(f"erasurelab: verification failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ErasureLabError as exc:
        print(f"erasurelab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except OSError as exc:
        print(f"erasurelab: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
