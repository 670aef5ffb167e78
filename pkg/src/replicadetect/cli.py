"""Command-line front end: fit, score, simulate and bench subcommands."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace

from .corr import load_csv, sample_correlation
from .errors import NoParallelPairs, ReplicaDetectError
from .pipeline import FitConfig, fit
from .score import score_table
from .simgen import METRIC_NAMES, SimScenario, run_replicates

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NO_PAIRS = 2


def _parse_q(text: str) -> float:
    return float("inf") if text.strip().lower() in ("inf", "infinity") else float(text)


def _parse_delta(text: str):
    return "cv" if text.strip().lower() == "cv" else float(text)


def _parse_mu(text: str):
    t = text.strip().lower()
    if t in ("cv", "cv-direct-k"):
        return "cv-direct-k"
    if t == "cv-mu-grid":
        return "cv-mu-grid"
    return float(text)


def _workers(args) -> int:
    if getattr(args, "threads", None):
        return args.threads
    env = os.environ.get("REPLICADETECT_THREADS")
    return int(env) if env else 1


def _dump_json(obj, path):
    text = json.dumps(obj, sort_keys=True, indent=2)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _load_scenario(path) -> dict:
    if path.endswith(".json"):
        with open(path) as fh:
            return json.load(fh)
    try:
        import tomllib  # py311+
    except ImportError:
        import tomli as tomllib
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def cmd_fit(args) -> int:
    config = FitConfig(q=args.q, delta=args.delta, mu=args.mu,
                       prescreen=args.prescreen, split_seed=args.seed,
                       folds=args.folds)
    dm = load_csv(args.input)
    result = fit(dm, config)
    payload = result.estimate.to_json_dict()
    payload["diagnostics"] = result.diagnostics
    payload["column_names"] = list(dm.column_names) if dm.column_names else None
    _dump_json(payload, args.output)
    return EXIT_OK


def cmd_score(args) -> int:
    dm = load_csv(args.input)
    corr = sample_correlation(dm)
    table = score_table(corr.r_hat, args.q)
    for value, i, j in table.smallest(args.top):
        ni = dm.column_names[i] if dm.column_names else str(i)
        nj = dm.column_names[j] if dm.column_names else str(j)
        print(f"{value:.6g}\t{i}\t{j}\t{ni}\t{nj}")
    if args.output:
        with open(args.output, "w") as fh:
            json.dump(table.to_json_dict(), fh, sort_keys=True)
    return EXIT_OK


def _scenario_from_dict(obj: dict) -> SimScenario:
    fields = {k: obj[k] for k in ("n", "p", "k", "alpha", "rho_z", "eta",
                                  "noise_lo", "noise_hi", "n0", "seed") if k in obj}
    if "sign_patterns" in obj and obj["sign_patterns"] is not None:
        fields["sign_patterns"] = tuple(tuple(t) for t in obj["sign_patterns"])
    return SimScenario(**fields)


def _fit_config_from_dict(obj: dict, seed) -> FitConfig:
    pipe = obj.get("pipeline", {})
    return FitConfig(
        q=_parse_q(str(pipe.get("q", 2.0))),
        delta=_parse_delta(str(pipe.get("delta", "cv"))),
        mu=_parse_mu(str(pipe.get("mu", "cv-direct-k"))),
        prescreen=bool(pipe.get("prescreen", False)),
        split_seed=seed,
    )


def _write_replicate_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["replicate", "seed", "error", *METRIC_NAMES])
        for row in rows:
            writer.writerow([row["replicate"], row["seed"], row["error"] or "",
                             *[row.get(m, "") for m in METRIC_NAMES]])


def cmd_simulate(args) -> int:
    obj = _load_scenario(args.scenario)
    scenario = _scenario_from_dict(obj)
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    reps = args.reps or int(obj.get("reps", 50))
    config = _fit_config_from_dict(obj, scenario.seed)
    out = run_replicates(scenario, reps, config, workers=_workers(args))
    rows = out.pop("replicates")
    if args.replicate_csv:
        _write_replicate_csv(rows, args.replicate_csv)
    _dump_json(out, args.output)
    return EXIT_OK


def cmd_bench(args) -> int:
    obj = _load_scenario(args.scenario) if args.scenario else {}
    base = _scenario_from_dict(obj)
    if args.seed is not None:
        base = replace(base, seed=args.seed)
    values = [float(v) for v in args.values.split(",")]
    out_rows = []
    for value in values:
        cast = int(value) if args.vary in ("n", "p", "k", "n0") else value
        scenario = replace(base, **{args.vary: cast})
        config = _fit_config_from_dict(obj, scenario.seed)
        result = run_replicates(scenario, args.reps, config, workers=_workers(args))
        for metric, stats in result["metrics"].items():
            out_rows.append([args.vary, cast, metric, stats["mean"], stats["sd"],
                             stats["count"]])
    writer = csv.writer(open(args.output, "w", newline="") if args.output else sys.stdout)
    writer.writerow(["parameter", "value", "metric", "mean", "sd", "count"])
    writer.writerows(out_rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="replicadetect",
        description="Detect groups of approximately replicate features and fit "
                    "the underlying factor loadings.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit the model to a CSV data matrix")
    p_fit.add_argument("--input", required=True)
    p_fit.add_argument("--q", type=_parse_q, default=2.0)
    p_fit.add_argument("--delta", type=_parse_delta, default="cv",
                       help="score threshold, or 'cv'")
    p_fit.add_argument("--mu", type=_parse_mu, default="cv-direct-k",
                       help="rank threshold, or 'cv-direct-k' / 'cv-mu-grid'")
    p_fit.add_argument("--prescreen", action="store_true")
    p_fit.add_argument("--seed", type=int, default=0)
    p_fit.add_argument("--folds", type=int, default=2, choices=(2, 10))
    p_fit.add_argument("--output", default=None)
    p_fit.set_defaults(func=cmd_fit)

    p_score = sub.add_parser("score", help="print the smallest pairwise scores")
    p_score.add_argument("--input", required=True)
    p_score.add_argument("--q", type=_parse_q, default=2.0)
    p_score.add_argument("--top", type=int, default=10)
    p_score.add_argument("--output", default=None)
    p_score.set_defaults(func=cmd_score)

    p_sim = sub.add_parser("simulate", help="run replicated synthetic benchmarks")
    p_sim.add_argument("--scenario", required=True, help="TOML or JSON scenario file")
    p_sim.add_argument("--reps", type=int, default=None)
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--threads", type=int, default=None)
    p_sim.add_argument("--replicate-csv", default=None)
    p_sim.add_argument("--output", default=None)
    p_sim.set_defaults(func=cmd_simulate)

    p_bench = sub.add_parser("bench", help="sweep one scenario parameter")
    p_bench.add_argument("--vary", required=True,
                         choices=("n", "p", "k", "alpha", "rho_z", "eta", "n0"))
    p_bench.add_argument("--values", required=True, help="comma-separated values")
    p_bench.add_argument("--scenario", default=None)
    p_bench.add_argument("--reps", type=int, default=20)
    p_bench.add_argument("--seed", type=int, default=None)
    p_bench.add_argument("--threads", type=int, default=None)
    p_bench.add_argument("--output", default=None)
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NoParallelPairs as exc:
        print(f"NoParallelPairs: {exc}", file=sys.stderr)
        return EXIT_NO_PAIRS
    except ReplicaDetectError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
