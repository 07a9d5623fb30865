"""Command-line interface.

Subcommands:

    validate   parse a scenario and run every validator
    truth      closed-form estimand values for a scenario's model
    generate   randomize a cohort, draw outcomes, write the dataset CSV
    estimate   fit a dataset CSV and report all estimand estimates
    simulate   replicate the full pipeline and summarize

Exit codes: 0 success, 1 configuration/validation error, 2 runtime or
data error.  Every subcommand is deterministic given its config and seed;
rerunning writes byte-identical files.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import Optional

from .config import Scenario, load_scenario
from .design import (expected_cell_counts, randomize_cohort, validate_design,
                     write_dataset_csv)
from .errors import (ConfigurationError, DataError, EstimationError,
                     FactiveError, IdentifiabilityError, StateError)
from .estimands import ESTIMANDS
from .inference import AnalysisConfig, estimate_from_csv
from .montecarlo import run_replicates, write_replicates_csv
from .outcomes import generate_outcomes, true_estimands


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="factive",
        description="Simulate and analyze augmented randomized trials.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default=None, fmt=True):
        p.add_argument("--config", metavar="PATH", required=True,
                       help="scenario TOML file")
        p.add_argument("--out", metavar="DIR", default=out_default,
                       help="output directory (default: print to stdout)")
        if fmt:
            p.add_argument("--format", choices=("json", "text", "csv"),
                           default=None, help="output format")

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("--config", metavar="PATH", required=True)

    p = sub.add_parser("truth", help="closed-form estimand values")
    common(p)

    p = sub.add_parser("generate", help="write one simulated dataset CSV")
    p.add_argument("--config", metavar="PATH", required=True)
    p.add_argument("--out", metavar="DIR", default=".",
                   help="output directory (default: current directory)")
    p.add_argument("--seed", type=int, metavar="N",
                   help="override the scenario seed")

    p = sub.add_parser("estimate", help="estimate from a dataset CSV")
    p.add_argument("data", metavar="DATA.csv", help="dataset file")
    p.add_argument("--config", metavar="PATH",
                   help="scenario TOML supplying the [analysis] section")
    p.add_argument("--out", metavar="DIR", default=None)
    p.add_argument("--format", choices=("json", "text", "csv"), default=None)

    p = sub.add_parser("simulate", help="replicate and summarize")
    common(p)
    p.add_argument("--seed", type=int, metavar="N",
                   help="override the scenario seed")
    p.add_argument("--reps", type=int, metavar="N",
                   help="override the replicate count")
    p.add_argument("--jobs", type=int, metavar="N",
                   help="override the worker process count")
    return parser


def _apply_seed(scenario: Scenario, seed: Optional[int]) -> Scenario:
    if seed is None:
        return scenario
    design = dataclasses.replace(scenario.design, seed=seed)
    return dataclasses.replace(scenario, design=design)


def _resolve_out(args, scenario: Scenario):
    """Output directory and format, with CLI flags over config over defaults."""
    out = getattr(args, "out", None)
    if out is None:
        out = scenario.output_dir
    fmt = getattr(args, "format", None)
    if fmt is None:
        fmt = scenario.output_format
    return (Path(out) if out is not None else None), fmt


def _emit(text: str, out_dir: Optional[Path], filename: str) -> None:
    if out_dir is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / filename).write_text(text)


def cmd_validate(args) -> int:
    scenario = load_scenario(args.config)
    diags = list(validate_design(scenario.design))
    diags += scenario.model.validate()
    for d in diags:
        print(d)
    if any(d.severity == "error" for d in diags):
        return 1
    if not diags:
        print("ok")
    return 0


def _truth_text(values, weights) -> str:
    lines = [f"{'estimand':<14}{'value':>14}"]
    for name in ESTIMANDS:
        lines.append(f"{name:<14}{values[name]:>14.6g}")
    lines.append("")
    lines.append(f"weights: {weights.kind}")
    return "\n".join(lines) + "\n"


def cmd_truth(args) -> int:
    scenario = load_scenario(args.config)
    out_dir, fmt = _resolve_out(args, scenario)
    truth = true_estimands(scenario.model, scenario.analysis.weights,
                           expected_cell_counts(scenario.design))
    if fmt == "json":
        payload = {"weights_kind": truth.weights_used.kind,
                   "estimands": truth.as_dict()}
        _emit(json.dumps(payload, indent=2) + "\n", out_dir, "truth.json")
    elif fmt == "text":
        _emit(_truth_text(truth, truth.weights_used), out_dir, "truth.txt")
    else:
        lines = ["estimand,value"]
        lines += [f"{name},{format(truth[name], '.17g')}" for name in ESTIMANDS]
        _emit("\n".join(lines) + "\n", out_dir, "truth.csv")
    return 0


def cmd_generate(args) -> int:
    scenario = _apply_seed(load_scenario(args.config), args.seed)
    data = randomize_cohort(scenario.design)
    data = generate_outcomes(data, scenario.model)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "dataset.csv"
    write_dataset_csv(data, path)
    print(f"wrote {path} ({len(data)} rows)")
    return 0


def cmd_estimate(args) -> int:
    if args.config is not None:
        scenario = load_scenario(args.config)
        analysis = scenario.analysis
        out_dir, fmt = _resolve_out(args, scenario)
    else:
        analysis = AnalysisConfig()
        out_dir = Path(args.out) if args.out is not None else None
        fmt = args.format or "json"
    report = estimate_from_csv(args.data, analysis)
    if fmt == "json":
        _emit(report.to_json() + "\n", out_dir, "estimate.json")
    elif fmt == "text":
        _emit(report.to_text(), out_dir, "estimate.txt")
    else:
        _emit(report.to_csv(), out_dir, "estimate.csv")
    return 0


def cmd_simulate(args) -> int:
    scenario = _apply_seed(load_scenario(args.config), args.seed)
    out_dir, fmt = _resolve_out(args, scenario)
    n_reps = args.reps if args.reps is not None else scenario.n_reps
    n_jobs = args.jobs if args.jobs is not None else scenario.n_jobs
    keep = fmt == "csv"
    summary = run_replicates(scenario.design, scenario.model,
                             scenario.analysis, n_reps=n_reps, n_jobs=n_jobs,
                             keep_replicates=keep)
    if fmt == "json":
        _emit(summary.to_json() + "\n", out_dir, "summary.json")
    elif fmt == "text":
        _emit(summary.to_text(), out_dir, "summary.txt")
    else:
        if out_dir is None:
            raise ConfigurationError(
                "simulate --format csv needs --out (or output.directory) for "
                "replicates.csv")
        out_dir.mkdir(parents=True, exist_ok=True)
        write_replicates_csv(out_dir / "replicates.csv", summary)
        (out_dir / "summary.json").write_text(summary.to_json() + "\n")
    return 0


_COMMANDS = {
    "validate": cmd_validate,
    "truth": cmd_truth,
    "generate": cmd_generate,
    "estimate": cmd_estimate,
    "simulate": cmd_simulate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigurationError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (DataError, EstimationError, StateError, IdentifiabilityError,
            OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except FactiveError as err:  # pragma: no cover - safety net
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
