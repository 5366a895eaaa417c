"""``qkdsim`` command line: run a seeded ensemble and emit plot-ready link budgets.

Exit status: 0 on success, 2 on configuration errors, 3 on I/O errors or, with
``--strict``, when any trial failed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import replace
from typing import Optional, Sequence

from . import __version__
from .config import ConfigError, ScenarioConfig, load_config, scenario_to_dict
from .core import SEED_MASK
from .pipeline import STATISTICS, EnsembleSummary, run_ensemble

SCHEMA = "qkdsim.ensemble"
SCHEMA_VERSION = 1
SEED_ENV = "QKDSIM_SEED"

CSV_COLUMNS = (
    "trial_index",
    "seed",
    "s_value",
    "raw_qber",
    "reconciled_corrected_qber",
    "reconciled_uncorrected_qber",
    "raw_key_rate",
    "reconciled_key_rate",
    "secret_key_rate",
    "elapsed_time",
    "eve_detected",
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value <= SEED_MASK:
        raise argparse.ArgumentTypeError(f"seed must be in [0, 2**64), got {text}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return value


def _probability(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a probability in [0, 1], got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qkdsim",
        description="Monte Carlo E91 link-budget ensembles (S value, QBERs, key rates).",
    )
    p.add_argument("--config", required=True,
                   help="scenario JSON file, or a bundled preset name (paper-noneve, paper-eve30)")
    p.add_argument("--seed", type=_u64, help=f"base seed (default: the file's seed, else ${SEED_ENV}, else 0)")
    p.add_argument("--trials", type=_positive_int)
    p.add_argument("--jobs", type=_positive_int, default=1, help="worker processes")
    p.add_argument("--eve-prob", type=_probability)
    p.add_argument("--key-length", type=_positive_int, help="desired secret key length in bits")
    p.add_argument("--output", help="output file (default: the file's output_path, else stdout)")
    p.add_argument("--format", choices=("csv", "json"), dest="output_format")
    p.add_argument("--strict", action="store_true", help="exit 3 if any trial fails")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def apply_overrides(scenario: ScenarioConfig, args: argparse.Namespace,
                    environ: Optional[dict] = None) -> ScenarioConfig:
    """Flags beat the file.  ``$QKDSIM_SEED`` is used only when ``--seed`` is absent
    and the file does not set a seed."""
    environ = os.environ if environ is None else environ
    run = scenario.run
    if args.seed is not None:
        run = replace(run, seed=args.seed)
    elif not scenario.seed_in_file and environ.get(SEED_ENV):
        try:
            run = replace(run, seed=_u64(environ[SEED_ENV]))
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ConfigError(f"invalid value {environ[SEED_ENV]!r}", SEED_ENV) from exc
    if args.eve_prob is not None:
        run = replace(run, source=replace(run.source, eve_prob=args.eve_prob))
    if args.key_length is not None:
        run = replace(run, desired_key_length=args.key_length)
    return replace(
        scenario,
        run=run,
        trials=args.trials if args.trials is not None else scenario.trials,
        output_path=args.output if args.output is not None else scenario.output_path,
        output_format=args.output_format or scenario.output_format,
    )


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def render_csv(summary: EnsembleSummary) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for index, t in zip(summary.trial_indices, summary.trials):
        row = {"trial_index": index, "seed": t.trial_seed, **{k: getattr(t, k) for k in CSV_COLUMNS[2:]}}
        w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    # summary block: comment lines, skipped by e.g. pandas.read_csv(comment="#")
    w.writerow(["# summary", "statistic", "mean", "std", "min", "max"])
    for name in STATISTICS:
        s = summary.stats[name]
        w.writerow(["# summary", name, _fmt(s.mean), _fmt(s.std), _fmt(s.min), _fmt(s.max)])
    a = summary.abs_s
    w.writerow(["# summary", "abs_s_value", _fmt(a.mean), _fmt(a.std), _fmt(a.min), _fmt(a.max)])
    w.writerow(["# summary", "eve_detection_rate", _fmt(summary.eve_detection_rate)])
    w.writerow(["# summary", "completed", summary.n_completed])
    w.writerow(["# summary", "failed", len(summary.failures)])
    for f in summary.failures:
        w.writerow(["# failed", f.trial_index, f.seed, f.stage, f.message])
    return buf.getvalue()


def render_json(summary: EnsembleSummary, scenario: ScenarioConfig) -> str:
    envelope = {
        "schema": SCHEMA,
        "schema_version": SCHEMA_VERSION,
        "scenario": scenario_to_dict(scenario),
        **summary.to_dict(),
    }
    return json.dumps(envelope, indent=2) + "\n"


def human_summary(scenario: ScenarioConfig, summary: EnsembleSummary) -> str:
    if not summary.trials:
        return f"{scenario.scenario_name}: 0/{scenario.trials} trials completed"
    st = summary.stats
    return (
        f"{scenario.scenario_name}: {summary.n_completed}/{scenario.trials} trials, "
        f"mean |S| = {summary.abs_s.mean:.3f}, raw QBER = {st['raw_qber'].mean:.4f}, "
        f"secret rate = {st['secret_key_rate'].mean:.1f} bit/s, "
        f"Eve detected in {summary.eve_detection_rate:.0%}"
    )


def run_command(argv: Optional[Sequence[str]] = None, environ: Optional[dict] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenario = load_config(args.config)
        scenario = apply_overrides(scenario, args, environ)
    except ConfigError as exc:
        print(f"qkdsim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    summary = run_ensemble(scenario.run, scenario.trials, jobs=args.jobs)
    if scenario.output_format == "json":
        text = render_json(summary, scenario)
    else:
        text = render_csv(summary)

    if scenario.output_path:
        try:
            with open(scenario.output_path, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"qkdsim: cannot write {scenario.output_path}: {exc.strerror}", file=sys.stderr)
            return EXIT_RUNTIME
        print(human_summary(scenario, summary))
    else:
        sys.stdout.write(text)
        print(human_summary(scenario, summary), file=sys.stderr)

    for f in summary.failures:
        print(f"qkdsim: trial {f.trial_index} (seed {f.seed}) failed in {f.stage}: {f.message}", file=sys.stderr)
    if args.strict and summary.failures:
        return EXIT_RUNTIME
    return EXIT_OK


def main() -> None:
    sys.exit(run_command())
