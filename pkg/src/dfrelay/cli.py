"""Command-line entry point: run a configured sweep and write CSVs."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from typing import Optional, Sequence

from . import montecarlo as mc
from .config import (ConfigError, ExperimentConfig, apply_override,
                     config_from_dict, config_to_dict, default_config,
                     load_config)
from .model import build_statistics
from .numerics import NumericError
from .strategies import InfeasibleError

RESULT_HEADER = ("strategy", "rho_target", "rho_empirical", "rho_ci95",
                 "mean_total_power_w", "power_ci95_w", "mean_source_power_w",
                 "mean_relay_power_w", "fallback_rate", "trials", "master_seed")
CURVE_HEADER = ("strategy", "rho_target", "rho_empirical", "rho_ci95",
                "mean_total_power_w", "power_ci95_w")
TRIAL_HEADER = ("strategy", "rho_target", "trial", "source_power_w",
                "relay_power_w", "forwarding_count", "destination_snr",
                "outage", "status")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _cell(v) -> str:
    # repr keeps the shortest round-tripping digits, so reruns are byte-equal
    if isinstance(v, float):
        return repr(v)
    return str(v)


def result_row(r: mc.SweepResult) -> tuple:
    return (r.strategy, r.rho_target, r.outage_rate, r.outage_ci,
            r.mean_total_power, r.power_ci, r.mean_source_power,
            r.mean_relay_power, r.fallback_rate, r.trials, r.master_seed)


def _write(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def write_results(results: Sequence[mc.SweepResult], path) -> None:
    _write(path, RESULT_HEADER, (result_row(r) for r in results))


def emit_curve_data(results: Sequence[mc.SweepResult], path) -> None:
    """Long-format curve file sorted by (strategy, rho_target)."""
    if not results:
        raise ValueError("no results to emit")
    ordered = sorted(results, key=lambda r: (r.strategy, r.rho_target))
    _write(path, CURVE_HEADER, (result_row(r)[:len(CURVE_HEADER)]
                                for r in ordered))


def write_trials(results: Sequence[mc.SweepResult], path) -> None:
    def rows():
        for r in results:
            d = r.trial_data
            for i in range(r.trials):
                yield (r.strategy, r.rho_target, i, float(d["source_charged"][i]),
                       float(d["relay_charged"][i]), int(d["count"][i]),
                       float(d["snr_d"][i]), int(bool(d["outage"][i])),
                       mc.STATUS[int(d["status"][i])])
    _write(path, TRIAL_HEADER, rows())


def savings_vs_rrs(results: Sequence[mc.SweepResult]) -> dict:
    """1 - P(strategy)/P(rrs) per (strategy, rho), where an RRS row exists."""
    base = {r.rho_target: r.mean_total_power for r in results
            if r.strategy == "rrs"}
    return {(r.strategy, r.rho_target): 1.0 - r.mean_total_power / base[r.rho_target]
            for r in results if r.strategy != "rrs" and r.rho_target in base}


def summary_lines(results: Sequence[mc.SweepResult]) -> list[str]:
    sav = savings_vs_rrs(results)
    out = []
    for rho in sorted({r.rho_target for r in results}):
        parts = [f"{s} {100 * v:.1f}%" for (s, rr), v in sav.items() if rr == rho]
        if parts:
            out.append(f"savings vs rrs at rho_target={rho}: " + ", ".join(parts))
    return out


def simulate(config: ExperimentConfig) -> list[mc.SweepResult]:
    """All strategies share each trial's channel draw."""
    run = config.run
    scenario = config.scenario.build()
    stats = build_statistics(scenario)
    psm = None
    if "psm" in run.strategies:
        fixed = (None if run.psm is None
                 else (run.psm.source_power, run.psm.threshold))
        psm = mc.resolve_psm_params(scenario, stats, run.rho_targets, fixed)
    box = None if run.destination_box is None else run.destination_box.build()
    raw = mc.simulate_trials(run.strategies, scenario, run.rho_targets,
                             run.trials, run.master_seed, psm_params=psm,
                             dest_box=box, workers=run.workers, stats=stats)
    keep = config.output.per_trial_csv is not None
    return [mc.aggregate(s, rho, raw[(s, rho)], scenario, run.master_seed,
                         run.ocpa_p_max, keep)
            for s in run.strategies for rho in run.rho_targets]


def run_experiment(config: ExperimentConfig, log=print) -> list[mc.SweepResult]:
    results = simulate(config)
    out = config.output
    write_results(results, out.csv)
    if out.curve_csv:
        emit_curve_data(results, out.curve_csv)
    if out.per_trial_csv:
        write_trials(results, out.per_trial_csv)
    for line in summary_lines(results):
        log(line)
    return results


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dfrelay",
        description="Monte Carlo sweep of relay power-allocation strategies.")
    p.add_argument("--config", help="TOML experiment file (defaults otherwise)")
    p.add_argument("--override", action="append", default=[],
                   metavar="KEY=VALUE",
                   help="dot-path override, e.g. run.rho_targets=[0.05]")
    p.add_argument("--trials", type=int, help="shortcut for run.trials")
    p.add_argument("--seed", type=int, help="shortcut for run.master_seed")
    p.add_argument("--out", help="shortcut for output.csv")
    return p


def resolve_config(args) -> ExperimentConfig:
    overrides = list(args.override)
    if args.trials is not None:
        overrides.append(f"run.trials={args.trials}")
    if args.seed is not None:
        overrides.append(f"run.master_seed={args.seed}")
    if args.out is not None:
        overrides.append("output.csv=" + json.dumps(args.out))
    if args.config:
        return load_config(args.config, overrides)
    raw = config_to_dict(default_config())
    for item in overrides:
        apply_override(raw, item)
    return config_from_dict(raw)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    try:
        run_experiment(config)
    except (OSError, InfeasibleError, NumericError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
