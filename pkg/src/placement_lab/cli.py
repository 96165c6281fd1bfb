"""Command-line batch driver: run experiments, tabulate limit laws, fit both.

Subcommands write plot-ready CSV artifacts into an output directory. Numeric
cells use shortest round-trip decimal formatting, so re-running a command
with the same spec and seeds reproduces every file byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from placement_lab.core import ConfigError, Mode, SimConfig
from placement_lab.meanfield import (
    TailVector,
    poc_invariant_tail,
    random_invariant_tail,
    scaled_limit_tail,
)
from placement_lab.policies import PolicyKind
from placement_lab.simulator import EventTrace, run
from placement_lab.stats import (
    EmpiricalDistribution,
    age_bin_edges,
    default_warmup_days,
    fit_report,
)

log = logging.getLogger("placement_lab")

_CONFIG_KEYS = tuple(f.name for f in dataclasses.fields(SimConfig))
_SPEC_ONLY_KEYS = ("runs", "seed_base", "outputs")

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


@dataclass
class ExperimentSpec:
    """A batch of simulation runs sharing one configuration.

    Run k executes with seed `seed_base + k`; artifacts go to `outputs`.
    """

    config: SimConfig
    runs: int = 1
    seed_base: int = 0
    outputs: str = "."

    def __post_init__(self):
        if (
            isinstance(self.runs, bool)
            or not isinstance(self.runs, int)
            or self.runs < 1
        ):
            raise ConfigError(f"runs must be an integer >= 1, got {self.runs!r}")
        if (
            isinstance(self.seed_base, bool)
            or not isinstance(self.seed_base, int)
            or not 0 <= self.seed_base < 2**64
        ):
            raise ConfigError(
                f"seed_base must be an integer in [0, 2**64), got {self.seed_base!r}"
            )
        if not isinstance(self.outputs, (str, os.PathLike)):
            raise ConfigError(f"outputs must be a path, got {self.outputs!r}")
        self.config.validate()

    def run_config(self, k: int) -> SimConfig:
        """Configuration of run k: the base config reseeded with seed_base + k."""
        return dataclasses.replace(self.config, seed=(self.seed_base + k) % 2**64)


def _spec_from_mapping(data: dict, source: str) -> ExperimentSpec:
    """Build a spec from flat snake_case keys, rejecting any unknown one."""
    for key in data:
        if key not in _CONFIG_KEYS and key not in _SPEC_ONLY_KEYS:
            raise ConfigError(f"unknown spec key {key!r} in {source}")
    config = SimConfig(**{k: v for k, v in data.items() if k in _CONFIG_KEYS})
    extras = {k: v for k, v in data.items() if k in _SPEC_ONLY_KEYS}
    return ExperimentSpec(config=config, **extras)


def load_spec(path: str | os.PathLike, overrides: dict | None = None) -> ExperimentSpec:
    """Parse a flat JSON spec file; `overrides` replace individual keys."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"spec file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"spec file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"spec file {path} must hold a JSON object")
    merged = dict(data)
    merged.update(overrides or {})
    return _spec_from_mapping(merged, source=str(path))


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        raise TypeError("boolean cells are not part of any schema")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(cell) for cell in row])


def _aggregation_warmup(config: SimConfig) -> float:
    """Stationarity cut for CSV aggregation, clamped to keep short runs usable.

    A horizon below the usual warmup would leave nothing to report, so the
    cut never exceeds the last snapshot time (horizon 0 keeps the initial
    placement snapshot).
    """
    last_snap = (
        math.floor(config.horizon_days / config.snapshot_period_days)
        * config.snapshot_period_days
    )
    return min(default_warmup_days(config.mtbf_days), last_snap)


def _iter_traces(spec: ExperimentSpec, jobs: int) -> Iterator[EventTrace]:
    """Yield run traces in run-index order; aggregation stays deterministic."""
    configs = [spec.run_config(k) for k in range(spec.runs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            yield from pool.map(run, configs, chunksize=1)
    else:
        for config in configs:
            yield run(config)


def cmd_simulate(spec: ExperimentSpec, jobs: int = 1) -> list[Path]:
    """Run the batch and write loads, cdf, age_load, maxload and losses CSVs."""
    config = spec.config
    out = Path(spec.outputs)
    out.mkdir(parents=True, exist_ok=True)
    warmup = _aggregation_warmup(config)
    policy = config.policy.value

    load_counts = np.zeros(1, dtype=np.int64)
    age_edges = age_bin_edges(1.0, max(config.horizon_days, 1.0))
    age_sums = np.zeros(len(age_edges) - 1)
    age_counts = np.zeros(len(age_edges) - 1, dtype=np.int64)
    peak_total = 0.0
    peak_count = 0
    peak_min: int | None = None
    peak_max: int | None = None
    losses_rows: list[tuple[int, int]] = []

    loads_path = out / "loads.csv"
    with open(loads_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["run", "time_days", "node_slot", "age_days", "load"])
        for k, trace in enumerate(_iter_traces(spec, jobs)):
            log.info(
                "run %d/%d: %d snapshots, %d blocks lost",
                k + 1,
                spec.runs,
                len(trace.snapshots),
                trace.lost_blocks,
            )
            losses_rows.append((k, trace.lost_blocks))
            for snap in trace.snapshots:
                if snap.time < warmup:
                    continue
                for slot in range(config.n_nodes):
                    writer.writerow(
                        [
                            str(k),
                            _fmt(float(snap.time)),
                            str(slot),
                            _fmt(float(snap.ages[slot])),
                            str(int(snap.loads[slot])),
                        ]
                    )
                counts = np.bincount(snap.loads)
                if len(counts) > len(load_counts):
                    load_counts = np.pad(load_counts, (0, len(counts) - len(load_counts)))
                load_counts[: len(counts)] += counts
                bins = np.searchsorted(age_edges, snap.ages, side="right") - 1
                valid = (bins >= 0) & (bins < len(age_sums))
                np.add.at(age_sums, bins[valid], snap.loads[valid])
                np.add.at(age_counts, bins[valid], 1)
                peak = int(snap.loads.max())
                peak_total += peak
                peak_count += 1
                peak_min = peak if peak_min is None else min(peak_min, peak)
                peak_max = peak if peak_max is None else max(peak_max, peak)

    if peak_count == 0:
        raise RuntimeError("no snapshots survived the warmup cut")

    cdf_path = out / "cdf.csv"
    cum = np.cumsum(load_counts) / load_counts.sum()
    _write_csv(
        cdf_path,
        ["policy", "load", "cum_fraction"],
        ((policy, x, float(cum[x])) for x in range(len(cum))),
    )

    age_path = out / "age_load.csv"
    centers = 0.5 * (age_edges[:-1] + age_edges[1:])
    _write_csv(
        age_path,
        ["policy", "age_days", "mean_load", "samples"],
        (
            (policy, float(centers[i]), float(age_sums[i] / age_counts[i]), int(age_counts[i]))
            for i in range(len(age_counts))
            if age_counts[i] > 0
        ),
    )

    maxload_path = out / "maxload.csv"
    _write_csv(
        maxload_path,
        ["policy", "mean_of_max", "min", "max", "samples"],
        [(policy, peak_total / peak_count, peak_min, peak_max, peak_count)],
    )

    losses_path = out / "losses.csv"
    _write_csv(losses_path, ["run", "lost_blocks"], losses_rows)

    return [loads_path, cdf_path, age_path, maxload_path, losses_path]


def _invariant_model(policy: PolicyKind, beta: float, x_max: int | None = None) -> TailVector:
    if policy is PolicyKind.RANDOM:
        return random_invariant_tail(beta, x_max=x_max)
    if policy is PolicyKind.POWER_OF_CHOICE:
        return poc_invariant_tail(beta, x_max=x_max)
    raise ConfigError(f"policy: {policy.value} has no analytic limit law")


def cmd_meanfield(
    beta: float,
    policy: PolicyKind | str,
    x_max: int | None = None,
    outputs: str | os.PathLike = ".",
) -> list[Path]:
    """Tabulate the invariant limit law; for power_of_choice also its scaled form."""
    if not (isinstance(beta, (int, float)) and math.isfinite(beta) and beta > 0):
        raise ConfigError(f"beta must be a positive number, got {beta!r}")
    beta = float(beta)
    try:
        policy = PolicyKind(policy)
    except ValueError as exc:
        raise ConfigError(f"policy: unknown value {policy!r}") from exc
    if x_max is not None and (isinstance(x_max, bool) or not isinstance(x_max, int) or x_max < 1):
        raise ConfigError(f"x_max must be a positive integer, got {x_max!r}")

    model = _invariant_model(policy, beta, x_max=x_max)
    out = Path(outputs)
    out.mkdir(parents=True, exist_ok=True)

    table_path = out / "meanfield.csv"
    pmf = model.pmf()
    _write_csv(
        table_path,
        ["beta", "policy", "x", "tail", "pmf"],
        (
            (beta, policy.value, x, float(model.tail[x]), float(pmf[x]))
            for x in range(len(model.tail))
        ),
    )
    paths = [table_path]

    if policy is PolicyKind.POWER_OF_CHOICE:
        scaled_path = out / "meanfield_scaled.csv"
        _write_csv(
            scaled_path,
            ["beta", "policy", "x_scaled", "tail", "limit_tail"],
            (
                (
                    beta,
                    policy.value,
                    x / beta,
                    float(model.tail[x]),
                    scaled_limit_tail(policy, x / beta),
                )
                for x in range(len(model.tail))
            ),
        )
        paths.append(scaled_path)
    return paths


def cmd_compare(spec: ExperimentSpec, jobs: int = 1) -> list[Path]:
    """Fit simulated stationary loads against the policy's invariant law."""
    config = spec.config
    if config.mode is not Mode.IDEALIZED:
        raise ConfigError("mode: compare requires idealized (the limit laws describe that model)")
    if config.policy is PolicyKind.LEAST_LOADED:
        raise ConfigError("policy: least_loaded has no analytic limit law")
    out = Path(spec.outputs)
    out.mkdir(parents=True, exist_ok=True)
    warmup = _aggregation_warmup(config)

    counts = np.zeros(1, dtype=np.int64)
    for k, trace in enumerate(_iter_traces(spec, jobs)):
        log.info("run %d/%d done", k + 1, spec.runs)
        for snap in trace.snapshots:
            if snap.time < warmup:
                continue
            snap_counts = np.bincount(snap.loads)
            if len(snap_counts) > len(counts):
                counts = np.pad(counts, (0, len(snap_counts) - len(counts)))
            counts[: len(snap_counts)] += snap_counts

    emp = EmpiricalDistribution(
        counts=counts,
        provenance={
            "policy": config.policy.value,
            "runs": spec.runs,
            "seed_base": spec.seed_base,
            "warmup_days": warmup,
        },
    )
    model = _invariant_model(config.policy, config.beta)
    report = fit_report(emp, model, model_id=config.policy.value)

    fit_path = out / "fit.csv"
    _write_csv(
        fit_path,
        ["policy", "beta", "n_nodes", "ks_distance", "mean_gap", "samples"],
        [
            (
                config.policy.value,
                config.beta,
                config.n_nodes,
                report.ks_distance,
                report.mean_gap,
                report.samples,
            )
        ],
    )

    overlay_path = out / "overlay.csv"
    support = max(len(emp.counts), model.x_max + 1)
    _write_csv(
        overlay_path,
        ["load", "empirical_cdf", "model_cdf"],
        ((x, emp.cdf(x), model.cdf(x)) for x in range(support)),
    )
    return [fit_path, overlay_path]


def _setup_logging() -> None:
    raw = os.environ.get("PLACEMENT_LAB_LOG", "warn")
    level = _LOG_LEVELS.get(raw.lower())
    if level is None:
        raise ConfigError(
            f"PLACEMENT_LAB_LOG must be one of {sorted(_LOG_LEVELS)}, got {raw!r}"
        )
    logging.basicConfig(
        stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s"
    )
    log.setLevel(level)


_FLOAT_KEYS = (
    "mtbf_days",
    "block_size_mb",
    "bandwidth_mbps",
    "latency_s",
    "maintenance_period_hours",
    "horizon_days",
    "snapshot_period_days",
)
_INT_KEYS = ("n_nodes", "n_blocks", "replication", "seed")
_STR_KEYS = ("policy", "mode")


def _add_spec_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("spec overrides")
    group.add_argument("--spec", metavar="PATH", help="JSON spec file (flat snake_case keys)")
    for key in _INT_KEYS:
        group.add_argument(f"--{key.replace('_', '-')}", dest=key, type=int)
    for key in _FLOAT_KEYS:
        group.add_argument(f"--{key.replace('_', '-')}", dest=key, type=float)
    group.add_argument("--policy", dest="policy", choices=[p.value for p in PolicyKind])
    group.add_argument("--mode", dest="mode", choices=[m.value for m in Mode])
    group.add_argument("--runs", dest="runs", type=int)
    group.add_argument("--seed-base", dest="seed_base", type=int)
    group.add_argument("--out", dest="outputs", metavar="DIR", help="output directory")


def _spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    keys = _INT_KEYS + _FLOAT_KEYS + _STR_KEYS + ("runs", "seed_base", "outputs")
    overrides = {
        key: getattr(args, key)
        for key in keys
        if getattr(args, key, None) is not None
    }
    if args.spec is not None:
        return load_spec(args.spec, overrides)
    return _spec_from_mapping(overrides, source="command line")


def _check_jobs(jobs: int) -> int:
    if jobs < 1:
        raise ConfigError(f"jobs must be >= 1, got {jobs!r}")
    return jobs


def _handle_simulate(args: argparse.Namespace) -> int:
    spec = _spec_from_args(args)
    paths = cmd_simulate(spec, jobs=_check_jobs(args.jobs))
    log.info("wrote %s", ", ".join(str(p) for p in paths))
    return 0


def _handle_compare(args: argparse.Namespace) -> int:
    spec = _spec_from_args(args)
    paths = cmd_compare(spec, jobs=_check_jobs(args.jobs))
    log.info("wrote %s", ", ".join(str(p) for p in paths))
    return 0


def _handle_meanfield(args: argparse.Namespace) -> int:
    beta = args.beta
    policy = args.policy
    outputs = args.outputs
    if args.spec is not None:
        spec = load_spec(args.spec)
        if beta is None:
            beta = spec.config.beta
        if policy is None:
            policy = spec.config.policy
        if outputs is None:
            outputs = spec.outputs
    if beta is None:
        raise ConfigError("beta is required (--beta or a spec file)")
    if policy is None:
        raise ConfigError("policy is required (--policy or a spec file)")
    paths = cmd_meanfield(beta, policy, x_max=args.x_max, outputs=outputs or ".")
    log.info("wrote %s", ", ".join(str(p) for p in paths))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="placement-lab",
        description="Replica placement experiments and their large-system limit laws.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a batch and write aggregate CSVs")
    _add_spec_flags(sim)
    sim.add_argument("--jobs", type=int, default=1, help="concurrent runs (default 1)")
    sim.set_defaults(handler=_handle_simulate)

    mf = sub.add_parser("meanfield", help="tabulate an invariant limit law")
    mf.add_argument("--spec", metavar="PATH", help="JSON spec file supplying beta and policy")
    mf.add_argument("--beta", type=float, help="mean copies per node")
    mf.add_argument("--policy", choices=[p.value for p in PolicyKind])
    mf.add_argument("--x-max", dest="x_max", type=int, help="largest tabulated load")
    mf.add_argument("--out", dest="outputs", metavar="DIR", help="output directory")
    mf.set_defaults(handler=_handle_meanfield)

    cmp_parser = sub.add_parser("compare", help="fit simulation against the limit law")
    _add_spec_flags(cmp_parser)
    cmp_parser.add_argument("--jobs", type=int, default=1, help="concurrent runs (default 1)")
    cmp_parser.set_defaults(handler=_handle_compare)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _setup_logging()
        return args.handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        log.exception("command failed")
        return 3


if __name__ == "__main__":
    sys.exit(main())
