"""Command-line entry point.

    mfas run --config experiment.yaml --out results/ [--strategy if_ucr] [--cost-ratio 10:1] [--seed 3]

The config file is YAML key-value pairs naming :class:`ExperimentConfig`
fields. ``strategy`` and ``cost_ratio`` may also be lists, which expands
the run into a sweep over every combination.
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import logging
import sys
from pathlib import Path

import yaml

from .benchmarks import synthetic_fluidized_bed, write_fluidized_bed
from .harness import ExperimentConfig, emit_results, run_sweep, summarize

log = logging.getLogger("mfas")

_FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)}
_PAIR_FIELDS = ("prior_log_amplitude", "prior_log_inv_length_scale", "prior_log_nugget")


class ConfigError(ValueError):
    pass


def parse_cost_ratio(value) -> tuple[float, float]:
    if isinstance(value, str):
        parts = value.split(":")
    else:
        parts = list(value)
    try:
        high, low = (float(p) for p in parts)
    except (TypeError, ValueError):
        raise ConfigError(f"cost ratio must be 'H:L', got {value!r}") from None
    return high, low


def _as_list(value):
    return list(value) if isinstance(value, (list, tuple)) else [value]


def expand_config(raw: dict) -> list[ExperimentConfig]:
    """Turn a parsed key-value mapping into one config per (strategy, cost ratio)."""
    raw = dict(raw)
    unknown = set(raw) - _FIELDS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    strategies = _as_list(raw.pop("strategy", ExperimentConfig.strategy))
    ratio_value = raw.pop("cost_ratio", "10:1")
    if isinstance(ratio_value, (list, tuple)) and len(ratio_value) == 2 and all(
            isinstance(v, (int, float)) for v in ratio_value):
        ratio_value = [ratio_value]
    ratios = [parse_cost_ratio(r) for r in _as_list(ratio_value)]
    for key in _PAIR_FIELDS:
        if key in raw:
            raw[key] = tuple(raw[key])
    configs = []
    for strategy, ratio in itertools.product(strategies, ratios):
        try:
            cfg = ExperimentConfig(strategy=strategy, cost_ratio=ratio, **raw)
            cfg.validate()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        configs.append(cfg)
    return configs


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected key-value pairs at top level")
    return data


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfas", description="Multi-fidelity adaptive sampling experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment or sweep")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--out", required=True, type=Path, help="output directory")
    run.add_argument("--strategy", help="override; comma-separated for several")
    run.add_argument("--cost-ratio", help="override as H:L; comma-separated for several")
    run.add_argument("--seed", type=int)
    run.add_argument("--workers", type=int, default=1, help="processes for replications")

    bed = sub.add_parser("synthetic-bed", help="write the synthetic 28-row fluidized-bed stand-in")
    bed.add_argument("path", type=Path)
    bed.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synthetic-bed":
            write_fluidized_bed(synthetic_fluidized_bed(seed=args.seed), args.path)
            print(f"wrote SYNTHETIC fluidized-bed data to {args.path}")
            return 0
        raw = load_config(args.config)
        if args.strategy:
            raw["strategy"] = args.strategy.split(",")
        if args.cost_ratio:
            raw["cost_ratio"] = args.cost_ratio.split(",")
        if args.seed is not None:
            raw["seed"] = args.seed
        configs = expand_config(raw)
        results = run_sweep(configs, workers=args.workers)
        summary = summarize([r for res in results for r in res.records])
        paths = emit_results(results, summary, args.out)
    except (ConfigError, ValueError, OSError, RuntimeError) as exc:
        print(f"mfas: error: {exc}", file=sys.stderr)
        return 2
    for kind, path in paths.items():
        print(f"{kind}: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
