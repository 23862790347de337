"""Command-line front end: simulate, parameter sweeps, built-in selftest.

Exit codes: 0 on success, 2 on configuration or validation problems, 3
on numerical failure (singular systems, non-finite results, failed
selftest).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import yaml

from .config import ScenarioConfig, load_config, parse_override
from .errors import ConfigError, NumericalError, ValidationError
from .harness import emit, run_scenarios
from .selftest import run_selftest


def _parse_seeds(text: str) -> list[int]:
    """Seed list syntax: '7', '0,3,9', or a half-open range '0:10'."""
    text = text.strip()
    if ":" in text:
        lo, _, hi = text.partition(":")
        try:
            start, stop = int(lo), int(hi)
        except ValueError as exc:
            raise ConfigError(f"bad seed range {text!r}") from exc
        if stop <= start:
            raise ConfigError("seed range must be non-empty")
        return list(range(start, stop))
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"bad seed list {text!r}") from exc


def _collect_overrides(pairs: list[str] | None) -> dict:
    out: dict = {}
    for pair in pairs or []:
        key, value = parse_override(pair)
        out[key] = value
    return out


def _run_one(
    cfg: ScenarioConfig, seeds: list[int], out_path: str | Path, workers: int
) -> int:
    records = run_scenarios(cfg, seeds, workers=workers)
    csv_path, json_path = emit(records, cfg, out_path)
    print(f"wrote {len(records)} records to {csv_path} (sidecar {json_path})")
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, _collect_overrides(args.override))
    return _run_one(cfg, _parse_seeds(args.seeds), args.out, args.workers)


def _split_sweep_spec(param: str, values: str | None) -> tuple[str, list]:
    """Accept either --param name --values v1,v2 or the combined
    --param name=v1,v2 form."""
    if "=" in param:
        if values is not None:
            raise ConfigError("give sweep values once: either in --param or via --values")
        param, _, values = param.partition("=")
    if values is None:
        raise ConfigError("sweep needs values (--param name=v1,v2 or --values v1,v2)")
    try:
        parsed = [yaml.safe_load(v) for v in values.split(",") if v.strip() != ""]
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse sweep values: {exc}") from exc
    if not parsed:
        raise ConfigError("sweep needs at least one value")
    return param, parsed


def _cmd_sweep(args: argparse.Namespace) -> int:
    overrides = _collect_overrides(args.override)
    name, values = _split_sweep_spec(args.param, args.values)
    seeds = _parse_seeds(args.seeds)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for value in values:
        key, parsed = parse_override(f"{name}={value}")
        cfg = load_config(args.config, {**overrides, key: parsed})
        safe = str(value).replace("/", "_").replace(" ", "")
        _run_one(cfg, seeds, out_dir / f"{name}_{safe}.csv", args.workers)
    return 0


def _cmd_selftest(_: argparse.Namespace) -> int:
    return 0 if run_selftest(verbose=True) else 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tacfeed",
        description="Link-level simulator for TAC-based downlink CSI acquisition",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one scenario over a set of seeds")
    sim.add_argument("--config", default=None, help="YAML scenario file (defaults apply)")
    sim.add_argument("--seeds", default="0", help="'7', '0,3,9' or half-open '0:10'")
    sim.add_argument("--out", required=True, help="output CSV path")
    sim.add_argument(
        "--override",
        action="append",
        metavar="KEY=VALUE",
        help="override one config field (repeatable)",
    )
    sim.add_argument(
        "--workers",
        type=int,
        default=1,
        help="worker processes; seeds fan out, output is identical either way",
    )
    sim.set_defaults(func=_cmd_simulate)

    swp = sub.add_parser("sweep", help="rerun a scenario across values of one field")
    swp.add_argument("--config", default=None)
    swp.add_argument("--seeds", default="0")
    swp.add_argument(
        "--param", required=True, help="config field to sweep, optionally 'name=v1,v2'"
    )
    swp.add_argument("--values", default=None, help="comma-separated values")
    swp.add_argument("--out-dir", required=True, help="directory for per-value CSVs")
    swp.add_argument("--override", action="append", metavar="KEY=VALUE")
    swp.add_argument("--workers", type=int, default=1)
    swp.set_defaults(func=_cmd_sweep)

    chk = sub.add_parser("selftest", help="run the built-in sanity checks")
    chk.set_defaults(func=_cmd_selftest)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
