"""Command-line entry point: ``aerial-mec {train,eval,sweep,compare}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import config as cfgmod
from . import harness
from .env import ConfigError


def _base_config(args) -> dict:
    config = cfgmod.load_config(args.config) if args.config else cfgmod.default_config()
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value (got {item!r})")
        cfgmod.set_key(config, key.strip(), cfgmod.parse_value(value.strip()))
    return config


def _check_writable(out: Path) -> None:
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from exc


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def cmd_train(args) -> None:
    out = Path(args.out)
    _check_writable(out)
    exp = harness.ExperimentConfig(_base_config(args), args.scheme, args.seed, args.episodes, out)
    summary = harness.run_experiment(exp)
    summary.pop("history", None)
    _print_json(summary)


def cmd_eval(args) -> None:
    out_path = Path(args.out) if args.out else None
    if out_path is not None:
        _check_writable(out_path.parent)
    _print_json(harness.evaluate_checkpoint(args.run_dir, out_path))


def cmd_sweep(args) -> None:
    out = Path(args.out)
    _check_writable(out)
    key, values = harness.parse_sweep(args.sweep)
    schemes = args.scheme.split(",")
    for s in schemes:
        if s not in harness.SCHEMES:
            raise ConfigError(f"unknown scheme {s!r}")
    seeds = [args.seed + i for i in range(args.repetitions)]
    results = harness.run_sweep(_base_config(args), key, values, schemes, seeds, args.episodes, out)
    for r in results:
        print(f"{key}={r['sweep_value']} {r['scheme']} seed={r['seed']} cost={r['converged_cost']:.4f}")


def cmd_compare(args) -> None:
    summaries = [harness.load_summary(d) for d in args.run_dirs]
    table = harness.compare_schemes(summaries)
    for row in table:
        print(f"{row['scheme']:>6}  runs={row['runs']}  cost={row['mean_cost']:.4f} "
              f"(energy {row['mean_energy_cost']:.4f}, delay {row['mean_delay_cost']:.4f})")
    print("ordering (cheapest first): " + " < ".join(r["scheme"] for r in table))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aerial-mec", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_flags(p):
        p.add_argument("--config", help="YAML file overriding the default scenario")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override one config entry, e.g. --set L_k=20e6 (repeatable)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--episodes", type=int, default=None)

    p = sub.add_parser("train", help="train one scheme and write a run directory")
    scenario_flags(p)
    p.add_argument("--scheme", choices=harness.SCHEMES, default="noma")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="greedy rollout of a trained run")
    p.add_argument("run_dir")
    p.add_argument("--out", help="write the per-slot trajectory CSV here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="grid over one config key")
    scenario_flags(p)
    p.add_argument("--scheme", default="noma", help="comma-separated schemes")
    p.add_argument("--sweep", required=True, metavar="KEY=V1,V2,...")
    p.add_argument("--repetitions", type=int, default=1, help="seeds per grid point, from --seed upward")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="per-scheme converged cost of finished runs")
    p.add_argument("run_dirs", nargs="+")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ConfigError, harness.ComparisonError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
