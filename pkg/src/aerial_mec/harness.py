"""Experiment runs, result files, sweeps and scheme comparison.

A run directory holds::

    config.yaml       resolved configuration
    metrics.csv       one row per training episode (deterministic for a seed)
    metrics.jsonl     the same rows as JSON lines
    timing.csv        wall-clock seconds per episode (kept apart so the
                      metrics files stay byte-identical across reruns)
    trajectory.csv    per-slot trace of a greedy rollout of the final actor
    checkpoint.npz    actor/critic and their targets
    summary.json      converged figures used by :func:`compare_schemes`
"""
from __future__ import annotations

import copy
import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .ddpg import EpisodeMetrics, evaluate, train
from .env import ConfigError, SecureOffloadEnv
from .mec import local_only_cost
from .nn import load_checkpoint, save_checkpoint

log = logging.getLogger(__name__)

SCHEMES = ("noma", "tdma", "local")
CONVERGENCE_WINDOW = 50


class ComparisonError(ValueError):
    """Runs cannot be compared (too few, or different scenarios)."""


@dataclass
class ExperimentConfig:
    config: dict = field(default_factory=cfgmod.default_config)
    scheme: str = "noma"
    seed: int = 0
    episodes: int | None = None
    out_dir: str | Path | None = None
    run_id: str = ""
    sweep: tuple | None = None  # (key, values), only consumed by run_sweep

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.episodes is not None and self.episodes < 1:
            raise ConfigError("episodes must be >= 1")
        if self.sweep is not None:
            cfgmod.resolve_key(self.sweep[0])
        if not self.run_id:
            self.run_id = f"{self.scheme}_seed{self.seed}"


def write_records(records: list[dict], path, fmt: str | None = None) -> None:
    """Write rows as CSV or JSON lines (chosen by ``fmt`` or the file suffix)."""
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".")
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            if not records:
                return
            writer = csv.DictWriter(fh, fieldnames=list(records[0]))
            writer.writeheader()
            writer.writerows(records)
    elif fmt == "jsonl":
        with open(path, "w") as fh:
            for row in records:
                fh.write(json.dumps(row, sort_keys=False) + "\n")
    else:
        raise ValueError(f"unsupported format {fmt!r}")


def read_records(path, fmt: str | None = None) -> list[dict]:
    """Inverse of :func:`write_records`; CSV numbers are parsed back to int/float."""
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".")
    if fmt == "jsonl":
        with open(path) as fh:
            return [json.loads(line) for line in fh if line.strip()]
    if fmt == "csv":
        with open(path, newline="") as fh:
            return [{k: _parse_number(v) for k, v in row.items()} for row in csv.DictReader(fh)]
    raise ValueError(f"unsupported format {fmt!r}")


def _parse_number(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _tail_mean(values, window=CONVERGENCE_WINDOW) -> float:
    vals = list(values)[-window:]
    return float(np.mean(vals)) if vals else math.nan


def summarize(history: list[EpisodeMetrics], window: int = CONVERGENCE_WINDOW) -> dict:
    """Converged figures: means over the last ``window`` episodes."""
    head = history[:window]
    tail = history[-window:]
    return {
        "episodes": len(history),
        "converged_cost": _tail_mean([m.average_cost for m in tail]),
        "converged_energy_cost": _tail_mean([m.energy_cost for m in tail]),
        "converged_delay_cost": _tail_mean([m.delay_cost for m in tail]),
        "converged_reward": _tail_mean([m.accumulated_reward for m in tail]),
        "initial_reward": _tail_mean([m.accumulated_reward for m in head]),
        "finished_fraction": _tail_mean([m.finished for m in tail]),
        "mean_episode_length": _tail_mean([m.episode_length for m in tail]),
    }


def run_experiment(exp: ExperimentConfig) -> dict:
    """Run one scheme for one seed; writes the run directory when ``out_dir`` is set.

    Returns the summary dict (also stored as ``summary.json``).
    """
    config = copy.deepcopy(exp.config)
    out = Path(exp.out_dir) if exp.out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        cfgmod.dump_config(config, out / "config.yaml")

    base = {"run_id": exp.run_id, "scheme": exp.scheme, "seed": exp.seed,
            "env_fingerprint": cfgmod.env_fingerprint(config)}
    if exp.scheme == "local":
        env_cfg = cfgmod.build_env_config(config)
        closed = local_only_cost(env_cfg.bits_per_user, env_cfg.compute, env_cfg.weights, env_cfg.num_users)
        summary = {**base, "episodes": 0, "converged_cost": closed["average_cost"],
                   "converged_energy_cost": closed["energy_cost"],
                   "converged_delay_cost": closed["delay_cost"], **closed}
        if out is not None:
            write_records([closed], out / "metrics.csv")
            write_records([closed], out / "metrics.jsonl")
            _write_json(summary, out / "summary.json")
        return summary

    env = SecureOffloadEnv(cfgmod.build_env_config(config, mode=exp.scheme))
    train_cfg = cfgmod.build_train_config(config, episodes=exp.episodes, seed=exp.seed)
    log.info("training %s seed %d for %d episodes", exp.scheme, exp.seed, train_cfg.episodes)
    agent, history = train(env, train_cfg)
    greedy, trajectory = evaluate(env, agent.actor)
    summary = {**base, **summarize(history), "greedy_cost": greedy.average_cost,
               "greedy_reward": greedy.accumulated_reward, "greedy_finished": greedy.finished}

    if out is not None:
        rows = [m.as_row() for m in history]
        write_records(rows, out / "metrics.csv")
        write_records(rows, out / "metrics.jsonl")
        write_records([{"episode": m.episode, "wall_time_s": m.wall_time_s} for m in history],
                      out / "timing.csv")
        write_records(trajectory, out / "trajectory.csv")
        save_checkpoint(out / "checkpoint.npz",
                        {"actor": agent.actor, "critic": agent.critic,
                         "target_actor": agent.target_actor, "target_critic": agent.target_critic},
                        extra={"scheme": exp.scheme, "seed": exp.seed, "episodes": train_cfg.episodes})
        _write_json(summary, out / "summary.json")
    summary["history"] = history
    return summary


def evaluate_checkpoint(run_dir, out_path=None) -> dict:
    """Greedy rollout of a saved actor in the scenario stored next to it."""
    run_dir = Path(run_dir)
    config = cfgmod.load_config(run_dir / "config.yaml")
    nets, extra = load_checkpoint(run_dir / "checkpoint.npz")
    env = SecureOffloadEnv(cfgmod.build_env_config(config, mode=extra["scheme"]))
    metrics, trajectory = evaluate(env, nets["actor"])
    if out_path is not None:
        write_records(trajectory, out_path)
    return metrics.as_row()


def _write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def load_summary(run_dir) -> dict:
    return json.loads((Path(run_dir) / "summary.json").read_text())


def compare_schemes(summaries: list[dict]) -> list[dict]:
    """Per-scheme mean converged cost across seeds, cheapest first.

    All runs must share a scenario (same environment fingerprint) and there
    must be at least two schemes.
    """
    if len(summaries) < 2:
        raise ComparisonError("need at least two runs to compare")
    prints = {s["env_fingerprint"] for s in summaries}
    if len(prints) != 1:
        raise ComparisonError("runs were made on different scenarios")
    by_scheme: dict[str, list] = {}
    for s in summaries:
        by_scheme.setdefault(s["scheme"], []).append(s)
    if len(by_scheme) < 2:
        raise ComparisonError("all runs use the same scheme")
    table = []
    for scheme, runs in by_scheme.items():
        costs = [r["converged_cost"] for r in runs]
        table.append({
            "scheme": scheme,
            "runs": len(runs),
            "seeds": sorted(r["seed"] for r in runs),
            "mean_cost": float(np.mean(costs)),
            "std_cost": float(np.std(costs)),
            "mean_energy_cost": float(np.mean([r["converged_energy_cost"] for r in runs])),
            "mean_delay_cost": float(np.mean([r["converged_delay_cost"] for r in runs])),
        })
    table.sort(key=lambda r: r["mean_cost"])
    return table


def parse_sweep(spec: str) -> tuple[str, list]:
    """``"r_E=0,25,50"`` -> ("r_E", [0, 25, 50])."""
    if "=" not in spec:
        raise ConfigError(f"sweep must look like key=v1,v2,... (got {spec!r})")
    key, _, values = spec.partition("=")
    key = key.strip()
    cfgmod.resolve_key(key)
    vals = [cfgmod.parse_value(v.strip()) for v in values.split(",") if v.strip()]
    if not vals:
        raise ConfigError(f"sweep {key!r} has no values")
    return key, vals


def run_sweep(base: dict, key: str, values, schemes=("noma",), seeds=(0,), episodes=None,
              out_dir=None) -> list[dict]:
    """Grid over one config key x schemes x seeds; returns one summary per run."""
    results = []
    for value in values:
        config = cfgmod.set_key(copy.deepcopy(base), key, value)
        for scheme in schemes:
            for seed in seeds:
                sub = None if out_dir is None else Path(out_dir) / f"{key}={value}" / f"{scheme}_seed{seed}"
                run_id = f"{key}={value}/{scheme}_seed{seed}"
                summary = run_experiment(ExperimentConfig(config, scheme, seed, episodes, sub, run_id))
                summary.pop("history", None)
                summary["sweep_key"], summary["sweep_value"] = key, value
                results.append(summary)
    if out_dir is not None:
        write_records(results, Path(out_dir) / "sweep.jsonl")
    return results
