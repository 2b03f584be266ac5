"""Command-line front end.

    infogame solve --config run.yaml [--seed N] [--out DIR] [--jobs J]
    infogame preset lorenz-row6 [--out FILE]
    infogame audit --trace trace.csv --scenario scenario.npz [--stage N]

Exit status: 0 success, 2 configuration error, 3 numeric error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, _accel
from .config import PRESETS, RunConfig, load_config, parse_config, preset_text
from .errors import ArgumentError, BudgetExceededError, CatalogError, ConfigError, NumericError
from .game import (NE_TOL, SensingGame, audit_nash, joint_from_points, potential, read_trace_csv,
                   run_strategy)
from .gaussian import GaussianEngine, load_joint_gaussian, save_joint_gaussian
from .lorenz import build_targeting_scenario
from .particle import save_particles_csv
from .synthetic import random_instance
from .tracking import run_episode

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

GAUSSIAN_SUMMARY = ["seed", "strategy", "potential", "stages", "evaluations", "converged", "worst_gain"]
TRACKING_SUMMARY = ["seed", "strategy", "steps", "mean_mi", "mean_gap", "mean_stages", "mean_evaluations",
                    "final_error"]


def _num(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return v


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _gaussian_scenario(cfg: RunConfig, seed: int):
    if cfg.scenario == "synthetic-gaussian":
        s = cfg.synthetic
        jg, regions = random_instance(np.random.default_rng(seed), s.agents, s.actions, s.n_verif,
                                      s.verification_is_state)
        return jg, regions, 1
    scenario, jg = build_targeting_scenario(cfg.lorenz.to_config(), seed)
    return jg, scenario.regions, cfg.lorenz.cardinality


def _run_gaussian_seed(cfg_json: str, seed: int, out: str) -> list[dict]:
    cfg = RunConfig.model_validate_json(cfg_json)
    out_dir = Path(out)
    jg, regions, card = _gaussian_scenario(cfg, seed)
    save_joint_gaussian(out_dir / f"scenario_seed{seed}.npz", jg, regions,
                        {"scenario": cfg.scenario, "seed": seed, "cardinality": card})
    game = SensingGame(GaussianEngine(jg), regions, card)
    rows = []
    for strategy in cfg.strategies:
        try:
            joint, trace = run_strategy(game, strategy, alpha_bar=cfg.alpha_bar, seed=seed,
                                        max_stages=cfg.max_stages, budget=cfg.budget)
        except BudgetExceededError as err:
            raise ConfigError(f"budget: {err} (strategy {strategy}, seed {seed})") from None
        _write(out_dir / f"trace_{strategy}_seed{seed}.csv", trace.to_csv(game))
        _, worst = audit_nash(game, joint)
        rows.append({
            "seed": seed,
            "strategy": strategy,
            "potential": potential(game, joint),
            "stages": trace.stages,
            "evaluations": trace.evaluations,
            "converged": int(trace.converged),
            "worst_gain": float(worst),
        })
    return rows


def _run_tracking_cell(cfg_json: str, strategy: str, seed: int, out: str) -> list[dict]:
    cfg = RunConfig.model_validate_json(cfg_json)
    tcfg = cfg.tracking.to_config(strategy, cfg.alpha_bar, cfg.max_stages)
    trace = run_episode(tcfg, seed, keep_snapshots=cfg.tracking.snapshots)
    out_dir = Path(out)
    _write(out_dir / f"episode_{strategy}_seed{seed}.csv", trace.to_csv())
    for k, ps in enumerate(trace.snapshots):
        path = out_dir / "particles" / f"{strategy}_seed{seed}_step{k:03d}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        save_particles_csv(path, ps)
    steps = trace.per_step()

    def mean(key):
        vals = [r[key] for r in steps if not (isinstance(r[key], float) and math.isnan(r[key]))]
        return float(np.mean(vals)) if vals else float("nan")

    err = float(np.hypot(*(trace.final.mean() - np.asarray(tcfg.target))))
    return [{
        "seed": seed,
        "strategy": strategy,
        "steps": len(steps),
        "mean_mi": mean("strategy_mi"),
        "mean_gap": mean("gap"),
        "mean_stages": mean("jsfp_stages"),
        "mean_evaluations": mean("jsfp_evals"),
        "final_error": err,
    }]


def _table(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_num(r[c]) for c in columns])
    return buf.getvalue()


def _versions() -> dict:
    import numba

    return {
        "infogame": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "numba": numba.__version__,
    }


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def cmd_solve(cfg: RunConfig, out_dir: Path, jobs: int = 1) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg_json = cfg.model_dump_json()
    if cfg.scenario == "tracking":
        cells = [(_run_tracking_cell, (cfg_json, s, seed, str(out_dir))) for seed in cfg.seeds for s in cfg.strategies]
        columns = TRACKING_SUMMARY
    else:
        cells = [(_run_gaussian_seed, (cfg_json, seed, str(out_dir))) for seed in cfg.seeds]
        columns = GAUSSIAN_SUMMARY
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(fn, *args) for fn, args in cells]
            results = [f.result() for f in futures]
    else:
        results = [fn(*args) for fn, args in cells]
    rows = [r for chunk in results for r in chunk]
    _write(out_dir / "summary.csv", _table(columns, rows))
    files = sorted(p for p in out_dir.rglob("*") if p.is_file() and p.name != "manifest.json")
    manifest = {
        "config": cfg.model_dump(mode="json"),
        "config_hash": cfg.config_hash(),
        "scenario": cfg.scenario,
        "seeds": cfg.seeds,
        "backend": _accel.backend(),
        "versions": _versions(),
        "files": {str(p.relative_to(out_dir)): _sha256(p) for p in files},
    }
    _write(out_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out_dir


def cmd_preset(name: str) -> str:
    text = preset_text(name)
    import yaml

    parse_config(yaml.safe_load(text))  # every preset must re-validate
    return text


def cmd_audit(trace_path, scenario_path, stage: int | None = None, tol: float = NE_TOL) -> dict:
    jg, catalog = load_joint_gaussian(scenario_path)
    regions = catalog.get("regions")
    if not regions:
        raise ConfigError(f"{scenario_path}: catalog has no agent regions")
    card = int(catalog.get("extra", {}).get("cardinality", 1))
    game = SensingGame(GaussianEngine(jg), regions, card)
    stages = read_trace_csv(Path(trace_path).read_text())
    if not stages:
        raise ConfigError(f"{trace_path}: empty trace")
    rec = stages[-1] if stage is None else next((s for s in stages if s["stage"] == stage), None)
    if rec is None:
        raise ConfigError(f"{trace_path}: no stage {stage}")
    try:
        joint = joint_from_points(game, rec["actions"])
    except (ValueError, KeyError) as err:
        raise ConfigError(f"{trace_path}: recorded action is not in the scenario's action sets ({err})") from None
    is_ne, worst = audit_nash(game, joint, tol)
    return {"stage": rec["stage"], "joint": list(joint), "nash": bool(is_ne), "worst_gain": worst,
            "potential": rec["potential"]}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="infogame", description="Cooperative sensing as a potential game.")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("solve", help="run every (strategy, seed) of a config")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, action="append", help="override the config seeds (repeatable)")
    s.add_argument("--out", help="output directory (default: the config's output)")
    s.add_argument("--jobs", type=int, default=1)
    r = sub.add_parser("preset", help="emit a documented reproduction config")
    r.add_argument("name", choices=sorted(PRESETS))
    r.add_argument("--out", help="write here instead of stdout")
    a = sub.add_parser("audit", help="Nash audit of a recorded trace")
    a.add_argument("--trace", required=True)
    a.add_argument("--scenario", required=True, help="scenario_seed*.npz written by solve")
    a.add_argument("--stage", type=int)
    a.add_argument("--tol", type=float, default=NE_TOL)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            cfg = load_config(args.config)
            if args.seed:
                cfg = parse_config({**cfg.model_dump(mode="json"), "seeds": args.seed})
            if args.jobs < 1:
                raise ConfigError("--jobs must be at least 1")
            out = cmd_solve(cfg, Path(args.out or cfg.output), args.jobs)
            print(out / "summary.csv")
        elif args.command == "preset":
            text = cmd_preset(args.name)
            if args.out:
                _write(Path(args.out), text)
            else:
                sys.stdout.write(text)
        else:
            print(json.dumps(cmd_audit(args.trace, args.scenario, args.stage, args.tol), sort_keys=True))
    except (ConfigError, ArgumentError, CatalogError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as err:
        print(f"numeric error: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
