"""Command-line entry point: generate scenarios, train base policies, run
traversals, aggregate reports, and run the verification suites.

Defaults come from the built-in configuration, may be replaced by a TOML
config file, and are finally overridden by command-line flags.  Exit codes:
0 success, 1 run failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:                      # Python 3.10
    import tomli as tomllib

from .belief import BeliefState
from .generate import (ScenarioSpec, build_replicates, build_world,
                       load_scenarios, save_scenarios)
from .harness import RunPlan, aggregate, load_runs_csv, run_matrix, write_report_csv
from .mc_values import OpiConfig
from .policies import POLICY_IDS, train_policy
from .rollout import RolloutConfig
from .sensor import SensorModel


class ConfigError(ValueError):
    pass


# flag/config key -> (section, field) in the layered configuration
OVERRIDE_KEYS = {
    "eta": ("training", "eta"),
    "max_iters": ("training", "max_iterations"),
    "delta": ("training", "support_spacing"),
    "gamma_scale": ("training", "gamma_scale"),
    "m_roll": ("rollout", "m_roll"),
    "sigma_f": ("kernel", "sigma_f"),
    "length_scale": ("kernel", "length_scale"),
    "w_goal": ("trend", "w_goal"),
    "w_isolation": ("trend", "w_isolation"),
}


def load_config(path: str | None) -> dict:
    cfg = {"training": {}, "rollout": {}, "kernel": {}, "trend": {}}
    if path:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        for section in cfg:
            cfg[section].update(data.get(section, {}))
    return cfg


def apply_flag_overrides(cfg: dict, args: argparse.Namespace) -> dict:
    for flag, (section, key) in OVERRIDE_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            cfg[section][key] = value
    return cfg


def opi_from_config(cfg: dict) -> OpiConfig:
    return OpiConfig(**cfg["training"])


def rollout_from_config(cfg: dict) -> RolloutConfig:
    return RolloutConfig(**cfg["rollout"])


def _parse_grid(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError as exc:
        raise ConfigError(f"bad grid spec {text!r}; expected WIDTHxHEIGHT") from exc


def _spec_from_args(args, cfg) -> ScenarioSpec:
    width, height = _parse_grid(args.grid)
    kwargs = dict(width=width, height=height, n_obstacles=args.n,
                  radius=args.radius, sensor_range=args.range,
                  sensor_noise=getattr(args, "lambda"),
                  n_environments=args.envs, n_replicates=args.reps,
                  master_seed=args.seed)
    kwargs.update({k: v for k, v in cfg["kernel"].items()})
    kwargs.update({k: v for k, v in cfg["trend"].items()})
    try:
        return ScenarioSpec(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def cmd_generate(args, cfg) -> int:
    spec = _spec_from_args(args, cfg)
    scenarios = build_replicates(spec)
    save_scenarios(args.out, scenarios)
    print(f"wrote {len(scenarios.environments)} environments "
          f"x {spec.n_replicates} replicates to {args.out}")
    return 0


def cmd_train(args, cfg) -> int:
    scenarios = load_scenarios(args.scenario)
    spec = scenarios.spec
    opi = opi_from_config(cfg)
    out = {}
    for env in scenarios.environments:
        world = build_world(spec, env.centers)
        belief = BeliefState(env.centers, spec.kernel)
        sensor = SensorModel(spec.sensor_noise, spec.sensor_range)
        rng = np.random.default_rng(np.random.SeedSequence(
            args.seed, spawn_key=(3, POLICY_IDS.index(args.policy), env.index)))
        model, log = train_policy(args.policy, world, belief, sensor, opi, rng,
                                  coarsen=args.coarsen)
        if model is None:
            print(f"policy {args.policy} has no offline stage", file=sys.stderr)
            return 1
        out[env.index] = (model, log)
    meta = {"policy": args.policy, "seed": args.seed, "scenario": args.scenario,
            "config": cfg["training"],
            "iterations": {e: log.iterations for e, (m, log) in out.items()},
            "converged": {e: log.converged for e, (m, log) in out.items()}}
    payload = {"meta": meta,
               "models": {e: m.to_json() for e, (m, _) in out.items()}}
    with open(args.out, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")
    print(f"trained {args.policy} on {len(out)} environment(s) -> {args.out}")
    return 0


def cmd_run(args, cfg) -> int:
    scenarios = load_scenarios(args.scenario)
    policies = tuple(args.policy) if args.policy else POLICY_IDS
    for p in policies:
        if p not in POLICY_IDS:
            raise ConfigError(f"unknown policy {p!r}; choose from {POLICY_IDS}")
    plan = RunPlan(scenarios=scenarios, policies=policies,
                   opi=opi_from_config(cfg), rollout=rollout_from_config(cfg),
                   run_seed=args.seed, coarsen=args.coarsen)
    workers = int(os.environ.get("SCOS_WORKERS", args.workers))
    results = run_matrix(plan, out_dir=args.out, parallelism=workers)
    failed = sum(r.failed for r in results)
    with open(os.path.join(args.out, "run_meta.json"), "w") as fh:
        json.dump({"scenario": args.scenario, "policies": list(policies),
                   "seed": args.seed, "coarsen": args.coarsen,
                   "spec": {"sensor_noise": scenarios.spec.sensor_noise,
                            "sensor_range": scenarios.spec.sensor_range,
                            "n_obstacles": scenarios.spec.n_obstacles,
                            "width": scenarios.spec.width,
                            "height": scenarios.spec.height},
                   "config": cfg}, fh, sort_keys=True, indent=1)
    print(f"ran {len(results)} cells ({failed} failed) -> {args.out}")
    return 0 if failed == 0 else 1


def cmd_evaluate(args, cfg) -> int:
    results = load_runs_csv(os.path.join(args.out_dir, "runs.csv"))
    reports = aggregate(results)
    for r in reports:
        print(f"{r.policy:14s} mean={r.mean_cost:8.3f} median={r.median_cost:8.3f} "
              f"gap={r.mean_gap:7.3f} within_sd={r.within_env_sd:6.3f} "
              f"cross_sd={r.cross_env_sd:6.3f} fail={r.n_failures}")
    with open(os.path.join(args.out_dir, "report.json"), "w") as fh:
        json.dump([r.__dict__ for r in reports], fh, sort_keys=True, indent=1)
    return 0


def cmd_report(args, cfg) -> int:
    results = load_runs_csv(os.path.join(args.out_dir, "runs.csv"))
    with open(os.path.join(args.out_dir, "run_meta.json")) as fh:
        meta = json.load(fh)
    spec = ScenarioSpec(
        width=meta["spec"]["width"], height=meta["spec"]["height"],
        n_obstacles=meta["spec"]["n_obstacles"],
        sensor_noise=meta["spec"]["sensor_noise"],
        sensor_range=meta["spec"]["sensor_range"])
    reports = aggregate(results)
    write_report_csv(os.path.join(args.out_dir, "report.csv"), reports, spec)
    write_report_csv(os.path.join(args.out_dir, "plot_data.csv"), reports, spec)
    print(f"wrote report.csv and plot_data.csv in {args.out_dir}")
    return 0


def cmd_verify(args, cfg) -> int:
    from .verify import ALL_CHECKS, DEFAULT_CHECKS, run_checks
    results = run_checks(ALL_CHECKS if args.full else DEFAULT_CHECKS)
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scos",
        description="Correlated obstacle scene planner and simulation harness")
    parser.add_argument("--config", help="TOML configuration file")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_overrides(p):
        p.add_argument("--eta", type=float, help="training convergence threshold")
        p.add_argument("--max-iters", dest="max_iters", type=int,
                       help="training iteration cap")
        p.add_argument("--delta", type=float, help="value-distribution support spacing")
        p.add_argument("--gamma-scale", dest="gamma_scale", type=float,
                       help="information bonus weight multiplier")
        p.add_argument("--m-roll", dest="m_roll", type=int,
                       help="posterior samples per rollout decision")
        p.add_argument("--sigma-f", dest="sigma_f", type=float, help="kernel amplitude")
        p.add_argument("--length-scale", dest="length_scale", type=float,
                       help="kernel length scale")
        p.add_argument("--w-goal", dest="w_goal", type=float,
                       help="goal-proximity trend weight")
        p.add_argument("--w-isolation", dest="w_isolation", type=float,
                       help="isolation trend weight")

    g = sub.add_parser("generate", help="generate a scenario file")
    g.add_argument("--grid", default="50x25")
    g.add_argument("--n", type=int, default=20, help="number of obstacles")
    g.add_argument("--radius", type=float, default=3.5)
    g.add_argument("--lambda", type=float, default=1.5, dest="lambda")
    g.add_argument("--range", type=float, default=12.5)
    g.add_argument("--envs", type=int, default=1)
    g.add_argument("--reps", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="scenario.json")
    add_overrides(g)
    g.set_defaults(fn=cmd_generate)

    t = sub.add_parser("train", help="train a base policy offline")
    t.add_argument("--scenario", required=True)
    t.add_argument("--policy", required=True, choices=[p for p in POLICY_IDS
                                                       if p.startswith("ts-")])
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--coarsen", action="store_true",
                   help="use independence-coarsened beliefs")
    t.add_argument("--out", default="model.json")
    add_overrides(t)
    t.set_defaults(fn=cmd_train)

    r = sub.add_parser("run", help="execute traversals and write traces")
    r.add_argument("--scenario", required=True)
    r.add_argument("--policy", action="append",
                   help="policy id (repeatable; default: all)")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--coarsen", action="store_true")
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--out", required=True)
    add_overrides(r)
    r.set_defaults(fn=cmd_run)

    e = sub.add_parser("evaluate", help="aggregate metrics from a run directory")
    e.add_argument("--out-dir", dest="out_dir", required=True)
    e.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("report", help="write CSV tables from a run directory")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.set_defaults(fn=cmd_report)

    v = sub.add_parser("verify", help="run the property/oracle suites")
    v.add_argument("--full", action="store_true")
    v.set_defaults(fn=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = apply_flag_overrides(cfg, args)
        return args.fn(args, cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
