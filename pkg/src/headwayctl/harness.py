"""Command-line harness: simulate, train, evaluate, sweeps, heat maps.

Every command writes a ``manifest.json`` capturing its resolved options and
a content hash of the scenario; re-running with ``--from-manifest`` (plus a
fresh ``--out``) reproduces the CSV outputs byte for byte.

Outputs are plain CSV and SVG only. Episode-level parallelism is capped by
the HEADWAY_CTRL_THREADS environment variable; results are merged in seed
order, so the worker count never changes the output.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path as FsPath

import numpy as np

from .engine import TRACE_CSV_HEADER, run_episode, trace_to_csv_rows
from .heatmap import write_heatmap
from .network import ConfigError, ScenarioError
from .policies import CheckpointError, PolicyParams, make_controller, save_checkpoint
from .ppo import LEARNING_CURVE_HEADER, TrainConfig, evaluate_policy, train
from .scenario import (
    Scenario,
    ScenarioFileError,
    load_scenario,
    scenario_to_dict,
)

MANIFEST_NAME = "manifest.json"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CHECKPOINT = 3


def _max_workers(n_jobs: int) -> int:
    cap = os.environ.get("HEADWAY_CTRL_THREADS")
    if cap is not None:
        try:
            cap = max(1, int(cap))
        except ValueError:
            cap = 1
    else:
        cap = min(4, os.cpu_count() or 1)
    return max(1, min(cap, n_jobs))


def _run_episodes(scenario: Scenario, controller, seeds):
    """Run one episode per seed; output order follows the seed list."""
    workers = _max_workers(len(seeds))
    if workers == 1:
        return [run_episode(scenario, controller, s) for s in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_episode, scenario, controller, s) for s in seeds]
        return [f.result() for f in futures]


def write_csv(path: FsPath, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _scenario_sha256(scenario: Scenario) -> str:
    canon = json.dumps(scenario_to_dict(scenario), sort_keys=True).encode()
    return hashlib.sha256(canon).hexdigest()


def _write_manifest(out_dir: FsPath, command: str, options: dict, scenario: Scenario) -> None:
    doc = {
        "format": "headwayctl-manifest",
        "command": command,
        "options": options,
        "scenario_sha256": _scenario_sha256(scenario),
    }
    (out_dir / MANIFEST_NAME).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _load_manifest(path: str) -> tuple[str, dict]:
    doc = json.loads(FsPath(path).read_text())
    if doc.get("format") != "headwayctl-manifest":
        raise ConfigError(f"not a run manifest: {path}")
    return doc["command"], doc["options"]


def _summary_rows(seeds, ttts, exits):
    rows = [[s, t, e] for s, t, e in zip(seeds, ttts, exits)]
    rows.append(["mean", float(np.mean(ttts)), float(np.mean(exits))])
    rows.append(["std", float(np.std(ttts)), float(np.std(exits))])
    return rows


def _with_mu(scenario: Scenario, mu: float) -> Scenario:
    return replace(scenario, sim=replace(scenario.sim, mu_h=mu, mu_a=mu))


def _with_alpha(scenario: Scenario, alpha: float) -> Scenario:
    demands = tuple(replace(d, autonomy_fraction=alpha) for d in scenario.demands)
    return replace(scenario, demands=demands)


# ----------------------------------------------------------------------
# commands

def cmd_simulate(options: dict, write_traces: bool = True) -> int:
    scenario = load_scenario(options["scenario"])
    controller = make_controller(options["controller"], scenario.network)
    seeds = options["seeds"]
    out = FsPath(options["out"])
    out.mkdir(parents=True, exist_ok=True)

    traces = _run_episodes(scenario, controller, seeds)
    if write_traces:
        for seed, trace in zip(seeds, traces):
            write_csv(out / f"trace_seed{seed}.csv", TRACE_CSV_HEADER, trace_to_csv_rows(trace))
    ttts = [t.ttt for t in traces]
    exits = [t.total_exited for t in traces]
    write_csv(out / "summary.csv", ["seed", "ttt", "total_exited"],
              _summary_rows(seeds, ttts, exits))
    _write_manifest(out, options["command"], options, scenario)
    print(f"{options['controller']}: mean TTT {np.mean(ttts):.1f} over {len(seeds)} seed(s)")
    return EXIT_OK


def cmd_evaluate(options: dict) -> int:
    return cmd_simulate(options, write_traces=False)


def cmd_train(options: dict) -> int:
    scenario = load_scenario(options["scenario"])
    out = FsPath(options["out"])
    out.mkdir(parents=True, exist_ok=True)

    config = TrainConfig(
        total_steps=options["budget"],
        seed=options["seeds"][0],
        n_steps=options["n_steps"],
        n_envs=options["n_envs"],
    )
    if options["budget"] == 0:
        print("warning: --budget 0, writing an untrained checkpoint", file=sys.stderr)
    params, curve = train(scenario, config)
    save_checkpoint(params, out / "checkpoint.json")
    write_csv(out / "learning_curve.csv", LEARNING_CURVE_HEADER,
              [[row[k] for k in LEARNING_CURVE_HEADER] for row in curve])
    _write_manifest(out, "train", options, scenario)
    if curve:
        print(f"trained {options['budget']} decision steps; "
              f"best eval TTT {curve[-1]['best_eval_ttt']:.1f}")
    return EXIT_OK


def cmd_sweep_mu(options: dict) -> int:
    mus = options["mu"]
    if not mus:
        raise ConfigError("empty mu list")
    scenario = load_scenario(options["scenario"])
    seeds = options["seeds"]
    out = FsPath(options["out"])
    out.mkdir(parents=True, exist_ok=True)

    rows = []
    for mu in mus:
        sc = _with_mu(scenario, mu)
        if options["budget"] > 0:
            params, _ = train(sc, TrainConfig(total_steps=options["budget"],
                                              seed=seeds[0],
                                              n_steps=options["n_steps"],
                                              n_envs=options["n_envs"]))
            ttts = evaluate_policy(sc, params, seeds)
        else:
            controller = make_controller(options["controller"], sc.network)
            ttts = [t.ttt for t in _run_episodes(sc, controller, seeds)]
        rows.append([mu, float(np.mean(ttts)), float(np.std(ttts)), len(seeds)])
    write_csv(out / "sweep_mu.csv", ["mu", "mean_ttt", "std_ttt", "n_seeds"], rows)
    options["mu_axis_scale"] = "log"
    _write_manifest(out, "sweep-mu", options, scenario)
    return EXIT_OK


def cmd_sweep_alpha(options: dict) -> int:
    alphas = options["alpha"]
    if not alphas:
        raise ConfigError("empty alpha list")
    for a in alphas:
        if not 0.0 <= a <= 1.0:
            raise ConfigError(f"alpha {a} outside [0, 1]")
    scenario = load_scenario(options["scenario"])
    seeds = options["seeds"]
    out = FsPath(options["out"])
    out.mkdir(parents=True, exist_ok=True)

    rows = []
    for alpha in alphas:
        sc = _with_alpha(scenario, alpha)
        if options["budget"] > 0:
            params, _ = train(sc, TrainConfig(total_steps=options["budget"],
                                              seed=seeds[0],
                                              n_steps=options["n_steps"],
                                              n_envs=options["n_envs"]))
            policy_ttts = evaluate_policy(sc, params, seeds)
        elif options["controller"].startswith("policy:"):
            controller = make_controller(options["controller"], sc.network)
            policy_ttts = [t.ttt for t in _run_episodes(sc, controller, seeds)]
        else:
            # No checkpoint and no training budget: evaluate a freshly
            # initialized policy so the column is still well defined.
            from .engine import TrafficEnv

            env = TrafficEnv(sc)
            params = PolicyParams.new(env.obs_dim, sc.network.n_links,
                                      np.random.default_rng(seeds[0]),
                                      beta_min_m=sc.network.beta_min_m,
                                      beta_max_m=sc.network.beta_max_m)
            policy_ttts = evaluate_policy(sc, params, seeds)
        row = [alpha, float(np.mean(policy_ttts)), float(np.std(policy_ttts))]
        for baseline in ("uniform", "min"):
            controller = make_controller(baseline, sc.network)
            ttts = [t.ttt for t in _run_episodes(sc, controller, seeds)]
            row.extend([float(np.mean(ttts)), float(np.std(ttts))])
        rows.append(row)
    write_csv(out / "sweep_alpha.csv",
              ["alpha", "policy_mean_ttt", "policy_std_ttt",
               "uniform_mean_ttt", "uniform_std_ttt", "min_mean_ttt", "min_std_ttt"],
              rows)
    _write_manifest(out, "sweep-alpha", options, scenario)
    return EXIT_OK


def cmd_heatmap(options: dict) -> int:
    scenario = load_scenario(options["scenario"])
    trace_path = FsPath(options["trace"])
    if not trace_path.exists():
        raise ScenarioFileError(f"trace not found: {trace_path}")
    with open(trace_path, newline="") as fh:
        reader = csv.DictReader(fh)
        records = list(reader)
    if not records:
        raise ConfigError("empty trace")
    n_links = scenario.network.n_links
    times = sorted({float(r["t_s"]) for r in records})
    t_index = {t: i for i, t in enumerate(times)}
    grid = np.zeros((n_links, len(times)))
    jam = scenario.network.jam_density_array()
    for r in records:
        li = int(r["link_id"])
        grid[li, t_index[float(r["t_s"])]] = float(r["density"]) / jam[li]
    out = FsPath(options["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_heatmap(grid, scenario.sim.dt_s, out / "heatmap.svg")
    _write_manifest(out, "heatmap", options, scenario)
    return EXIT_OK


# ----------------------------------------------------------------------
# argument plumbing

def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="headwayctl",
        description="Mixed-autonomy traffic simulation with dynamic headway control",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, controller_default="uniform"):
        p.add_argument("--scenario", default="braess5",
                       help="built-in name (braess5, braess8) or scenario JSON path")
        p.add_argument("--out", required=False, default=None, help="output directory")
        p.add_argument("--seed", type=_int_list, default=[0], dest="seeds",
                       help="comma-separated seed list")
        p.add_argument("--controller", default=controller_default,
                       help="uniform | min | policy:<checkpoint.json>")
        p.add_argument("--budget", type=int, default=0, help="training decision-step budget")
        p.add_argument("--mu", type=_float_list, default=[], help="comma-separated mu values")
        p.add_argument("--alpha", type=_float_list, default=[], help="comma-separated alphas")
        p.add_argument("--n-steps", type=int, default=2048, dest="n_steps")
        p.add_argument("--n-envs", type=int, default=8, dest="n_envs")
        p.add_argument("--trace", default=None, help="trace CSV (heatmap command)")
        p.add_argument("--from-manifest", default=None, dest="from_manifest",
                       help="re-run with the options stored in a manifest")

    for name in ("simulate", "train", "evaluate", "sweep-mu", "sweep-alpha", "heatmap"):
        common(sub.add_parser(name))
    return parser


_DISPATCH = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "sweep-mu": cmd_sweep_mu,
    "sweep-alpha": cmd_sweep_alpha,
    "heatmap": cmd_heatmap,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    options = {
        "command": args.command,
        "scenario": args.scenario,
        "out": args.out,
        "seeds": args.seeds,
        "controller": args.controller,
        "budget": args.budget,
        "mu": args.mu,
        "alpha": args.alpha,
        "n_steps": args.n_steps,
        "n_envs": args.n_envs,
        "trace": args.trace,
    }
    command = args.command
    if args.from_manifest:
        try:
            command, stored = _load_manifest(args.from_manifest)
        except (OSError, json.JSONDecodeError, ConfigError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        stored = dict(stored)
        if args.out is not None:
            stored["out"] = args.out
        options = stored
        options["command"] = command
    if options.get("out") is None:
        print("error: --out is required", file=sys.stderr)
        return EXIT_USAGE

    try:
        return _DISPATCH[command](options)
    except CheckpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except (ScenarioFileError, ScenarioError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
