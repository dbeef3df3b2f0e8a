"""Command-line entry point: ``dualbrain run | sweep | replay``.

Exit codes for ``run``: 0 mission success, 1 configuration error, 2 safety
abort, 3 step budget exceeded, 4 mission finished outside the success band,
5 planner unavailable.  ``replay`` exits 1 when the recomputed metrics differ
from the stored ones.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .brain import (
    ExternalPlanner,
    ExternalPolicy,
    GeometricPlanner,
    GeometricPolicy,
    MissionConfig,
    MissionLog,
    ScriptedPolicy,
    SingleBrainPolicy,
    World,
    run_mission,
)
from .errors import ScenarioError
from .metrics import compute_metrics
from .world import Scenario, load_scenario

EXIT_OK, EXIT_CONFIG, EXIT_ABORT, EXIT_BUDGET, EXIT_UNSUCCESSFUL, EXIT_PLANNER = 0, 1, 2, 3, 4, 5
OUTCOME_EXIT = {
    "safety_abort": EXIT_ABORT,
    "budget_exceeded": EXIT_BUDGET,
    "planner_unavailable": EXIT_PLANNER,
}
POLICIES = ("geometric", "sbm-geometric", "external", "sbm-external", "scripted-<name>")

log = logging.getLogger("dualbrain")


class ConfigError(Exception):
    pass


def make_agents(scenario: Scenario, policy: str, endpoint: str | None = None, timeout_s: float = 10.0, model: str = "default"):
    """Resolve a policy name to (cerebellum, planner, mode)."""
    if policy == "geometric":
        return GeometricPolicy(), GeometricPlanner(vehicle_radius=scenario.vehicle_radius), "dbm"
    if policy == "sbm-geometric":
        return SingleBrainPolicy(), None, "sbm"
    if policy in ("external", "sbm-external"):
        if not endpoint:
            raise ConfigError(f"policy {policy!r} needs --endpoint")
        if policy == "sbm-external":
            return ExternalPolicy(endpoint, model, timeout_s, prompt="sbm_v1"), None, "sbm"
        return ExternalPolicy(endpoint, model, timeout_s), ExternalPlanner(endpoint, model, timeout_s), "dbm"
    if policy.startswith("scripted-"):
        key = policy[len("scripted-") :]
        if key not in scenario.scripted:
            known = ", ".join(f"scripted-{k}" for k in scenario.scripted) or "none"
            raise ConfigError(f"scenario {scenario.name!r} has no script {key!r} (available: {known})")
        agent = ScriptedPolicy(scenario.scripted[key], name=policy)
        return agent, GeometricPlanner(vehicle_radius=scenario.vehicle_radius), "dbm"
    raise ConfigError(f"unknown policy {policy!r}; choose from {', '.join(POLICIES)}")


def execute(scenario: Scenario, policy: str, seed: int, max_steps: int | None = None, endpoint=None, timeout_s=10.0, model="default"):
    agent, planner, mode = make_agents(scenario, policy, endpoint, timeout_s, model)
    result = run_mission(World(scenario, seed), agent, planner, MissionConfig(mode=mode, max_steps=max_steps))
    return result, compute_metrics(result.log.records)


def exit_code(outcome: str, success: bool) -> int:
    if success:
        return EXIT_OK
    return OUTCOME_EXIT.get(outcome, EXIT_UNSUCCESSFUL)


# --- run ----------------------------------------------------------------------


def cmd_run(args) -> int:
    name = args.scenario or args.scenario_pos
    if not name:
        raise ConfigError("no scenario given")
    scenario = load_scenario(name)
    seed = scenario.seed if args.seed is None else args.seed
    result, metrics = execute(scenario, args.policy, seed, args.max_steps, args.endpoint, args.timeout_s, args.model)
    out = Path(args.out or Path("runs") / f"{scenario.name}-{args.policy}-{seed}")
    out.mkdir(parents=True, exist_ok=True)
    result.log.write(out / "mission_log.jsonl")
    (out / "metrics.json").write_text(metrics.dumps())
    rng = "n/a" if metrics.final_target_range is None else f"{metrics.final_target_range:.3f} m"
    print(
        f"{scenario.name} [{args.policy}, seed {seed}]: {metrics.outcome}, "
        f"success={metrics.success}, steps={metrics.steps}, final range {rng}"
    )
    if result.error is not None:
        print(f"  reason: {result.error}")
    print(f"  log and metrics written to {out}")
    return exit_code(metrics.outcome, metrics.success)


# --- sweep ----------------------------------------------------------------------


def _parse_grid(items: list[str]) -> dict[str, list]:
    grid = {}
    for item in items:
        key, sep, values = item.partition("=")
        if not sep or not values:
            raise ConfigError(f"bad --set {item!r}; expected key=v1,v2,...")
        parsed = []
        for v in values.split(","):
            try:
                parsed.append(json.loads(v))
            except json.JSONDecodeError:
                parsed.append(v)
        grid[key.strip()] = parsed
    return grid


def _parse_seeds(spec: str) -> list[int]:
    seeds = []
    for part in spec.split(","):
        lo, sep, hi = part.partition("-")
        try:
            seeds.extend(range(int(lo), int(hi) + 1) if sep else [int(lo)])
        except ValueError:
            raise ConfigError(f"bad seed spec {spec!r}") from None
    return seeds


def _run_cell(cell: tuple) -> dict:
    index, path, policy, seed, params, max_steps = cell
    scenario = load_scenario(path)
    try:
        scenario = replace(scenario, **params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"cannot apply {params}: {exc}") from exc
    _, m = execute(scenario, policy, seed, max_steps)
    row = {"cell": index, "policy": policy, "seed": seed, **params}
    row.update(
        success=m.success,
        outcome=m.outcome,
        steps=m.steps,
        path_length=round(m.path_length, 6),
        min_obstacle_clearance=None if m.min_obstacle_clearance is None else round(m.min_obstacle_clearance, 6),
        final_target_range=None if m.final_target_range is None else round(m.final_target_range, 6),
        total_effort=round(m.total_effort, 6),
        invalid_decision_count=m.invalid_decision_count,
    )
    return row


def cmd_sweep(args) -> int:
    name = args.scenario or args.scenario_pos
    if not name:
        raise ConfigError("no scenario given")
    load_scenario(name)  # fail early on a bad file
    grid = _parse_grid(args.set or [])
    seeds = _parse_seeds(args.seeds)
    keys = list(grid)
    combos = list(itertools.product(*grid.values())) if keys else [()]
    cells = []
    for policy in args.policy:
        for combo in combos:
            for seed in seeds:
                cells.append((len(cells), name, policy, seed, dict(zip(keys, combo)), args.max_steps))
    workers = args.workers or os.cpu_count() or 1
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_cell, cells))
    else:
        rows = [_run_cell(c) for c in cells]
    rows.sort(key=lambda r: r["cell"])
    fields = list(rows[0].keys())
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.DictWriter(out, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if args.out:
            out.close()
    groups: dict[tuple, list[bool]] = {}
    for r in rows:
        groups.setdefault((r["policy"],) + tuple(r[k] for k in keys), []).append(r["success"])
    for key, wins in groups.items():
        label = ", ".join([key[0]] + [f"{k}={v}" for k, v in zip(keys, key[1:])])
        print(f"{label}: success {sum(wins)}/{len(wins)}", file=sys.stderr)
    return EXIT_OK


# --- replay -----------------------------------------------------------------------

TRAJECTORY_COLUMNS = ("step", "phase", "t", "x", "y", "theta", "v", "r", "tau_v", "tau_r", "ref", "d_v_hat", "d_r_hat")


def cmd_replay(args) -> int:
    log_path = Path(args.log)
    if not log_path.exists():
        raise ConfigError(f"{log_path}: no such log")
    mlog = MissionLog.read(log_path)
    metrics = compute_metrics(mlog.records)
    stored_path = Path(args.metrics) if args.metrics else log_path.with_name("metrics.json")
    identical = None
    if stored_path.exists():
        identical = stored_path.read_text() == metrics.dumps()
    header = mlog.of_type("header")[0]
    print(
        f"{header['scenario']} [{header['policy']}, seed {header['seed']}, {header['mode']}]: "
        f"{metrics.outcome}, success={metrics.success}, steps={metrics.steps}, "
        f"path {metrics.path_length:.3f} m, effort {metrics.total_effort:.1f}",
        file=sys.stderr,
    )
    for d in mlog.of_type("decision"):
        dec = d["decision"]
        print(f"  step {d['step']:2d}: {dec['decision']}/{dec['velocity']}  {dec['reasoning']}", file=sys.stderr)
    out = open(args.csv, "w", newline="") if args.csv else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(TRAJECTORY_COLUMNS)
        for t in mlog.of_type("tick"):
            writer.writerow([t[c] for c in TRAJECTORY_COLUMNS])
    finally:
        if args.csv:
            out.close()
    if identical is None:
        print(f"no stored metrics at {stored_path}; nothing to compare", file=sys.stderr)
        return EXIT_OK
    print(f"metrics {'identical to' if identical else 'DIFFER from'} {stored_path}", file=sys.stderr)
    return EXIT_OK if identical else EXIT_CONFIG


# --- argument parsing -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dualbrain", description="Dual-brain AUV mission simulator.")
    p.add_argument("-v", "--verbose", action="store_true", help="log incidents to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_args(sp):
        sp.add_argument("scenario_pos", nargs="?", metavar="SCENARIO", help="built-in name or TOML path")
        sp.add_argument("--scenario", help="built-in name or TOML path")
        sp.add_argument("--max-steps", type=int, default=None)

    run = sub.add_parser("run", help="run one mission")
    scenario_args(run)
    run.add_argument("--policy", default="geometric", help=f"one of {', '.join(POLICIES)}")
    run.add_argument("--seed", type=int, default=None, help="defaults to the scenario's seed")
    run.add_argument("--out", help="output directory (default runs/<scenario>-<policy>-<seed>)")
    run.add_argument("--endpoint", help="chat-completion URL for the external policy")
    run.add_argument("--timeout-s", type=float, default=10.0)
    run.add_argument("--model", default="default")
    run.set_defaults(func=cmd_run)

    sw = sub.add_parser("sweep", help="batch-run a parameter grid")
    scenario_args(sw)
    sw.add_argument("--policy", nargs="+", default=["geometric", "sbm-geometric"])
    sw.add_argument("--seeds", default="0-9", help="e.g. 0-19 or 1,2,5")
    sw.add_argument("--set", action="append", metavar="KEY=V1,V2", help="scenario field to vary, e.g. turbidity=0.5,18")
    sw.add_argument("--workers", type=int, default=None)
    sw.add_argument("--out", help="CSV path (default stdout)")
    sw.set_defaults(func=cmd_sweep)

    rp = sub.add_parser("replay", help="recompute metrics from a log and emit the trajectory")
    rp.add_argument("log")
    rp.add_argument("--metrics", help="stored metrics.json (default: next to the log)")
    rp.add_argument("--csv", help="trajectory CSV path (default stdout)")
    rp.set_defaults(func=cmd_replay)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
