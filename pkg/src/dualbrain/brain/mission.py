"""Mission orchestration: plan once, then observe / decide / execute.

One decision is taken per motion primitive.  In dual-brain mode (``dbm``) the
cloud plan is requested over the link at t=0 and the cerebellum works through
its sub-goals; in single-brain mode (``sbm``) one policy gets the raw
instruction on every step and there is no plan.

Everything that happens is appended to a :class:`MissionLog`, one JSON object
per line with sorted keys, so equal seeds give byte-identical logs.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from ..errors import (
    InvalidPlan,
    ParseFailure,
    PlannerUnavailable,
    SafetyAbort,
    StepBudgetExceeded,
)
from ..estimator import DragEstimate
from ..executor import ExecutorConfig, execute_primitive
from ..hydro import VehicleState
from ..link import LinkState, try_send
from ..world import Observation, Scenario, check_collision, observe
from .policies import CerebellumPolicy, CloudPolicy
from .schema import FALLBACK_DECISION, Decision, MissionPlan, validate_decision, validate_plan

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MissionConfig:
    mode: str = "dbm"  # "dbm" | "sbm"
    max_steps: int | None = None  # None -> scenario.max_steps
    retries: int = 2
    plan_retries: int = 2
    byte_budget: int = 2048  # cerebellum request size limit
    history_window: int = 12
    planner_frames: int = 20  # observations merged for the planning snapshot

    def __post_init__(self):
        if self.mode not in ("dbm", "sbm"):
            raise ValueError(f"unknown mission mode {self.mode!r}")
        if self.retries < 0 or self.plan_retries < 0 or self.byte_budget <= 0 or self.history_window < 0:
            raise ValueError("retries, budget and history window must be non-negative")


class MissionLog:
    """Append-only list of records, serialised as sorted-key JSON lines."""

    def __init__(self, records: list[dict] | None = None, sink: Callable[[str], None] | None = None):
        self.records: list[dict] = []
        self.sink = sink
        for r in records or []:
            self.append(r)

    def append(self, record: dict) -> None:
        self.records.append(record)
        if self.sink is not None:
            self.sink(json.dumps(record, sort_keys=True))

    def of_type(self, kind: str) -> list[dict]:
        return [r for r in self.records if r["type"] == kind]

    def dumps(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def read(cls, path: str | Path) -> "MissionLog":
        lines = Path(path).read_text().splitlines()
        return cls([json.loads(line) for line in lines if line.strip()])


@dataclass
class MissionResult:
    outcome: str  # "mission_done" | "safety_abort" | "budget_exceeded" | "planner_unavailable"
    log: MissionLog
    plan: MissionPlan | None
    final_state: VehicleState
    steps: int
    error: Exception | None = None

    @property
    def mission_done(self) -> bool:
        return self.outcome == "mission_done"


@dataclass(frozen=True)
class DecisionTrace:
    decision: Decision
    attempts: int
    fallback: bool
    request_bytes: int
    rejects: tuple[str, ...] = ()


@dataclass
class World:
    """Scenario plus its independent seeded streams."""

    scenario: Scenario
    seed: int
    perception_rng: np.random.Generator = field(init=False)
    imu_rng: np.random.Generator = field(init=False)
    link_rng: np.random.Generator = field(init=False)

    def __post_init__(self):
        p, i, k = np.random.SeedSequence(self.seed).spawn(3)
        self.perception_rng = np.random.default_rng(p)
        self.imu_rng = np.random.default_rng(i)
        self.link_rng = np.random.default_rng(k)

    def observe(self, state: VehicleState) -> Observation:
        return observe(self.scenario, state, self.perception_rng)


def plan_mission(instruction: str, initial_obs: Observation | dict, planner: CloudPolicy, retries: int = 2) -> MissionPlan:
    """Ask the planner for a plan; re-prompt with the parse error on failure."""
    if not instruction or not instruction.strip():
        raise ValueError("instruction is empty")
    obs = initial_obs.as_dict() if isinstance(initial_obs, Observation) else initial_obs
    feedback = None
    for _ in range(retries + 1):
        raw = planner.plan(instruction, obs, feedback)  # PlannerUnavailable propagates
        try:
            return validate_plan(raw, instruction)
        except ParseFailure as exc:
            feedback = f"{exc} near: {exc.span}"
        except ValueError as exc:
            feedback = str(exc)
    raise InvalidPlan(f"no valid plan after {retries + 1} attempts: {feedback}")


def _encode(request: dict) -> bytes:
    return json.dumps(request, sort_keys=True, separators=(",", ":")).encode()


def build_request(
    observation: Observation,
    history: list[dict],
    budget: int,
    window: int,
    subgoal: dict | None = None,
    instruction: str | None = None,
) -> dict:
    """Assemble the cerebellum request and trim it to ``budget`` bytes.

    The oldest history entries go first, then the farthest detections.
    """
    req = {
        "observation": observation.as_dict(),
        "history": list(history[-window:]) if window else [],
    }
    if subgoal is not None:
        req["subgoal"] = subgoal
    if instruction is not None:
        req["instruction"] = instruction
    while len(_encode(req)) > budget and req["history"]:
        req["history"] = req["history"][1:]
    while len(_encode(req)) > budget and req["observation"]["detections"]:
        req["observation"]["detections"] = req["observation"]["detections"][:-1]
    if len(_encode(req)) > budget:
        raise ValueError(f"request exceeds the {budget}-byte budget even when trimmed")
    return req


def decide_step(request: dict, policy: CerebellumPolicy, retries: int = 2) -> DecisionTrace:
    """Query the policy, retrying with the parse error; fall back to hold/low."""
    size = len(_encode(request))
    feedback = None
    rejects = []
    for attempt in range(1, retries + 2):
        try:
            raw = policy.respond(request, feedback)
        except Exception as exc:  # a misbehaving policy must not take the vehicle down
            raw = ""
            rejects.append(f"policy raised {type(exc).__name__}: {exc}")
            feedback = rejects[-1]
            continue
        try:
            return DecisionTrace(validate_decision(raw), attempt, False, size, tuple(rejects))
        except ParseFailure as exc:
            feedback = f"{exc} near: {exc.span}"
            rejects.append(feedback)
    return DecisionTrace(FALLBACK_DECISION, retries + 1, True, size, tuple(rejects))


def _subgoal_wire(plan: MissionPlan, goal, standoff: float) -> dict:
    d = goal.as_dict()
    d["standoff"] = standoff
    d["last"] = goal.index == len(plan.subgoals)
    if plan.target_id is not None:
        d["target"] = plan.target_id
    if plan.obstacle_ids:
        d["avoid"] = list(plan.obstacle_ids)
    if plan.target_hint is not None:
        d["target_hint"] = [round(plan.target_hint[0], 4), round(plan.target_hint[1], 4)]
    return d


def _merge_frames(world: World, state: VehicleState, frames: int) -> Observation:
    """Best detection per object over a burst of frames from the same pose."""
    best: dict[str, object] = {}
    vis = 0.0
    for _ in range(max(frames, 1)):
        obs = world.observe(state)
        vis = obs.visibility_range
        for d in obs.detections:
            if d.object_id not in best:
                best[d.object_id] = d
    dets = tuple(sorted(best.values(), key=lambda d: (d.range, d.object_id)))
    return Observation(dets, vis, state.t)


def _header(world: World, config: MissionConfig, policy: CerebellumPolicy, max_steps: int, dt: float) -> dict:
    sc = world.scenario
    s = sc.start
    return {
        "type": "header",
        "scenario": sc.name,
        "seed": world.seed,
        "mode": config.mode,
        "policy": policy.name,
        "instruction": sc.instruction,
        "standoff": sc.standoff,
        "vehicle_radius": sc.vehicle_radius,
        "target_id": sc.target_id,
        "objects": [o.as_dict() for o in sc.obstacles],
        "tank": sc.tank.as_dict(),
        "start": {"x": s.x, "y": s.y, "theta": s.theta},
        "dt": dt,
        "max_steps": max_steps,
    }


def run_mission(
    world: World,
    policy: CerebellumPolicy,
    planner: CloudPolicy | None = None,
    config: MissionConfig | None = None,
    plan: MissionPlan | None = None,
    sink: Callable[[str], None] | None = None,
) -> MissionResult:
    """Run a complete mission and return its outcome and log.

    Safety aborts, budget overruns and planner failures end the mission and
    are reported in the result (and the log's final ``end`` record) rather
    than raised.  ``plan`` skips the planning round-trip in dual-brain mode.
    """
    cfg = config or MissionConfig()
    sc = world.scenario
    max_steps = cfg.max_steps if cfg.max_steps is not None else sc.max_steps
    ex_cfg = ExecutorConfig(mpc=sc.mpc, estimator=sc.estimator, thrusters=sc.thrusters)
    mlog = MissionLog(sink=sink)
    mlog.append(_header(world, cfg, policy, max_steps, ex_cfg.dt))
    state = sc.start
    estimate = DragEstimate.initial(sc.hydro, sc.estimator)
    link = LinkState(sc.link, world.link_rng)

    def finish(outcome: str, steps: int, error: Exception | None = None, mission_done: bool = False):
        mlog.append({
            "type": "end",
            "outcome": outcome,
            "reason": str(error) if error else "",
            "mission_done": mission_done,
            "steps": steps,
            "subgoals_done": [g.done for g in plan.subgoals] if plan is not None else [],
            "final": state.as_dict(),
            "cloud_messages": link.delivered,
        })
        return MissionResult(outcome, mlog, plan, state, steps, error)

    if cfg.mode == "dbm":
        if plan is None:
            if planner is None:
                raise ValueError("dual-brain mode needs a planner or a plan")
            snapshot = _merge_frames(world, state, cfg.planner_frames)
            try:
                plan = plan_mission(sc.instruction, snapshot, planner, cfg.plan_retries)
            except (PlannerUnavailable, InvalidPlan) as exc:
                mlog.append({"type": "incident", "step": 0, "message": str(exc)})
                return finish("planner_unavailable", 0, exc)
        payload = plan.to_json().encode()
        if not try_send(link, payload, state.t):
            exc = PlannerUnavailable(f"plan of {len(payload)} bytes not delivered over the link")
            mlog.append({"type": "incident", "step": 0, "message": str(exc)})
            return finish("planner_unavailable", 0, exc)
        arrived = link.receive(state.t + sc.link.latency)
        state = VehicleState(state.x, state.y, state.theta, state.v, state.r, arrived[-1].arrives_at)
        mlog.append({"type": "plan", "t": state.t, "bytes": len(payload), "plan": plan.as_dict()})

    history: list[dict] = []
    for step in range(1, max_steps + 1):
        obs = world.observe(state)
        if cfg.mode == "dbm":
            goal = plan.active
            sg_wire = _subgoal_wire(plan, goal, sc.standoff)
            request = build_request(obs, history, cfg.byte_budget, cfg.history_window, subgoal=sg_wire)
        else:
            goal = None
            request = build_request(obs, history, cfg.byte_budget, cfg.history_window, instruction=sc.instruction)
        trace = decide_step(request, policy, cfg.retries)
        dec = trace.decision
        mlog.append({
            "type": "decision",
            "step": step,
            "t": state.t,
            "subgoal": goal.index if goal else None,
            "observation": request["observation"],
            "request_bytes": trace.request_bytes,
            "attempts": trace.attempts,
            "fallback": trace.fallback,
            "rejects": list(trace.rejects),
            "decision": dec.as_dict(),
        })
        if trace.fallback:
            msg = f"step {step}: no valid decision after {trace.attempts} attempts; holding"
            log.warning(msg)
            mlog.append({"type": "incident", "step": step, "message": msg})

        cmd = dec.command
        mode = cmd.mode.value

        def tick_sink(rec: dict, _step=step, _mode=mode) -> None:
            mlog.append({"type": "tick", "step": _step, "mode": _mode, **rec})

        state, prim = execute_primitive(cmd, state, sc.hydro, estimate, ex_cfg, world.imu_rng, tick_sink)
        estimate = prim.final_estimate
        mlog.append({
            "type": "primitive",
            "step": step,
            "command": str(cmd),
            "mode": prim.mode.value,
            "ticks": len(prim.trajectory),
            "braking_ticks": prim.braking_ticks,
            "saturation_ticks": prim.saturation_ticks,
            "residual_v": prim.residual_v,
            "residual_r": prim.residual_r,
            "brake_timeout": prim.brake_timeout,
        })
        for msg in prim.incidents:
            mlog.append({"type": "incident", "step": step, "message": msg})

        for tick in prim.trajectory:
            contact = check_collision(sc, tick.state)
            if contact is not None:
                what = contact.object_id or "tank wall"
                exc = SafetyAbort(f"step {step}: {contact.kind} contact with {what} at t={tick.state.t:.2f} s")
                mlog.append({"type": "incident", "step": step, "message": str(exc)})
                return finish("safety_abort", step, exc)

        sighting = None
        if cfg.mode == "dbm" and plan.target_id is not None:
            d = obs.find(plan.target_id)
            if d is not None:
                sighting = [round(d.range, 4), round(d.bearing, 4)]
        history.append({
            "step": step,
            "subgoal": goal.index if goal else None,
            "decision": dec.decision.value,
            "velocity": dec.velocity.value,
            "target": sighting,
        })
        if cfg.mode == "dbm" and dec.sub_task_done and goal is not None:
            goal.mark_done()
        if dec.mission_done:
            return finish("mission_done", step, None, True)
        if cfg.mode == "dbm" and plan.active is None:
            return finish("mission_done", step, None, True)

    exc = StepBudgetExceeded(f"mission not finished after {max_steps} steps")
    mlog.append({"type": "incident", "step": max_steps, "message": str(exc)})
    return finish("budget_exceeded", max_steps, exc)
