"""Decision policies (cerebellum) and mission planners (cloud brain).

Every policy answers with raw text, exactly as a language model would, and the
caller runs it through :func:`validate_decision`.  The geometric policies are
deterministic rule sets over the wire request; they only see what the
bandwidth-limited request carries.
"""

from __future__ import annotations

import json
import math
import os
import re
import urllib.error
import urllib.request
from abc import ABC, abstractmethod
from importlib import resources
from string import Template
from typing import Iterable, Sequence

from ..errors import PlannerUnavailable
from ..profiles import SURGE_SPEEDS, UNIT_PROFILE_AREA, YAW_RATES, Level

STEP = {lvl.value: UNIT_PROFILE_AREA * v for lvl, v in SURGE_SPEEDS.items()}  # [m] per primitive
SWEEP = {lvl.value: UNIT_PROFILE_AREA * r for lvl, r in YAW_RATES.items()}  # [rad] per primitive

API_KEY_ENV = "DUALBRAIN_API_KEY"


def load_prompt(name: str) -> str:
    return resources.files("dualbrain").joinpath("prompts", f"{name}.txt").read_text()


def _reply(reasoning: str, decision: str, velocity: str = "low", sub_done: bool = False, mission_done: bool = False) -> str:
    return json.dumps(
        {
            "reasoning": reasoning,
            "decision": decision,
            "velocity": velocity,
            "sub_task_done": sub_done,
            "mission_done": mission_done,
        }
    )


class CerebellumPolicy(ABC):
    name = "policy"

    @abstractmethod
    def respond(self, request: dict, feedback: str | None = None) -> str:
        """Raw text answer to one wire request; ``feedback`` explains a rejected answer."""


class CloudPolicy(ABC):
    name = "planner"

    @abstractmethod
    def plan(self, instruction: str, observation: dict, feedback: str | None = None) -> str:
        """Raw text plan for ``instruction`` given the serialized initial observation."""


# --- scripted -----------------------------------------------------------------


class ScriptedPolicy(CerebellumPolicy):
    """Replays a fixed list of responses, one per call (retries included).

    Items may be decision tables or raw strings; raw strings are returned
    verbatim, which is how tests feed malformed output.  Once the script is
    exhausted the policy answers hold with ``mission_done``.
    """

    def __init__(self, items: Sequence[dict | str], name: str = "scripted"):
        self.items = list(items)
        self.name = name
        self.calls = 0

    def respond(self, request: dict, feedback: str | None = None) -> str:
        i = self.calls
        self.calls += 1
        if i >= len(self.items):
            return _reply("script exhausted", "hold", "low", True, True)
        item = self.items[i]
        if isinstance(item, str):
            return item
        return _reply(
            item.get("reasoning", ""),
            item["decision"],
            item.get("velocity", "low"),
            bool(item.get("sub_task_done", False)),
            bool(item.get("mission_done", False)),
        )


# --- geometric dual-brain cerebellum -------------------------------------------


def _to_point(rng: float, brg: float) -> tuple[float, float]:
    return rng * math.cos(brg), rng * math.sin(brg)


def _advance(p: tuple[float, float], decision: str, velocity: str) -> tuple[float, float]:
    """Move a body-frame point through one nominal primitive."""
    x, y = p
    if decision in ("forward", "backward"):
        return x - (STEP[velocity] if decision == "forward" else -STEP[velocity]), y
    if decision in ("left", "right"):
        a = SWEEP[velocity] if decision == "right" else -SWEEP[velocity]
        c, s = math.cos(a), math.sin(a)
        return c * x + s * y, -s * x + c * y
    return x, y


def target_belief(request: dict) -> tuple[float, float, str] | None:
    """(range, bearing, source) of the sub-goal's target.

    A fresh detection wins.  Otherwise the last sighting in the history (or
    the planner's hint, if the history reaches back to the first step) is
    dead-reckoned through the nominal motion of every later primitive.
    """
    sg = request.get("subgoal") or {}
    tid = sg.get("target")
    if tid is None:
        return None
    for d in request["observation"]["detections"]:
        if d["id"] == tid:
            return d["range"], d["bearing"], "seen"
    history = request.get("history", [])
    start, p = None, None
    for j in range(len(history) - 1, -1, -1):
        if history[j].get("target") is not None:
            start, p = j, _to_point(*history[j]["target"])
            break
    if p is None:
        hint = sg.get("target_hint")
        if hint is None or (history and history[0]["step"] != 1):
            return None
        start, p = 0, _to_point(*hint)
    for entry in history[start:]:
        p = _advance(p, entry["decision"], entry["velocity"])
    return math.hypot(*p), math.atan2(p[1], p[0]), "memory"


def _blocking(request: dict, exclude: str | None, reach: float, half_width: float):
    """Nearest detection inside the corridor swept by a forward move."""
    best = None
    for d in request["observation"]["detections"]:
        if d["id"] == exclude:
            continue
        x, y = _to_point(d["range"], d["bearing"])
        if 0.0 < x < reach and abs(y) < half_width and (best is None or d["range"] < best["range"]):
            best = d
    return best


def _turn_for(angle: float, levels: Iterable[str] = ("low", "medium", "high")) -> tuple[str, str, float]:
    """Turn whose nominal sweep best matches ``angle``; returns (dir, level, leftover)."""
    level = min(levels, key=lambda lv: abs(abs(angle) - SWEEP[lv]))
    leftover = abs(angle) - SWEEP[level]
    return ("right" if angle > 0 else "left"), level, leftover


class GeometricPolicy(CerebellumPolicy):
    """Rule-based cerebellum for dual-brain missions.

    Rules: steer away from an obstacle that blocks the forward corridor,
    slow down inside twice the standoff, declare done once inside the
    standoff band.  Lost targets are tracked by dead reckoning from the
    history window.
    """

    name = "geometric"

    def __init__(self, align_tol: float = 0.2, adjust_tol: float = 0.17, clearance: float = 0.35, margin: float = 0.15):
        self.align_tol = align_tol
        self.adjust_tol = adjust_tol
        self.clearance = clearance  # corridor half-width: vehicle radius + margin
        self.margin = margin

    def respond(self, request: dict, feedback: str | None = None) -> str:
        sg = request["subgoal"]
        kind = sg.get("kind", "transit")
        handler = getattr(self, f"_{kind}", self._transit)
        return handler(request, sg, target_belief(request))

    # each handler returns the raw reply

    def _forward(self, request, sg, velocity, reason, sub_done=False, mission_done=False):
        blocker = _blocking(request, sg.get("target"), STEP[velocity] + self.clearance, self.clearance)
        if blocker is not None:
            turn = "left" if blocker["bearing"] > 0 else "right"
            side = "right" if blocker["bearing"] > 0 else "left"
            return _reply(f"Obstacle {blocker['id']} detected {side}; turning {turn}.", turn, "medium")
        return _reply(reason, "forward", velocity, sub_done, mission_done)

    def _hold(self, request, sg, belief):
        return _reply("Sub-goal is to hold station.", "hold", "low", True, bool(sg.get("last")))

    def _search(self, request, sg, belief):
        side = sg.get("side") or "right"
        if belief is None:
            return _reply(f"Target not in view; scanning {side}.", side, "low")
        return _reply("Target acquired.", "hold", "low", True, bool(sg.get("last")))

    def _align(self, request, sg, belief):
        side = sg.get("side") or "right"
        if belief is None:
            return _reply(f"Target not in view; scanning {side}.", side, "low")
        rng, brg, src = belief
        goal = brg
        for d in request["observation"]["detections"]:
            if d["id"] in sg.get("avoid", ()):
                # heading tangent to a clearance circle around the obstacle
                off = math.asin(min(1.0, (self.clearance + self.margin) / max(d["range"] + 0.1, 1e-6)))
                tangent = d["bearing"] + (off if side == "right" else -off)
                goal = max(goal, tangent) if side == "right" else min(goal, tangent)
        if abs(goal) <= self.align_tol:
            return _reply(f"Heading aligned ({src} target at {brg:+.2f} rad).", "hold", "low", True)
        direction, level, left = _turn_for(goal)
        return _reply(
            f"Target {src} at {brg:+.2f} rad; turning {direction} to align.",
            direction, level, abs(left) <= self.align_tol,
        )

    def _transit(self, request, sg, belief):
        ds = sg["standoff"]
        vel = sg.get("velocity") or "medium"
        if belief is None:
            return self._forward(request, sg, vel, "No target information; continuing forward transit.")
        rng, brg, src = belief
        if abs(brg) > 0.35:
            direction, level, _ = _turn_for(brg, ("low", "medium"))
            return _reply(f"Target {src} drifted to {brg:+.2f} rad; correcting course.", direction, level)
        if rng > 2 * ds:
            return self._forward(request, sg, vel, f"Target {src} at {rng:.2f} m; transit.", rng - STEP[vel] <= 2 * ds)
        return self._forward(request, sg, "low", f"Target {src} at {rng:.2f} m, inside twice the standoff; slowing.", True)

    _detour = _transit

    def _adjust(self, request, sg, belief):
        ds = sg["standoff"]
        if belief is None:
            return _reply("Target lost with no memory; handing over.", "hold", "low", True)
        rng, brg, src = belief
        steps_here = sum(1 for e in request.get("history", []) if e.get("subgoal") == sg["index"])
        if steps_here >= 8:
            return _reply("Adjustment budget used; handing over.", "hold", "low", True)
        if abs(brg) > self.adjust_tol:
            direction, level, _ = _turn_for(brg, ("low",))
            return _reply(f"Target {src} at {brg:+.2f} rad; fine {direction} turn.", direction, "low")
        if rng > ds + 0.5:
            return self._forward(request, sg, "low", f"Target {src} at {rng:.2f} m; creeping closer.")
        if rng < ds - 0.1:
            return _reply(f"Target {src} at {rng:.2f} m is too close; backing off.", "backward", "low")
        return _reply(
            f"Target {src} at {rng:.2f} m within the standoff band and aligned; safety criterion met.",
            "hold", "low", True, True,
        )

    def _approach(self, request, sg, belief):
        ds = sg["standoff"]
        last = bool(sg.get("last"))
        if belief is None:
            return _reply("Target lost; holding rather than advancing blind.", "hold", "low")
        rng, brg, src = belief
        if abs(brg) > self.adjust_tol:
            direction, _, _ = _turn_for(brg, ("low",))
            return _reply(f"Target {src} at {brg:+.2f} rad; aligning before approach.", direction, "low")
        if rng > 2 * ds:
            return self._forward(request, sg, "medium", f"Target {src} at {rng:.2f} m; approaching.")
        if rng > ds:
            done = rng - STEP["low"] <= ds
            return self._forward(request, sg, "low", f"Target {src} at {rng:.2f} m; slow approach.", done, done and last)
        if rng < ds - 0.2:
            return _reply(f"Target {src} at {rng:.2f} m is too close; backing off.", "backward", "low")
        return _reply(f"Target {src} at {rng:.2f} m inside the standoff; holding.", "hold", "low", True, last)

    def _distance(self, request, sg, belief):
        travelled = 0.0
        for e in request.get("history", []):
            if e.get("subgoal") == sg["index"] and e["decision"] in ("forward", "backward"):
                travelled += STEP[e["velocity"]] * (1 if e["decision"] == "forward" else -1)
        remaining = sg["distance"] - travelled
        tol = STEP["low"] / 2
        if remaining <= tol:
            return _reply(f"Covered {travelled:.2f} m of {sg['distance']:.2f} m.", "hold", "low", True, bool(sg.get("last")))
        vel = "medium" if remaining >= STEP["medium"] - tol else "low"
        return self._forward(
            request, sg, vel, f"{remaining:.2f} m to go.", remaining - STEP[vel] <= tol, False
        )


# --- geometric single-brain baseline -------------------------------------------


class SingleBrainPolicy(CerebellumPolicy):
    """End-to-end baseline: instruction plus observation, no plan, no memory.

    It drives toward the target whenever it can see it and stops once it
    sees the target closer than ``stop_range``.  The request carries no
    numeric standoff, so "a safe distance" is this fixed notion of close.
    When the target is not in view it repeats its last translation command
    (forward if it has none), with no notion of where the target should be.
    """

    name = "sbm-geometric"

    def __init__(self, heading_tol: float = 0.35, stop_range: float = 0.5):
        self.heading_tol = heading_tol
        self.stop_range = stop_range

    def _find_target(self, request: dict):
        dets = request["observation"]["detections"]
        instr = request["instruction"].lower()
        tagged = [d for d in dets if d["class"] == "target"]
        if tagged:
            return min(tagged, key=lambda d: d["range"])
        pillars = [d for d in dets if d["class"] == "pillar"]
        if pillars and "farthest" in instr:
            return max(pillars, key=lambda d: d["range"])
        if pillars and ("nearest" in instr or "closest" in instr):
            return min(pillars, key=lambda d: d["range"])
        return None

    def respond(self, request: dict, feedback: str | None = None) -> str:
        tgt = self._find_target(request)
        if tgt is not None:
            if tgt["range"] <= self.stop_range:
                return _reply(f"Target at {tgt['range']:.2f} m; stopping.", "hold", "low", False, True)
            if abs(tgt["bearing"]) > self.heading_tol:
                direction = "right" if tgt["bearing"] > 0 else "left"
                return _reply(f"Target at {tgt['bearing']:+.2f} rad; turning {direction}.", direction, "low")
            return _reply(f"Target ahead at {tgt['range']:.2f} m; going forward.", "forward", "medium")
        for e in reversed(request.get("history", [])):
            if e["decision"] in ("forward", "backward"):
                return _reply("Target not visible; repeating last command.", e["decision"], e["velocity"])
        return _reply("Target not visible; heading forward.", "forward", "medium")


# --- geometric cloud planner ---------------------------------------------------


class GeometricPlanner(CloudPolicy):
    """Deterministic mission decomposition from the initial observation."""

    name = "geometric-planner"

    def __init__(self, corridor_margin: float = 0.2, vehicle_radius: float = 0.25):
        self.corridor_margin = corridor_margin  # extra lateral clearance beyond radii
        self.vehicle_radius = vehicle_radius

    @staticmethod
    def _pick_target(instr: str, dets: list[dict]):
        tagged = [d for d in dets if d["class"] == "target"]
        if tagged:
            return min(tagged, key=lambda d: d["range"])
        if re.search(r"\btarget\b", instr):
            return None  # asked for a labelled target that is not in view
        pillars = [d for d in dets if d["class"] == "pillar"] or dets
        if not pillars:
            return None
        if "nearest" in instr or "closest" in instr:
            return min(pillars, key=lambda d: d["range"])
        return max(pillars, key=lambda d: d["range"])

    def plan(self, instruction: str, observation: dict, feedback: str | None = None) -> str:
        instr = instruction.lower()
        dets = observation["detections"]
        dist = re.search(r"forward\s+(\d+(?:\.\d+)?)\s*m\b", instr)
        if dist:
            d = float(dist.group(1))
            return json.dumps({
                "rationale": f"Pure distance mission: advance {d:g} m, then hold.",
                "target_id": None,
                "obstacle_ids": [],
                "subgoals": [
                    {"index": 1, "description": f"Advance {d:g} m forward", "kind": "distance", "distance": d, "velocity": "medium"},
                    {"index": 2, "description": "Hold position", "kind": "hold"},
                ],
            })
        if re.search(r"\b(hold|stay|keep)\b.*\bposition\b", instr) or instr.strip() in ("hold", "stop"):
            return json.dumps({
                "rationale": "Station-keeping mission; nothing to approach.",
                "target_id": None,
                "obstacle_ids": [],
                "subgoals": [{"index": 1, "description": "Hold position", "kind": "hold"}],
            })
        tgt = self._pick_target(instr, dets)
        if tgt is None:
            return json.dumps({
                "rationale": "No goal visible yet: scan, then close in once it is found.",
                "target_id": None,
                "obstacle_ids": [],
                "subgoals": [
                    {"index": 1, "description": "Scan rightward for the goal", "kind": "search", "side": "right"},
                    {"index": 2, "description": "Hold position", "kind": "hold"},
                ],
            })
        tx, ty = _to_point(tgt["range"], tgt["bearing"])
        los = math.atan2(ty, tx)
        blockers = []
        for d in dets:
            if d["id"] == tgt["id"]:
                continue
            # centre estimate assuming a nominal 0.1 m object radius
            ox, oy = _to_point(d["range"] + 0.1, d["bearing"])
            along = ox * math.cos(los) + oy * math.sin(los)
            lateral = -ox * math.sin(los) + oy * math.cos(los)
            if 0.0 < along < tgt["range"] and abs(lateral) < 0.1 + self.vehicle_radius + self.corridor_margin:
                blockers.append((d, lateral))
        side = "right" if tgt["bearing"] >= 0 else "left"
        hint = [tgt["range"], tgt["bearing"]]
        if blockers:
            obs, lateral = min(blockers, key=lambda b: b[0]["range"])
            # pass on the side of the obstacle away from the line of sight
            side = "right" if lateral < 0 or (lateral == 0 and tgt["bearing"] >= 0) else "left"
            names = ", ".join(b[0]["id"] for b in blockers)
            return json.dumps({
                "rationale": (
                    f"Goal is {tgt['id']} ({tgt['class']}) at {tgt['range']:.2f} m, bearing {tgt['bearing']:+.2f} rad. "
                    f"{names} lies on the direct line and is treated as an obstacle; the {side} side offers the "
                    "shorter detour. Align, detour, approach slowly and hold at the standoff."
                ),
                "target_id": tgt["id"],
                "obstacle_ids": [b[0]["id"] for b in blockers],
                "target_hint": hint,
                "subgoals": [
                    {"index": 1, "description": f"Localize {tgt['id']} and align {side}ward to clear {obs['id']}", "kind": "align", "side": side},
                    {"index": 2, "description": f"Detour past {obs['id']} on the {side}", "kind": "detour", "side": side, "velocity": "medium"},
                    {"index": 3, "description": f"Approach {tgt['id']} at low speed", "kind": "approach", "velocity": "low"},
                    {"index": 4, "description": f"Hold at a safe distance from {tgt['id']}", "kind": "hold"},
                ],
            })
        return json.dumps({
            "rationale": (
                f"Goal is {tgt['id']} ({tgt['class']}) at {tgt['range']:.2f} m, bearing {tgt['bearing']:+.2f} rad, "
                "with a clear line of sight. Align, transit at medium speed, refine the pose at low speed "
                "and finish by holding at the standoff distance."
            ),
            "target_id": tgt["id"],
            "obstacle_ids": [],
            "target_hint": hint,
            "subgoals": [
                {"index": 1, "description": f"{side.capitalize()}ward Alignment", "kind": "align", "side": side},
                {"index": 2, "description": "Medium-speed Forward", "kind": "transit", "velocity": "medium"},
                {"index": 3, "description": "Fine Pose Adjustment", "kind": "adjust", "velocity": "low"},
                {"index": 4, "description": "Approach and Maintain a Safe Distance", "kind": "approach", "velocity": "low"},
            ],
        })


# --- external chat-completion clients --------------------------------------------


def _chat(endpoint: str, model: str, messages: list[dict], timeout_s: float, api_key_env: str) -> str:
    body = json.dumps({"model": model, "messages": messages, "temperature": 0}).encode()
    headers = {"Content-Type": "application/json"}
    key = os.environ.get(api_key_env)
    if key:
        headers["Authorization"] = f"Bearer {key}"
    req = urllib.request.Request(endpoint, data=body, headers=headers, method="POST")
    with urllib.request.urlopen(req, timeout=timeout_s) as resp:
        payload = json.loads(resp.read().decode())
    return payload["choices"][0]["message"]["content"]


class ExternalPolicy(CerebellumPolicy):
    """Chat-completion client; the wire request is sent as the user message.

    Transport failures are returned as empty text, which fails validation
    and so consumes a retry like any other bad answer.
    """

    name = "external"

    def __init__(self, endpoint: str, model: str = "default", timeout_s: float = 10.0,
                 prompt: str = "cerebellum_v1", api_key_env: str = API_KEY_ENV):
        self.endpoint = endpoint
        self.model = model
        self.timeout_s = timeout_s
        self.system = load_prompt(prompt)
        self.api_key_env = api_key_env
        self.errors: list[str] = []

    def respond(self, request: dict, feedback: str | None = None) -> str:
        messages = [
            {"role": "system", "content": self.system},
            {"role": "user", "content": json.dumps(request, sort_keys=True)},
        ]
        if feedback:
            messages.append({"role": "user", "content": f"Your previous answer was rejected: {feedback}. Reply again."})
        try:
            return _chat(self.endpoint, self.model, messages, self.timeout_s, self.api_key_env)
        except (OSError, urllib.error.URLError, ValueError, KeyError, IndexError, TypeError) as exc:
            self.errors.append(f"{type(exc).__name__}: {exc}")
            return ""


class ExternalPlanner(CloudPolicy):
    """Chat-completion planner; any transport failure is fatal for the mission."""

    name = "external-planner"

    def __init__(self, endpoint: str, model: str = "default", timeout_s: float = 10.0,
                 prompt: str = "cloud_v1", api_key_env: str = API_KEY_ENV):
        self.endpoint = endpoint
        self.model = model
        self.timeout_s = timeout_s
        self.template = Template(load_prompt(prompt))
        self.api_key_env = api_key_env

    def plan(self, instruction: str, observation: dict, feedback: str | None = None) -> str:
        text = self.template.safe_substitute(instruction=instruction, observation=json.dumps(observation, sort_keys=True))
        messages = [{"role": "user", "content": text}]
        if feedback:
            messages.append({"role": "user", "content": f"Your previous plan was rejected: {feedback}. Reply again."})
        try:
            return _chat(self.endpoint, self.model, messages, self.timeout_s, self.api_key_env)
        except (OSError, urllib.error.URLError, ValueError, KeyError, IndexError, TypeError) as exc:
            raise PlannerUnavailable(f"planner at {self.endpoint} failed: {type(exc).__name__}: {exc}") from exc
