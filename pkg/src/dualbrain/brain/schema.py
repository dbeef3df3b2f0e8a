"""Wire schemas for cloud plans and cerebellum decisions, with validation.

Policy output is free text.  Validation extracts the first balanced ``{...}``
object (so surrounding prose and code fences are tolerated), parses it and
checks every mandatory field.  Failures raise :class:`ParseFailure` carrying
the offending span so it can be quoted back to the policy in a retry prompt.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..errors import ParseFailure
from ..profiles import Direction, Level, MotionCommand

DECISION_FIELDS = ("reasoning", "decision", "velocity", "sub_task_done", "mission_done")
SUBGOAL_KINDS = ("align", "detour", "transit", "adjust", "approach", "hold", "distance", "search")


def extract_object(raw: str) -> str:
    """Return the first balanced top-level JSON object in ``raw``."""
    if not isinstance(raw, str):
        raise ParseFailure(f"expected text, got {type(raw).__name__}", repr(raw)[:80])
    start = raw.find("{")
    if start < 0:
        raise ParseFailure("no JSON object found", raw[:80])
    depth = 0
    in_str = escaped = False
    for i in range(start, len(raw)):
        c = raw[i]
        if in_str:
            if escaped:
                escaped = False
            elif c == "\\":
                escaped = True
            elif c == '"':
                in_str = False
        elif c == '"':
            in_str = True
        elif c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
            if depth == 0:
                return raw[start : i + 1]
    raise ParseFailure("unterminated JSON object", raw[start : start + 80])


def _load_object(raw: str) -> tuple[dict, str]:
    span = extract_object(raw)
    try:
        # strict=False admits raw line breaks inside strings, which
        # hand-written and model-written JSON often contain
        obj = json.loads(span, strict=False)
    except json.JSONDecodeError as exc:
        raise ParseFailure(f"invalid JSON: {exc.msg}", span[max(0, exc.pos - 20) : exc.pos + 20]) from None
    if not isinstance(obj, dict):
        raise ParseFailure("top-level value is not an object", span[:80])
    return obj, span


def _enum(obj: dict, key: str, enum_cls, span: str):
    value = obj[key]
    if not isinstance(value, str):
        raise ParseFailure(f"{key!r} must be a string", f'"{key}": {json.dumps(value)}')
    try:
        return enum_cls(value.strip().lower())
    except ValueError:
        allowed = ", ".join(m.value for m in enum_cls)
        raise ParseFailure(f"{key!r}={value!r} is not one of: {allowed}", f'"{key}": {json.dumps(value)}') from None


@dataclass(frozen=True)
class Decision:
    reasoning: str
    decision: Direction
    velocity: Level
    sub_task_done: bool = False
    mission_done: bool = False

    @property
    def command(self) -> MotionCommand:
        return MotionCommand(self.decision, self.velocity)

    def as_dict(self) -> dict:
        return {
            "reasoning": self.reasoning,
            "decision": self.decision.value,
            "velocity": self.velocity.value,
            "sub_task_done": self.sub_task_done,
            "mission_done": self.mission_done,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict())


FALLBACK_DECISION = Decision("fallback: no valid policy output", Direction.HOLD, Level.LOW, False, False)


def validate_decision(raw: str) -> Decision:
    """Parse and check one policy response."""
    obj, span = _load_object(raw)
    missing = [k for k in DECISION_FIELDS if k not in obj]
    if missing:
        raise ParseFailure(f"missing field(s): {', '.join(missing)}", span[:120])
    if not isinstance(obj["reasoning"], str):
        raise ParseFailure("'reasoning' must be a string", f'"reasoning": {json.dumps(obj["reasoning"])}')
    for key in ("sub_task_done", "mission_done"):
        if not isinstance(obj[key], bool):
            raise ParseFailure(f"{key!r} must be true or false", f'"{key}": {json.dumps(obj[key])}')
    return Decision(
        reasoning=obj["reasoning"],
        decision=_enum(obj, "decision", Direction, span),
        velocity=_enum(obj, "velocity", Level, span),
        sub_task_done=obj["sub_task_done"],
        mission_done=obj["mission_done"],
    )


@dataclass
class SubGoal:
    index: int
    description: str
    kind: str = "transit"
    velocity: str | None = None
    side: str | None = None  # "left" | "right" for align/detour
    distance: float | None = None  # [m] for distance sub-goals
    done: bool = False

    def mark_done(self) -> None:
        self.done = True

    def as_dict(self) -> dict:
        d = {"index": self.index, "description": self.description, "kind": self.kind, "done": self.done}
        for key in ("velocity", "side", "distance"):
            if getattr(self, key) is not None:
                d[key] = getattr(self, key)
        return d


@dataclass
class MissionPlan:
    instruction: str
    subgoals: list[SubGoal]
    rationale: str
    target_id: str | None = None
    obstacle_ids: list[str] = field(default_factory=list)
    target_hint: tuple[float, float] | None = None  # (range, bearing) seen at planning time

    def __post_init__(self):
        if not self.subgoals:
            raise ValueError("a plan needs at least one sub-goal")
        if not self.rationale.strip():
            raise ValueError("plan rationale is empty")
        if [g.index for g in self.subgoals] != list(range(1, len(self.subgoals) + 1)):
            raise ValueError("sub-goal indices must run 1..N")

    @property
    def active(self) -> SubGoal | None:
        for g in self.subgoals:
            if not g.done:
                return g
        return None

    def as_dict(self) -> dict:
        d = {
            "instruction": self.instruction,
            "rationale": self.rationale,
            "subgoals": [g.as_dict() for g in self.subgoals],
            "target_id": self.target_id,
            "obstacle_ids": list(self.obstacle_ids),
        }
        if self.target_hint is not None:
            d["target_hint"] = [round(self.target_hint[0], 4), round(self.target_hint[1], 4)]
        return d

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)


def validate_plan(raw: str, instruction: str) -> MissionPlan:
    """Parse a planner response into a :class:`MissionPlan`."""
    obj, span = _load_object(raw)
    rationale = obj.get("rationale")
    if not isinstance(rationale, str) or not rationale.strip():
        raise ParseFailure("'rationale' must be a non-empty string", span[:120])
    items = obj.get("subgoals")
    if not isinstance(items, list) or not items:
        raise ParseFailure("'subgoals' must be a non-empty array", span[:120])
    subgoals = []
    for pos, item in enumerate(items, start=1):
        if not isinstance(item, dict):
            raise ParseFailure(f"sub-goal {pos} is not an object", json.dumps(item)[:80])
        index, desc = item.get("index", pos), item.get("description")
        if not isinstance(index, int) or isinstance(index, bool) or index != pos:
            raise ParseFailure(f"sub-goal indices must run 1..N (got {index!r} at position {pos})", json.dumps(item)[:80])
        if not isinstance(desc, str) or not desc.strip():
            raise ParseFailure(f"sub-goal {pos} needs a description", json.dumps(item)[:80])
        kind = item.get("kind", "transit")
        if kind not in SUBGOAL_KINDS:
            raise ParseFailure(f"sub-goal {pos}: unknown kind {kind!r}", json.dumps(item)[:80])
        velocity = item.get("velocity")
        if velocity is not None and velocity not in {m.value for m in Level}:
            raise ParseFailure(f"sub-goal {pos}: bad velocity {velocity!r}", json.dumps(item)[:80])
        side = item.get("side")
        if side is not None and side not in ("left", "right"):
            raise ParseFailure(f"sub-goal {pos}: bad side {side!r}", json.dumps(item)[:80])
        distance = item.get("distance")
        if distance is not None and (not isinstance(distance, (int, float)) or isinstance(distance, bool) or distance <= 0):
            raise ParseFailure(f"sub-goal {pos}: distance must be a positive number", json.dumps(item)[:80])
        subgoals.append(
            SubGoal(pos, desc.strip(), kind, velocity, side, float(distance) if distance is not None else None)
        )
    target_id = obj.get("target_id")
    if target_id is not None and not isinstance(target_id, str):
        raise ParseFailure("'target_id' must be a string or null", span[:120])
    obstacles = obj.get("obstacle_ids", [])
    if not isinstance(obstacles, list) or not all(isinstance(o, str) for o in obstacles):
        raise ParseFailure("'obstacle_ids' must be an array of strings", span[:120])
    hint = obj.get("target_hint")
    if hint is not None:
        if not (isinstance(hint, list) and len(hint) == 2 and all(isinstance(h, (int, float)) for h in hint)):
            raise ParseFailure("'target_hint' must be [range, bearing]", span[:120])
        hint = (float(hint[0]), float(hint[1]))
    return MissionPlan(instruction, subgoals, rationale.strip(), target_id, list(obstacles), hint)
