"""Mission metrics, computed from nothing but the mission log."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass

from .hydro import wrap_angle

SUCCESS_MARGIN = 0.5  # [m] beyond the standoff that still counts as arrived


@dataclass(frozen=True)
class MissionMetrics:
    success: bool
    outcome: str
    steps: int
    path_length: float
    min_obstacle_clearance: float | None
    final_target_range: float | None
    rms_tracking_error: list[float]
    total_effort: float
    decisions: dict[str, int]
    invalid_decision_count: int
    fallback_count: int
    cloud_messages: int

    def as_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=2) + "\n"


def compute_metrics(records: list[dict]) -> MissionMetrics:
    header = next(r for r in records if r["type"] == "header")
    end = next((r for r in records if r["type"] == "end"), None)
    if end is None:
        raise ValueError("log has no end record")
    objects = header["objects"]
    rv = header["vehicle_radius"]
    dt = header["dt"]
    ticks = [r for r in records if r["type"] == "tick"]

    px, py = header["start"]["x"], header["start"]["y"]
    path = 0.0
    min_clear = None
    effort = 0.0
    errors: dict[int, list[float]] = {}
    for t in ticks:
        path += math.hypot(t["x"] - px, t["y"] - py)
        px, py = t["x"], t["y"]
        for o in objects:
            c = math.hypot(o["x"] - t["x"], o["y"] - t["y"]) - o["radius"] - rv
            min_clear = c if min_clear is None else min(min_clear, c)
        effort += (t["tau_v"] ** 2 + t["tau_r"] ** 2) * dt
        if t["phase"] == "primitive":
            e = wrap_angle(t["theta"] - t["ref"]) if t["mode"] == "turning" else t["v"] - t["ref"]
            errors.setdefault(t["step"], []).append(e)
    rms = [math.sqrt(sum(e * e for e in errs) / len(errs)) for _, errs in sorted(errors.items())]

    final_range = None
    target = next((o for o in objects if o["id"] == header["target_id"]), None)
    fx, fy = end["final"]["x"], end["final"]["y"]
    if target is not None:
        final_range = math.hypot(target["x"] - fx, target["y"] - fy) - target["radius"]

    decisions = [r for r in records if r["type"] == "decision"]
    counts = Counter(r["decision"]["decision"] for r in decisions)
    contact = end["outcome"] == "safety_abort"
    in_band = final_range is None or 0.0 <= final_range <= header["standoff"] + SUCCESS_MARGIN
    return MissionMetrics(
        success=bool(end["mission_done"] and not contact and in_band),
        outcome=end["outcome"],
        steps=len(decisions),
        path_length=path,
        min_obstacle_clearance=min_clear,
        final_target_range=final_range,
        rms_tracking_error=rms,
        total_effort=effort,
        decisions=dict(sorted(counts.items())),
        invalid_decision_count=sum(len(r["rejects"]) for r in decisions),
        fallback_count=sum(1 for r in decisions if r["fallback"]),
        cloud_messages=end.get("cloud_messages", 0),
    )
