"""2-D tank world: scenario files, parametric perception, contact checks.

Perception is not rendered.  Each object inside the field of view and the
turbidity-limited visibility range yields a detection whose confidence is the
surviving image contrast, ``exp(-kappa * NTU * range)``.  A seeded uniform
draw above the confidence drops the detection, which is how a hazy target
"flickers" in and out of view.

``kappa`` is derived from a single calibration anchor: the fraction of contrast
lost at ``reference_range`` when turbidity rises from ``clear_ntu`` to
``reference_ntu``.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ScenarioError
from .estimator import EstimatorConfig
from .hydro import HydroParams, ThrusterConfig, VehicleState, wrap_angle
from .link import LinkConfig
from .mpc import MpcConfig, MpcWeights

SCENARIO_DIR = Path(__file__).parent / "scenarios"
OBJECT_CLASSES = ("pillar", "wall", "target")


@dataclass(frozen=True)
class Obstacle:
    id: str
    x: float
    y: float
    radius: float
    cls: str = "pillar"

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"obstacle {self.id}: radius must be > 0")
        if self.cls not in OBJECT_CLASSES:
            raise ValueError(f"obstacle {self.id}: unknown class {self.cls!r}")

    def as_dict(self) -> dict:
        return {"id": self.id, "x": self.x, "y": self.y, "radius": self.radius, "class": self.cls}


@dataclass(frozen=True)
class Tank:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("tank bounds are empty")

    def as_dict(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max, "y_min": self.y_min, "y_max": self.y_max}


@dataclass(frozen=True)
class PerceptionModel:
    base_range: float = 12.0  # [m] visibility in clear water, full light
    range_k: float = 0.03  # [1/NTU] attenuation of the visibility range
    contrast_loss: float = 0.65  # fraction of contrast lost at the anchor
    reference_range: float = 1.5  # [m]
    reference_ntu: float = 18.0
    clear_ntu: float = 0.5
    fov: float = math.radians(100.0)  # half-angle

    def __post_init__(self):
        if self.base_range <= 0 or self.range_k < 0:
            raise ValueError("base_range must be > 0 and range_k >= 0")
        if not 0.0 <= self.contrast_loss < 1.0:
            raise ValueError("contrast_loss must lie in [0, 1)")
        if self.reference_ntu <= self.clear_ntu or self.reference_range <= 0:
            raise ValueError("calibration anchor needs reference_ntu > clear_ntu and reference_range > 0")

    @property
    def kappa(self) -> float:
        """Contrast attenuation per NTU per metre."""
        return math.log(1.0 / (1.0 - self.contrast_loss)) / (
            (self.reference_ntu - self.clear_ntu) * self.reference_range
        )

    def visibility_range(self, turbidity: float, light: float) -> float:
        return self.base_range * light * math.exp(-self.range_k * turbidity)

    def confidence(self, distance: float, turbidity: float) -> float:
        return math.exp(-self.kappa * turbidity * max(distance, 0.0))


@dataclass(frozen=True)
class Detection:
    object_id: str
    cls: str
    bearing: float  # [rad] relative to heading, positive to starboard
    range: float  # [m] to the object's surface
    confidence: float

    def as_dict(self) -> dict:
        return {
            "id": self.object_id,
            "class": self.cls,
            "bearing": round(self.bearing, 4),
            "range": round(self.range, 4),
            "confidence": round(self.confidence, 4),
        }


@dataclass(frozen=True)
class Observation:
    detections: tuple[Detection, ...]
    visibility_range: float
    timestamp: float

    def find(self, object_id: str) -> Detection | None:
        for d in self.detections:
            if d.object_id == object_id:
                return d
        return None

    def as_dict(self) -> dict:
        return {
            "detections": [d.as_dict() for d in self.detections],
            "visibility_range": round(self.visibility_range, 4),
            "timestamp": round(self.timestamp, 4),
        }


@dataclass(frozen=True)
class Contact:
    kind: str  # "obstacle" | "bounds"
    object_id: str | None
    clearance: float  # negative penetration depth [m]


@dataclass(frozen=True)
class Scenario:
    name: str
    tank: Tank
    obstacles: tuple[Obstacle, ...]
    target_id: str | None
    start: VehicleState
    instruction: str
    turbidity: float = 0.5
    ambient_light: float = 1.0
    standoff: float = 0.8
    vehicle_radius: float = 0.25
    max_steps: int = 30
    seed: int = 0
    hydro: HydroParams = field(default_factory=HydroParams)
    thrusters: ThrusterConfig = field(default_factory=ThrusterConfig)
    mpc: MpcConfig = field(default_factory=MpcConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    link: LinkConfig = field(default_factory=LinkConfig)
    perception: PerceptionModel = field(default_factory=PerceptionModel)
    scripted: dict[str, tuple[dict, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if self.turbidity < 0:
            raise ValueError("turbidity must be >= 0")
        if not 0.0 < self.ambient_light <= 1.0:
            raise ValueError("ambient_light must lie in (0, 1]")
        ids = [o.id for o in self.obstacles]
        if len(set(ids)) != len(ids):
            raise ValueError("obstacle ids must be unique")
        if self.target_id is not None and self.target_id not in ids:
            raise ValueError(f"target {self.target_id!r} is not a listed object")
        contact = check_collision(self, self.start)
        if contact is not None:
            raise ValueError(f"start pose is in contact ({contact.kind} {contact.object_id or ''})".strip())

    @property
    def target(self) -> Obstacle | None:
        for o in self.obstacles:
            if o.id == self.target_id:
                return o
        return None

    def with_conditions(self, **changes: Any) -> "Scenario":
        return replace(self, **changes)


def observe(scenario: Scenario, state: VehicleState, rng: np.random.Generator | None) -> Observation:
    """Detections visible from ``state``.

    One uniform draw is consumed per object in the scenario regardless of
    visibility, so the stream position depends only on the number of calls.
    """
    pm = scenario.perception
    vis = pm.visibility_range(scenario.turbidity, scenario.ambient_light)
    draws = rng.random(len(scenario.obstacles)) if rng is not None else np.zeros(len(scenario.obstacles))
    out = []
    for obj, u in zip(scenario.obstacles, draws):
        dx, dy = obj.x - state.x, obj.y - state.y
        centre = math.hypot(dx, dy)
        rng_surface = max(centre - obj.radius, 1e-6)
        bearing = wrap_angle(math.atan2(dy, dx) - state.theta)
        if abs(bearing) > pm.fov or rng_surface > vis:
            continue
        conf = pm.confidence(rng_surface, scenario.turbidity)
        if u > conf:
            continue
        out.append(Detection(obj.id, obj.cls, bearing, rng_surface, conf))
    out.sort(key=lambda d: (d.range, d.object_id))
    return Observation(tuple(out), vis, state.t)


def clearance(scenario: Scenario, x: float, y: float) -> tuple[float, str | None, str]:
    """Smallest hull clearance to any object or wall: (clearance, object id, kind)."""
    rv = scenario.vehicle_radius
    tk = scenario.tank
    best, best_id, kind = min(x - tk.x_min, tk.x_max - x, y - tk.y_min, tk.y_max - y) - rv, None, "bounds"
    for o in scenario.obstacles:
        c = math.hypot(o.x - x, o.y - y) - o.radius - rv
        if c < best:
            best, best_id, kind = c, o.id, "obstacle"
    return best, best_id, kind


def check_collision(scenario: Scenario, state: VehicleState) -> Contact | None:
    c, oid, kind = clearance(scenario, state.x, state.y)
    if c < 0.0:
        return Contact(kind, oid, c)
    return None


def target_range(scenario: Scenario, x: float, y: float) -> float | None:
    """Vehicle centre to target surface distance."""
    tgt = scenario.target
    if tgt is None:
        return None
    return math.hypot(tgt.x - x, tgt.y - y) - tgt.radius


# --- scenario files ---------------------------------------------------------


def _build(cls, data: dict, path: str, where: str):
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: [{where}] must be a table")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ScenarioError(f"{path}: [{where}] unknown key(s): {', '.join(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{path}: [{where}] {exc}") from exc


def scenario_from_dict(data: dict, path: str = "<scenario>") -> Scenario:
    top = dict(data)
    try:
        tank = _build(Tank, top.pop("tank"), path, "tank")
        start = _build(VehicleState, top.pop("start"), path, "start")
        name = top.pop("name")
        instruction = top.pop("instruction")
    except KeyError as exc:
        raise ScenarioError(f"{path}: missing required key {exc.args[0]!r}") from None

    obstacles = []
    for i, item in enumerate(top.pop("obstacles", [])):
        item = dict(item)
        if "class" in item:
            item["cls"] = item.pop("class")
        obstacles.append(_build(Obstacle, item, path, f"obstacles[{i}]"))

    hydro = _build(HydroParams, top.pop("hydro", {}), path, "hydro")
    thr = dict(top.pop("thrusters", {}))
    if "allocation" in thr:
        thr["allocation"] = np.asarray(thr["allocation"], dtype=float)
    try:
        thrusters = _build(ThrusterConfig, thr, path, "thrusters")
    except Exception as exc:  # SingularAllocation
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"{path}: [thrusters] {exc}") from exc
    mpc_data = dict(top.pop("mpc", {}))
    weights = _build(MpcWeights, mpc_data.pop("weights", {}), path, "mpc.weights")
    mpc = _build(MpcConfig, {**mpc_data, "weights": weights}, path, "mpc")
    estimator = _build(EstimatorConfig, top.pop("estimator", {}), path, "estimator")
    link_data = dict(top.pop("link", {}))
    if link_data.get("surfacing_period") == "inf":
        link_data["surfacing_period"] = math.inf
    link = _build(LinkConfig, link_data, path, "link")
    perc = dict(top.pop("perception", {}))
    if "fov_deg" in perc:
        perc["fov"] = math.radians(perc.pop("fov_deg"))
    perception = _build(PerceptionModel, perc, path, "perception")

    scripted = {}
    for key, table in top.pop("scripted", {}).items():
        seq = table.get("sequence") if isinstance(table, dict) else None
        if not isinstance(seq, list) or not all(isinstance(s, dict) for s in seq):
            raise ScenarioError(f"{path}: [scripted.{key}] needs a 'sequence' array of tables")
        scripted[key] = tuple(dict(s) for s in seq)

    target_id = top.pop("target", None)
    allowed = {"turbidity", "ambient_light", "standoff", "vehicle_radius", "max_steps", "seed"}
    unknown = sorted(set(top) - allowed)
    if unknown:
        raise ScenarioError(f"{path}: unknown top-level key(s): {', '.join(unknown)}")
    try:
        return Scenario(
            name=name,
            tank=tank,
            obstacles=tuple(obstacles),
            target_id=target_id,
            start=start,
            instruction=instruction,
            hydro=hydro,
            thrusters=thrusters,
            mpc=mpc,
            estimator=estimator,
            link=link,
            perception=perception,
            scripted=scripted,
            **top,
        )
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def resolve_scenario_path(name_or_path: str | Path) -> Path:
    p = Path(name_or_path)
    if p.exists():
        return p
    candidate = SCENARIO_DIR / f"{name_or_path}.toml"
    if candidate.exists():
        return candidate
    raise ScenarioError(f"{name_or_path}: no such scenario file or built-in scenario")


def load_scenario(name_or_path: str | Path) -> Scenario:
    """Load a scenario by built-in name (``three_pillars``) or file path."""
    path = resolve_scenario_path(name_or_path)
    try:
        data = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        # tomli messages already carry "(at line N, column M)"
        raise ScenarioError(f"{path}: {exc}") from exc
    return scenario_from_dict(data, str(path))


def builtin_scenarios() -> list[str]:
    return sorted(p.stem for p in SCENARIO_DIR.glob("*.toml"))
