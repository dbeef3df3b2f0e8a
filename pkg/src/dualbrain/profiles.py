"""Reference profiles for the 1-second motion primitives.

Every primitive follows the same shape: a linear ramp to the commanded
magnitude over 0.2 s, a plateau until 0.5 s, then a linear ramp back to rest
at 1.0 s.  Translation primitives track surge velocity; turning primitives
track the heading obtained by integrating the yaw-rate profile.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import OutOfWindow

PRIMITIVE_DURATION = 1.0
RAMP_END = 0.2
PLATEAU_END = 0.5

# Area under the unit profile: ramp 0.1 + plateau 0.3 + deceleration 0.25.
UNIT_PROFILE_AREA = 0.65


class Direction(str, enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"
    LEFT = "left"
    RIGHT = "right"
    HOLD = "hold"


class Level(str, enum.Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"


class Mode(str, enum.Enum):
    TRANSLATION = "translation"
    TURNING = "turning"


SURGE_SPEEDS = {Level.LOW: 0.2, Level.MEDIUM: 0.5, Level.HIGH: 0.8}  # [m/s]
YAW_RATES = {Level.LOW: 0.5, Level.MEDIUM: 1.0, Level.HIGH: 1.5}  # [rad/s]


@dataclass(frozen=True)
class MotionCommand:
    direction: Direction
    level: Level = Level.LOW

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction(self.direction))
        object.__setattr__(self, "level", Level(self.level))

    @property
    def mode(self) -> Mode:
        if self.direction in (Direction.LEFT, Direction.RIGHT):
            return Mode.TURNING
        return Mode.TRANSLATION

    def __str__(self) -> str:
        if self.direction is Direction.HOLD:
            return "hold"
        return f"{self.direction.value}/{self.level.value}"


@dataclass(frozen=True)
class ReferenceProfile:
    mode: Mode
    magnitude: float  # v_cmd [m/s] or r_cmd [rad/s]
    sign: int = 1
    duration: float = PRIMITIVE_DURATION

    @property
    def signed_magnitude(self) -> float:
        return self.sign * self.magnitude

    @property
    def is_rest(self) -> bool:
        return self.magnitude == 0.0


def profile_for(command: MotionCommand) -> ReferenceProfile:
    """Map a discrete command onto its reference profile.

    Backward is negative surge, right is positive yaw.  ``hold`` gives a
    zero translation profile whatever its level.
    """
    d = command.direction
    if d is Direction.HOLD:
        return ReferenceProfile(Mode.TRANSLATION, 0.0, 1)
    if d in (Direction.FORWARD, Direction.BACKWARD):
        return ReferenceProfile(Mode.TRANSLATION, SURGE_SPEEDS[command.level], 1 if d is Direction.FORWARD else -1)
    return ReferenceProfile(Mode.TURNING, YAW_RATES[command.level], 1 if d is Direction.RIGHT else -1)


def shape(t: float) -> float:
    """Unit trapezoid on [0, 1]."""
    if not 0.0 <= t <= PRIMITIVE_DURATION:
        raise OutOfWindow(f"t={t} outside the primitive window [0, 1]")
    if t < RAMP_END:
        return min(5.0 * t, 1.0)
    if t < PLATEAU_END:
        return 1.0
    return max(1.0 - 2.0 * (t - PLATEAU_END), 0.0)


def shape_integral(t: float) -> float:
    """Closed-form integral of :func:`shape` from 0 to t."""
    if not 0.0 <= t <= PRIMITIVE_DURATION:
        raise OutOfWindow(f"t={t} outside the primitive window [0, 1]")
    if t < RAMP_END:
        return 2.5 * t * t
    if t < PLATEAU_END:
        return 0.1 + (t - RAMP_END)
    s = t - PLATEAU_END
    return 0.4 + s - s * s


def v_ref(profile: ReferenceProfile, t: float) -> float:
    if profile.mode is not Mode.TRANSLATION:
        raise ValueError("v_ref needs a translation profile")
    return profile.signed_magnitude * shape(t)


def r_ref(profile: ReferenceProfile, t: float) -> float:
    if profile.mode is not Mode.TURNING:
        raise ValueError("r_ref needs a turning profile")
    return profile.signed_magnitude * shape(t)


def theta_ref(profile: ReferenceProfile, theta0: float, t: float) -> float:
    """Reference heading ``theta0 + integral of r_ref``; not wrapped."""
    if profile.mode is not Mode.TURNING:
        raise ValueError("theta_ref needs a turning profile")
    return theta0 + profile.signed_magnitude * shape_integral(t)


def displacement_ref(profile: ReferenceProfile, t: float) -> float:
    """Along-track distance covered by the ideal surge profile up to t."""
    if profile.mode is not Mode.TRANSLATION:
        raise ValueError("displacement_ref needs a translation profile")
    return profile.signed_magnitude * shape_integral(t)
