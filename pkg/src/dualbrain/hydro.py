"""Planar surge/yaw AUV plant.

The vehicle is modelled on two decoupled axes::

    M  * dv/dt = tau_v - D_v * v|v|        (surge)
    Iz * dr/dt = tau_r - D_r * r|r|        (yaw)

with kinematics ``dx/dt = v cos(theta)``, ``dy/dt = v sin(theta)`` and
``dtheta/dt = r``.  ``x`` points north, ``y`` east and ``theta`` grows
clockwise seen from above, so a right turn is a positive yaw rate.

M already contains the added mass ``rho * vol * c_a``.  Thrust comes from two
stern thrusters whose outputs ``u = (u_left, u_right)`` map to generalized
forces through a 2x2 allocation matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .errors import NonFiniteState, SingularAllocation

TWO_PI = 2.0 * math.pi


def wrap_angle(angle: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.remainder(angle, TWO_PI)
    if a <= -math.pi:
        a += TWO_PI
    return a


@dataclass(frozen=True)
class VehicleState:
    x: float = 0.0  # [m] north
    y: float = 0.0  # [m] east
    theta: float = 0.0  # [rad] heading, wrapped to (-pi, pi]
    v: float = 0.0  # [m/s] surge
    r: float = 0.0  # [rad/s] yaw rate
    t: float = 0.0  # [s]

    def is_finite(self) -> bool:
        return all(math.isfinite(f) for f in (self.x, self.y, self.theta, self.v, self.r, self.t))

    def as_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "theta": self.theta, "v": self.v, "r": self.r, "t": self.t}


@dataclass(frozen=True)
class HydroParams:
    m_rigid: float = 30.0  # [kg]
    rho: float = 1000.0  # [kg/m^3]
    vol: float = 0.03  # [m^3] displaced volume
    c_a: float = 0.25  # added-mass coefficient
    i_z: float = 1.2  # [kg m^2]
    c_d: float = 0.8  # translational drag coefficient
    area: float = 0.08  # [m^2]
    c_dr: float = 0.6  # rotational drag coefficient
    length: float = 0.3  # [m]

    def __post_init__(self):
        for name in ("m_rigid", "rho", "vol", "c_a", "i_z", "c_d", "area", "c_dr", "length"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"HydroParams.{name} must be finite and > 0, got {value!r}")

    @property
    def added_mass(self) -> float:
        return self.rho * self.vol * self.c_a

    @property
    def mass(self) -> float:
        """Total surge inertia M including added mass."""
        return self.m_rigid + self.added_mass

    @property
    def d_v(self) -> float:
        """Quadratic surge drag coefficient [kg/m]."""
        return 0.5 * self.rho * self.c_d * self.area

    @property
    def d_r(self) -> float:
        """Quadratic yaw drag coefficient [kg m^2 s/rad^2]."""
        return 0.5 * self.rho * self.c_dr * self.length**4

    def with_drag(self, d_v: float | None = None, d_r: float | None = None) -> "HydroParams":
        """Copy with the drag coefficients adjusted to hit the requested D_v / D_r."""
        changes = {}
        if d_v is not None:
            changes["c_d"] = 2.0 * d_v / (self.rho * self.area)
        if d_r is not None:
            changes["c_dr"] = 2.0 * d_r / (self.rho * self.length**4)
        return replace(self, **changes)


def _default_allocation() -> np.ndarray:
    # twin stern thrusters, 0.2 m half-separation: left thruster pushes the bow right
    return np.array([[1.0, 1.0], [0.2, -0.2]])


@dataclass(frozen=True)
class ThrusterConfig:
    allocation: np.ndarray = field(default_factory=_default_allocation)
    u_max: float = 150.0  # [N] per thruster

    def __post_init__(self):
        b = np.asarray(self.allocation, dtype=float)
        if b.shape != (2, 2) or not np.all(np.isfinite(b)):
            raise SingularAllocation(f"allocation must be a finite 2x2 matrix, got shape {b.shape}")
        det = float(np.linalg.det(b))
        if abs(det) < 1e-12 * max(1.0, float(np.abs(b).max()) ** 2):
            raise SingularAllocation(f"allocation matrix is singular (det={det:g})")
        if not self.u_max > 0.0:
            raise ValueError("u_max must be > 0")
        b.setflags(write=False)
        object.__setattr__(self, "allocation", b)
        inv = np.linalg.inv(b)
        inv.setflags(write=False)
        object.__setattr__(self, "_inverse", inv)

    @property
    def inverse(self) -> np.ndarray:
        return self._inverse  # type: ignore[attr-defined]


class Allocation(NamedTuple):
    u_left: float
    u_right: float
    saturated: bool


def drag_wrench(params: HydroParams, v: float, r: float) -> tuple[float, float]:
    """Quadratic drag ``(D_v v|v|, D_r r|r|)``; signs follow the velocities."""
    return params.d_v * v * abs(v), params.d_r * r * abs(r)


def allocate_thrust(config: ThrusterConfig, tau: tuple[float, float]) -> Allocation:
    inv = config.inverse
    tv, tr = float(tau[0]), float(tau[1])
    ul = inv[0, 0] * tv + inv[0, 1] * tr
    ur = inv[1, 0] * tv + inv[1, 1] * tr
    lim = config.u_max
    saturated = abs(ul) > lim or abs(ur) > lim
    if saturated:
        ul = min(max(ul, -lim), lim)
        ur = min(max(ur, -lim), lim)
    return Allocation(ul, ur, saturated)


def thrust_to_wrench(config: ThrusterConfig, u: tuple[float, float]) -> tuple[float, float]:
    b = config.allocation
    return (b[0, 0] * u[0] + b[0, 1] * u[1], b[1, 0] * u[0] + b[1, 1] * u[1])


def _deriv(theta, v, r, tau_v, tau_r, mass, i_z, d_v, d_r):
    return (
        v * math.cos(theta),
        v * math.sin(theta),
        r,
        (tau_v - d_v * v * abs(v)) / mass,
        (tau_r - d_r * r * abs(r)) / i_z,
    )


def step_dynamics(
    state: VehicleState, params: HydroParams, tau: tuple[float, float], dt: float
) -> VehicleState:
    """Advance the plant by one RK4 step of length ``dt`` under constant ``tau``."""
    if not 0.0 < dt <= 0.1:
        raise ValueError(f"dt must lie in (0, 0.1], got {dt}")
    tau_v, tau_r = float(tau[0]), float(tau[1])
    if not (math.isfinite(tau_v) and math.isfinite(tau_r)):
        raise NonFiniteState(f"non-finite thrust {tau!r}")
    consts = (tau_v, tau_r, params.mass, params.i_z, params.d_v, params.d_r)
    x, y, th, v, r = state.x, state.y, state.theta, state.v, state.r
    h2 = 0.5 * dt

    k1 = _deriv(th, v, r, *consts)
    k2 = _deriv(th + h2 * k1[2], v + h2 * k1[3], r + h2 * k1[4], *consts)
    k3 = _deriv(th + h2 * k2[2], v + h2 * k2[3], r + h2 * k2[4], *consts)
    k4 = _deriv(th + dt * k3[2], v + dt * k3[3], r + dt * k3[4], *consts)

    s = dt / 6.0
    out = VehicleState(
        x=x + s * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y=y + s * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        theta=wrap_angle(th + s * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])),
        v=v + s * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3]),
        r=r + s * (k1[4] + 2.0 * k2[4] + 2.0 * k3[4] + k4[4]),
        t=state.t + dt,
    )
    if not out.is_finite():
        raise NonFiniteState(f"integration produced a non-finite state: {out}")
    return out


def acceleration(params: HydroParams, v: float, r: float, tau: tuple[float, float]) -> tuple[float, float]:
    """Instantaneous (dv/dt, dr/dt) of the plant; what an ideal accelerometer reads."""
    f_v, f_r = drag_wrench(params, v, r)
    return (tau[0] - f_v) / params.mass, (tau[1] - f_r) / params.i_z
