"""Closed-loop execution of one discrete motion command.

A primitive is exactly 50 control ticks (1 s at 0.02 s).  Each tick measures
the plant, refreshes the drag estimate from the accelerometer, re-solves the
MPC, allocates thrust to the two thrusters and integrates the plant.  The
primitive is followed by active braking until surge and yaw rate are both
below their thresholds, or the brake timeout expires.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import SolverNonFinite
from .estimator import DragEstimate, EstimatorConfig, InertialSample, apply_update
from .hydro import (
    HydroParams,
    ThrusterConfig,
    VehicleState,
    acceleration,
    allocate_thrust,
    step_dynamics,
    thrust_to_wrench,
    wrap_angle,
)
from .mpc import MpcConfig, MpcSolution, solve
from .profiles import MotionCommand, Mode, ReferenceProfile, profile_for, shape, shape_integral

log = logging.getLogger(__name__)

PRIMITIVE_TICKS = 50


@dataclass(frozen=True)
class ExecutorConfig:
    mpc: MpcConfig = field(default_factory=MpcConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    thrusters: ThrusterConfig = field(default_factory=ThrusterConfig)
    brake_timeout: float = 2.0  # [s]
    v_stop: float = 0.01  # [m/s]
    r_stop: float = 0.01  # [rad/s]

    @property
    def dt(self) -> float:
        return self.mpc.dt


@dataclass(frozen=True)
class Tick:
    """One control tick; ``state`` is the plant state after the step."""

    phase: str  # "primitive" | "brake"
    state: VehicleState
    tau: tuple[float, float]
    u: tuple[float, float]
    ref: float
    d_v_hat: float
    d_r_hat: float
    saturated: bool

    def as_record(self) -> dict:
        s = self.state
        return {
            "phase": self.phase,
            "t": s.t,
            "x": s.x,
            "y": s.y,
            "theta": s.theta,
            "v": s.v,
            "r": s.r,
            "tau_v": self.tau[0],
            "tau_r": self.tau[1],
            "u_l": self.u[0],
            "u_r": self.u[1],
            "ref": self.ref,
            "d_v_hat": self.d_v_hat,
            "d_r_hat": self.d_r_hat,
        }


@dataclass
class PrimitiveResult:
    command: MotionCommand
    mode: Mode
    start: VehicleState
    trajectory: list[Tick]
    residual_v: float
    residual_r: float
    braking_ticks: int
    saturation_ticks: int
    final_estimate: DragEstimate
    brake_timeout: bool = False
    incidents: list[str] = field(default_factory=list)

    @property
    def primitive_ticks(self) -> list[Tick]:
        return [t for t in self.trajectory if t.phase == "primitive"]

    @property
    def final_state(self) -> VehicleState:
        return self.trajectory[-1].state if self.trajectory else self.start

    def tracking_errors(self) -> list[float]:
        """Per-tick error of the tracked quantity over the 1 s window."""
        if self.mode is Mode.TURNING:
            return [wrap_angle(t.state.theta - t.ref) for t in self.primitive_ticks]
        return [t.state.v - t.ref for t in self.primitive_ticks]

    def rms_tracking_error(self) -> float:
        errs = self.tracking_errors()
        return math.sqrt(sum(e * e for e in errs) / len(errs)) if errs else 0.0

    def effort(self, dt: float) -> float:
        """Integral of |tau|^2 over primitive and braking ticks."""
        return sum((t.tau[0] ** 2 + t.tau[1] ** 2) * dt for t in self.trajectory)


class _Loop:
    """Shared tick machinery for the primitive and braking phases."""

    def __init__(self, state, params, estimate, cfg: ExecutorConfig, rng, sink):
        self.state = state
        self.params = params
        self.estimate = estimate
        self.cfg = cfg
        self.rng = rng
        self.sink = sink
        self.prev_tau: tuple[float, float] | None = None
        self.warm: MpcSolution | None = None
        self.ticks: list[Tick] = []
        self.incidents: list[str] = []

    def measure(self) -> None:
        """Accelerometer sample of the last interval's end, fed to the estimator."""
        if self.prev_tau is None:
            return
        s = self.state
        a_v, a_r = acceleration(self.params, s.v, s.r, self.prev_tau)
        sigma = self.cfg.estimator.noise_sigma
        if sigma > 0.0:
            n_v, n_r = self.rng.normal(0.0, sigma, size=2)
            a_v += float(n_v)
            a_r += float(n_r)
        sample = InertialSample(s.v, s.r, a_v, a_r, self.prev_tau[0], self.prev_tau[1])
        self.estimate = apply_update(self.estimate, sample, self.params, self.cfg.estimator)

    def act(self, phase, mode, t_in, profile, theta0, ref) -> None:
        cfg = self.cfg
        try:
            sol = solve(cfg.mpc, mode, self.state, self.params, self.estimate, t_in, profile, theta0, self.warm)
            tau_cmd = sol.tau
            self.warm = sol
        except SolverNonFinite as exc:
            msg = f"t={self.state.t:.2f}: solver non-finite ({exc}); zero thrust"
            log.warning(msg)
            self.incidents.append(msg)
            tau_cmd = (0.0, 0.0)
            self.warm = None
        alloc = allocate_thrust(cfg.thrusters, tau_cmd)
        u = (alloc.u_left, alloc.u_right)
        tau = thrust_to_wrench(cfg.thrusters, u)
        self.state = step_dynamics(self.state, self.params, tau, cfg.dt)
        self.prev_tau = tau
        tick = Tick(phase, self.state, tau, u, ref, self.estimate.d_v_hat, self.estimate.d_r_hat, alloc.saturated)
        self.ticks.append(tick)
        if self.sink is not None:
            self.sink(tick.as_record())

    def at_rest(self) -> bool:
        return abs(self.state.v) < self.cfg.v_stop and abs(self.state.r) < self.cfg.r_stop

    def brake(self) -> bool:
        """Run the braking phase; returns True on timeout."""
        max_ticks = int(round(self.cfg.brake_timeout / self.cfg.dt))
        n = 0
        while not self.at_rest():
            if n >= max_ticks:
                return True
            self.measure()
            self.act("brake", None, None, None, None, 0.0)
            n += 1
        return False


def _reference(profile: ReferenceProfile, theta0: float, t: float) -> float:
    if profile.mode is Mode.TURNING:
        return wrap_angle(theta0 + profile.signed_magnitude * shape_integral(t))
    return profile.signed_magnitude * shape(t)


def execute_primitive(
    command: MotionCommand,
    state: VehicleState,
    params: HydroParams,
    estimate: DragEstimate,
    config: ExecutorConfig | None = None,
    rng: np.random.Generator | None = None,
    sink: Callable[[dict], None] | None = None,
) -> tuple[VehicleState, PrimitiveResult]:
    """Run one command as a 50-tick primitive followed by active braking.

    ``params`` is the true plant; the controller only sees ``estimate``.
    ``rng`` feeds accelerometer noise and must be given when the estimator
    config has a non-zero ``noise_sigma``.
    """
    cfg = config or ExecutorConfig()
    if not state.is_finite():
        raise ValueError("initial state is not finite")
    if cfg.estimator.noise_sigma > 0.0 and rng is None:
        raise ValueError("noise_sigma > 0 needs an explicit rng")
    profile = profile_for(command)
    theta0 = state.theta
    loop = _Loop(state, params, estimate, cfg, rng, sink)
    dt = cfg.dt
    for k in range(PRIMITIVE_TICKS):
        t_in = k * dt
        if k > 0:
            loop.measure()
        loop.act("primitive", profile.mode, t_in, profile, theta0, _reference(profile, theta0, (k + 1) * dt))
    n_primitive = len(loop.ticks)
    timed_out = loop.brake()
    if timed_out:
        msg = f"brake timeout after {cfg.brake_timeout} s: v={loop.state.v:.4f} r={loop.state.r:.4f}"
        log.warning(msg)
        loop.incidents.append(msg)
    result = PrimitiveResult(
        command=command,
        mode=profile.mode,
        start=state,
        trajectory=loop.ticks,
        residual_v=loop.state.v,
        residual_r=loop.state.r,
        braking_ticks=len(loop.ticks) - n_primitive,
        saturation_ticks=sum(1 for t in loop.ticks if t.saturated),
        final_estimate=loop.estimate,
        brake_timeout=timed_out,
        incidents=loop.incidents,
    )
    return loop.state, result


def active_brake(
    state: VehicleState,
    params: HydroParams,
    estimate: DragEstimate,
    config: ExecutorConfig | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[VehicleState, int, bool]:
    """Null surge and yaw rate; returns (state, ticks, timed_out)."""
    cfg = config or ExecutorConfig()
    loop = _Loop(state, params, estimate, cfg, rng, None)
    timed_out = loop.brake()
    return loop.state, len(loop.ticks), timed_out
