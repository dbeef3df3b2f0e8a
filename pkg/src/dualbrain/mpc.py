"""Receding-horizon thrust optimisation for the motion primitives.

The stage cost depends on the primitive mode::

    translation:  beta (v - v_ref)^2         + gamma |tau|^2 + delta (D_v v|v|)^2
    turning:      beta (theta - theta_ref)^2 + gamma |tau|^2 + delta (D_r r|r|)^2

The axis the mode does not track is regulated with the same weights: a
translation primitive holds the heading it started with, a turning primitive
holds zero surge.  Braking tracks zero rate on both axes.

Surge and yaw are decoupled in the plant and in the cost, so the horizon
problem splits exactly into two independent box-constrained problems of
``horizon_steps`` variables each.  Each is solved by projected Gauss-Newton
(Bertsekas-style active set, backtracking by halving) on sensitivities
propagated through the same RK4 step the simulator uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import SolverNonFinite
from .estimator import DragEstimate
from .hydro import HydroParams, VehicleState, wrap_angle
from .profiles import Mode, ReferenceProfile, shape, shape_integral


@dataclass(frozen=True)
class MpcWeights:
    beta: float = 100.0
    gamma: float = 1e-6
    delta: float = 1e-4

    def __post_init__(self):
        if not self.beta > 0 or self.gamma < 0 or self.delta < 0:
            raise ValueError("weights need beta > 0, gamma >= 0, delta >= 0")


@dataclass(frozen=True)
class MpcConfig:
    horizon_steps: int = 10
    dt: float = 0.02
    weights: MpcWeights = field(default_factory=MpcWeights)
    tau_v_max: float = 200.0  # [N]
    tau_r_max: float = 30.0  # [N m]
    iterations: int = 40
    max_halvings: int = 20

    def __post_init__(self):
        if self.horizon_steps < 1 or self.iterations < 1 or self.max_halvings < 0:
            raise ValueError("horizon_steps and iterations must be >= 1")
        if not (self.dt > 0 and self.tau_v_max > 0 and self.tau_r_max > 0):
            raise ValueError("dt and thrust bounds must be positive")


def stage_cost(
    mode: Mode | str,
    state_err: float,
    tau: Sequence[float],
    drag: float,
    weights: MpcWeights,
) -> float:
    """One stage of the mode-dependent cost.

    ``state_err`` is ``v - v_ref`` for translation and ``theta - theta_ref``
    for turning; ``drag`` is the matching drag force or torque.
    """
    Mode(mode)
    effort = sum(t * t for t in tau)
    return weights.beta * state_err * state_err + weights.gamma * effort + weights.delta * drag * drag


@dataclass(frozen=True)
class AxisProblem:
    """One decoupled axis: rate ``w`` and its integral ``p``.

    ``track`` selects whether references apply to the rate or the integral.
    """

    inertia: float
    drag: float
    dt: float
    w0: float
    p0: float
    refs: tuple[float, ...]
    track: str  # "rate" | "angle"
    bound: float
    weights: MpcWeights

    @property
    def n(self) -> int:
        return len(self.refs)


def _axis_step(w: float, tau: float, m: float, d: float, h: float):
    """RK4 step of dw = (tau - d w|w|)/m, dp = w, with first-order sensitivities.

    Returns (w_next, dp, A_w, B_w, A_p, B_p) where A_* = d/dw and B_* = d/dtau.
    """
    inv_m = 1.0 / m
    hh = 0.5 * h
    k1 = (tau - d * w * abs(w)) * inv_m
    dk1_w = -2.0 * d * abs(w) * inv_m
    dk1_t = inv_m

    w2 = w + hh * k1
    dw2_w = 1.0 + hh * dk1_w
    dw2_t = hh * dk1_t
    fp2 = -2.0 * d * abs(w2) * inv_m
    k2 = (tau - d * w2 * abs(w2)) * inv_m
    dk2_w = fp2 * dw2_w
    dk2_t = fp2 * dw2_t + inv_m

    w3 = w + hh * k2
    dw3_w = 1.0 + hh * dk2_w
    dw3_t = hh * dk2_t
    fp3 = -2.0 * d * abs(w3) * inv_m
    k3 = (tau - d * w3 * abs(w3)) * inv_m
    dk3_w = fp3 * dw3_w
    dk3_t = fp3 * dw3_t + inv_m

    w4 = w + h * k3
    dw4_w = 1.0 + h * dk3_w
    dw4_t = h * dk3_t
    fp4 = -2.0 * d * abs(w4) * inv_m
    k4 = (tau - d * w4 * abs(w4)) * inv_m
    dk4_w = fp4 * dw4_w
    dk4_t = fp4 * dw4_t + inv_m

    s = h / 6.0
    w_next = w + s * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    dp = s * (w + 2.0 * w2 + 2.0 * w3 + w4)
    a_w = 1.0 + s * (dk1_w + 2.0 * dk2_w + 2.0 * dk3_w + dk4_w)
    b_w = s * (dk1_t + 2.0 * dk2_t + 2.0 * dk3_t + dk4_t)
    a_p = s * (1.0 + 2.0 * dw2_w + 2.0 * dw3_w + dw4_w)
    b_p = s * (2.0 * dw2_t + 2.0 * dw3_t + dw4_t)
    return w_next, dp, a_w, b_w, a_p, b_p


def rollout(prob: AxisProblem, taus: Sequence[float]) -> tuple[list[float], list[float]]:
    """Predicted (w_1..w_N, p_1..p_N) under the control sequence."""
    w, p = prob.w0, prob.p0
    ws, ps = [], []
    for tau in taus:
        w, dp = _axis_step(w, tau, prob.inertia, prob.drag, prob.dt)[:2]
        p += dp
        ws.append(w)
        ps.append(p)
    return ws, ps


def axis_cost(prob: AxisProblem, taus: Sequence[float]) -> float:
    ws, ps = rollout(prob, taus)
    b, g, dl = prob.weights.beta, prob.weights.gamma, prob.weights.delta
    tracked = ws if prob.track == "rate" else ps
    total = 0.0
    for j, tau in enumerate(taus):
        e = tracked[j] - prob.refs[j]
        f = prob.drag * ws[j] * abs(ws[j])
        total += b * e * e + g * tau * tau + dl * f * f
    return total


def _linearize(prob: AxisProblem, taus: np.ndarray):
    """Cost, gradient and Gauss-Newton Hessian at ``taus``."""
    n = prob.n
    w, p = prob.w0, prob.p0
    ws = [0.0] * n
    ps = [0.0] * n
    a_w = [0.0] * n
    b_w = [0.0] * n
    a_p = [0.0] * n
    b_p = [0.0] * n
    for k in range(n):
        w_next, dp, a_w[k], b_w[k], a_p[k], b_p[k] = _axis_step(w, float(taus[k]), prob.inertia, prob.drag, prob.dt)
        p += dp
        w = w_next
        ws[k] = w
        ps[k] = p

    # sens_track[j, k] = d tracked_{j+1} / d tau_k ; sens_w likewise for the rate
    sens_track = np.zeros((n, n))
    sens_w = np.zeros((n, n))
    angle = prob.track == "angle"
    for k in range(n):
        sw, sp = b_w[k], b_p[k]
        sens_w[k, k] = sw
        sens_track[k, k] = sp if angle else sw
        for j in range(k + 1, n):
            sp += a_p[j] * sw
            sw *= a_w[j]
            sens_w[j, k] = sw
            sens_track[j, k] = sp if angle else sw

    tracked = np.asarray(ps if angle else ws)
    wv = np.asarray(ws)
    err = tracked - np.asarray(prob.refs)
    drag_f = prob.drag * wv * np.abs(wv)
    sens_drag = (2.0 * prob.drag * np.abs(wv))[:, None] * sens_w

    b, g, dl = prob.weights.beta, prob.weights.gamma, prob.weights.delta
    cost = float(b * err @ err + g * taus @ taus + dl * drag_f @ drag_f)
    grad = 2.0 * (b * sens_track.T @ err + g * taus + dl * sens_drag.T @ drag_f)
    hess = 2.0 * (b * sens_track.T @ sens_track + g * np.eye(n) + dl * sens_drag.T @ sens_drag)
    return cost, grad, hess


@dataclass(frozen=True)
class AxisSolution:
    taus: np.ndarray
    cost: float
    start_cost: float
    iterations: int


def solve_axis(prob: AxisProblem, start: Sequence[float], iterations: int = 40, max_halvings: int = 20) -> AxisSolution:
    lo, hi = -prob.bound, prob.bound
    x = np.clip(np.asarray(start, dtype=float), lo, hi)
    f = axis_cost(prob, x)
    if not math.isfinite(f):
        raise SolverNonFinite(f"non-finite cost {f} at the starting point")
    f_start = f
    it = 0
    for it in range(1, iterations + 1):
        f_lin, grad, hess = _linearize(prob, x)
        if not (math.isfinite(f_lin) and np.all(np.isfinite(grad)) and np.all(np.isfinite(hess))):
            raise SolverNonFinite("non-finite gradient or curvature")

        proj_grad = x - np.clip(x - grad, lo, hi)
        if float(np.max(np.abs(proj_grad))) <= 1e-12 * (1.0 + abs(f)):
            break
        eps = min(1e-9 * prob.bound, float(np.linalg.norm(proj_grad)))
        active = ((x <= lo + eps) & (grad > 0.0)) | ((x >= hi - eps) & (grad < 0.0))
        free = ~active

        direction = np.zeros_like(x)
        if free.any():
            h_ff = hess[np.ix_(free, free)]
            h_ff = h_ff + (1e-12 * (np.trace(h_ff) / h_ff.shape[0] + 1e-300)) * np.eye(h_ff.shape[0])
            direction[free] = -np.linalg.solve(h_ff, grad[free])
        if active.any():
            diag = np.maximum(np.diag(hess)[active], 1e-300)
            direction[active] = -grad[active] / diag

        step = 1.0
        accepted = False
        for _ in range(max_halvings + 1):
            cand = np.clip(x + step * direction, lo, hi)
            f_cand = axis_cost(prob, cand)
            if math.isfinite(f_cand) and f_cand < f:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        moved = float(np.max(np.abs(cand - x)))
        improvement = f - f_cand
        x, f = cand, f_cand
        if moved <= 1e-12 * prob.bound or improvement <= 1e-15 * (1.0 + f):
            break
    return AxisSolution(x, f, f_start, it)


@dataclass(frozen=True)
class MpcSolution:
    tau: tuple[float, float]
    predicted_cost: float
    start_cost: float
    plan_v: tuple[float, ...]
    plan_r: tuple[float, ...]
    iterations: int


def _horizon(config: MpcConfig, t_in_primitive: float | None) -> tuple[int, list[float]]:
    """Number of steps and the time of each predicted state."""
    dt = config.dt
    if t_in_primitive is None:
        n = config.horizon_steps
        return n, [(j + 1) * dt for j in range(n)]
    if not -1e-12 <= t_in_primitive <= 1.0 + 1e-12:
        raise ValueError(f"t_in_primitive={t_in_primitive} outside [0, 1]")
    remaining = int(round((1.0 - t_in_primitive) / dt))
    n = max(1, min(config.horizon_steps, remaining))
    return n, [min(t_in_primitive + (j + 1) * dt, 1.0) for j in range(n)]


def _start(warm: Sequence[float] | None, n: int, fallback: float = 0.0) -> np.ndarray:
    if warm is None or len(warm) == 0:
        return np.full(n, fallback)
    seq = list(warm[1:]) or [warm[-1]]
    seq = seq[:n] + [seq[-1]] * max(0, n - len(seq))
    return np.asarray(seq, dtype=float)


def build_problems(
    config: MpcConfig,
    mode: Mode | str | None,
    state: VehicleState,
    params: HydroParams,
    estimate: DragEstimate,
    t_in_primitive: float | None,
    profile: ReferenceProfile | None,
    theta0: float | None = None,
) -> tuple[AxisProblem, AxisProblem]:
    """Surge and yaw sub-problems.  ``profile=None`` builds the braking problem."""
    n, times = _horizon(config, t_in_primitive)
    w = config.weights
    if profile is None:
        zeros = tuple(0.0 for _ in range(n))
        surge = AxisProblem(params.mass, estimate.d_v_hat, config.dt, state.v, 0.0, zeros, "rate", config.tau_v_max, w)
        yaw = AxisProblem(params.i_z, estimate.d_r_hat, config.dt, state.r, 0.0, zeros, "rate", config.tau_r_max, w)
        return surge, yaw

    mode = Mode(mode) if mode is not None else profile.mode
    if mode is not profile.mode:
        raise ValueError(f"mode {mode.value} does not match profile mode {profile.mode.value}")
    heading0 = state.theta if theta0 is None else theta0
    p_yaw = wrap_angle(state.theta - heading0)
    if mode is Mode.TRANSLATION:
        v_refs = tuple(profile.signed_magnitude * shape(t) for t in times)
        th_refs = tuple(0.0 for _ in times)
    else:
        v_refs = tuple(0.0 for _ in times)
        th_refs = tuple(profile.signed_magnitude * shape_integral(t) for t in times)
    surge = AxisProblem(params.mass, estimate.d_v_hat, config.dt, state.v, 0.0, v_refs, "rate", config.tau_v_max, w)
    yaw = AxisProblem(params.i_z, estimate.d_r_hat, config.dt, state.r, p_yaw, th_refs, "angle", config.tau_r_max, w)
    return surge, yaw


def solve(
    config: MpcConfig,
    mode: Mode | str | None,
    state: VehicleState,
    params: HydroParams,
    estimate: DragEstimate,
    t_in_primitive: float | None,
    profile: ReferenceProfile | None,
    theta0: float | None = None,
    warm_start: MpcSolution | None = None,
) -> MpcSolution:
    """First control of the optimised horizon plus the predicted cost.

    ``theta0`` is the heading at the start of the primitive (defaults to the
    current heading).  The optimisation starts from whichever of the shifted
    warm start and the zero sequence is cheaper, so the returned cost never
    exceeds the zero-thrust cost.
    """
    surge, yaw = build_problems(config, mode, state, params, estimate, t_in_primitive, profile, theta0)
    sols = []
    for prob, warm in ((surge, warm_start.plan_v if warm_start else None), (yaw, warm_start.plan_r if warm_start else None)):
        zero = np.zeros(prob.n)
        start = zero
        if warm is not None:
            cand = np.clip(_start(warm, prob.n), -prob.bound, prob.bound)
            f_zero, f_warm = axis_cost(prob, zero), axis_cost(prob, cand)
            if math.isfinite(f_warm) and f_warm < f_zero:
                start = cand
        sols.append(solve_axis(prob, start, config.iterations, config.max_halvings))
    sv, sr = sols
    return MpcSolution(
        tau=(float(sv.taus[0]), float(sr.taus[0])),
        predicted_cost=sv.cost + sr.cost,
        start_cost=sv.start_cost + sr.start_cost,
        plan_v=tuple(float(t) for t in sv.taus),
        plan_r=tuple(float(t) for t in sr.taus),
        iterations=max(sv.iterations, sr.iterations),
    )


def predicted_cost(
    config: MpcConfig,
    mode: Mode | str | None,
    state: VehicleState,
    params: HydroParams,
    estimate: DragEstimate,
    t_in_primitive: float | None,
    profile: ReferenceProfile | None,
    plan_v: Sequence[float],
    plan_r: Sequence[float],
    theta0: float | None = None,
) -> float:
    """Objective value of an arbitrary control sequence (for oracle checks)."""
    surge, yaw = build_problems(config, mode, state, params, estimate, t_in_primitive, profile, theta0)
    return axis_cost(surge, list(plan_v)[: surge.n]) + axis_cost(yaw, list(plan_r)[: yaw.n])
