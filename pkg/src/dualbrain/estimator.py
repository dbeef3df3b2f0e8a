"""Online drag identification from thrust and inertial measurements.

The point estimator inverts the surge/yaw equations of motion::

    D_v = (tau_v - M dv/dt) / (v|v|)        D_r = (tau_r - Iz dr/dt) / (r|r|)

Two smoothers sit on top of it.  ``update`` is an exponential moving average
of the point estimates.  ``update_rls`` is a scalar recursive least-squares fit
of ``tau - M dv/dt = D * v|v|``; it weights each sample by ``(v|v|)^2`` and so
stays well behaved near the velocity floor, and it is what the executor uses
by default.  Both clamp the result to ``[band_lo, band_hi] * prior``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .hydro import HydroParams


@dataclass(frozen=True)
class EstimatorConfig:
    method: str = "rls"  # "rls" | "ema" | "frozen"
    alpha: float = 0.2  # EMA smoothing factor
    forgetting: float = 1.0  # RLS forgetting factor
    p0: float = 1e8  # RLS initial covariance (per unit regressor^2)
    v_floor: float = 0.05  # [m/s]
    r_floor: float = 0.05  # [rad/s]
    band_lo: float = 0.1
    band_hi: float = 10.0
    noise_sigma: float = 0.0  # accelerometer noise, [m/s^2] and [rad/s^2]
    prior_d_v: float | None = None  # None -> HydroParams.d_v
    prior_d_r: float | None = None

    def __post_init__(self):
        if self.method not in ("rls", "ema", "frozen"):
            raise ValueError(f"unknown estimator method {self.method!r}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if not 0.0 < self.forgetting <= 1.0:
            raise ValueError("forgetting must lie in (0, 1]")
        if not 0.0 < self.band_lo <= 1.0 <= self.band_hi:
            raise ValueError("prior band must bracket 1")
        if self.v_floor <= 0 or self.r_floor <= 0 or self.noise_sigma < 0 or self.p0 <= 0:
            raise ValueError("floors and p0 must be > 0, noise_sigma >= 0")


@dataclass(frozen=True)
class InertialSample:
    v: float
    r: float
    v_dot: float
    r_dot: float
    tau_v: float
    tau_r: float

    def __post_init__(self):
        for name in ("v", "r", "v_dot", "r_dot", "tau_v", "tau_r"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"InertialSample.{name} is not finite")


@dataclass(frozen=True)
class DragEstimate:
    d_v_hat: float
    d_r_hat: float
    sample_count_v: int = 0
    sample_count_r: int = 0
    prior_d_v: float = 0.0
    prior_d_r: float = 0.0
    p_v: float = 0.0  # RLS covariance
    p_r: float = 0.0

    @classmethod
    def from_prior(cls, d_v: float, d_r: float, config: EstimatorConfig | None = None) -> "DragEstimate":
        cfg = config or EstimatorConfig()
        if not (d_v > 0 and d_r > 0):
            raise ValueError("drag priors must be > 0")
        return cls(d_v, d_r, 0, 0, d_v, d_r, cfg.p0, cfg.p0)

    @classmethod
    def initial(cls, params: HydroParams, config: EstimatorConfig | None = None) -> "DragEstimate":
        cfg = config or EstimatorConfig()
        d_v = cfg.prior_d_v if cfg.prior_d_v is not None else params.d_v
        d_r = cfg.prior_d_r if cfg.prior_d_r is not None else params.d_r
        return cls.from_prior(d_v, d_r, cfg)


def raw_estimate(
    sample: InertialSample, params: HydroParams, config: EstimatorConfig | None = None
) -> tuple[float | None, float | None]:
    """Point estimates of (D_v, D_r); ``None`` where the velocity is below its floor."""
    cfg = config or EstimatorConfig()
    d_v = d_r = None
    if abs(sample.v) >= cfg.v_floor:
        d_v = (sample.tau_v - params.mass * sample.v_dot) / (sample.v * abs(sample.v))
    if abs(sample.r) >= cfg.r_floor:
        d_r = (sample.tau_r - params.i_z * sample.r_dot) / (sample.r * abs(sample.r))
    return d_v, d_r


def _clamp(value: float, prior: float, cfg: EstimatorConfig) -> float:
    return min(max(value, cfg.band_lo * prior), cfg.band_hi * prior)


def update(
    est: DragEstimate, sample: InertialSample, params: HydroParams, config: EstimatorConfig | None = None
) -> DragEstimate:
    """EMA update of the estimate with whichever point estimates are present."""
    cfg = config or EstimatorConfig()
    raw_v, raw_r = raw_estimate(sample, params, cfg)
    changes = {}
    a = cfg.alpha
    if raw_v is not None and math.isfinite(raw_v):
        changes["d_v_hat"] = _clamp((1.0 - a) * est.d_v_hat + a * raw_v, est.prior_d_v, cfg)
        changes["sample_count_v"] = est.sample_count_v + 1
    if raw_r is not None and math.isfinite(raw_r):
        changes["d_r_hat"] = _clamp((1.0 - a) * est.d_r_hat + a * raw_r, est.prior_d_r, cfg)
        changes["sample_count_r"] = est.sample_count_r + 1
    return replace(est, **changes) if changes else est


def _rls_step(theta: float, p: float, phi: float, y: float, lam: float) -> tuple[float, float]:
    denom = lam + phi * p * phi
    gain = p * phi / denom
    theta = theta + gain * (y - phi * theta)
    p = (p - gain * phi * p) / lam
    return theta, p


def update_rls(
    est: DragEstimate, sample: InertialSample, params: HydroParams, config: EstimatorConfig | None = None
) -> DragEstimate:
    """Recursive least-squares update; same gating and clamping as :func:`update`."""
    cfg = config or EstimatorConfig()
    changes = {}
    lam = cfg.forgetting
    if abs(sample.v) >= cfg.v_floor:
        phi = sample.v * abs(sample.v)
        y = sample.tau_v - params.mass * sample.v_dot
        d, p = _rls_step(est.d_v_hat, est.p_v, phi, y, lam)
        if math.isfinite(d):
            changes.update(d_v_hat=_clamp(d, est.prior_d_v, cfg), p_v=p, sample_count_v=est.sample_count_v + 1)
    if abs(sample.r) >= cfg.r_floor:
        phi = sample.r * abs(sample.r)
        y = sample.tau_r - params.i_z * sample.r_dot
        d, p = _rls_step(est.d_r_hat, est.p_r, phi, y, lam)
        if math.isfinite(d):
            changes.update(d_r_hat=_clamp(d, est.prior_d_r, cfg), p_r=p, sample_count_r=est.sample_count_r + 1)
    return replace(est, **changes) if changes else est


def apply_update(
    est: DragEstimate, sample: InertialSample, params: HydroParams, config: EstimatorConfig
) -> DragEstimate:
    """Dispatch on ``config.method``."""
    if config.method == "rls":
        return update_rls(est, sample, params, config)
    if config.method == "ema":
        return update(est, sample, params, config)
    return est
