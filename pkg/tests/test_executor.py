import math
from dataclasses import replace

import numpy as np
import pytest

from dualbrain import executor as ex
from dualbrain.errors import SolverNonFinite
from dualbrain.estimator import DragEstimate, EstimatorConfig
from dualbrain.executor import PRIMITIVE_TICKS, ExecutorConfig, active_brake, execute_primitive
from dualbrain.hydro import HydroParams, VehicleState
from dualbrain.profiles import Direction, Level, MotionCommand

P = HydroParams()
EST = DragEstimate.initial(P)
CFG = ExecutorConfig()


def run(direction, level="medium", state=None, **kw):
    return execute_primitive(MotionCommand(direction, level), state or VehicleState(), P, EST, CFG, **kw)


def test_hold_from_rest_is_exactly_still():
    s0 = VehicleState(1.0, -2.0, 0.5, 0.0, 0.0, 3.0)
    s1, res = execute_primitive(MotionCommand("hold"), s0, P, EST, CFG)
    assert (s1.x, s1.y, s1.theta, s1.v, s1.r) == (s0.x, s0.y, s0.theta, 0.0, 0.0)
    assert len(res.primitive_ticks) == PRIMITIVE_TICKS and res.braking_ticks == 0
    assert all(t.tau == (0.0, 0.0) for t in res.trajectory)


def test_medium_forward_displacement():
    s1, res = run("forward")
    assert abs(s1.x - 0.325) <= 0.1 * 0.325
    # displacement equals the integral of the achieved surge (trapezoid rule)
    vs = [0.0] + [t.state.v for t in res.trajectory]
    integral = sum(0.5 * (a + b) * CFG.dt for a, b in zip(vs, vs[1:]))
    assert s1.x == pytest.approx(integral, rel=1e-3)
    assert abs(s1.y) < 1e-9 and abs(s1.theta) < 1e-9


def test_medium_right_turn_sweep():
    s1, res = run("right")
    assert abs(s1.theta - 0.65) <= 0.05
    assert math.hypot(s1.x, s1.y) < 1e-9


def test_backward_and_left_signs():
    s1, _ = run("backward", "low")
    assert s1.x == pytest.approx(-0.13, rel=0.1)
    s2, _ = run("left", "high")
    assert s2.theta == pytest.approx(-0.975, abs=0.05)


@pytest.mark.parametrize("direction", ["forward", "backward", "left", "right"])
@pytest.mark.parametrize("level", ["low", "medium", "high"])
def test_every_primitive_ends_at_rest(direction, level):
    _, res = run(direction, level)
    assert len(res.primitive_ticks) == PRIMITIVE_TICKS
    assert not res.brake_timeout
    assert abs(res.residual_v) < 0.01 and abs(res.residual_r) < 0.01
    assert res.incidents == []


def test_off_axis_quiescence():
    _, res = run("forward", "high")
    assert all(abs(t.state.r) < 0.02 for t in res.trajectory)
    _, res = run("right", "high")
    assert all(abs(t.state.v) < 0.02 for t in res.trajectory)


def test_turn_from_wrapped_heading():
    s0 = VehicleState(theta=3.0)
    s1, res = run("right", "medium", s0)
    assert s1.theta == pytest.approx(3.0 + 0.65 - 2 * math.pi, abs=0.05)
    assert res.rms_tracking_error() < 0.01


def test_active_brake_examples():
    assert active_brake(VehicleState(), P, EST, CFG)[1:] == (0, False)
    s, ticks, timed_out = active_brake(VehicleState(v=0.05), P, EST, CFG)
    assert abs(s.v) < 0.01 and not timed_out and ticks * CFG.dt < 2.0
    s, ticks, timed_out = active_brake(VehicleState(r=0.2), P, EST, CFG)
    assert abs(s.r) < 0.01 and not timed_out


def test_brake_needs_both_axes_at_rest():
    # surge already below threshold, yaw still spinning: braking must continue
    s, ticks, _ = active_brake(VehicleState(v=0.001, r=0.3), P, EST, CFG)
    assert ticks > 0 and abs(s.r) < 0.01


def test_brake_timeout_is_reported():
    cfg = replace(CFG, brake_timeout=0.04)
    s, ticks, timed_out = active_brake(VehicleState(v=0.8), P, EST, cfg)
    assert timed_out and ticks == 2


def test_determinism_with_noise():
    cfg = replace(CFG, estimator=EstimatorConfig(noise_sigma=0.05))
    a = execute_primitive(MotionCommand("forward", "medium"), VehicleState(), P, EST, cfg, np.random.default_rng(5))
    b = execute_primitive(MotionCommand("forward", "medium"), VehicleState(), P, EST, cfg, np.random.default_rng(5))
    assert a[0] == b[0]
    assert [t.as_record() for t in a[1].trajectory] == [t.as_record() for t in b[1].trajectory]
    with pytest.raises(ValueError):
        execute_primitive(MotionCommand("forward"), VehicleState(), P, EST, cfg)


def test_estimator_learns_from_mismatched_prior():
    est = DragEstimate.from_prior(0.5 * P.d_v, 2.0 * P.d_r)
    _, res = execute_primitive(MotionCommand("forward", "medium"), VehicleState(), P, est, CFG)
    assert res.final_estimate.d_v_hat == pytest.approx(P.d_v, rel=1e-6)
    # first tick has no accelerometer sample yet
    assert res.trajectory[0].d_v_hat == 0.5 * P.d_v


def test_solver_failure_gives_zero_thrust_tick(monkeypatch):
    calls = {"n": 0}
    real = ex.solve

    def flaky(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 10:
            raise SolverNonFinite("injected")
        return real(*args, **kwargs)

    monkeypatch.setattr(ex, "solve", flaky)
    _, res = run("forward")
    assert res.trajectory[9].tau == (0.0, 0.0)
    assert any("injected" in m for m in res.incidents)
    assert len(res.primitive_ticks) == PRIMITIVE_TICKS


def test_sink_receives_every_tick():
    seen = []
    _, res = run("left", "low", sink=seen.append)
    assert len(seen) == len(res.trajectory)
    assert seen[0]["phase"] == "primitive" and set(seen[0]) >= {"t", "x", "tau_v", "u_l", "d_v_hat"}


def test_non_finite_start_rejected():
    with pytest.raises(ValueError):
        run("forward", state=VehicleState(v=math.nan))
