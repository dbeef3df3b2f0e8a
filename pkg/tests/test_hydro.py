import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualbrain.errors import NonFiniteState, SingularAllocation
from dualbrain.hydro import (
    HydroParams,
    ThrusterConfig,
    VehicleState,
    acceleration,
    allocate_thrust,
    drag_wrench,
    step_dynamics,
    thrust_to_wrench,
    wrap_angle,
)

from oracles import planar_rk4

P = HydroParams()
speeds = st.floats(-2.0, 2.0, allow_nan=False)


def test_derived_coefficients():
    assert P.added_mass == pytest.approx(1000 * 0.03 * 0.25)
    assert P.mass == pytest.approx(37.5)
    assert P.mass > P.m_rigid
    assert P.d_v == pytest.approx(0.5 * 1000 * 0.8 * 0.08)
    assert P.d_r == pytest.approx(0.5 * 1000 * 0.6 * 0.3**4)


@pytest.mark.parametrize("field", ["m_rigid", "rho", "vol", "c_a", "i_z", "c_d", "area", "c_dr", "length"])
def test_params_must_be_positive(field):
    with pytest.raises(ValueError):
        HydroParams(**{field: 0.0})


def test_with_drag_sets_coefficients():
    p = P.with_drag(d_v=8.0, d_r=1.5)
    assert p.d_v == pytest.approx(8.0)
    assert p.d_r == pytest.approx(1.5)


def test_drag_wrench_examples():
    assert drag_wrench(P, 0.0, 0.0) == (0.0, 0.0)
    p8 = P.with_drag(d_v=8.0)
    assert drag_wrench(p8, 0.5, 0.0)[0] == pytest.approx(2.0)
    assert drag_wrench(p8, -0.5, 0.0)[0] == pytest.approx(-2.0)


@given(speeds, speeds)
def test_drag_is_odd(v, r):
    f, t = drag_wrench(P, v, r)
    fn, tn = drag_wrench(P, -v, -r)
    assert fn == -f and tn == -t


def test_allocation_examples():
    cfg = ThrusterConfig()
    a = allocate_thrust(cfg, (0.0, 0.0))
    assert (a.u_left, a.u_right, a.saturated) == (0.0, 0.0, False)
    a = allocate_thrust(cfg, (2.0, 0.0))
    assert a.u_left == pytest.approx(1.0) and a.u_right == pytest.approx(1.0)
    a = allocate_thrust(cfg, (1000.0, 0.0))
    assert a.saturated and a.u_left == cfg.u_max and a.u_right == cfg.u_max


def test_singular_allocation_rejected():
    with pytest.raises(SingularAllocation):
        ThrusterConfig(allocation=np.array([[1.0, 1.0], [1.0, 1.0]]))


@given(st.floats(-100, 100), st.floats(-20, 20))
def test_allocation_round_trip_inside_polytope(tv, tr):
    cfg = ThrusterConfig()
    a = allocate_thrust(cfg, (tv, tr))
    if a.saturated:
        return
    back = thrust_to_wrench(cfg, (a.u_left, a.u_right))
    assert back[0] == pytest.approx(tv, rel=1e-9, abs=1e-9)
    assert back[1] == pytest.approx(tr, rel=1e-9, abs=1e-9)


def test_wrap_angle_range():
    for a in np.linspace(-20, 20, 401):
        w = wrap_angle(a)
        assert -math.pi < w <= math.pi
        assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)
    assert wrap_angle(-math.pi) == math.pi


def test_equilibrium_only_advances_time():
    s = VehicleState(1.0, 2.0, 0.3, 0.0, 0.0, 4.0)
    n = step_dynamics(s, P, (0.0, 0.0), 0.02)
    assert (n.x, n.y, n.theta, n.v, n.r) == (s.x, s.y, s.theta, s.v, s.r)
    assert n.t == pytest.approx(4.02)


def test_step_matches_independent_rk4():
    s = VehicleState(0.1, -0.2, 0.4, 0.3, -0.2, 0.0)
    n = step_dynamics(s, P, (12.0, -1.5), 0.02)
    ref = planar_rk4(0.1, -0.2, 0.4, 0.3, -0.2, 12.0, -1.5, P.mass, P.i_z, P.d_v, P.d_r, 0.02)
    assert (n.x, n.y, n.theta, n.v, n.r) == pytest.approx(ref, abs=1e-14)


def test_terminal_surge_speed():
    s = VehicleState()
    for _ in range(500):
        s = step_dynamics(s, P, (8.0, 0.0), 0.02)
    assert s.v == pytest.approx(math.sqrt(8.0 / P.d_v), rel=0.01)


def _rollout(dt, seconds=1.0):
    s = VehicleState(0, 0, 0, 0.2, 0.1, 0)
    for _ in range(int(round(seconds / dt))):
        s = step_dynamics(s, P, (10.0, 0.5), dt)
    return s


def test_time_step_convergence():
    a, b = _rollout(0.02), _rollout(0.002)
    assert math.hypot(a.x - b.x, a.y - b.y) < 1e-4


def test_fourth_order_self_convergence():
    e1 = _rollout(0.02).x - _rollout(0.0025).x
    e2 = _rollout(0.01).x - _rollout(0.0025).x
    # error(dt) - error(dt/8) over error(dt/2) - error(dt/8) tends to (1-1/4096)/(1/16-1/4096) ~ 16
    assert abs(e1 / e2) > 12


@settings(max_examples=50)
@given(speeds, st.floats(-3, 3))
def test_energy_nonincreasing_without_thrust(v, r):
    s = VehicleState(0, 0, 0, v, r, 0)
    energy = 0.5 * P.mass * v * v + 0.5 * P.i_z * r * r
    for _ in range(20):
        s = step_dynamics(s, P, (0.0, 0.0), 0.02)
        e = 0.5 * P.mass * s.v**2 + 0.5 * P.i_z * s.r**2
        assert e <= energy
        energy = e


def test_heading_stays_wrapped_and_time_increases():
    s = VehicleState()
    last_t = s.t
    for _ in range(300):
        s = step_dynamics(s, P, (0.0, 10.0), 0.02)
        assert -math.pi < s.theta <= math.pi
        assert s.t > last_t
        last_t = s.t


def test_bad_inputs_raise():
    with pytest.raises(ValueError):
        step_dynamics(VehicleState(), P, (0.0, 0.0), 0.0)
    with pytest.raises(ValueError):
        step_dynamics(VehicleState(), P, (0.0, 0.0), 0.5)
    with pytest.raises(NonFiniteState):
        step_dynamics(VehicleState(), P, (math.inf, 0.0), 0.02)


def test_acceleration_matches_equations():
    a_v, a_r = acceleration(P, 0.5, -0.3, (5.0, 1.0))
    assert a_v == pytest.approx((5.0 - P.d_v * 0.25) / P.mass)
    assert a_r == pytest.approx((1.0 + P.d_r * 0.09) / P.i_z)
