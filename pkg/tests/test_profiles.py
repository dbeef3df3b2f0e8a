import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dualbrain.errors import OutOfWindow
from dualbrain.profiles import (
    UNIT_PROFILE_AREA,
    Direction,
    Level,
    MotionCommand,
    Mode,
    displacement_ref,
    profile_for,
    r_ref,
    shape,
    shape_integral,
    theta_ref,
    v_ref,
)

from oracles import quad_trapezoid, trapezoid_shape

window = st.floats(0.0, 1.0)


def cmd(d, lvl="medium"):
    return MotionCommand(Direction(d), Level(lvl))


def test_command_modes_and_levels():
    assert cmd("forward").mode is Mode.TRANSLATION
    assert cmd("backward").mode is Mode.TRANSLATION
    assert cmd("left").mode is Mode.TURNING
    assert cmd("right").mode is Mode.TURNING
    assert str(cmd("hold", "high")) == "hold"
    assert str(cmd("right", "low")) == "right/low"
    with pytest.raises(ValueError):
        MotionCommand("ascend", "low")


@pytest.mark.parametrize(
    "direction, level, mode, magnitude, sign",
    [
        ("forward", "low", Mode.TRANSLATION, 0.2, 1),
        ("forward", "medium", Mode.TRANSLATION, 0.5, 1),
        ("backward", "high", Mode.TRANSLATION, 0.8, -1),
        ("right", "low", Mode.TURNING, 0.5, 1),
        ("left", "medium", Mode.TURNING, 1.0, -1),
        ("right", "high", Mode.TURNING, 1.5, 1),
    ],
)
def test_profile_table(direction, level, mode, magnitude, sign):
    p = profile_for(cmd(direction, level))
    assert (p.mode, p.magnitude, p.sign, p.duration) == (mode, magnitude, sign, 1.0)


@pytest.mark.parametrize("level", ["low", "medium", "high"])
def test_hold_ignores_level(level):
    p = profile_for(cmd("hold", level))
    assert p.is_rest and all(v_ref(p, t / 10) == 0.0 for t in range(11))


def test_v_ref_examples():
    med = profile_for(cmd("forward", "medium"))
    high = profile_for(cmd("forward", "high"))
    assert v_ref(med, 0.1) == pytest.approx(0.25)
    assert v_ref(med, 0.3) == pytest.approx(0.5)
    assert v_ref(med, 1.0) == 0.0
    assert v_ref(high, 0.75) == pytest.approx(0.4)


def test_r_ref_examples():
    assert r_ref(profile_for(cmd("right", "low")), 0.2) == pytest.approx(0.5)
    assert r_ref(profile_for(cmd("right", "high")), 0.0) == 0.0
    assert r_ref(profile_for(cmd("right", "medium")), 0.6) == pytest.approx(0.8)
    assert r_ref(profile_for(cmd("left", "medium")), 0.6) == pytest.approx(-0.8)


def test_theta_ref_examples():
    p = profile_for(cmd("right", "medium"))
    assert theta_ref(p, 0.4, 0.0) == 0.4
    assert theta_ref(p, 0.0, 1.0) == pytest.approx(0.65)
    assert theta_ref(p, 0.0, 0.5) == pytest.approx(0.4)
    assert UNIT_PROFILE_AREA == pytest.approx(0.65)


def test_wrong_mode_rejected():
    with pytest.raises(ValueError):
        v_ref(profile_for(cmd("right")), 0.1)
    with pytest.raises(ValueError):
        theta_ref(profile_for(cmd("forward")), 0.0, 0.1)


@pytest.mark.parametrize("t", [-0.01, 1.01])
def test_outside_window(t):
    with pytest.raises(OutOfWindow):
        shape(t)
    with pytest.raises(OutOfWindow):
        shape_integral(t)


@given(window)
def test_shape_matches_oracle(t):
    assert shape(t) == pytest.approx(trapezoid_shape(t), abs=1e-12)


@given(window, st.sampled_from(list(Level)))
def test_peak_bound(t, lvl):
    p = profile_for(MotionCommand(Direction.FORWARD, lvl))
    assert 0.0 <= v_ref(p, t) <= p.magnitude
    q = profile_for(MotionCommand(Direction.LEFT, lvl))
    assert -q.magnitude <= r_ref(q, t) <= 0.0


@pytest.mark.parametrize("b", [0.2, 0.5])
def test_continuity_at_breakpoints(b):
    assert shape(b - 1e-13) == pytest.approx(shape(b), abs=1e-12)
    assert shape_integral(b - 1e-13) == pytest.approx(shape_integral(b), abs=1e-12)


def test_terminal_rest():
    for lvl in Level:
        assert v_ref(profile_for(MotionCommand("forward", lvl)), 1.0) == 0.0
        assert r_ref(profile_for(MotionCommand("right", lvl)), 1.0) == 0.0


@pytest.mark.parametrize("t", [0.05, 0.2, 0.37, 0.5, 0.81, 1.0])
def test_theta_ref_matches_quadrature(t):
    p = profile_for(cmd("right", "high"))
    q = quad_trapezoid(lambda s: r_ref(p, s), 0.0, t, 1e-4)
    assert theta_ref(p, 0.0, t) == pytest.approx(q, abs=1e-9)


def test_displacement_ref():
    assert displacement_ref(profile_for(cmd("forward", "medium")), 1.0) == pytest.approx(0.325)
    assert displacement_ref(profile_for(cmd("backward", "low")), 1.0) == pytest.approx(-0.13)
