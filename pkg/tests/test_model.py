"""Tester för robotmodell, last och gångschema"""
import math

import numpy as np
import pytest

from errors import ConfigError
from model import GaitSchedule, PayloadSpec, RobotModel, contact_horizon, contact_state


def test_default_model_values():
    model = RobotModel()
    assert model.mass == 16.0
    assert model.inertia == (0.541, 0.520, 0.069)
    np.testing.assert_allclose(model.gravity_vector, [0.0, 0.0, -9.81])
    assert model.leg_reach == pytest.approx(0.48)


def test_hip_offsets_are_mirrored():
    model = RobotModel()
    left, right = model.hip_offset(0), model.hip_offset(1)
    assert left[1] == pytest.approx(0.047)
    assert right[1] == pytest.approx(-0.047)
    assert left[2] == right[2]


@pytest.mark.parametrize("field, value, key", [
    ("mu", 0.0, "robot.mu"),
    ("mass", -1.0, "robot.mass"),
    ("f_min", 300.0, "robot.f_min"),
    ("inertia", (0.5, 0.5), "robot.inertia"),
])
def test_invalid_model_rejected(field, value, key):
    with pytest.raises(ConfigError) as info:
        RobotModel(**{field: value})
    assert info.value.key == key


def test_model_lists_become_tuples():
    model = RobotModel(torque_limits=[30, 30, 30, 50, 30])
    assert model.torque_limits == (30.0, 30.0, 30.0, 50.0, 30.0)


def test_standing_gait_keeps_both_feet_down():
    gait = GaitSchedule()
    for t in np.linspace(0.0, 2.0, 17):
        state = contact_state(gait, float(t))
        assert state.stance == (True, True)


def test_walking_gait_alternates():
    gait = GaitSchedule(mode="walking", period=0.5)
    assert contact_state(gait, 0.0).stance == (True, False)
    assert contact_state(gait, 0.1).stance == (True, False)
    assert contact_state(gait, 0.3).stance == (False, True)
    assert contact_state(gait, 0.1).phase[0] == pytest.approx(0.4)


def test_walking_switch_exactly_at_half_period():
    gait = GaitSchedule(mode="walking", period=0.5)
    assert contact_state(gait, 0.25).stance == (False, True)
    assert contact_state(gait, 0.5).stance == (True, False)


def test_period_outside_bounds_rejected_unless_allowed():
    with pytest.raises(ConfigError):
        GaitSchedule(mode="walking", period=1.0)
    gait = GaitSchedule(mode="walking", period=1.0, allow_out_of_range_period=True)
    assert gait.stance_duration(0) == pytest.approx(0.5)


def test_zero_period_rejected():
    with pytest.raises(ConfigError) as info:
        GaitSchedule(period=0.0)
    assert info.value.key == "gait.period"


def test_contact_horizon_rows_match_contact_state():
    gait = GaitSchedule(mode="walking", period=0.5)
    plan = contact_horizon(gait, PayloadSpec(), 0.12, 0.05, 10)
    assert len(plan) == 10
    for k in range(10):
        expected = contact_state(gait, 0.12 + 0.05 * k)
        assert plan.row(k).stance == expected.stance
    assert plan.payload.all()


def test_contact_horizon_rejects_empty_horizon():
    with pytest.raises(ConfigError):
        contact_horizon(GaitSchedule(), PayloadSpec(), 0.0, 0.05, 0)


def test_payload_linear_ramp():
    payload = PayloadSpec(mass_breakpoints=((0.0, 0.5), (8.0, 4.0)))
    assert payload.mass_at(0.0) == pytest.approx(0.5)
    assert payload.mass_at(4.0) == pytest.approx(2.25)
    assert payload.mass_at(20.0) == pytest.approx(4.0)


def test_payload_step_schedule():
    payload = PayloadSpec(mass_breakpoints=((0.0, 0.0), (1.0, 4.0)), interpolation="step")
    assert payload.mass_at(0.99) == 0.0
    assert payload.mass_at(1.0) == 4.0


def test_payload_release_window():
    payload = PayloadSpec(mass_breakpoints=((0.0, 2.0),), contact_windows=((0.0, 2.0),))
    assert payload.active_mass(1.0) == pytest.approx(2.0)
    assert payload.active_mass(2.5) == 0.0
    plan = contact_horizon(GaitSchedule(), payload, 1.8, 0.05, 10)
    assert plan.payload[:4].all()
    assert not plan.payload[4:].any()


def test_payload_default_window_is_unbounded():
    assert PayloadSpec().contact_windows == ((0.0, math.inf),)


@pytest.mark.parametrize("kwargs", [
    {"mass_breakpoints": ((1.0, 1.0), (0.5, 2.0))},
    {"mass_breakpoints": ((0.0, -1.0),)},
    {"interpolation": "cubic"},
    {"contact_windows": ((2.0, 1.0),)},
])
def test_invalid_payload_rejected(kwargs):
    with pytest.raises(ConfigError):
        PayloadSpec(**kwargs)
