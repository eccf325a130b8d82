"""Tester för simulatorn, terrängen och mätetalen"""
import math
import os

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from dynamics import NO_LOAD, RobotState
from errors import ConfigError, ContractViolationError
from kinematics import LegJoints, leg_jacobian, torque_map
from model import GaitSchedule, PayloadSpec, RobotModel
from mpc import MpcConfig, step_inequalities
from scenario_file import load_scenario
from sim import (CommandPoint, Disturbance, Scenario, SimLog, Terrain, compute_metrics, effective_wrench,
                 integrate_step, run_scenario, standing_pose)

NOMINAL = (0.0, 0.0, -0.3709, 0.7418, -0.3709)
SCENARIO_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "scenarios")


def test_flat_terrain():
    assert Terrain().height(3.0, -1.0) == 0.0


def test_slope_starts_at_offset():
    terrain = Terrain(kind="slope", slope=math.radians(18.0), start=0.3)
    assert terrain.height(0.2) == 0.0
    assert terrain.height(1.3) == pytest.approx(math.tan(math.radians(18.0)))


def test_random_slats_are_reproducible():
    first = Terrain(kind="random-slats", seed=7)
    second = Terrain(kind="random-slats", seed=7)
    xs = np.linspace(0.0, 7.0, 200)
    heights = [first.height(x) for x in xs]
    assert heights == [second.height(x) for x in xs]
    assert set(heights) <= {0.0, 0.02, 0.04, 0.06}


def test_stacked_slats_capped():
    terrain = Terrain(kind="stacked-slats", max_height=0.04)
    heights = [terrain.height(x) for x in np.linspace(0.3, 6.3, 100)]
    assert max(heights) == pytest.approx(0.04)
    assert terrain.height(0.31) == pytest.approx(0.02)


@pytest.mark.parametrize("kwargs", [{"kind": "stairs"}, {"kind": "slope", "slope": 1.0},
                                    {"slat_heights": (0.0, -0.02)}])
def test_invalid_terrain(kwargs):
    with pytest.raises(ConfigError):
        Terrain(**kwargs)


def test_disturbance_window():
    disturbance = Disturbance(((2.0, 0.3, (10.0, 0.0, 0.0)),))
    assert disturbance.wrench_at(1.99) is None
    np.testing.assert_allclose(disturbance.wrench_at(2.1), [10.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    assert disturbance.wrench_at(2.3) is None


def test_disturbance_point_adds_torque():
    disturbance = Disturbance(((0.0, 1.0, (10.0, 0.0, 0.0), (0.0, 0.0, 0.5), (0.0, 0.0, 0.1)),))
    np.testing.assert_allclose(disturbance.wrench_at(0.5)[3:], [0.0, 1.0, 0.5])


def test_overlapping_disturbances_rejected():
    with pytest.raises(ConfigError) as info:
        Disturbance(((1.0, 0.5, (1.0, 0.0, 0.0)), (1.2, 0.5, (0.0, 1.0, 0.0))))
    assert info.value.key == "disturbances"


def test_scenario_timing_and_commands():
    scenario = Scenario(duration=2.0, commands=((0.5, 0.6, 0.0, 0.0), (0.0,)))
    assert scenario.steps == 2000
    assert scenario.ticks_per_solve == 10
    assert scenario.commands[0] == CommandPoint(0.0)
    assert scenario.command_at(0.4) == (0.0, 0.0, 0.0)
    assert scenario.command_at(0.5) == (0.6, 0.0, 0.0)


def test_scenario_rejects_bad_duration():
    with pytest.raises(ConfigError) as info:
        Scenario(duration=0.0)
    assert info.value.key == "sim.duration"


def test_ballistic_step():
    model = RobotModel()
    state = RobotState(position=(0.0, 0.0, 1.0))
    feet = [np.zeros(3), np.zeros(3)]
    dt = 0.001
    after = integrate_step(state, model, feet, NO_LOAD, np.zeros(12), dt)
    assert after.velocity[2] == pytest.approx(-9.81 * dt)
    assert after.position[2] == pytest.approx(1.0 - 0.5 * 9.81 * dt ** 2)
    np.testing.assert_allclose(after.euler, 0.0)


def test_supported_body_stays_put():
    model = RobotModel()
    state, feet = standing_pose(model)
    u = np.zeros(12)
    u[2] = u[5] = 0.5 * model.mass * model.gravity
    after = integrate_step(state, model, [foot.position for foot in feet], NO_LOAD, u, 0.001)
    np.testing.assert_allclose(after.as_vector(), state.as_vector(), atol=1e-12)


def test_standing_pose_puts_feet_under_hips():
    model = RobotModel()
    state, feet = standing_pose(model, Terrain(kind="slope", start=-1.0))
    ground = math.tan(math.radians(18.0))
    assert state.position[2] == pytest.approx(ground + 0.55)
    for leg, foot in enumerate(feet):
        assert foot.position[1] == pytest.approx(model.hip_offset(leg)[1], abs=1e-6)


def test_effective_wrench_passes_feasible_command():
    model = RobotModel()
    J = leg_jacobian(LegJoints(NOMINAL, 0), model)
    u_leg = np.array([0.0, 0.0, 80.0, 0.0, 0.0, 0.0])
    applied, tau, flags = effective_wrench(u_leg, J, model.torque_limits)
    np.testing.assert_allclose(applied, u_leg)
    np.testing.assert_allclose(tau, torque_map(J, -u_leg[0:3], -u_leg[3:6]))
    assert not flags.any()


def test_effective_wrench_respects_saturation():
    model = RobotModel()
    J = leg_jacobian(LegJoints(NOMINAL, 0), model)
    u_leg = np.array([150.0, 0.0, 250.0, 0.0, 0.0, 0.0])
    applied, tau, flags = effective_wrench(u_leg, J, model.torque_limits)
    assert flags.any()
    assert np.all(np.abs(tau) <= np.array(model.torque_limits) + 1e-9)
    np.testing.assert_allclose(torque_map(J, -applied[0:3], -applied[3:6]), tau, atol=1e-8)
    assert np.linalg.norm(applied) < np.linalg.norm(u_leg)


def test_saturated_wrench_keeps_direction_and_contact_rows():
    # Sidokraften mättar höftrollen men ligger inom friktionspyramiden
    model = RobotModel()
    J = leg_jacobian(LegJoints(NOMINAL, 0), model)
    u_leg = np.array([0.0, 84.0, 250.0, 0.0, 0.0, 0.0])
    applied, tau, flags = effective_wrench(u_leg, J, model.torque_limits)
    assert flags.any()
    scale = applied[2] / u_leg[2]
    assert 0.0 < scale < 1.0
    np.testing.assert_allclose(applied, scale * u_leg, atol=1e-12)
    assert np.max(np.abs(tau) / np.array(model.torque_limits)) == pytest.approx(1.0)

    rows = step_inequalities((True, True), [np.eye(3), np.eye(3)], MpcConfig(), model)
    u = np.zeros(12)
    u[0:3], u[6:9] = applied[0:3], applied[3:6]
    u[5] = 100.0
    assert np.max(rows.C @ u - rows.d) <= 1e-9


def test_effective_wrench_rejects_swing_leg():
    J = leg_jacobian(LegJoints(NOMINAL, 0), RobotModel())
    with pytest.raises(ContractViolationError):
        effective_wrench(np.zeros(6), J, RobotModel().torque_limits, in_stance=False)


def _synthetic_log(rows: int = 1001) -> SimLog:
    log = SimLog.allocate(rows)
    log.times = np.arange(rows) * 0.001
    return log


def test_metrics_rmse_per_channel():
    log = _synthetic_log()
    log.states[:, 6] = 0.1
    log.states[:, 2] = 0.55
    log.reference[:, 3] = 0.55
    metrics = compute_metrics(log)
    assert metrics["rmse"]["vx"] == pytest.approx(0.1)
    assert metrics["rmse"]["z"] == pytest.approx(0.0)
    assert metrics["solve_ms"]["count"] == 0
    assert metrics["fall"] is False


def test_metrics_recovery_time():
    log = _synthetic_log()
    log.states[:300, 0] = 0.05
    log.disturbance_windows = [(0.1, 0.2)]
    metrics = compute_metrics(log)
    assert metrics["recovery_times"][0] == pytest.approx(0.1)


def test_metrics_without_recovery():
    log = _synthetic_log()
    log.states[:, 0] = 0.05
    log.disturbance_windows = [(0.1, 0.2)]
    assert compute_metrics(log)["recovery_times"] == [None]


def test_metrics_torque_ratio():
    log = _synthetic_log(10)
    log.torques[3, 3] = -25.95
    metrics = compute_metrics(log)
    assert metrics["peak_torque"][3] == pytest.approx(25.95)
    assert metrics["torque_ratio"][3] == pytest.approx(0.5)


def test_metrics_reject_empty_log():
    with pytest.raises(ValueError):
        compute_metrics(SimLog.allocate(0))


@pytest.mark.slow
def test_closed_loop_standing():
    log = run_scenario(Scenario(name="standing", duration=1.0))
    assert not log.fall
    assert len(log) == 1001
    assert log.metrics["rmse"]["z"] < 0.01
    assert log.metrics["max_violation"] < 1e-3
    assert log.metrics["solve_ms"]["count"] == 100


@pytest.mark.slow
def test_closed_loop_push_recovery():
    scenario = Scenario(name="push", duration=3.0,
                        disturbances=Disturbance(((1.0, 0.3, (10.0, 0.0, 0.0)),)))
    log = run_scenario(scenario)
    assert not log.fall
    assert log.metrics["recovery_times"][0] is not None


@pytest.mark.slow
def test_closed_loop_walking_moves_forward():
    scenario = Scenario(name="walk", duration=2.0, gait=GaitSchedule(mode="walking", period=0.5),
                        commands=((0.0,), (0.5, 0.3, 0.0, 0.0)))
    log = run_scenario(scenario)
    assert not log.fall
    assert log.states[-1, 0] > 0.1
    assert log.contacts[:, 0].any() and not log.contacts[:, 0].all()


def test_overextended_stance_leg_counts_as_fall():
    # Kraften lyfter kroppen; stödfötterna sitter fast och benen når inte
    scenario = Scenario(name="lift", duration=0.4,
                        disturbances=Disturbance(((0.0, 0.4, (0.0, 0.0, 600.0)),)))
    log = run_scenario(scenario)
    assert log.fall
    kinds = [kind for _, kind, _ in log.events]
    assert "kinematic_limit" in kinds
    assert any(kind == "fall" and "overextended" in detail for _, kind, detail in log.events)
    assert log.states[-1, 2] < 0.55 + 0.1


def bundled(name: str) -> Scenario:
    return load_scenario(os.path.join(SCENARIO_DIR, f"{name}.scenario"))


@pytest.mark.slow
def test_standing_with_payload_keeps_height():
    log = run_scenario(bundled("standing_payload_8kg"))
    assert not log.fall
    assert not any(kind == "kinematic_limit" for _, kind, _ in log.events)
    np.testing.assert_allclose(log.states[:, 2], 0.55, atol=0.01)


@pytest.mark.slow
@pytest.mark.parametrize("name, weight", [("standing", 156.96), ("standing_payload_8kg", 235.44)])
def test_standing_settles_on_equilibrium(name, weight):
    log = run_scenario(bundled(name))
    assert not log.fall
    last = log.times >= log.times[-1] - 1.0
    assert np.mean(log.inputs[last, 2] + log.inputs[last, 5]) == pytest.approx(weight, rel=0.01)
    assert np.linalg.norm(log.states[last, 0:3] - log.anchor[last], axis=1).max() < 0.005
    assert max(log.metrics["torque_ratio"]) <= 1.0 + 1e-9


@pytest.mark.slow
def test_offset_payload_moment_is_balanced():
    model = RobotModel()
    payload = PayloadSpec(mass_breakpoints=((0.0, 2.5),), offset=(0.1, 0.0, 0.2))
    log = run_scenario(Scenario(name="offset", duration=2.0, payload=payload))
    assert not log.fall
    _, feet = standing_pose(model)
    weight = np.array([0.0, 0.0, -2.5 * model.gravity])
    balance = []
    for i in np.flatnonzero(log.times >= log.times[-1] - 0.5):
        com = log.states[i, 0:3]
        R = Rotation.from_euler("ZYX", log.states[i, 5:2:-1]).as_matrix()
        moment = np.cross(R @ np.array(payload.offset), weight)
        for leg in (0, 1):
            force = log.inputs[i, 3 * leg:3 * leg + 3]
            moment = moment + np.cross(feet[leg].position - com, force) + log.inputs[i, 6 + 3 * leg:9 + 3 * leg]
        balance.append(moment[1])
    assert abs(np.mean(balance)) <= 0.1


@pytest.mark.slow
def test_momentum_follows_applied_impulse():
    model = RobotModel()
    log = run_scenario(bundled("standing_push"))
    assert not log.fall
    disturbance = bundled("standing_push").disturbances
    dt = float(log.times[1] - log.times[0])
    impulse = np.zeros(3)
    for i in range(len(log) - 1):
        force = log.inputs[i, 0:3] + log.inputs[i, 3:6]
        force = force + (model.mass + log.payload_mass[i]) * np.array([0.0, 0.0, -model.gravity])
        wrench = disturbance.wrench_at(float(log.times[i]))
        if wrench is not None:
            force = force + wrench[0:3]
        impulse += force * dt
    change = model.mass * (log.states[-1, 6:9] - log.states[0, 6:9])
    ground = dt * np.abs(log.inputs[:-1, [2, 5]]).sum()
    assert np.linalg.norm(change - impulse) <= 1e-3 * ground


@pytest.mark.slow
def test_walking_at_300_hz_keeps_applied_inputs_feasible():
    scenario = Scenario(name="walk300", duration=2.0, gait=GaitSchedule(mode="walking", period=0.5),
                        mpc=MpcConfig(frequency=300.0), commands=((0.0,), (0.5, 0.3, 0.0, 0.0)))
    assert scenario.ticks_per_solve == 3
    log = run_scenario(scenario)
    assert not log.fall
    assert log.metrics["max_violation"] <= 1e-6


@pytest.mark.slow
def test_walking_tracks_commanded_speed():
    log = run_scenario(bundled("walk_flat_0p6"))
    assert not log.fall
    assert log.times[-1] == pytest.approx(10.0)
    moving = log.times >= 1.0
    assert np.mean(log.states[moving, 6]) == pytest.approx(0.6, abs=0.1)


@pytest.mark.slow
def test_walking_over_stacked_slats():
    log = run_scenario(bundled("walk_slats_stacked"))
    assert not log.fall
    assert log.states[-1, 0] - log.states[0, 0] >= 3.0
    assert log.metrics["max_violation"] <= 1e-6


@pytest.mark.slow
def test_turning_tracks_yaw_rate():
    log = run_scenario(bundled("turn_yaw"))
    assert not log.fall
    steady = log.times >= log.times[-1] - 2.0
    assert abs(np.mean(log.states[steady, 11]) - 1.0) <= 0.2


@pytest.mark.slow
def test_carrying_payload_over_slats_respects_limits():
    log = run_scenario(bundled("carry_2p5kg_slats"))
    assert not log.fall
    assert log.inputs[:, [2, 5]].max() <= 250.0 + 1e-6
    assert max(log.metrics["torque_ratio"]) <= 1.0 + 1e-9


@pytest.mark.slow
def test_vertical_force_follows_growing_load():
    log = run_scenario(bundled("timevarying_load"))
    assert not log.fall
    # Medelvärden per gångperiod efter att gången startat
    period = 0.5
    forces, masses = [], []
    for start in np.arange(0.5, log.times[-1] - period + 1e-9, period):
        window = (log.times >= start) & (log.times < start + period)
        forces.append(np.mean(log.inputs[window, 2] + log.inputs[window, 5]))
        masses.append(np.mean(log.payload_mass[window]))
    assert np.corrcoef(forces, masses)[0, 1] > 0.9
