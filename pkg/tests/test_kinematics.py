"""Tester för benkinematik, svingfot och momentavbildning"""
import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from errors import ContractViolationError, UnreachableTargetError
from kinematics import (FootPose, LegJoints, SwingState, clamp_torques, forward_kinematics,
                        inverse_kinematics, leg_jacobian, raibert_target, swing_force, swing_profile,
                        torque_map)
from model import LEFT, RIGHT, RobotModel

NOMINAL = (0.0, 0.0, -0.3709, 0.7418, -0.3709)


def transform(rotation=None, translation=(0.0, 0.0, 0.0)) -> np.ndarray:
    T = np.eye(4)
    if rotation is not None:
        T[0:3, 0:3] = rotation.as_matrix()
    T[0:3, 3] = translation
    return T


def oracle_contact(q, side: int, model: RobotModel) -> np.ndarray:
    """Kontaktpunkten genom att multiplicera homogena transformer steg för steg"""
    L, a = model.leg_length, model.ankle_offset
    chain = [
        transform(translation=model.hip_offset(side)),
        transform(Rotation.from_euler("z", q[0])),
        transform(Rotation.from_euler("x", q[1])),
        transform(Rotation.from_euler("y", q[2])),
        transform(translation=(0.0, 0.0, -L)),
        transform(Rotation.from_euler("y", q[3])),
        transform(translation=(0.0, 0.0, -L)),
        transform(Rotation.from_euler("y", q[4])),
        transform(translation=(0.0, 0.0, -a)),
    ]
    T = np.eye(4)
    for step in chain:
        T = T @ step
    return T[0:3, 3]


def test_straight_leg_points_down():
    model = RobotModel()
    pose = forward_kinematics(LegJoints(np.zeros(5), LEFT), model)
    np.testing.assert_allclose(pose.position, [0.0, 0.047, -0.10 - 0.48], atol=1e-12)
    np.testing.assert_allclose(pose.rotation, np.eye(3), atol=1e-12)


def test_nominal_stance_height():
    model = RobotModel()
    for side in (LEFT, RIGHT):
        pose = forward_kinematics(LegJoints(NOMINAL, side), model, body_position=(0.0, 0.0, 0.55))
        assert pose.position[2] == pytest.approx(0.0, abs=5e-4)


def test_forward_kinematics_matches_transform_oracle():
    model = RobotModel()
    rng = np.random.default_rng(0)
    for index in range(25):
        side = index % 2
        q = rng.uniform(model.joint_lower, model.joint_upper)
        pose = forward_kinematics(LegJoints(q, side), model)
        np.testing.assert_allclose(pose.position, oracle_contact(q, side, model), atol=1e-10)


def test_body_pose_moves_foot():
    model = RobotModel()
    R = Rotation.from_euler("z", 0.4).as_matrix()
    body = np.array([0.3, -0.2, 0.55])
    local = forward_kinematics(LegJoints(NOMINAL, RIGHT), model)
    world = forward_kinematics(LegJoints(NOMINAL, RIGHT), model, body, R)
    np.testing.assert_allclose(world.position, body + R @ local.position, atol=1e-12)
    np.testing.assert_allclose(world.rotation, R @ local.rotation, atol=1e-12)


def test_jacobian_matches_finite_differences():
    model = RobotModel()
    rng = np.random.default_rng(1)
    step = 1e-6
    for index in range(100):
        side = index % 2
        q = rng.uniform(model.joint_lower, model.joint_upper)
        R = Rotation.from_euler("ZYX", rng.uniform(-0.3, 0.3, 3)).as_matrix()
        body = rng.normal(size=3)
        J = leg_jacobian(LegJoints(q, side), model, body, R)
        for i in range(5):
            dq = np.zeros(5)
            dq[i] = step
            plus = forward_kinematics(LegJoints(q + dq, side), model, body, R)
            minus = forward_kinematics(LegJoints(q - dq, side), model, body, R)
            v = (plus.position - minus.position) / (2 * step)
            w = Rotation.from_matrix(plus.rotation @ minus.rotation.T).as_rotvec() / (2 * step)
            np.testing.assert_allclose(J[0:3, i], v, atol=1e-5)
            np.testing.assert_allclose(J[3:6, i], w, atol=1e-5)


def test_torque_power_matches_wrench_power():
    model = RobotModel()
    rng = np.random.default_rng(2)
    q = np.array(NOMINAL) + rng.uniform(-0.1, 0.1, 5)
    qdot = rng.normal(size=5)
    force, moment = rng.normal(size=3) * 50.0, rng.normal(size=3) * 5.0
    J = leg_jacobian(LegJoints(q, LEFT), model)
    tau = torque_map(J, force, moment)
    twist = J @ qdot
    assert tau @ qdot == pytest.approx(force @ twist[0:3] + moment @ twist[3:6], abs=1e-8)


def test_force_only_torque_map_uses_linear_rows():
    model = RobotModel()
    J = leg_jacobian(LegJoints(NOMINAL, LEFT), model)
    force = np.array([0.0, 0.0, 50.0])
    np.testing.assert_allclose(torque_map(J, force), J[0:3].T @ force)


def test_inverse_kinematics_round_trip():
    model = RobotModel()
    body = np.array([0.0, 0.0, 0.55])
    rng = np.random.default_rng(3)
    for side in (LEFT, RIGHT):
        q_true = np.array(NOMINAL) + rng.uniform(-0.15, 0.15, 5)
        target = forward_kinematics(LegJoints(q_true, side), model, body)
        joints = inverse_kinematics(target, side, model, NOMINAL, body)
        reached = forward_kinematics(joints, model, body)
        np.testing.assert_allclose(reached.position, target.position, atol=1e-8)
        np.testing.assert_allclose(reached.rotation[:, 1:], target.rotation[:, 1:], atol=1e-6)


def test_inverse_kinematics_position_only():
    model = RobotModel()
    body = np.array([0.0, 0.0, 0.55])
    target = FootPose(np.array([0.05, 0.06, 0.02]), None)
    joints = inverse_kinematics(target, LEFT, model, NOMINAL, body)
    np.testing.assert_allclose(forward_kinematics(joints, model, body).position, target.position, atol=1e-8)


def test_inverse_kinematics_out_of_reach():
    model = RobotModel()
    target = FootPose(np.array([0.0, 0.047, -1.0]), np.eye(3))
    with pytest.raises(UnreachableTargetError):
        inverse_kinematics(target, LEFT, model, NOMINAL, (0.0, 0.0, 0.0))


def test_raibert_target_at_commanded_speed():
    target = raibert_target((0.0, 0.0, 0.55), (0.6, 0.0, 0.0), (0.6, 0.0, 0.0), 0.25,
                            hip_offset=(0.0, 0.047, -0.10))
    np.testing.assert_allclose(target, [0.075, 0.047, 0.0], atol=1e-12)


def test_raibert_target_corrects_overspeed():
    target = raibert_target((0.0, 0.0, 0.55), (0.8, 0.0, 0.0), (0.6, 0.0, 0.0), 0.25, k_c=0.03)
    assert target[0] == pytest.approx(0.1 + 0.006)


def test_raibert_rejects_zero_stance_time():
    with pytest.raises(ValueError):
        raibert_target((0.0, 0.0, 0.55), (0.0, 0.0, 0.0), (0.0, 0.0, 0.0), 0.0)


def test_swing_profile_endpoints_and_apex():
    swing = SwingState(liftoff=np.array([0.0, 0.05, 0.0]), target=np.array([0.2, 0.05, 0.04]), apex=0.08)
    swing.phase = 0.0
    start, start_velocity = swing_profile(swing)
    np.testing.assert_allclose(start, swing.liftoff)
    np.testing.assert_allclose(start_velocity, 0.0, atol=1e-12)
    swing.phase = 1.0
    np.testing.assert_allclose(swing_profile(swing)[0], swing.target, atol=1e-12)
    swing.phase = 0.5
    middle, _ = swing_profile(swing)
    assert middle[0] == pytest.approx(0.1)
    assert middle[2] == pytest.approx(0.02 + 0.08)


def test_swing_profile_tracks_body_velocity():
    swing = SwingState(liftoff=np.zeros(3), target=np.array([0.2, 0.0, 0.0]), phase=0.3,
                       body_velocity=np.array([0.6, 0.1, 0.0]))
    _, velocity = swing_profile(swing)
    np.testing.assert_allclose(velocity[0:2], [1.2, 0.2])


def test_swing_force_pd_law():
    force = swing_force(np.array([0.1, 0.0, 0.05]), np.zeros(3), np.zeros(3), np.array([0.0, 0.0, 0.5]),
                        kp=700.0, kd=20.0)
    np.testing.assert_allclose(force, [70.0, 0.0, 35.0 - 10.0])


def test_swing_force_rejected_in_stance():
    with pytest.raises(ContractViolationError):
        swing_force(np.zeros(3), np.zeros(3), np.zeros(3), np.zeros(3), in_stance=True)


def test_clamp_torques_flags_saturation():
    clamped, flags = clamp_torques([10.0, -40.0, 33.5, 60.0, 0.0], RobotModel().torque_limits)
    np.testing.assert_allclose(clamped, [10.0, -33.5, 33.5, 51.9, 0.0])
    assert flags.tolist() == [False, True, False, True, False]
