"""
Benkinematik, svingfot och momentavbildning
===========================================
Kedjan för ett ben (kroppsram, från höften):

    R_z(q0) · R_x(q1) · R_y(q2) · T(0,0,−L) · R_y(q3) · T(0,0,−L) · R_y(q4) · T(0,0,−a)

där L är länklängden och a fotledens vertikala avstånd till kontaktpunkten.
Alla fotkrafter och moment anges i världsramen.
"""
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from errors import ContractViolationError, UnreachableTargetError
from model import LEFT, RIGHT, RobotModel

SWING_KP = 700.0
SWING_KD = 20.0
RAIBERT_GAIN = 0.03
SWING_APEX = 0.08


@dataclass
class LegJoints:
    q: np.ndarray
    side: int = LEFT

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float).reshape(5)
        if self.side not in (LEFT, RIGHT):
            raise ValueError(f"side must be LEFT or RIGHT, got {self.side}")

    def within_limits(self, model: RobotModel) -> bool:
        return bool(np.all(self.q >= model.joint_lower) and np.all(self.q <= model.joint_upper))


@dataclass
class FootPose:
    position: np.ndarray
    rotation: np.ndarray


@dataclass
class SwingState:
    """Svingfotens start, mål och fas"""

    liftoff: np.ndarray
    target: np.ndarray
    phase: float = 0.0
    apex: float = SWING_APEX
    duration: float = 0.25
    body_velocity: Optional[np.ndarray] = None


def _chain(q: np.ndarray) -> np.ndarray:
    """Rotationer R_z R_x R_y för lår, skenben och fot (3×3×3)"""
    pitch = np.cumsum(q[2:5])
    angles = np.column_stack([np.full(3, q[0]), np.full(3, q[1]), pitch])
    return Rotation.from_euler("ZXY", angles).as_matrix()


def _joint_frames(joints: LegJoints, model: RobotModel, body_position, body_rotation):
    """Kontaktpunkt, fotrotation samt ledernas axlar och origo i världsramen"""
    q = joints.q
    frames = _chain(q)
    down = np.array([0.0, 0.0, -1.0])
    hip = model.hip_offset(joints.side)
    knee = hip + frames[0] @ (down * model.leg_length)
    ankle = knee + frames[1] @ (down * model.leg_length)
    contact = ankle + frames[2] @ (down * model.ankle_offset)

    R = np.asarray(body_rotation, dtype=float)
    p0 = np.asarray(body_position, dtype=float)
    yaw_frame = Rotation.from_euler("Z", q[0]).as_matrix()
    axes = np.column_stack([
        R[:, 2],
        R @ yaw_frame[:, 0],
        R @ frames[0][:, 1],
        R @ frames[0][:, 1],
        R @ frames[0][:, 1],
    ])
    origins = np.column_stack([hip, hip, hip, knee, ankle])
    origins = p0[:, None] + R @ origins
    return p0 + R @ contact, R @ frames[2], axes, origins


def forward_kinematics(joints: LegJoints, model: RobotModel,
                       body_position: Sequence[float] = (0.0, 0.0, 0.0),
                       body_rotation: Optional[np.ndarray] = None) -> FootPose:
    """
    Kontaktpunktens position och fotens rotation i världsramen

    Args:
        joints: Ledvinklar och sida
        model: Robotmodell (länklängder, höftplacering)
        body_position: CoM-position
        body_rotation: Kroppens rotationsmatris (identitet om None)
    """
    R = np.eye(3) if body_rotation is None else body_rotation
    position, rotation, _, _ = _joint_frames(joints, model, body_position, R)
    return FootPose(position, rotation)


def leg_jacobian(joints: LegJoints, model: RobotModel,
                 body_position: Sequence[float] = (0.0, 0.0, 0.0),
                 body_rotation: Optional[np.ndarray] = None) -> np.ndarray:
    """
    6×5 Jacobian [J_v; J_ω] för kontaktpunkten i världsramen, kroppen fixerad

    Kolumn i: J_v = a_i × (p − o_i), J_ω = a_i.
    """
    R = np.eye(3) if body_rotation is None else body_rotation
    contact, _, axes, origins = _joint_frames(joints, model, body_position, R)
    J = np.zeros((6, 5))
    J[0:3] = np.cross(axes.T, (contact[:, None] - origins).T).T
    J[3:6] = axes
    return J


def _orientation_error(target: np.ndarray, current: np.ndarray) -> np.ndarray:
    error = Rotation.from_matrix(target @ current.T).as_rotvec()
    # Rotation kring fotens längdaxel kan inte styras av ett linjefotsben
    foot_x = current[:, 0]
    return error - foot_x * (foot_x @ error)


def inverse_kinematics(target: FootPose, side: int, model: RobotModel, seed: Sequence[float],
                       body_position: Sequence[float] = (0.0, 0.0, 0.0),
                       body_rotation: Optional[np.ndarray] = None,
                       damping: float = 1e-4, max_iter: int = 100, tol: float = 1e-10) -> LegJoints:
    """
    Dämpad minsta-kvadrat-IK från en startgissning

    Om target.rotation är None styrs bara positionen.

    Raises:
        UnreachableTargetError: målet ligger utanför benets räckvidd eller
            iterationen konvergerade inte
    """
    R = np.eye(3) if body_rotation is None else np.asarray(body_rotation, dtype=float)
    hip = np.asarray(body_position, dtype=float) + R @ model.hip_offset(side)
    target_position = np.asarray(target.position, dtype=float)
    distance = float(np.linalg.norm(target_position - hip))
    if distance > model.leg_reach:
        raise UnreachableTargetError(
            f"target {distance:.4f} m from hip exceeds reach {model.leg_reach:.4f} m")

    joints = LegJoints(np.array(seed, dtype=float), side)
    use_rotation = target.rotation is not None
    for _ in range(max_iter):
        contact, rotation, axes, origins = _joint_frames(joints, model, body_position, R)
        position_error = target_position - contact
        if use_rotation:
            rotation_error = _orientation_error(np.asarray(target.rotation), rotation)
            error = np.concatenate([position_error, rotation_error])
        else:
            error = position_error
        if np.linalg.norm(position_error) <= tol and np.abs(error).max() <= 1e2 * tol:
            return joints

        J = np.zeros((6, 5))
        J[0:3] = np.cross(axes.T, (contact[:, None] - origins).T).T
        if use_rotation:
            foot_x = rotation[:, 0]
            J[3:6] = axes - np.outer(foot_x, foot_x @ axes)
        else:
            J = J[0:3]
        step = J.T @ np.linalg.solve(J @ J.T + damping ** 2 * np.eye(J.shape[0]), error)
        norm = np.linalg.norm(step)
        if norm > 0.5:
            step *= 0.5 / norm
        joints = LegJoints(joints.q + step, side)

    raise UnreachableTargetError(
        f"inverse kinematics did not converge in {max_iter} iterations "
        f"(position error {np.linalg.norm(position_error):.2e} m)")


def raibert_target(p_c: Sequence[float], v_c: Sequence[float], v_cmd: Sequence[float],
                   dt_stance: float, k_c: float = RAIBERT_GAIN,
                   hip_offset: Sequence[float] = (0.0, 0.0, 0.0)) -> np.ndarray:
    """
    Fotisättningspunkt p_hip + ṗ_c·Δt/2 + k_c·(ṗ_c − ṗ_cmd) på nominell mark (z = 0)

    hip_offset anges i världsramen relativt CoM.
    """
    if not dt_stance > 0:
        raise ValueError(f"stance duration must be > 0, got {dt_stance}")
    p_c, v_c, v_cmd = (np.asarray(v, dtype=float) for v in (p_c, v_c, v_cmd))
    target = p_c + np.asarray(hip_offset, dtype=float) + v_c * dt_stance / 2.0 + k_c * (v_c - v_cmd)
    target[2] = 0.0
    return target


def swing_profile(swing: SwingState) -> Tuple[np.ndarray, np.ndarray]:
    """Önskad position och hastighet för svingfoten vid aktuell fas"""
    phase = float(np.clip(swing.phase, 0.0, 1.0))
    liftoff = np.asarray(swing.liftoff, dtype=float)
    delta = np.asarray(swing.target, dtype=float) - liftoff

    blend = 3.0 * phase ** 2 - 2.0 * phase ** 3
    blend_rate = (6.0 * phase - 6.0 * phase ** 2) / swing.duration
    arc = 16.0 * phase ** 2 * (1.0 - phase) ** 2
    arc_rate = 32.0 * phase * (1.0 - phase) * (1.0 - 2.0 * phase) / swing.duration

    position = liftoff + delta * blend
    position[2] += swing.apex * arc
    velocity = delta * blend_rate
    velocity[2] += swing.apex * arc_rate
    if swing.body_velocity is not None:
        velocity[0:2] = 2.0 * np.asarray(swing.body_velocity, dtype=float)[0:2]
    return position, velocity


def swing_force(p_des: np.ndarray, v_des: np.ndarray, p: np.ndarray, v: np.ndarray,
                kp: float = SWING_KP, kd: float = SWING_KD, in_stance: bool = False) -> np.ndarray:
    """Kartesisk PD-kraft på svingfoten"""
    if in_stance:
        raise ContractViolationError("swing force requested for a stance leg")
    if kp < 0 or kd < 0:
        raise ValueError("swing gains must be >= 0")
    return kp * (np.asarray(p_des) - np.asarray(p)) + kd * (np.asarray(v_des) - np.asarray(v))


def torque_map(J: np.ndarray, force: Sequence[float],
               moment: Optional[Sequence[float]] = None) -> np.ndarray:
    """
    Ledmoment τ = Jᵀ·[F; M] för den kraft och det moment foten utövar

    Med J i världsramen är detta samma sak som att uttrycka både Jacobian
    och vridning i fotramen via R_f. Utan moment (svingben) används bara J_v.
    """
    force = np.asarray(force, dtype=float)
    if moment is None:
        return J[0:3].T @ force
    return J.T @ np.concatenate([force, np.asarray(moment, dtype=float)])


def clamp_torques(tau: Sequence[float], limits: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Klipp ledmoment till ±gräns och flagga mättade leder"""
    tau = np.asarray(tau, dtype=float)
    limits = np.asarray(limits, dtype=float)
    clamped = np.clip(tau, -limits, limits)
    return clamped, np.abs(tau) > limits
