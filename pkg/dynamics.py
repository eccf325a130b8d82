"""
Förenklad stelkroppsdynamik (SRBD) med extern lastmodell
========================================================
Rörelseekvationer för en stel kropp som drivs av kontaktkrafter och
moment vid två fötter, lastens tyngd som extern kraft, linjärisering till
utökat tillståndsrum (13 tillstånd med konstant 1), diskretisering och den
fullständiga icke-linjära derivatan som används som facit i simulatorn.

Tillståndsordning: [p_c; Θ; ṗ_c; ω] med Θ = (roll, pitch, yaw) och ω i
världsramen. Styrsignal: u = [F_1; F_2; M_1; M_2] i världsramen.
"""
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from errors import SingularityError
from model import RobotModel, PayloadSpec

STATE_DIM = 12
AUG_DIM = 13
INPUT_DIM = 12


@dataclass
class RobotState:
    """CoM-position, Euler-vinklar, CoM-hastighet och vinkelhastighet (världsram)"""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    euler: np.ndarray = field(default_factory=lambda: np.zeros(3))
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.euler = np.asarray(self.euler, dtype=float).reshape(3)
        self.velocity = np.asarray(self.velocity, dtype=float).reshape(3)
        self.omega = np.asarray(self.omega, dtype=float).reshape(3)

    @classmethod
    def from_vector(cls, x: Sequence[float]) -> "RobotState":
        x = np.asarray(x, dtype=float)
        return cls(x[0:3], x[3:6], x[6:9], x[9:12])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.position, self.euler, self.velocity, self.omega])

    def augmented(self) -> np.ndarray:
        """Utökat MPC-tillstånd med konstant 1 sist"""
        return np.append(self.as_vector(), 1.0)

    def copy(self) -> "RobotState":
        return RobotState.from_vector(self.as_vector().copy())

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.as_vector())))


class PayloadLoad(NamedTuple):
    """Lastens bidrag vid ett ögonblick: massa, hävarm i världsram, kontakt"""

    mass: float
    offset_world: np.ndarray
    contact: bool


NO_LOAD = PayloadLoad(0.0, np.zeros(3), False)


@dataclass
class LinearizedModel:
    A_c: np.ndarray
    B_c: np.ndarray
    steps: List[Tuple[np.ndarray, np.ndarray]] = field(default_factory=list)


def skew(v: Sequence[float]) -> np.ndarray:
    """Skevsymmetrisk matris så att skew(a) @ b = a × b"""
    x, y, z = v
    return np.array([[0.0, -z, y],
                     [z, 0.0, -x],
                     [-y, x, 0.0]])


def rotation_from_euler(euler: Sequence[float]) -> np.ndarray:
    """R = R_z(ψ) R_y(θ) R_x(φ) för Θ = (φ, θ, ψ)"""
    roll, pitch, yaw = euler
    return Rotation.from_euler("ZYX", [yaw, pitch, roll]).as_matrix()


def euler_rate_map(euler: Sequence[float]) -> np.ndarray:
    """
    Matris E så att ω = E·Θ̇ (Z-Y-X-konvention, ω i världsramen)

    det(E) = cos θ, alltså singulär exakt vid θ = ±90°.
    """
    _, pitch, yaw = euler
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return np.array([[cy * cp, -sy, 0.0],
                     [sy * cp, cy, 0.0],
                     [-sp, 0.0, 1.0]])


def euler_rate_map_inv(euler: Sequence[float], eps_sing: float = 0.1) -> np.ndarray:
    """
    Inversen E⁻¹ så att Θ̇ = E⁻¹·ω

    Raises:
        SingularityError: om pitch ligger inom eps_sing från ±90°
    """
    _, pitch, yaw = euler
    cp = math.cos(pitch)
    if abs(cp) <= math.sin(eps_sing):
        raise SingularityError(f"pitch {pitch:.4f} rad within {eps_sing} rad of ±pi/2")
    tp = math.tan(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return np.array([[cy / cp, sy / cp, 0.0],
                     [-sy, cy, 0.0],
                     [cy * tp, sy * tp, 1.0]])


def world_inertia(R: np.ndarray, inertia_diag: Sequence[float]) -> np.ndarray:
    """Tröghetsmoment i världsramen: G_I = R·diag(I)·Rᵀ"""
    return R @ np.diag(inertia_diag) @ R.T


def payload_load(payload: PayloadSpec, t: float, R: np.ndarray) -> PayloadLoad:
    """Utvärdera lastschemat vid tiden t och rotera hävarmen till världsramen"""
    contact = payload.in_contact(t)
    mass = payload.mass_at(t) if contact else 0.0
    return PayloadLoad(mass, R @ np.asarray(payload.offset, dtype=float), contact)


def continuous_matrices(state: RobotState, model: RobotModel,
                        foot_positions: Sequence[np.ndarray],
                        payload: PayloadLoad = NO_LOAD,
                        contacts: Tuple[bool, bool] = (True, True),
                        inertia_world: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Kontinuerliga matriser (A_c, B_c) för det utökade tillståndet

    Args:
        state: Linjäriseringspunkt (Euler-vinklar och CoM-position används)
        model: Robotmodell
        foot_positions: Kontaktpunkter för vänster och höger fot (världsram)
        payload: Lastens massa, hävarm (världsram) och kontakt
        contacts: (σ_1, σ_2)
        inertia_world: G_I att använda; annars beräknad från state

    Returns:
        (A_c 13×13, B_c 13×12)
    """
    E_inv = euler_rate_map_inv(state.euler, model.eps_sing)
    if inertia_world is None:
        inertia_world = world_inertia(rotation_from_euler(state.euler), model.inertia)
    I_inv = np.linalg.inv(inertia_world)
    g_vec = model.gravity_vector

    A_c = np.zeros((AUG_DIM, AUG_DIM))
    A_c[0:3, 6:9] = np.eye(3)
    A_c[3:6, 9:12] = E_inv

    sigma_o = 1.0 if payload.contact else 0.0
    A_c[6:9, 12] = g_vec + sigma_o * (payload.mass / model.mass) * g_vec
    A_c[9:12, 12] = I_inv @ (sigma_o * np.cross(payload.offset_world, payload.mass * g_vec))

    B_c = np.zeros((AUG_DIM, INPUT_DIM))
    for leg in (0, 1):
        if not contacts[leg]:
            continue
        r_f = np.asarray(foot_positions[leg], dtype=float) - state.position
        f_cols = slice(3 * leg, 3 * leg + 3)
        m_cols = slice(6 + 3 * leg, 9 + 3 * leg)
        B_c[6:9, f_cols] = np.eye(3) / model.mass
        B_c[9:12, f_cols] = I_inv @ skew(r_f)
        B_c[9:12, m_cols] = I_inv
    return A_c, B_c


def discretize(A_c: np.ndarray, B_c: np.ndarray, dt_mpc: float) -> Tuple[np.ndarray, np.ndarray]:
    """Framåt-Euler: A_k = I + A_c·dt, B_k = B_c·dt"""
    if not dt_mpc > 0:
        raise ValueError(f"dt_mpc must be > 0, got {dt_mpc}")
    return np.eye(A_c.shape[0]) + A_c * dt_mpc, B_c * dt_mpc


def nonlinear_derivative(state: RobotState, model: RobotModel,
                         foot_positions: Sequence[np.ndarray],
                         payload: PayloadLoad,
                         u: np.ndarray,
                         external_wrench: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Fullständig SRBD-derivata [ṗ_c; Θ̇; p̈_c; ω̇] utan små-ω-approximationen

    Args:
        state: Aktuellt tillstånd
        model: Robotmodell
        foot_positions: Kontaktpunkter (världsram)
        payload: Lastens bidrag
        u: Applicerade krafter och moment [F_1; F_2; M_1; M_2]
        external_wrench: Extern kraft och moment kring CoM [F; τ] eller None

    Returns:
        12-vektor med tillståndsderivatan
    """
    u = np.asarray(u, dtype=float)
    g_vec = model.gravity_vector
    if external_wrench is None:
        f_ext, tau_ext = np.zeros(3), np.zeros(3)
    else:
        external_wrench = np.asarray(external_wrench, dtype=float)
        f_ext, tau_ext = external_wrench[0:3], external_wrench[3:6]

    sigma_o = 1.0 if payload.contact else 0.0
    weight = sigma_o * payload.mass * g_vec

    forces = u[0:3] + u[3:6]
    acc = (forces + f_ext) / model.mass + g_vec + weight / model.mass

    moment = tau_ext + np.cross(payload.offset_world, weight)
    for leg in (0, 1):
        r_f = np.asarray(foot_positions[leg], dtype=float) - state.position
        moment += np.cross(r_f, u[3 * leg:3 * leg + 3]) + u[6 + 3 * leg:9 + 3 * leg]

    G_I = world_inertia(rotation_from_euler(state.euler), model.inertia)
    omega = state.omega
    omega_dot = np.linalg.solve(G_I, moment - np.cross(omega, G_I @ omega))
    euler_dot = euler_rate_map_inv(state.euler, model.eps_sing) @ omega

    return np.concatenate([state.velocity, euler_dot, acc, omega_dot])
