"""
Kraft- och moment-MPC
=====================
Referenstrajektoria, fotprediktion, villkor (friktionspyramid,
kraftgränser och linjefotens kontaktvridningskon), QP-formuleringar
(kondenserad och icke-kondenserad) samt lösning av första styrsignalen.

Beslutsvariabler per steg: u = [F_1; F_2; M_1; M_2] i världsramen.
"""
import math
import time
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import block_diag
from scipy.spatial.transform import Rotation

from dynamics import (AUG_DIM, INPUT_DIM, LinearizedModel, PayloadLoad, RobotState,
                      continuous_matrices, discretize, rotation_from_euler, world_inertia)
from errors import AssemblyError, ConfigError
from kinematics import RAIBERT_GAIN, raibert_target
from model import ContactPlan, GaitSchedule, PayloadSpec, RobotModel
from qpsolver import SolverSettings, solve_qp

DEFAULT_Q = (500.0, 500.0, 500.0, 150.0, 150.0, 150.0, 1.0, 1.0, 3.0, 1.0, 1.0, 1.0, 0.0)
DEFAULT_R = (1e-3,) * 6 + (5e-3,) * 6
FORMULATIONS = ("condensed", "noncondensed")


@dataclass(frozen=True)
class MpcConfig:
    """
    MPC-parametrar

    mu, f_min och f_max tas från robotmodellen när de är None.
    """

    horizon: int = 10
    dt: float = 0.05
    frequency: float = 100.0
    q_weights: Tuple[float, ...] = DEFAULT_Q
    r_weights: Tuple[float, ...] = DEFAULT_R
    mu: Optional[float] = None
    f_min: Optional[float] = None
    f_max: Optional[float] = None
    raibert_gain: float = RAIBERT_GAIN
    formulation: str = "condensed"
    max_lookahead: float = 1.5
    max_frequency: float = 300.0

    def __post_init__(self):
        object.__setattr__(self, "q_weights", tuple(float(v) for v in self.q_weights))
        object.__setattr__(self, "r_weights", tuple(float(v) for v in self.r_weights))

        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}", key="mpc.horizon")
        if not self.dt > 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}", key="mpc.dt")
        if self.horizon * self.dt > self.max_lookahead + 1e-9:
            raise ConfigError(f"lookahead {self.horizon * self.dt:.3f} s exceeds {self.max_lookahead} s",
                              key="mpc.horizon")
        if not 0 < self.frequency <= self.max_frequency:
            raise ConfigError(f"frequency must lie in (0, {self.max_frequency}] Hz", key="mpc.frequency")
        if len(self.q_weights) != AUG_DIM or min(self.q_weights) < 0:
            raise ConfigError("needs 13 entries >= 0", key="mpc.q_weights")
        if len(self.r_weights) != INPUT_DIM or min(self.r_weights) <= 0:
            raise ConfigError("needs 12 entries > 0", key="mpc.r_weights")
        if self.mu is not None and self.mu < 0:
            raise ConfigError("friction coefficient must be >= 0", key="mpc.mu")
        if self.formulation not in FORMULATIONS:
            raise ConfigError(f"use one of {', '.join(FORMULATIONS)}", key="mpc.formulation")

    def limits(self, model: RobotModel) -> Tuple[float, float, float]:
        """(μ, F_min, F_max) med modellens värden som standard"""
        mu = model.mu if self.mu is None else self.mu
        f_min = model.f_min if self.f_min is None else self.f_min
        f_max = model.f_max if self.f_max is None else self.f_max
        return mu, f_min, f_max

    def stage_weights(self, k: int) -> Tuple[np.ndarray, np.ndarray]:
        """Vikter för steg k; samma för alla steg"""
        return np.array(self.q_weights), np.array(self.r_weights)


@dataclass
class ReferenceTrajectory:
    """Utökade referenstillstånd x_ref[1..h] som rader (h×13)"""

    states: np.ndarray
    dt: float

    def __len__(self) -> int:
        return self.states.shape[0]

    def state(self, k: int) -> RobotState:
        """Referenstillstånd vid tidssteg k (k = 1..h)"""
        return RobotState.from_vector(self.states[k - 1, :12])

    @property
    def stacked(self) -> np.ndarray:
        return self.states.reshape(-1)


class FootFrame(NamedTuple):
    rotation: np.ndarray
    position: np.ndarray


@dataclass
class FootData:
    """Fotpositioner (h×2×3) och fotrotationer (h×2×3×3) över horisonten"""

    positions: np.ndarray
    rotations: np.ndarray

    def frame(self, k: int, leg: int) -> FootFrame:
        return FootFrame(self.rotations[k, leg], self.positions[k, leg])


class Inequalities(NamedTuple):
    C: np.ndarray
    d: np.ndarray
    labels: List[str]


@dataclass
class QpProblem:
    H: np.ndarray
    f: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    C: np.ndarray
    d: np.ndarray
    layout: str
    horizon: int
    row_labels: List[str] = field(default_factory=list)
    constant: float = 0.0

    @property
    def size(self) -> int:
        return self.f.size

    def inputs(self, solution: np.ndarray) -> np.ndarray:
        """Plocka ut u[0..h−1] (h×12) ur beslutsvektorn"""
        offset = 0 if self.layout == "condensed" else AUG_DIM * self.horizon
        return solution[offset:offset + INPUT_DIM * self.horizon].reshape(self.horizon, INPUT_DIM)


@dataclass
class MpcDiagnostics:
    objective: float
    iterations: int
    solve_seconds: float
    max_violation: float
    formulation: str
    inputs: np.ndarray
    solution: np.ndarray


def _yaw_matrix(yaw: float) -> np.ndarray:
    return Rotation.from_euler("Z", yaw).as_matrix()


def build_reference(cmd: Sequence[float], state: RobotState, cfg: MpcConfig, height: float,
                    anchor: Optional[Sequence[float]] = None, ground_z: float = 0.0) -> ReferenceTrajectory:
    """
    Referenstrajektoria från hastighetskommando (v_x, v_y, yaw-hastighet)

    Args:
        cmd: Hastigheter i kroppens yaw-ram och önskad yaw-hastighet
        state: Aktuellt tillstånd
        cfg: MPC-parametrar
        height: Nominell CoM-höjd över marken
        anchor: (x, y, yaw) att integrera från i stället för uppmätt läge
        ground_z: Markhöjd som höjden räknas från
    """
    if not height > 0:
        raise ConfigError(f"reference height must be > 0, got {height}", key="mpc.height")
    vx, vy, yaw_rate = (float(v) for v in cmd)
    if anchor is None:
        x, y, yaw = state.position[0], state.position[1], state.euler[2]
    else:
        x, y, yaw = (float(v) for v in anchor)

    states = np.zeros((cfg.horizon, AUG_DIM))
    position = np.array([x, y, ground_z + height])
    for k in range(cfg.horizon):
        yaw += yaw_rate * cfg.dt
        velocity = _yaw_matrix(yaw) @ np.array([vx, vy, 0.0])
        position = position + velocity * cfg.dt
        position[2] = ground_z + height
        states[k, 0:3] = position
        states[k, 3:6] = (0.0, 0.0, yaw)
        states[k, 6:9] = velocity
        states[k, 9:12] = (0.0, 0.0, yaw_rate)
        states[k, 12] = 1.0
    return ReferenceTrajectory(states, cfg.dt)


def predict_foot_positions(state: RobotState, gait: GaitSchedule, plan: ContactPlan,
                           cmd: Sequence[float], k_c: float, model: RobotModel,
                           measured: Sequence[FootFrame], ref: ReferenceTrajectory,
                           ground_z: float = 0.0) -> FootData:
    """
    Fotpositioner och fotrotationer för varje steg i horisonten

    Ben i stöd nu behåller uppmätt position under resten av stödfasen. Ben
    som sätts ned inom horisonten får Raibert-målet vid predikterad
    nedsättning, beräknat från referensens CoM vid det steget.
    """
    h = plan.horizon
    positions = np.zeros((h, 2, 3))
    rotations = np.zeros((h, 2, 3, 3))
    for leg in (0, 1):
        position = np.asarray(measured[leg].position, dtype=float)
        rotation = np.asarray(measured[leg].rotation, dtype=float)
        for k in range(h):
            if k > 0 and plan.stance[k, leg] and not plan.stance[k - 1, leg]:
                ref_state = ref.state(k)
                yaw_frame = _yaw_matrix(ref_state.euler[2])
                v_cmd = yaw_frame @ np.array([cmd[0], cmd[1], 0.0])
                position = raibert_target(ref_state.position, state.velocity, v_cmd,
                                          gait.stance_duration(leg), k_c,
                                          yaw_frame @ model.hip_offset(leg))
                position[2] = ground_z
                rotation = yaw_frame
            positions[k, leg] = position
            rotations[k, leg] = rotation
    return FootData(positions, rotations)


def _leg_rows(stance: bool, rotation: np.ndarray, mu: float, f_min: float, f_max: float,
              model: RobotModel) -> Tuple[List[np.ndarray], List[float], List[str]]:
    """Villkorsrader för ett ben i ett steg, över benets 6 variabler [F; M]"""
    rows, rhs, names = [], [], []

    def add(force, moment, bound, name):
        rows.append(np.concatenate([force, moment]))
        rhs.append(bound)
        names.append(name)

    zero = np.zeros(3)
    if not stance:
        for j in range(6):
            unit = np.zeros(6)
            unit[j] = 1.0
            add(unit[:3], unit[3:], 0.0, f"swing_pin_{j}+")
            add(-unit[:3], -unit[3:], 0.0, f"swing_pin_{j}-")
        return rows, rhs, names

    mu_p = math.sqrt(2.0) / 2.0 * mu
    l_t, l_h = model.toe_length, model.heel_length
    x_f, y_f, z_f = rotation[:, 0], rotation[:, 1], rotation[:, 2]

    add(np.array([1.0, 0.0, -mu_p]), zero, 0.0, "friction_x+")
    add(np.array([-1.0, 0.0, -mu_p]), zero, 0.0, "friction_x-")
    add(np.array([0.0, 1.0, -mu_p]), zero, 0.0, "friction_y+")
    add(np.array([0.0, -1.0, -mu_p]), zero, 0.0, "friction_y-")
    add(np.array([0.0, 0.0, 1.0]), zero, f_max, "force_max")
    add(np.array([0.0, 0.0, -1.0]), zero, -f_min, "force_min")
    add(zero, x_f, 0.0, "line_foot_mx+")
    add(zero, -x_f, 0.0, "line_foot_mx-")
    add(-l_h * z_f, y_f, 0.0, "heel_lift")
    add(-l_t * z_f, -y_f, 0.0, "toe_lift")

    # Friktion i y vid tå och häl, koefficienter i fotramen (e_y, e_z för F och M)
    for sy, sz, my, mz, name in (
            (-l_t, -mu_p * l_t, -mu_p, 1.0, "cwc_heel_a"),
            (l_t, -mu_p * l_t, -mu_p, -1.0, "cwc_heel_b"),
            (-l_h, -mu_p * l_h, mu_p, -1.0, "cwc_toe_a"),
            (l_h, -mu_p * l_h, mu_p, 1.0, "cwc_toe_b")):
        add(sy * y_f + sz * z_f, my * y_f + mz * z_f, 0.0, name)
    return rows, rhs, names


def step_inequalities(stance: Sequence[bool], rotations: Sequence[np.ndarray], cfg: MpcConfig,
                      model: RobotModel, prefix: str = "") -> Inequalities:
    """Villkor för ett enda steg över u = [F_1; F_2; M_1; M_2]"""
    mu, f_min, f_max = cfg.limits(model)
    rows, rhs, labels = [], [], []
    for leg in (0, 1):
        leg_rows, leg_rhs, names = _leg_rows(bool(stance[leg]), np.asarray(rotations[leg]),
                                             mu, f_min, f_max, model)
        for row in leg_rows:
            full = np.zeros(INPUT_DIM)
            full[3 * leg:3 * leg + 3] = row[:3]
            full[6 + 3 * leg:9 + 3 * leg] = row[3:]
            rows.append(full)
        rhs.extend(leg_rhs)
        labels.extend(f"{prefix}leg{leg + 1}/{name}" for name in names)
    return Inequalities(np.array(rows), np.array(rhs), labels)


def assemble_inequalities(plan: ContactPlan, feet: FootData, cfg: MpcConfig,
                          model: RobotModel) -> Inequalities:
    """
    Staplade olikheter C·U ≤ d över U = [u[0]; …; u[h−1]]

    Varje rad har en etikett "k<steg>/leg<ben>/<villkor>" för felrapporter.

    Raises:
        AssemblyError: om planen och fotdata har olika längd
    """
    h = plan.horizon
    if feet.positions.shape[0] != h or feet.rotations.shape[0] != h:
        raise AssemblyError(f"foot data covers {feet.positions.shape[0]} steps, plan has {h}")
    blocks, rhs, labels = [], [], []
    for k in range(h):
        step = step_inequalities(plan.stance[k], feet.rotations[k], cfg, model, prefix=f"k{k}/")
        blocks.append(step.C)
        rhs.append(step.d)
        labels.extend(step.labels)
    return Inequalities(block_diag(*blocks), np.concatenate(rhs), labels)


def linearize_horizon(state: RobotState, ref: ReferenceTrajectory, plan: ContactPlan,
                      feet: FootData, model: RobotModel, payload: PayloadSpec,
                      cfg: MpcConfig) -> LinearizedModel:
    """
    Diskreta (A_k, B_k) för k = 0..h−1

    G_I hålls från aktuell rotation; E⁻¹ och hävarmar tas från referensen
    vid steg k (från uppmätt tillstånd vid k = 0).
    """
    R = rotation_from_euler(state.euler)
    inertia_world = world_inertia(R, model.inertia)
    offset_world = R @ np.asarray(payload.offset, dtype=float)
    linearized = None
    for k in range(plan.horizon):
        point = state if k == 0 else ref.state(k)
        load = PayloadLoad(payload.mass_at(float(plan.times[k])), offset_world, bool(plan.payload[k]))
        A_c, B_c = continuous_matrices(point, model, feet.positions[k], load,
                                       tuple(plan.stance[k]), inertia_world)
        if linearized is None:
            linearized = LinearizedModel(A_c, B_c)
        linearized.steps.append(discretize(A_c, B_c, cfg.dt))
    return linearized


def _check_dimensions(x0: np.ndarray, ref: ReferenceTrajectory, models: LinearizedModel,
                      inequalities: Optional[Inequalities]):
    h = len(ref)
    if x0.shape != (AUG_DIM,):
        raise AssemblyError(f"x0 must have {AUG_DIM} entries, got {x0.shape}")
    if len(models.steps) != h:
        raise AssemblyError(f"{len(models.steps)} step models for horizon {h}")
    if inequalities is not None and inequalities.C.shape[1] != INPUT_DIM * h:
        raise AssemblyError(f"inequalities act on {inequalities.C.shape[1]} inputs, expected {INPUT_DIM * h}")


def _weights(cfg: MpcConfig, h: int) -> Tuple[np.ndarray, np.ndarray]:
    q = np.concatenate([cfg.stage_weights(k)[0] for k in range(h)])
    r = np.concatenate([cfg.stage_weights(k)[1] for k in range(h)])
    return q, r


def equilibrium_inputs(plan: ContactPlan, model: RobotModel, payload: PayloadSpec = PayloadSpec()) -> np.ndarray:
    """
    Jämviktsinsignal per steg (h×12)

    Tyngden (m + σ_o·m_o)·g delas lika som vertikalkraft mellan stödbenen.
    Steg utan stödben får noll. Insignalstraffet mäts mot denna referens.
    """
    u_eq = np.zeros((plan.horizon, INPUT_DIM))
    for k in range(plan.horizon):
        stance = np.flatnonzero(plan.stance[k])
        if stance.size == 0:
            continue
        carried = payload.mass_at(float(plan.times[k])) if plan.payload[k] else 0.0
        weight = (model.mass + carried) * model.gravity
        for leg in stance:
            u_eq[k, 3 * leg + 2] = weight / stance.size
    return u_eq


def _input_reference(u_ref: Optional[np.ndarray], h: int) -> np.ndarray:
    if u_ref is None:
        return np.zeros(INPUT_DIM * h)
    u_ref = np.asarray(u_ref, dtype=float).reshape(-1)
    if u_ref.size != INPUT_DIM * h:
        raise AssemblyError(f"input reference has {u_ref.size} entries, expected {INPUT_DIM * h}")
    return u_ref


def build_noncondensed(x0: np.ndarray, ref: ReferenceTrajectory, plan: ContactPlan,
                       models: LinearizedModel, cfg: MpcConfig,
                       inequalities: Optional[Inequalities] = None,
                       u_ref: Optional[np.ndarray] = None) -> QpProblem:
    """QP över [x[1..h]; u[0..h−1]] med dynamiken som likhetsvillkor"""
    x0 = np.asarray(x0, dtype=float)
    _check_dimensions(x0, ref, models, inequalities)
    h = plan.horizon
    nx, nu = AUG_DIM * h, INPUT_DIM * h
    q, r = _weights(cfg, h)
    x_ref = ref.stacked
    u_ref = _input_reference(u_ref, h)

    H = 2.0 * np.diag(np.concatenate([q, r]))
    f = np.concatenate([-2.0 * q * x_ref, -2.0 * r * u_ref])

    A_eq = np.zeros((nx, nx + nu))
    b_eq = np.zeros(nx)
    for k, (A_k, B_k) in enumerate(models.steps):
        rows = slice(AUG_DIM * k, AUG_DIM * (k + 1))
        A_eq[rows, rows] = np.eye(AUG_DIM)
        if k > 0:
            A_eq[rows, AUG_DIM * (k - 1):AUG_DIM * k] = -A_k
        A_eq[rows, nx + INPUT_DIM * k:nx + INPUT_DIM * (k + 1)] = -B_k
    b_eq[:AUG_DIM] = models.steps[0][0] @ x0

    if inequalities is None:
        C, d, labels = np.zeros((0, nx + nu)), np.zeros(0), []
    else:
        C = np.hstack([np.zeros((inequalities.C.shape[0], nx)), inequalities.C])
        d, labels = inequalities.d, list(inequalities.labels)
    constant = float(x_ref @ (q * x_ref) + u_ref @ (r * u_ref))
    return QpProblem(H, f, A_eq, b_eq, C, d, "noncondensed", h, labels, constant)


def prediction_matrices(models: LinearizedModel) -> Tuple[np.ndarray, np.ndarray]:
    """
    A_qp (13h×13) och nedre triangulära B_qp (13h×12h)

    Block k av A_qp är A_k···A_0, block (i, j) av B_qp är A_i···A_{j+1}·B_j.
    """
    h = len(models.steps)
    A_qp = np.zeros((AUG_DIM * h, AUG_DIM))
    B_qp = np.zeros((AUG_DIM * h, INPUT_DIM * h))
    product = np.eye(AUG_DIM)
    for k, (A_k, _) in enumerate(models.steps):
        product = A_k @ product
        A_qp[AUG_DIM * k:AUG_DIM * (k + 1)] = product
    for j, (_, B_j) in enumerate(models.steps):
        block = B_j
        B_qp[AUG_DIM * j:AUG_DIM * (j + 1), INPUT_DIM * j:INPUT_DIM * (j + 1)] = block
        for i in range(j + 1, h):
            block = models.steps[i][0] @ block
            B_qp[AUG_DIM * i:AUG_DIM * (i + 1), INPUT_DIM * j:INPUT_DIM * (j + 1)] = block
    return A_qp, B_qp


def build_condensed(x0: np.ndarray, ref: ReferenceTrajectory, plan: ContactPlan,
                    models: LinearizedModel, cfg: MpcConfig,
                    inequalities: Optional[Inequalities] = None,
                    prediction: Optional[Tuple[np.ndarray, np.ndarray]] = None,
                    u_ref: Optional[np.ndarray] = None) -> QpProblem:
    """
    Kondenserat QP över U = [u[0]; …; u[h−1]]

    H = 2(B_qpᵀQ̄B_qp + R̄), f = 2B_qpᵀQ̄(A_qp·x0 − X_ref) − 2R̄·U_ref.
    prediction kan ges för att återanvända eller modifiera (A_qp, B_qp).
    """
    x0 = np.asarray(x0, dtype=float)
    _check_dimensions(x0, ref, models, inequalities)
    h = plan.horizon
    q, r = _weights(cfg, h)
    u_ref = _input_reference(u_ref, h)
    A_qp, B_qp = prediction if prediction is not None else prediction_matrices(models)
    if B_qp.shape != (AUG_DIM * h, INPUT_DIM * h):
        raise AssemblyError(f"B_qp has shape {B_qp.shape}, expected {(AUG_DIM * h, INPUT_DIM * h)}")

    error = A_qp @ x0 - ref.stacked
    weighted = q[:, None] * B_qp
    H = 2.0 * (B_qp.T @ weighted + np.diag(r))
    H = 0.5 * (H + H.T)
    f = 2.0 * weighted.T @ error - 2.0 * r * u_ref

    if inequalities is None:
        C, d, labels = np.zeros((0, INPUT_DIM * h)), np.zeros(0), []
    else:
        C, d, labels = inequalities.C, inequalities.d, list(inequalities.labels)
    return QpProblem(H, f, np.zeros((0, INPUT_DIM * h)), np.zeros(0), C, d, "condensed", h,
                     labels, float(error @ (q * error) + u_ref @ (r * u_ref)))


def formulate(state: RobotState, ref: ReferenceTrajectory, plan: ContactPlan, feet: FootData,
              cfg: MpcConfig, model: RobotModel, payload: PayloadSpec = PayloadSpec(),
              formulation: str = "condensed") -> Tuple[QpProblem, Inequalities]:
    """Linjärisera över horisonten och bygg QP-problemet i vald formulering"""
    if formulation not in FORMULATIONS:
        raise ConfigError(f"use one of {', '.join(FORMULATIONS)}", key="mpc.formulation")
    models = linearize_horizon(state, ref, plan, feet, model, payload, cfg)
    inequalities = assemble_inequalities(plan, feet, cfg, model)
    u_ref = equilibrium_inputs(plan, model, payload)
    build = build_condensed if formulation == "condensed" else build_noncondensed
    return build(state.augmented(), ref, plan, models, cfg, inequalities, u_ref=u_ref), inequalities


def solve_mpc(state: RobotState, ref: ReferenceTrajectory, plan: ContactPlan, feet: FootData,
              cfg: MpcConfig, model: RobotModel, payload: PayloadSpec = PayloadSpec(),
              formulation: Optional[str] = None, settings: SolverSettings = SolverSettings(),
              warm_start: Optional[np.ndarray] = None) -> Tuple[np.ndarray, MpcDiagnostics]:
    """
    Lös MPC-problemet och returnera första styrsignalen

    Args:
        state: Aktuellt tillstånd (x0)
        ref: Referenstrajektoria
        plan: Kontaktplan över horisonten
        feet: Fotpositioner och fotrotationer per steg
        cfg: MPC-parametrar
        model: Robotmodell
        payload: Lastschema
        formulation: condensed eller noncondensed (cfg.formulation om None)
        settings: QP-lösarens inställningar
        warm_start: Föregående staplade U (h×12 eller 12h)

    Returns:
        (u[0], diagnostik)

    Raises:
        InfeasibleError: QP saknar lösning; etiketten anger mest överträdda rad
        IterationLimitError: lösaren konvergerade inte
    """
    formulation = formulation or cfg.formulation
    problem, inequalities = formulate(state, ref, plan, feet, cfg, model, payload, formulation)

    x_init = None
    if warm_start is not None and formulation == "condensed":
        x_init = np.asarray(warm_start, dtype=float).reshape(-1)
        if x_init.size != problem.size:
            x_init = None

    start = time.perf_counter()
    solution = solve_qp(problem.H, problem.f, problem.A_eq, problem.b_eq, problem.C, problem.d,
                        settings, x_init=x_init)
    elapsed = time.perf_counter() - start
    solution.raise_for_status(problem.row_labels)

    inputs = problem.inputs(solution.x).copy()
    for k in range(plan.horizon):
        for leg in (0, 1):
            if not plan.stance[k, leg]:
                inputs[k, 3 * leg:3 * leg + 3] = 0.0
                inputs[k, 6 + 3 * leg:9 + 3 * leg] = 0.0

    violation = inequalities.C @ inputs.reshape(-1) - inequalities.d
    diagnostics = MpcDiagnostics(
        objective=solution.objective + problem.constant,
        iterations=solution.iterations,
        solve_seconds=elapsed,
        max_violation=float(max(violation.max(initial=0.0), 0.0)),
        formulation=formulation,
        inputs=inputs,
        solution=solution.x,
    )
    return inputs[0].copy(), diagnostics
