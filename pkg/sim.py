"""
Simulator för SRBD-roboten
==========================
Icke-linjär integration (1 kHz), terrängmodeller, externa störningar,
kinematisk fastlåsning av stödfötter och beräkning av mätetal.

Regulatorn får aldrig läsa terrängen; bara simulatorn frågar efter höjder.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from controller import LocomotionController
from dynamics import (PayloadLoad, RobotState, euler_rate_map_inv, nonlinear_derivative,
                      payload_load, rotation_from_euler)
from errors import ConfigError, ContractViolationError, SingularityError, UnreachableTargetError
from kinematics import (FootPose, LegJoints, clamp_torques, inverse_kinematics, leg_jacobian,
                        torque_map)
from model import GaitSchedule, PayloadSpec, RobotModel, contact_state
from mpc import FootFrame, MpcConfig, step_inequalities
from qpsolver import SolverSettings

TERRAIN_KINDS = ("flat", "slope", "random-slats", "stacked-slats")
FALL_ANGLE = 0.5
FALL_HEIGHT = 0.3
FOOT_MASS = 0.3
RECOVERY_BAND = 0.02
RECOVERY_HOLD = 0.5
# Tillåten översträckning av ett stödben innan körningen räknas som fall
OVERREACH_MARGIN = 0.02
NOMINAL_KNEE = 0.3709


@dataclass(frozen=True)
class Terrain:
    """
    Terrängmodell med höjd som funktion av (x, y)

    Lutning och ribbor börjar vid x = start och ligger längs x-axeln.
    """

    kind: str = "flat"
    slope: float = math.radians(18.0)
    slat_heights: Tuple[float, ...] = (0.0, 0.02, 0.04, 0.06)
    slat_pitch: float = 0.25
    slat_count: int = 24
    start: float = 0.3
    max_height: float = 0.06
    mu: float = 0.5
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "slat_heights", tuple(float(v) for v in self.slat_heights))
        if self.kind not in TERRAIN_KINDS:
            raise ConfigError(f"use one of {', '.join(TERRAIN_KINDS)}", key="terrain.kind")
        if not self.slat_pitch > 0 or self.slat_count < 0:
            raise ConfigError("slat pitch must be > 0", key="terrain.slat_pitch")
        if not -math.pi / 4 <= self.slope <= math.pi / 4:
            raise ConfigError(f"slope {self.slope} outside ±45°", key="terrain.slope")
        if any(h < 0 for h in self.slat_heights) or not self.slat_heights:
            raise ConfigError("slat heights must be >= 0", key="terrain.slat_heights")

        if self.kind == "random-slats":
            rng = np.random.default_rng(self.seed)
            heights = rng.choice(np.array(self.slat_heights), size=self.slat_count)
        else:
            pattern = np.array([0.02, 0.04, 0.06, 0.06, 0.04, 0.02])
            heights = np.minimum(np.resize(pattern, self.slat_count), self.max_height)
        object.__setattr__(self, "_slats", heights)

    def height(self, x: float, y: float = 0.0) -> float:
        if self.kind == "flat":
            return 0.0
        if self.kind == "slope":
            return math.tan(self.slope) * max(x - self.start, 0.0)
        index = math.floor((x - self.start) / self.slat_pitch)
        if 0 <= index < self.slat_count:
            return float(self._slats[index])
        return 0.0


class DisturbanceEntry(NamedTuple):
    start: float
    duration: float
    force: Tuple[float, float, float]
    torque: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    point: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class Disturbance:
    """Schema med externa krafter och moment; point är hävarmen från CoM i världsramen"""

    entries: Tuple[DisturbanceEntry, ...] = ()

    def __post_init__(self):
        entries = tuple(sorted((DisturbanceEntry(float(e[0]), float(e[1]),
                                                 tuple(float(v) for v in e[2]),
                                                 *(tuple(float(v) for v in part) for part in e[3:]))
                                for e in self.entries), key=lambda e: e.start))
        object.__setattr__(self, "entries", entries)
        for entry in entries:
            if not entry.duration > 0 or entry.start < 0:
                raise ConfigError("entries need start >= 0 and duration > 0", key="disturbances")
        for first, second in zip(entries, entries[1:]):
            if second.start < first.end:
                raise ConfigError(f"entries at {first.start} and {second.start} overlap", key="disturbances")

    def wrench_at(self, t: float) -> Optional[np.ndarray]:
        """[F; τ] kring CoM vid tiden t, None utanför alla fönster"""
        for entry in self.entries:
            if entry.start <= t < entry.end:
                force = np.array(entry.force)
                torque = np.array(entry.torque) + np.cross(np.array(entry.point), force)
                return np.concatenate([force, torque])
        return None


class CommandPoint(NamedTuple):
    t: float
    vx: float = 0.0
    vy: float = 0.0
    yaw_rate: float = 0.0


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    robot: RobotModel = RobotModel()
    gait: GaitSchedule = GaitSchedule()
    payload: PayloadSpec = PayloadSpec()
    terrain: Terrain = Terrain()
    commands: Tuple[CommandPoint, ...] = (CommandPoint(0.0),)
    disturbances: Disturbance = Disturbance()
    mpc: MpcConfig = MpcConfig()
    solver: SolverSettings = SolverSettings()
    duration: float = 3.0
    dt: float = 0.001
    seed: int = 0
    feedback_noise_std: float = 0.0

    def __post_init__(self):
        commands = tuple(sorted((CommandPoint(*(float(v) for v in c)) for c in self.commands),
                                key=lambda c: c.t))
        object.__setattr__(self, "commands", commands)
        if not self.duration > 0:
            raise ConfigError(f"duration must be > 0, got {self.duration}", key="sim.duration")
        if not self.dt > 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}", key="sim.dt")
        if self.feedback_noise_std < 0:
            raise ConfigError("noise level must be >= 0", key="sim.feedback_noise_std")
        if not commands:
            raise ConfigError("needs at least one command", key="commands")

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.dt))

    @property
    def ticks_per_solve(self) -> int:
        """Antal ticks mellan MPC-lösningar, avrundat till närmaste heltal"""
        return max(int(round(1.0 / (self.mpc.frequency * self.dt))), 1)

    def command_at(self, t: float) -> Tuple[float, float, float]:
        current = self.commands[0]
        for command in self.commands:
            if command.t <= t + 1e-12:
                current = command
        return current.vx, current.vy, current.yaw_rate


@dataclass
class SimLog:
    """
    Loggade värden per tick

    reference innehåller referenser för kanalerna (vx, vy, ω_z, z, roll, pitch),
    anchor önskad CoM-position (x, y, z) för återhämtningstid.
    """

    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    torques: np.ndarray
    saturation: np.ndarray
    contacts: np.ndarray
    solve_ms: np.ndarray
    violation: np.ndarray
    reference: np.ndarray
    anchor: np.ndarray
    payload_mass: np.ndarray
    torque_limits: np.ndarray = field(default_factory=lambda: np.tile(RobotModel().torque_limits, 2))
    disturbance_windows: List[Tuple[float, float]] = field(default_factory=list)
    events: List[Tuple[float, str, str]] = field(default_factory=list)
    fall: bool = False
    fall_time: Optional[float] = None
    metrics: Dict = field(default_factory=dict)

    @classmethod
    def allocate(cls, rows: int, **kwargs) -> "SimLog":
        return cls(times=np.zeros(rows), states=np.zeros((rows, 12)), inputs=np.zeros((rows, 12)),
                   torques=np.zeros((rows, 10)), saturation=np.zeros((rows, 10), dtype=bool),
                   contacts=np.zeros((rows, 2), dtype=bool), solve_ms=np.full(rows, np.nan),
                   violation=np.zeros(rows), reference=np.zeros((rows, 6)), anchor=np.zeros((rows, 3)),
                   payload_mass=np.zeros(rows), **kwargs)

    def truncate(self, rows: int):
        for name in ("times", "states", "inputs", "torques", "saturation", "contacts", "solve_ms",
                     "violation", "reference", "anchor", "payload_mass"):
            setattr(self, name, getattr(self, name)[:rows])

    def __len__(self) -> int:
        return self.times.shape[0]


def integrate_step(state: RobotState, model: RobotModel, foot_positions: Sequence[np.ndarray],
                   payload: PayloadLoad, u: np.ndarray, dt: float,
                   external_wrench: Optional[np.ndarray] = None) -> RobotState:
    """
    Ett semi-implicit Euler-steg

    Hastigheter uppdateras först från den icke-linjära derivatan; positioner
    och Euler-vinklar flyttas sedan med medelvärdet av hastigheten före och
    efter uppdateringen.

    Raises:
        SingularityError: om pitch passerar singularitetsgränsen
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    derivative = nonlinear_derivative(state, model, foot_positions, payload, u, external_wrench)
    velocity = state.velocity + derivative[6:9] * dt
    omega = state.omega + derivative[9:12] * dt
    position = state.position + 0.5 * (state.velocity + velocity) * dt
    euler_rate = 0.5 * (derivative[3:6] + euler_rate_map_inv(state.euler, model.eps_sing) @ omega)
    return RobotState(position, state.euler + euler_rate * dt, velocity, omega)


def effective_wrench(u_leg: np.ndarray, J: np.ndarray, limits: Sequence[float],
                     in_stance: bool = True) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Tillämpbar stödvridning efter momentmättnad

    Args:
        u_leg: Önskad [F; M] från marken på foten (världsram)
        J: Benets 6×5 Jacobian i kontaktpunkten (världsram)
        limits: Momentgränser per led
        in_stance: Måste vara sant

    Hela vridningen skalas med samma faktor tills den mest mättade leden
    ligger på sin gräns. Riktningen bevaras, så friktions- och
    kontaktvillkor som är homogena i [F; M] förblir uppfyllda.

    Returns:
        (tillämpad [F; M], tillämpade ledmoment, mättnadsflaggor)
    """
    if not in_stance:
        raise ContractViolationError("stance wrench requested for a swing leg")
    u_leg = np.asarray(u_leg, dtype=float)
    tau = torque_map(J, -u_leg[0:3], -u_leg[3:6])
    _, flags = clamp_torques(tau, limits)
    if not flags.any():
        return u_leg.copy(), tau, flags
    limits = np.asarray(limits, dtype=float)
    scale = float(np.min(limits[flags] / np.abs(tau[flags])))
    return scale * u_leg, scale * tau, flags


@dataclass
class _Leg:
    joints: LegJoints
    position: np.ndarray
    velocity: np.ndarray
    rotation: np.ndarray
    stance: bool


def _foot_rotation(yaw: float) -> np.ndarray:
    return Rotation.from_euler("Z", yaw).as_matrix()


def _initial_legs(state: RobotState, model: RobotModel, terrain: Terrain) -> List[_Leg]:
    R = rotation_from_euler(state.euler)
    legs = []
    for leg in (0, 1):
        hip = state.position + R @ model.hip_offset(leg)
        position = np.array([hip[0], hip[1], terrain.height(hip[0], hip[1])])
        rotation = _foot_rotation(state.euler[2])
        seed = (0.0, 0.0, -NOMINAL_KNEE, 2 * NOMINAL_KNEE, -NOMINAL_KNEE)
        joints = inverse_kinematics(FootPose(position, rotation), leg, model, seed, state.position, R)
        legs.append(_Leg(joints, position, np.zeros(3), rotation, True))
    return legs


def standing_pose(model: RobotModel, terrain: Optional[Terrain] = None) -> Tuple[RobotState, List[FootFrame]]:
    """Starttillstånd på nominell höjd med fötterna under höfterna"""
    terrain = terrain or Terrain()
    ground = terrain.height(0.0, 0.0)
    state = RobotState(position=(0.0, 0.0, ground + model.nominal_height))
    legs = _initial_legs(state, model, terrain)
    return state, [FootFrame(leg.rotation, leg.position) for leg in legs]


def run_scenario(scenario: Scenario, formulation: Optional[str] = None, verbose: bool = False) -> SimLog:
    """
    Kör ett scenario i sluten loop

    MPC löses var ticks_per_solve:e tick med nollte ordningens hållning;
    momentavbildning, svingreglering och integration sker varje tick.
    Fall och lösarfel loggas, de kastas inte.
    """
    model = scenario.robot
    rng = np.random.default_rng(scenario.seed)
    controller = LocomotionController(model, scenario.gait, scenario.payload, scenario.mpc,
                                      scenario.solver, formulation)

    state, _ = standing_pose(model, scenario.terrain)
    legs = _initial_legs(state, model, scenario.terrain)
    controller.reset(state)

    steps = scenario.steps
    log = SimLog.allocate(steps + 1,
                          torque_limits=np.tile(model.torque_limits, 2),
                          disturbance_windows=[(e.start, e.end) for e in scenario.disturbances.entries])

    overreach: Optional[str] = None
    for tick in range(steps + 1):
        t = tick * scenario.dt
        stance = contact_state(scenario.gait, t).stance
        cmd = scenario.command_at(t)

        # Nedsättning: låses vid verklig terränghöjd vid schemalagd tidpunkt
        for index, leg in enumerate(legs):
            if stance[index] and not leg.stance:
                leg.position = np.array([leg.position[0], leg.position[1],
                                         scenario.terrain.height(leg.position[0], leg.position[1])])
                leg.velocity = np.zeros(3)
                leg.rotation = _foot_rotation(state.euler[2])
            leg.stance = stance[index]

        R = rotation_from_euler(state.euler)
        # Regulatorn ser de fastlåsta kontaktpunkterna, inte benets framåtkinematik
        feet = [FootFrame(leg.rotation, leg.position.copy()) for leg in legs]

        feedback = state
        if scenario.feedback_noise_std > 0:
            feedback = RobotState.from_vector(
                state.as_vector() + rng.normal(0.0, scenario.feedback_noise_std, 12))

        output = controller.step(t, tick % scenario.ticks_per_solve == 0, feedback, feet,
                                 [leg.velocity for leg in legs], cmd, scenario.dt)
        for kind, detail in output.events:
            log.events.append((t, kind, detail))

        applied = np.zeros(12)
        torques = np.zeros(10)
        saturated = np.zeros(10, dtype=bool)
        swing_forces = np.zeros((2, 3))
        for index, leg in enumerate(legs):
            J = leg_jacobian(leg.joints, model, state.position, R)
            limits = model.torque_limits
            cols = np.r_[3 * index:3 * index + 3, 6 + 3 * index:9 + 3 * index]
            if leg.stance:
                wrench, tau, flags = effective_wrench(output.u[cols], J, limits)
                applied[cols] = wrench
            else:
                tau, flags = clamp_torques(torque_map(J, output.swing_forces[index]), limits)
                swing_forces[index] = np.linalg.pinv(J[0:3].T) @ tau
            torques[5 * index:5 * index + 5] = tau
            saturated[5 * index:5 * index + 5] = flags
        if saturated.any():
            log.events.append((t, "saturation", f"joints {np.flatnonzero(saturated).tolist()}"))

        check = step_inequalities(stance, [leg.rotation for leg in legs], scenario.mpc, model)
        violation = float(max((check.C @ applied - check.d).max(initial=0.0), 0.0))

        yaw_frame = _foot_rotation(state.euler[2])
        v_cmd = yaw_frame @ np.array([cmd[0], cmd[1], 0.0])
        ground_z = controller.ground_height(feet, stance)
        anchor = controller.anchor
        log.times[tick] = t
        log.states[tick] = state.as_vector()
        log.inputs[tick] = applied
        log.torques[tick] = torques
        log.saturation[tick] = saturated
        log.contacts[tick] = stance
        if output.diagnostics is not None:
            log.solve_ms[tick] = output.diagnostics.solve_seconds * 1000.0
        log.violation[tick] = violation
        log.reference[tick] = (v_cmd[0], v_cmd[1], cmd[2], ground_z + model.nominal_height, 0.0, 0.0)
        log.anchor[tick] = (anchor[0], anchor[1], ground_z + model.nominal_height)
        log.payload_mass[tick] = scenario.payload.active_mass(t)

        roll, pitch = state.euler[0], state.euler[1]
        if abs(roll) > FALL_ANGLE or abs(pitch) > FALL_ANGLE or state.position[2] < FALL_HEIGHT:
            log.fall, log.fall_time = True, t
            log.events.append((t, "fall", f"roll {roll:.3f} pitch {pitch:.3f} z {state.position[2]:.3f}"))
            log.truncate(tick + 1)
            break
        if overreach is not None:
            log.fall, log.fall_time = True, t
            log.events.append((t, "fall", overreach))
            log.truncate(tick + 1)
            break
        if tick == steps:
            break

        load = payload_load(scenario.payload, t, R)
        try:
            state = integrate_step(state, model, [leg.position for leg in legs], load, applied,
                                   scenario.dt, scenario.disturbances.wrench_at(t))
        except SingularityError as exc:
            log.fall, log.fall_time = True, t
            log.events.append((t, "fall", str(exc)))
            log.truncate(tick + 1)
            break

        for index, leg in enumerate(legs):
            if not leg.stance:
                leg.velocity = leg.velocity + swing_forces[index] / FOOT_MASS * scenario.dt
                leg.position = leg.position + leg.velocity * scenario.dt
                leg.rotation = _foot_rotation(state.euler[2])
            target = FootPose(leg.position, leg.rotation)
            R_next = rotation_from_euler(state.euler)
            try:
                leg.joints = inverse_kinematics(target, index, model, leg.joints.q, state.position, R_next)
            except UnreachableTargetError as exc:
                log.events.append((t, "kinematic_limit", f"leg {index + 1}: {exc}"))
                hip = state.position + R_next @ model.hip_offset(index)
                excess = float(np.linalg.norm(leg.position - hip)) - model.leg_reach
                if leg.stance and excess > OVERREACH_MARGIN and overreach is None:
                    overreach = f"leg {index + 1} overextended by {excess:.3f} m"

        if verbose and tick % 1000 == 0:
            print(f"   ⏱️  t = {t:.1f} s, z = {state.position[2]:.3f} m")

    log.metrics = compute_metrics(log)
    return log


def _recovery_time(log: SimLog, end: float) -> Optional[float]:
    """Första tid efter end då CoM-felet håller sig under 2 cm i 0,5 s"""
    if len(log) < 2:
        return None
    dt = float(log.times[1] - log.times[0])
    hold = max(int(round(RECOVERY_HOLD / dt)), 1)
    inside = np.linalg.norm(log.states[:, 0:3] - log.anchor, axis=1) < RECOVERY_BAND
    start = int(np.searchsorted(log.times, end - 1e-9))
    for index in range(start, len(log) - hold + 1):
        if inside[index:index + hold].all():
            return float(log.times[index] - end)
    return None


def compute_metrics(log: SimLog) -> Dict:
    """
    Sammanfattande mätetal för en körning

    Returns:
        Dictionary med RMSE per kanal, största villkorsöverträdelse,
        fall, lösartider, återhämtningstider och momentrevision.
    """
    if len(log) == 0:
        raise ValueError("empty log")
    measured = log.states[:, [6, 7, 11, 2, 3, 4]]
    errors = measured - log.reference
    channels = ("vx", "vy", "yaw_rate", "z", "roll", "pitch")
    rmse = {name: float(np.sqrt(np.mean(errors[:, i] ** 2))) for i, name in enumerate(channels)}

    solve_ms = log.solve_ms[np.isfinite(log.solve_ms)]
    peak = np.abs(log.torques).max(axis=0)
    duration = float(log.times[-1] - log.times[0])
    displacement = log.states[-1, 0:2] - log.states[0, 0:2]

    return {
        "rmse": rmse,
        "max_violation": float(log.violation.max()),
        "fall": bool(log.fall),
        "fall_time": log.fall_time,
        "duration": duration,
        "ticks": len(log),
        "mean_velocity": (displacement / duration).tolist() if duration > 0 else [0.0, 0.0],
        "distance": float(np.linalg.norm(displacement)),
        "solve_ms": {
            "mean": float(solve_ms.mean()) if solve_ms.size else None,
            "p95": float(np.percentile(solve_ms, 95)) if solve_ms.size else None,
            "max": float(solve_ms.max()) if solve_ms.size else None,
            "count": int(solve_ms.size),
        },
        "recovery_times": [_recovery_time(log, end) for _, end in log.disturbance_windows],
        "peak_torque": peak.tolist(),
        "torque_ratio": (peak / log.torque_limits).tolist(),
        "saturated_ticks": int(log.saturation.any(axis=1).sum()),
        "saturation_events": sum(1 for _, kind, _ in log.events if kind == "saturation"),
        "solver_failures": sum(1 for _, kind, _ in log.events
                               if kind in ("InfeasibleError", "IterationLimitError", "SingularityError")),
    }
