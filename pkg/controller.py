"""
Sluten regling: MPC-schemaläggning och svingben
================================================
Löser MPC med frekvensen f_mpc och håller senaste u[0] mellan lösningar.
Ett kontaktbyte ger alltid en ny lösning samma tick.
Svingben styrs med en kartesisk PD-regulator längs en svingprofil mot
Raibert-målet. Regulatorn ser aldrig terrängen; markhöjden skattas från
stödfötternas kontaktpunkter.
"""
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from dynamics import RobotState
from errors import InfeasibleError, IterationLimitError, SingularityError
from kinematics import SWING_APEX, SWING_KD, SWING_KP, SwingState, raibert_target, swing_force, swing_profile
from model import ContactPlan, GaitSchedule, PayloadSpec, RobotModel, contact_horizon, contact_state
from mpc import (FootData, FootFrame, MpcConfig, MpcDiagnostics, ReferenceTrajectory, build_reference,
                 predict_foot_positions, solve_mpc)
from qpsolver import SolverSettings

ANCHOR_POSITION_SLACK = 0.15
ANCHOR_YAW_SLACK = 0.3


@dataclass
class ControlOutput:
    """Kommandon för en tick: stödvridningar (u), svingkrafter och kontaktläge"""

    u: np.ndarray
    swing_forces: np.ndarray
    stance: Tuple[bool, bool]
    diagnostics: Optional[MpcDiagnostics] = None
    events: List[Tuple[str, str]] = field(default_factory=list)


class LocomotionController:
    """Regulator för en robot; anropas sekventiellt en gång per tick"""

    def __init__(self, model: RobotModel, gait: GaitSchedule, payload: PayloadSpec,
                 cfg: MpcConfig, settings: SolverSettings = SolverSettings(),
                 formulation: Optional[str] = None,
                 swing_gains: Tuple[float, float] = (SWING_KP, SWING_KD),
                 swing_apex: float = SWING_APEX):
        """
        Initiera regulatorn

        Args:
            model: Robotmodell
            gait: Gångschema
            payload: Lastschema (känt för regulatorn via den externa kraftmodellen)
            cfg: MPC-parametrar
            settings: QP-lösarens inställningar
            formulation: condensed eller noncondensed (cfg.formulation om None)
            swing_gains: (K_p, K_d) för svingbenen
            swing_apex: Svinghöjd i meter
        """
        self.model = model
        self.gait = gait
        self.payload = payload
        self.cfg = cfg
        self.settings = settings
        self.formulation = formulation or cfg.formulation
        self.kp, self.kd = swing_gains
        self.apex = swing_apex

        self.u = np.zeros(12)
        self.anchor: Optional[np.ndarray] = None
        self.swings: List[Optional[SwingState]] = [None, None]
        self._warm_start: Optional[np.ndarray] = None
        self._previous_stance: Optional[Tuple[bool, bool]] = None

    def reset(self, state: RobotState):
        """Sätt ankare och jämviktsgissning från starttillståndet"""
        self.anchor = np.array([state.position[0], state.position[1], state.euler[2]])
        stance = contact_state(self.gait, 0.0).stance
        weight = (self.model.mass + self.payload.active_mass(0.0)) * self.model.gravity
        self.u = np.zeros(12)
        for leg in (0, 1):
            if stance[leg]:
                self.u[3 * leg + 2] = weight / sum(stance)
        self.swings = [None, None]
        self._warm_start = None
        self._previous_stance = None

    def update_anchor(self, state: RobotState, cmd: Sequence[float], dt: float):
        """Integrera önskat läge från kommandot, högst en bit från uppmätt läge"""
        if self.anchor is None:
            self.reset(state)
        vx, vy, yaw_rate = cmd
        yaw = self.anchor[2] + yaw_rate * dt
        c, s = math.cos(yaw), math.sin(yaw)
        xy = self.anchor[0:2] + dt * np.array([c * vx - s * vy, s * vx + c * vy])

        offset = xy - state.position[0:2]
        distance = float(np.linalg.norm(offset))
        if distance > ANCHOR_POSITION_SLACK:
            xy = state.position[0:2] + offset * (ANCHOR_POSITION_SLACK / distance)
        yaw = state.euler[2] + float(np.clip(yaw - state.euler[2], -ANCHOR_YAW_SLACK, ANCHOR_YAW_SLACK))
        self.anchor = np.array([xy[0], xy[1], yaw])

    @staticmethod
    def ground_height(feet: Sequence[FootFrame], stance: Sequence[bool]) -> float:
        """Markhöjd skattad som medelhöjden för stödfötterna"""
        heights = [feet[leg].position[2] for leg in (0, 1) if stance[leg]]
        if not heights:
            heights = [feet[leg].position[2] for leg in (0, 1)]
        return float(np.mean(heights))

    def swing_target(self, leg: int, t: float, state: RobotState, cmd: Sequence[float],
                     ground_z: float) -> np.ndarray:
        """Raibert-mål för benets nästa nedsättning"""
        phase = contact_state(self.gait, t).phase[leg]
        remaining = (1.0 - phase) * self.gait.swing_duration(leg)
        yaw_frame = Rotation.from_euler("Z", state.euler[2]).as_matrix()
        v_cmd = yaw_frame @ np.array([cmd[0], cmd[1], 0.0])
        hip_at_touchdown = state.position + v_cmd * remaining
        target = raibert_target(hip_at_touchdown, state.velocity, v_cmd,
                                self.gait.stance_duration(leg), self.cfg.raibert_gain,
                                yaw_frame @ self.model.hip_offset(leg))
        target[2] = ground_z
        return target

    def prepare(self, t: float, state: RobotState, feet: Sequence[FootFrame],
                cmd: Sequence[float]) -> Tuple[ReferenceTrajectory, ContactPlan, FootData]:
        """Referens, kontaktplan och fotdata för en MPC-lösning från tiden t"""
        plan = contact_horizon(self.gait, self.payload, t, self.cfg.dt, self.cfg.horizon)
        ground_z = self.ground_height(feet, plan.stance[0])
        ref = build_reference(cmd, state, self.cfg, self.model.nominal_height,
                              anchor=self.anchor, ground_z=ground_z)
        foot_data = predict_foot_positions(state, self.gait, plan, cmd, self.cfg.raibert_gain,
                                           self.model, feet, ref, ground_z)
        return ref, plan, foot_data

    def solve(self, t: float, state: RobotState, feet: Sequence[FootFrame],
              cmd: Sequence[float]) -> Tuple[np.ndarray, MpcDiagnostics]:
        """
        En MPC-lösning från tiden t

        Raises:
            InfeasibleError, IterationLimitError, SingularityError
        """
        ref, plan, foot_data = self.prepare(t, state, feet, cmd)
        u0, diagnostics = solve_mpc(state, ref, plan, foot_data, self.cfg, self.model, self.payload,
                                    self.formulation, self.settings, warm_start=self._warm_start)
        self._warm_start = diagnostics.inputs.reshape(-1)
        return u0, diagnostics

    def step(self, t: float, run_mpc: bool, state: RobotState, feet: Sequence[FootFrame],
             foot_velocities: Sequence[np.ndarray], cmd: Sequence[float], dt: float) -> ControlOutput:
        """
        Beräkna kommandon för en tick

        Args:
            t: Tid
            run_mpc: Om MPC ska lösas denna tick
            state: Återkopplat tillstånd
            feet: Fotramar i kontaktpunkterna (fastlåsta stödfötter, simulerade svingfötter)
            foot_velocities: Fotarnas hastigheter i världsramen
            cmd: (v_x, v_y, yaw-hastighet)
            dt: Tickens längd
        """
        self.update_anchor(state, cmd, dt)
        contact = contact_state(self.gait, t)
        stance = contact.stance
        events = []

        if self._previous_stance is None:
            self._previous_stance = stance
            for leg in (0, 1):
                if not stance[leg]:
                    self._start_swing(leg, feet[leg].position)
        elif stance != self._previous_stance:
            # Kontaktbyte: den hållna insignalen gäller fel kontaktmängd
            run_mpc = True
            for leg in (0, 1):
                if self._previous_stance[leg] and not stance[leg]:
                    self._start_swing(leg, feet[leg].position)
                elif stance[leg]:
                    self.swings[leg] = None
            self._previous_stance = stance

        diagnostics = None
        if run_mpc:
            try:
                self.u, diagnostics = self.solve(t, state, feet, cmd)
            except (InfeasibleError, IterationLimitError, SingularityError) as exc:
                events.append((type(exc).__name__, str(exc)))

        u = self.u.copy()
        ground_z = self.ground_height(feet, stance)
        forces = np.zeros((2, 3))
        for leg in (0, 1):
            if stance[leg]:
                continue
            u[3 * leg:3 * leg + 3] = 0.0
            u[6 + 3 * leg:9 + 3 * leg] = 0.0
            swing = self.swings[leg]
            swing.phase = contact.phase[leg]
            swing.target = self.swing_target(leg, t, state, cmd, ground_z)
            swing.body_velocity = state.velocity
            p_des, v_des = swing_profile(swing)
            forces[leg] = swing_force(p_des, v_des, feet[leg].position, foot_velocities[leg],
                                      self.kp, self.kd, in_stance=False)
        return ControlOutput(u, forces, stance, diagnostics, events)

    def _start_swing(self, leg: int, position: np.ndarray):
        self.swings[leg] = SwingState(liftoff=np.array(position, dtype=float),
                                      target=np.array(position, dtype=float),
                                      apex=self.apex, duration=self.gait.swing_duration(leg))
