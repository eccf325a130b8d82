"""
Robotmodell, last, gångschema och kontaktplaner
================================================
Fysiska parametrar (massa, tröghet, benlängder, fotgeometri, gränser),
lastens massa- och kontaktschema samt den tidsbaserade gångschemaläggaren
som alla andra moduler använder.

Ben 1 är vänster ben och ben 2 höger ben genom hela paketet.
"""
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Tuple

import numpy as np

from errors import ConfigError

LEFT, RIGHT = 0, 1
JOINT_NAMES = ("hip_yaw", "hip_roll", "thigh", "knee", "ankle")


@dataclass(frozen=True)
class RobotModel:
    """Fysiska egenskaper för roboten (SI-enheter)"""

    mass: float = 16.0
    inertia: Tuple[float, float, float] = (0.541, 0.520, 0.069)
    leg_length: float = 0.22
    toe_length: float = 0.09
    heel_length: float = 0.05
    hip_lateral: float = 0.047
    hip_forward: float = 0.0
    hip_vertical: float = -0.10
    ankle_offset: float = 0.04
    mu: float = 0.5
    f_min: float = 10.0
    f_max: float = 250.0
    torque_limits: Tuple[float, ...] = (33.5, 33.5, 33.5, 51.9, 33.5)
    joint_lower: Tuple[float, ...] = (-0.8, -0.6, -2.0, 0.0, -1.5)
    joint_upper: Tuple[float, ...] = (0.8, 0.6, 1.2, 2.6, 1.5)
    gravity: float = 9.81
    eps_sing: float = 0.1
    nominal_height: float = 0.55

    def __post_init__(self):
        # Tuples kan komma in som listor från YAML
        for name in ("inertia", "torque_limits", "joint_lower", "joint_upper"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))

        if not self.mass > 0:
            raise ConfigError("must be > 0", key="robot.mass")
        if len(self.inertia) != 3 or min(self.inertia) <= 0:
            raise ConfigError("needs three entries > 0", key="robot.inertia")
        if not 0 < self.f_min < self.f_max:
            raise ConfigError("need 0 < f_min < f_max", key="robot.f_min")
        if not 0 < self.mu <= 1.5:
            raise ConfigError(f"friction coefficient {self.mu} outside (0, 1.5]", key="robot.mu")
        if self.toe_length <= 0 or self.heel_length <= 0:
            raise ConfigError("toe and heel lengths must be > 0", key="robot.toe_length")
        if self.leg_length <= 0 or self.ankle_offset < 0:
            raise ConfigError("invalid leg geometry", key="robot.leg_length")
        if len(self.torque_limits) != 5 or min(self.torque_limits) <= 0:
            raise ConfigError("needs five limits > 0", key="robot.torque_limits")
        if len(self.joint_lower) != 5 or len(self.joint_upper) != 5:
            raise ConfigError("needs five entries", key="robot.joint_lower")
        if not 0 < self.eps_sing < math.pi / 2:
            raise ConfigError("must lie in (0, pi/2)", key="robot.eps_sing")
        if not self.gravity > 0 or not self.nominal_height > 0:
            raise ConfigError("must be > 0", key="robot.gravity")

    @property
    def inertia_matrix(self) -> np.ndarray:
        return np.diag(self.inertia)

    @property
    def gravity_vector(self) -> np.ndarray:
        return np.array([0.0, 0.0, -self.gravity])

    @property
    def leg_reach(self) -> float:
        """Största avstånd från höft till kontaktpunkt"""
        return 2.0 * self.leg_length + self.ankle_offset

    def hip_offset(self, leg: int) -> np.ndarray:
        """Höftens position relativt CoM i kroppsramen"""
        side = 1.0 if leg == LEFT else -1.0
        return np.array([self.hip_forward, side * self.hip_lateral, self.hip_vertical])


@dataclass(frozen=True)
class PayloadSpec:
    """
    Last som bärs av roboten (extern kraftmodell)

    Massan anges som brytpunkter (t, m_o) som interpoleras linjärt eller
    hålls styckvis konstant. Kontakten anges som fönster [start, slut).
    """

    mass_breakpoints: Tuple[Tuple[float, float], ...] = ((0.0, 0.0),)
    interpolation: str = "linear"
    offset: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    contact_windows: Tuple[Tuple[float, float], ...] = ((0.0, math.inf),)

    def __post_init__(self):
        breakpoints = tuple((float(t), float(m)) for t, m in self.mass_breakpoints)
        windows = tuple((float(a), float(b)) for a, b in self.contact_windows)
        object.__setattr__(self, "mass_breakpoints", breakpoints)
        object.__setattr__(self, "contact_windows", windows)
        object.__setattr__(self, "offset", tuple(float(v) for v in self.offset))

        if not breakpoints:
            raise ConfigError("needs at least one breakpoint", key="payload.mass_breakpoints")
        times = [t for t, _ in breakpoints]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError("breakpoint times must increase", key="payload.mass_breakpoints")
        if any(m < 0 for _, m in breakpoints):
            raise ConfigError("payload mass must be >= 0", key="payload.mass_breakpoints")
        if self.interpolation not in ("linear", "step"):
            raise ConfigError("use 'linear' or 'step'", key="payload.interpolation")
        if len(self.offset) != 3:
            raise ConfigError("needs three entries", key="payload.offset")
        for start, end in windows:
            if end <= start:
                raise ConfigError("window end must follow start", key="payload.contact_windows")

    def mass_at(self, t: float) -> float:
        times = np.array([p[0] for p in self.mass_breakpoints])
        masses = np.array([p[1] for p in self.mass_breakpoints])
        if self.interpolation == "linear":
            return float(np.interp(t, times, masses))
        idx = int(np.searchsorted(times, t, side="right")) - 1
        return float(masses[max(idx, 0)])

    def in_contact(self, t: float) -> bool:
        return any(start <= t < end for start, end in self.contact_windows)

    def active_mass(self, t: float) -> float:
        """Massa som påverkar dynamiken, noll utan kontakt"""
        return self.mass_at(t) if self.in_contact(t) else 0.0


@dataclass(frozen=True)
class GaitSchedule:
    """Periodisk, tidsbaserad kontaktsekvens för två ben"""

    mode: str = "standing"
    period: float = 0.5
    offsets: Tuple[float, float] = (0.0, 0.5)
    duty: Tuple[float, float] = (0.5, 0.5)
    period_bounds: Tuple[float, float] = (0.3, 0.7)
    allow_out_of_range_period: bool = False

    def __post_init__(self):
        object.__setattr__(self, "offsets", tuple(float(v) for v in self.offsets))
        object.__setattr__(self, "duty", tuple(float(v) for v in self.duty))
        object.__setattr__(self, "period_bounds", tuple(float(v) for v in self.period_bounds))

        if self.mode not in ("standing", "walking"):
            raise ConfigError("use 'standing' or 'walking'", key="gait.mode")
        if not self.period > 0:
            raise ConfigError(f"gait period must be > 0, got {self.period}", key="gait.period")
        if len(self.offsets) != 2 or len(self.duty) != 2:
            raise ConfigError("needs one entry per leg", key="gait.offsets")
        if any(not 0 < d <= 1 for d in self.duty):
            raise ConfigError("duty factor must lie in (0, 1]", key="gait.duty")
        low, high = self.period_bounds
        if self.mode == "walking" and not self.allow_out_of_range_period \
                and not low <= self.period <= high:
            raise ConfigError(f"period {self.period} outside [{low}, {high}]", key="gait.period")

    @property
    def walking(self) -> bool:
        return self.mode == "walking"

    def stance_duration(self, leg: int) -> float:
        return self.duty[leg] * self.period

    def swing_duration(self, leg: int) -> float:
        return (1.0 - self.duty[leg]) * self.period


class ContactState(NamedTuple):
    stance_left: bool
    stance_right: bool
    phase_left: float
    phase_right: float

    @property
    def stance(self) -> Tuple[bool, bool]:
        return (self.stance_left, self.stance_right)

    @property
    def phase(self) -> Tuple[float, float]:
        return (self.phase_left, self.phase_right)


@dataclass(frozen=True, eq=False)
class ContactPlan:
    """Kontakttabell över prediktionshorisonten"""

    horizon: int
    dt: float
    times: np.ndarray
    stance: np.ndarray
    phase: np.ndarray
    payload: np.ndarray

    def __len__(self) -> int:
        return self.horizon

    def row(self, k: int) -> ContactState:
        return ContactState(bool(self.stance[k, 0]), bool(self.stance[k, 1]),
                            float(self.phase[k, 0]), float(self.phase[k, 1]))


def _cycle_fraction(t: float, period: float, offset: float) -> float:
    frac = (t / period - offset) % 1.0
    # Avrundning så att t = k·T/2 inte hamnar på fel sida om en växling
    frac = round(frac, 12) % 1.0
    return frac


def contact_state(gait: GaitSchedule, t: float) -> ContactState:
    """
    Kontaktläge och fas för båda benen vid tiden t

    Args:
        gait: Gångschema
        t: Tid i sekunder (>= 0)

    Returns:
        ContactState med stöd/sving per ben och fas i [0, 1)
    """
    if not gait.period > 0:
        raise ConfigError(f"gait period must be > 0, got {gait.period}", key="gait.period")
    if not gait.walking:
        return ContactState(True, True, 0.0, 0.0)

    stance, phase = [], []
    for leg in (LEFT, RIGHT):
        frac = _cycle_fraction(t, gait.period, gait.offsets[leg])
        duty = gait.duty[leg]
        if frac < duty:
            stance.append(True)
            phase.append(frac / duty)
        else:
            stance.append(False)
            phase.append((frac - duty) / (1.0 - duty))
    return ContactState(stance[0], stance[1], phase[0], phase[1])


def contact_horizon(gait: GaitSchedule, payload: PayloadSpec, t0: float,
                    dt_mpc: float, h: int) -> ContactPlan:
    """
    Bygg kontaktplanen för MPC-horisonten

    Rad k motsvarar contact_state(t0 + k·dt_mpc); lastens kontakt samplas
    vid samma tidpunkter.
    """
    if h < 1:
        raise ConfigError(f"horizon must be >= 1, got {h}", key="mpc.horizon")
    if not dt_mpc > 0:
        raise ConfigError(f"dt_mpc must be > 0, got {dt_mpc}", key="mpc.dt")

    times = t0 + dt_mpc * np.arange(h)
    stance = np.zeros((h, 2), dtype=bool)
    phase = np.zeros((h, 2))
    sigma_o = np.zeros(h, dtype=bool)
    for k, t in enumerate(times):
        state = contact_state(gait, float(t))
        stance[k] = state.stance
        phase[k] = state.phase
        sigma_o[k] = payload.in_contact(float(t))
    return ContactPlan(horizon=h, dt=dt_mpc, times=times, stance=stance, phase=phase, payload=sigma_o)
