"""
Scenariofiler (YAML)
====================
Läser scenariofiler med sektionerna robot, gait, payload, terrain, mpc,
solver, commands, disturbances och sim. Okända nycklar avvisas med
radnummer, saknade sektioner får modulernas standardvärden.

Ekot (scenario_to_dict) läses tillbaka till en identisk konfiguration.
"""
import dataclasses
import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import yaml

from errors import ConfigError
from model import GaitSchedule, PayloadSpec, RobotModel
from mpc import MpcConfig
from qpsolver import SolverSettings
from sim import CommandPoint, Disturbance, DisturbanceEntry, Scenario, Terrain

SECTIONS = ("name", "robot", "gait", "payload", "terrain", "mpc", "solver",
            "commands", "disturbances", "sim")
SIM_KEYS = ("duration", "dt", "seed", "feedback_noise_std")
PAYLOAD_ALIASES = ("mass",)
TERRAIN_ALIASES = ("slope_deg",)


def _key_lines(node: yaml.Node, path: str, lines: Dict[str, int]):
    """Samla radnummer (1-baserade) för varje nyckelväg i dokumentet"""
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            key_path = f"{path}.{key_node.value}" if path else str(key_node.value)
            lines[key_path] = key_node.start_mark.line + 1
            _key_lines(value_node, key_path, lines)
    elif isinstance(node, yaml.SequenceNode):
        for index, item in enumerate(node.value):
            item_path = f"{path}[{index}]"
            lines[item_path] = item.start_mark.line + 1
            _key_lines(item, item_path, lines)


def _field_names(cls) -> List[str]:
    return [f.name for f in dataclasses.fields(cls)]


def _plain(value: Any) -> Any:
    """Tupler till listor rekursivt för YAML/JSON"""
    if isinstance(value, (tuple, list)):
        return [_plain(v) for v in value]
    return value


@dataclass
class ScenarioFile:
    """Ett inläst scenariodokument med radnummer per nyckel"""

    data: Dict[str, Any]
    lines: Dict[str, int] = field(default_factory=dict)
    path: Optional[str] = None

    @classmethod
    def parse(cls, text: str, path: Optional[str] = None) -> "ScenarioFile":
        try:
            root = yaml.compose(text, Loader=yaml.SafeLoader)
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}",
                              line=mark.line + 1 if mark is not None else None)
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError("scenario must be a mapping of sections", line=1)
        lines: Dict[str, int] = {}
        if root is not None:
            _key_lines(root, "", lines)
        return cls(data, lines, path)

    @classmethod
    def read(cls, path: str) -> "ScenarioFile":
        try:
            with open(path, "r", encoding="utf-8") as f:
                text = f.read()
        except OSError as exc:
            raise ConfigError(f"cannot read scenario file: {exc.strerror}", key=path)
        return cls.parse(text, path)

    def _line(self, key: str) -> Optional[int]:
        while key:
            if key in self.lines:
                return self.lines[key]
            key = key.rpartition(".")[0]
        return None

    def _section(self, name: str) -> Dict[str, Any]:
        value = self.data.get(name) or {}
        if not isinstance(value, dict):
            raise ConfigError("must be a mapping", key=name, line=self._line(name))
        return value

    def _check_keys(self, section: str, values: Dict[str, Any], allowed):
        for key in values:
            if key not in allowed:
                path = f"{section}.{key}" if section else str(key)
                raise ConfigError("unknown key", key=path, line=self._line(path))

    def _build(self, cls, section: str, values: Dict[str, Any]):
        try:
            return cls(**values)
        except ConfigError as exc:
            key = exc.key or section
            raise ConfigError(exc.detail, key=key, line=self._line(key)) from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid value ({exc})", key=section, line=self._line(section)) from None

    def to_scenario(self, name: Optional[str] = None) -> Scenario:
        """Bygg och validera ett Scenario från dokumentet"""
        self._check_keys("", self.data, SECTIONS)

        robot_values = self._section("robot")
        self._check_keys("robot", robot_values, _field_names(RobotModel))
        robot = self._build(RobotModel, "robot", robot_values)

        gait_values = self._section("gait")
        self._check_keys("gait", gait_values, _field_names(GaitSchedule))
        gait = self._build(GaitSchedule, "gait", gait_values)

        payload_values = dict(self._section("payload"))
        self._check_keys("payload", payload_values, _field_names(PayloadSpec) + list(PAYLOAD_ALIASES))
        if "mass" in payload_values:
            if "mass_breakpoints" in payload_values:
                raise ConfigError("give either mass or mass_breakpoints", key="payload.mass",
                                  line=self._line("payload.mass"))
            payload_values["mass_breakpoints"] = [[0.0, payload_values.pop("mass")]]
        payload = self._build(PayloadSpec, "payload", payload_values)

        terrain_values = dict(self._section("terrain"))
        self._check_keys("terrain", terrain_values, _field_names(Terrain) + list(TERRAIN_ALIASES))
        if "slope_deg" in terrain_values:
            terrain_values["slope"] = math.radians(terrain_values.pop("slope_deg"))
        terrain = self._build(Terrain, "terrain", terrain_values)

        mpc_values = self._section("mpc")
        self._check_keys("mpc", mpc_values, _field_names(MpcConfig))
        mpc = self._build(MpcConfig, "mpc", mpc_values)

        solver_values = self._section("solver")
        self._check_keys("solver", solver_values, _field_names(SolverSettings))
        solver = self._build(SolverSettings, "solver", solver_values)

        commands = []
        for index, entry in enumerate(self.data.get("commands") or [{"t": 0.0}]):
            path = f"commands[{index}]"
            if not isinstance(entry, dict):
                raise ConfigError("must be a mapping with t, vx, vy, yaw_rate", key=path, line=self._line(path))
            self._check_keys(path, entry, CommandPoint._fields)
            commands.append(self._build(CommandPoint, path, entry))

        entries = []
        for index, entry in enumerate(self.data.get("disturbances") or []):
            path = f"disturbances[{index}]"
            if not isinstance(entry, dict):
                raise ConfigError("must be a mapping", key=path, line=self._line(path))
            self._check_keys(path, entry, DisturbanceEntry._fields)
            entries.append(self._build(DisturbanceEntry, path, entry))
        disturbances = self._build(Disturbance, "disturbances", {"entries": tuple(entries)})

        sim_values = self._section("sim")
        self._check_keys("sim", sim_values, SIM_KEYS)

        if name is None:
            name = self.data.get("name")
        if name is None and self.path:
            name = os.path.splitext(os.path.basename(self.path))[0]
        return self._build(Scenario, "sim", dict(
            name=str(name or "scenario"), robot=robot, gait=gait, payload=payload, terrain=terrain,
            commands=tuple(commands), disturbances=disturbances, mpc=mpc, solver=solver, **sim_values))


def load_scenario(path: str) -> Scenario:
    """Läs och validera en scenariofil"""
    return ScenarioFile.read(path).to_scenario()


def parse_scenario(text: str, name: Optional[str] = None) -> Scenario:
    return ScenarioFile.parse(text).to_scenario(name)


def scenario_to_dict(scenario: Scenario) -> Dict[str, Any]:
    """Eko av en fullständig konfiguration som vanliga dict/list-värden"""

    def section(obj) -> Dict[str, Any]:
        return {name: _plain(getattr(obj, name)) for name in _field_names(type(obj))}

    return {
        "name": scenario.name,
        "robot": section(scenario.robot),
        "gait": section(scenario.gait),
        "payload": section(scenario.payload),
        "terrain": section(scenario.terrain),
        "mpc": section(scenario.mpc),
        "solver": section(scenario.solver),
        "commands": [command._asdict() for command in scenario.commands],
        "disturbances": [{k: _plain(v) for k, v in entry._asdict().items()}
                         for entry in scenario.disturbances.entries],
        "sim": {key: getattr(scenario, key) for key in SIM_KEYS},
    }


def scenario_from_dict(data: Dict[str, Any]) -> Scenario:
    return ScenarioFile(data).to_scenario()


def dump_scenario(scenario: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(scenario), sort_keys=False)
