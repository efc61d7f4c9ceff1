"""Run configuration: flat ``section.key = value`` files with layered overrides.

Precedence, lowest first: built-in defaults, config file, environment
variables ``AGPLAN_<SECTION>__<KEY>``, then explicit overrides (CLI flags).
Unknown keys are rejected.
"""
from __future__ import annotations

import os
import typing
from dataclasses import dataclass, field, fields, replace
from typing import Mapping, Optional

from .energy import BatteryState, EnergyParams
from .errors import ConfigError
from .flight import FlightParams
from .ground import MobilityLimits
from .switch_opt import BasParams

ENV_PREFIX = "AGPLAN_"


@dataclass(frozen=True)
class BatterySettings:
    q_capacity: float = 3.6e6
    q_initial: float = 3.6e6
    soc_ref: float = 0.15

    def initial_state(self) -> BatteryState:
        return BatteryState(q_capacity=self.q_capacity, q_initial=self.q_initial, soc_ref=self.soc_ref)


@dataclass(frozen=True)
class PlannerSettings:
    max_switches: int = 20
    optimize: bool = True
    samples_per_leg: int = 50
    takeoff_on_exhausted: bool = False

    def __post_init__(self):
        if self.max_switches < 0 or self.samples_per_leg < 2:
            raise ConfigError("planner.max_switches must be >= 0 and planner.samples_per_leg >= 2")


SECTIONS = {
    "energy": EnergyParams,
    "limits": MobilityLimits,
    "flight": FlightParams,
    "bas": BasParams,
    "battery": BatterySettings,
    "planner": PlannerSettings,
}


@dataclass(frozen=True)
class RunConfig:
    energy: EnergyParams = field(default_factory=EnergyParams)
    limits: MobilityLimits = field(default_factory=MobilityLimits)
    flight: FlightParams = field(default_factory=FlightParams)
    bas: BasParams = field(default_factory=BasParams)
    battery: BatterySettings = field(default_factory=BatterySettings)
    planner: PlannerSettings = field(default_factory=PlannerSettings)

    def __post_init__(self):
        BatteryState(self.battery.q_capacity, self.battery.q_initial, self.battery.soc_ref)
        f = self.flight
        if f.c_escape is not None and f.c_landing is not None and not f.c_escape < f.c_landing:
            raise ConfigError("flight.c_escape must be below flight.c_landing")

    def resolve(self, grid) -> "RunConfig":
        """Fill grid-relative defaults; the result is ready for planning."""
        return replace(self, flight=self.flight.resolve(grid), bas=self.bas.resolve(grid))

    def with_overrides(self, overrides: Mapping[str, object]) -> "RunConfig":
        grouped = {}
        for dotted, raw in overrides.items():
            section, key = _split_key(dotted)
            grouped.setdefault(section, {})[key] = _coerce(section, key, raw)
        kwargs = {}
        for section, values in grouped.items():
            try:
                kwargs[section] = replace(getattr(self, section), **values)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid value in section '{section}': {exc}") from exc
        return replace(self, **kwargs)

    def to_text(self) -> str:
        lines = []
        for section in SECTIONS:
            obj = getattr(self, section)
            for f in fields(obj):
                lines.append(f"{section}.{f.name} = {_format(getattr(obj, f.name))}")
        return "\n".join(lines) + "\n"

    def as_dict(self) -> dict:
        return {f"{s}.{f.name}": getattr(getattr(self, s), f.name)
                for s in SECTIONS for f in fields(getattr(self, s))}


def _split_key(dotted: str):
    if "." not in dotted:
        raise ConfigError(f"config key {dotted!r} needs a section prefix (e.g. bas.alpha)")
    section, key = dotted.split(".", 1)
    section, key = section.strip().lower(), key.strip()
    if section not in SECTIONS:
        raise ConfigError(f"unknown config section {section!r}")
    if key not in {f.name for f in fields(SECTIONS[section])}:
        raise ConfigError(f"unknown config key '{section}.{key}'")
    return section, key


def _coerce(section: str, key: str, raw):
    if not isinstance(raw, str):
        return raw
    hint = typing.get_type_hints(SECTIONS[section])[key]
    text = raw.strip()
    optional = type(None) in typing.get_args(hint)
    if optional:
        if text.lower() in ("none", ""):
            return None
        hint = next(a for a in typing.get_args(hint) if a is not type(None))
    try:
        if hint is bool:
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if hint is int:
            return int(text)
        if hint is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"cannot parse {section}.{key} = {raw!r}") from None


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value', got {line!r}")
        key, value = line.split("=", 1)
        _split_key(key.strip())
        values[key.strip()] = value.strip()
    return values


def env_overrides(environ: Optional[Mapping[str, str]] = None) -> dict:
    environ = os.environ if environ is None else environ
    out = {}
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX) or "__" not in name:
            continue
        section, key = name[len(ENV_PREFIX):].split("__", 1)
        out[f"{section.lower()}.{key.lower()}"] = value
    return out


def load_config(path: Optional[str] = None, overrides: Optional[Mapping[str, object]] = None,
                environ: Optional[Mapping[str, str]] = None) -> RunConfig:
    cfg = RunConfig()
    if path:
        with open(path) as fh:
            cfg = cfg.with_overrides(parse_config_text(fh.read()))
    env = env_overrides(environ)
    if env:
        cfg = cfg.with_overrides(env)
    if overrides:
        cfg = cfg.with_overrides(overrides)
    return cfg
