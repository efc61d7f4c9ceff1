"""Hybrid drive/fly energy model and battery state-of-charge ledger."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

from .errors import BatteryExhaustedError, BatteryStateError, ConfigError

FLY = "fly"
DRIVE = "drive"
MODES = (FLY, DRIVE)


@dataclass(frozen=True)
class EnergyParams:
    """Physical constants of the robot.

    Defaults reproduce the published platform table; the two transform
    energies were never published and default to 500 J + 300 J.
    """

    rho: float = 1.2
    m: float = 39.5
    r: float = 0.4191
    x: int = 6
    g: float = 9.81
    eta: float = 0.58
    mu: float = 0.06
    c_d: float = 1.5
    v_fly: float = 2.0
    v_drive: float = 1.0
    a_fly: float = 0.6
    a_drive: float = 0.05
    standby_energy_per_segment: float = 100.0
    e_expand_fold: float = 500.0
    e_bodeneffekt: float = 300.0
    clamp_descent: bool = True

    def __post_init__(self):
        positive = ("rho", "m", "r", "x", "g", "eta", "mu", "c_d", "v_fly", "v_drive",
                    "a_fly", "a_drive", "standby_energy_per_segment")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"energy.{name} must be strictly positive")
        if self.eta > 1:
            raise ConfigError("energy.eta must be in (0, 1]")
        if self.e_expand_fold < 0 or self.e_bodeneffekt < 0:
            raise ConfigError("transform energies must be non-negative")

    @property
    def hover_power_fly(self) -> float:
        """Induced hover power in watts (hover energy per second aloft)."""
        return (math.sqrt(1.0 / (2.0 * math.pi * self.rho))
                * (self.m * self.g / self.x) ** 1.5 * (self.x / self.r) / self.eta)

    @property
    def fly_energy_per_meter(self) -> float:
        """Lower bound on fly-mode joules per metre (hover + drag, no climb)."""
        return (self.hover_power_fly / self.v_fly
                + self.rho * self.a_fly * self.c_d * self.v_fly ** 2 / 2.0)

    @property
    def drive_energy_per_meter(self) -> float:
        return (self.mu * self.m * self.g
                + self.rho * self.a_drive * self.c_d * self.v_drive ** 2 / 2.0)


class Segment(NamedTuple):
    delta_d: float
    delta_h: float
    mode: str


def _check_segment(seg: Segment):
    if seg.delta_d < 0:
        raise ValueError(f"segment length must be non-negative, got {seg.delta_d}")
    if seg.mode not in MODES:
        raise ValueError(f"unknown mode {seg.mode!r}")


def hover_energy(params: EnergyParams, seg: Segment) -> float:
    _check_segment(seg)
    if seg.mode == DRIVE:
        return params.standby_energy_per_segment
    return (math.sqrt(1.0 / (2.0 * math.pi * params.rho))
            * (params.m * params.g / params.x) ** 1.5
            * (params.x / params.r)
            * seg.delta_d / (params.eta * params.v_fly))


def move_energy(params: EnergyParams, seg: Segment) -> float:
    _check_segment(seg)
    if seg.mode == FLY:
        climb = params.m * params.g * seg.delta_h
        if params.clamp_descent:
            climb = max(0.0, climb)
        return climb + params.rho * params.a_fly * params.c_d * params.v_fly ** 2 * seg.delta_d / 2.0
    return (params.mu * params.m * params.g * seg.delta_d
            + params.rho * params.a_drive * params.c_d * params.v_drive ** 2 * seg.delta_d / 2.0)


def transform_energy(params: EnergyParams) -> float:
    return params.e_expand_fold + params.e_bodeneffekt


def segment_energy(params: EnergyParams, seg: Segment, switched: bool = False) -> float:
    """Energy of one segment; ``switched`` adds one transform charge."""
    e = hover_energy(params, seg) + move_energy(params, seg)
    if switched:
        e += transform_energy(params)
    return e


def segment_between(p, q, mode: str) -> Segment:
    """Segment joining two 3D points: 3D length and signed altitude change."""
    dx, dy, dz = q[0] - p[0], q[1] - p[1], q[2] - p[2]
    return Segment(math.sqrt(dx * dx + dy * dy + dz * dz), dz, mode)


@dataclass(frozen=True)
class BatteryState:
    """Immutable SOC ledger; every update returns a new state.

    ``soc`` is derived, so ``soc == (q_initial - consumed) / q_capacity``
    holds by construction.
    """

    q_capacity: float = 3.6e6
    q_initial: float = 3.6e6
    soc_ref: float = 0.15
    consumed: float = 0.0
    soc_at_last_switch: Optional[float] = None
    in_flight: bool = False

    def __post_init__(self):
        if not self.q_capacity > 0:
            raise ConfigError("battery.q_capacity must be positive")
        if not 0 <= self.q_initial <= self.q_capacity:
            raise ConfigError("battery.q_initial must lie in [0, q_capacity]")
        # soc_ref = 0 is accepted so the emergency-landing path can be exercised
        if not 0 <= self.soc_ref < 1:
            raise ConfigError("battery.soc_ref must lie in [0, 1)")

    @property
    def soc(self) -> float:
        return (self.q_initial - self.consumed) / self.q_capacity

    def debit(self, joules: float) -> "BatteryState":
        return debit(self, joules)

    def takeoff(self) -> "BatteryState":
        """Start a flight episode; the per-flight SOC record begins here."""
        return replace(self, in_flight=True, soc_at_last_switch=self.soc)

    def land(self) -> "BatteryState":
        return replace(self, in_flight=False)


def debit(battery: BatteryState, joules: float) -> BatteryState:
    if joules < 0:
        raise ValueError(f"cannot debit negative energy ({joules} J)")
    if joules == 0:
        return battery
    new = replace(battery, consumed=battery.consumed + joules)
    if new.soc < 0:
        raise BatteryExhaustedError(
            f"battery exhausted: soc would be {new.soc:.4f} after debiting {joules:.1f} J"
        )
    return new


def flight_soc_delta(battery: BatteryState) -> float:
    """SOC spent since the most recent takeoff."""
    if not battery.in_flight or battery.soc_at_last_switch is None:
        raise BatteryStateError("flight_soc_delta is only defined while flying")
    return battery.soc_at_last_switch - battery.soc
