"""Battery state-of-charge and compute-board temperature models."""

from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class BatteryState:
    capacity: float  # Wh
    charge: float  # Wh

    def __post_init__(self):
        if self.capacity <= 0:
            raise ValueError("battery capacity must be positive")
        if not 0.0 <= self.charge <= self.capacity:
            raise ValueError(f"charge {self.charge} outside [0, {self.capacity}]")

    @classmethod
    def at_soc(cls, capacity: float, soc_fraction: float) -> "BatteryState":
        return cls(capacity, capacity * soc_fraction)


@dataclass(frozen=True)
class PowerLedger:
    """Instantaneous power flows (W) for one simulation step."""

    p_generated: float = 0.0
    p_platform: float = 0.0
    p_compute: float = 0.0
    p_comm: float = 0.0

    def __post_init__(self):
        for name in ("p_generated", "p_platform", "p_compute", "p_comm"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def net(self) -> float:
        return self.p_generated - self.p_platform - self.p_compute - self.p_comm


def battery_step(state: BatteryState, ledger: PowerLedger, dt: float) -> BatteryState:
    """Integrate net power over ``dt`` seconds, saturating at empty and full."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    charge = state.charge + ledger.net * dt / 3600.0
    return replace(state, charge=min(max(charge, 0.0), state.capacity))


def soc(state: BatteryState) -> float:
    return state.charge / state.capacity


@dataclass(frozen=True)
class ThermalState:
    temp: float  # degC
    ambient: float = 45.0  # degC, idle equilibrium
    heat_coeff: float = 0.0348  # degC per joule dissipated
    cool_coeff: float = 0.01  # 1/s

    def __post_init__(self):
        if self.cool_coeff <= 0:
            raise ValueError("cool_coeff must be positive")
        if self.heat_coeff < 0:
            raise ValueError("heat_coeff must be non-negative")

    def equilibrium(self, p_dissipated: float) -> float:
        return self.ambient + self.heat_coeff * p_dissipated / self.cool_coeff


def thermal_step(state: ThermalState, p_dissipated: float, dt: float) -> ThermalState:
    """Forward-Euler step of linear heating plus Newton cooling.

    ``p_dissipated`` is compute power above the board's base draw.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    dtemp = dt * (state.heat_coeff * p_dissipated - state.cool_coeff * (state.temp - state.ambient))
    return replace(state, temp=state.temp + dtemp)


def calibrate_thermal(ambient: float, loaded_power: float, loaded_equilibrium: float,
                      time_constant: float = 100.0) -> tuple[float, float]:
    """Return ``(heat_coeff, cool_coeff)`` so that sustained ``loaded_power``
    settles at ``loaded_equilibrium`` with the given cooling time constant."""
    if time_constant <= 0 or loaded_power <= 0:
        raise ValueError("time_constant and loaded_power must be positive")
    cool = 1.0 / time_constant
    heat = (loaded_equilibrium - ambient) * cool / loaded_power
    return heat, cool
