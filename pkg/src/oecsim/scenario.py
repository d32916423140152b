"""Synthetic stand-in for the BUPT-1 six-hour telemetry excerpt.

The real traces are not redistributable, so the bundled fixture is generated
from a circular sun-synchronous orbit and a simple solar-array model. The
orbit's phase and epoch are chosen so that the Tongchuan pass happens late in
the third orbit; the array output is shaped per sunlit arc (strong early in
the run, weak in the last arc) and scaled to the long-run means of the real
trace. ``build_fixture`` is deterministic for a given seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .traces import (
    EARTH_RADIUS_KM,
    TONGCHUAN,
    ContactSchedule,
    PowerTrace,
    Trajectory,
    derive_contacts,
    gmst_deg,
    load_contacts,
    load_power_trace,
    load_trajectory,
    solar_elevation,
    sun_unit_vector_ecef,
    utc_timestamp,
    write_contacts,
    write_power_trace,
    write_trajectory,
)

MU_EARTH = 398600.4418  # km^3/s^2
SIDEREAL_RATE = 360.98564736629 / 86400.0  # deg/s
SSO_PRECESSION = 360.0 / 365.2422 / 86400.0  # deg/s


@dataclass(frozen=True)
class OrbitSpec:
    epoch_utc: str = "2023-05-01T00:00:00Z"
    altitude_km: float = 490.5
    altitude_swing_km: float = 3.5
    inclination_deg: float = 97.3
    raan_deg: float = 0.0  # at epoch, inertial
    arg_lat_deg: float = 0.0  # argument of latitude at epoch

    @property
    def epoch(self) -> float:
        return utc_timestamp(self.epoch_utc)

    @property
    def mean_motion(self) -> float:
        a = EARTH_RADIUS_KM + self.altitude_km
        return math.degrees(math.sqrt(MU_EARTH / a**3))  # deg/s

    @property
    def period(self) -> float:
        return 360.0 / self.mean_motion


def propagate(orbit: OrbitSpec, t: np.ndarray):
    """Earth-fixed position of a circular orbit; returns (lat, lon, alt, ecef_km)."""
    t = np.asarray(t, dtype=float)
    u = np.deg2rad(orbit.arg_lat_deg + orbit.mean_motion * t)
    raan = np.deg2rad(orbit.raan_deg + SSO_PRECESSION * t)
    inc = math.radians(orbit.inclination_deg)
    alt = orbit.altitude_km + orbit.altitude_swing_km * np.sin(u)
    r = EARTH_RADIUS_KM + alt
    x = r * (np.cos(raan) * np.cos(u) - np.sin(raan) * np.sin(u) * math.cos(inc))
    y = r * (np.sin(raan) * np.cos(u) + np.cos(raan) * np.sin(u) * math.cos(inc))
    z = r * np.sin(u) * math.sin(inc)
    theta = np.deg2rad(gmst_deg(orbit.epoch + t))
    xe = np.cos(theta) * x + np.sin(theta) * y
    ye = -np.sin(theta) * x + np.cos(theta) * y
    lat = np.rad2deg(np.arcsin(z / r))
    lon = np.rad2deg(np.arctan2(ye, xe))
    return lat, lon, alt, np.stack([xe, ye, z], axis=-1)


def in_sunlight(ecef: np.ndarray, t_utc: np.ndarray) -> np.ndarray:
    """Cylindrical-shadow test for the spacecraft."""
    s = sun_unit_vector_ecef(t_utc)
    along = np.sum(ecef * s, axis=-1)
    perp = np.linalg.norm(ecef - along[:, None] * s, axis=-1)
    return (along > 0) | (perp > EARTH_RADIUS_KM)


def sunlit_arcs(lit: np.ndarray) -> list[tuple[int, int]]:
    """Index ranges [i, j) of consecutive True samples."""
    edges = np.diff(np.concatenate([[0], lit.astype(np.int8), [0]]))
    starts = np.nonzero(edges == 1)[0]
    ends = np.nonzero(edges == -1)[0]
    return list(zip(starts.tolist(), ends.tolist()))


@dataclass(frozen=True)
class PowerSpec:
    mean_generated_w: float = 15.59
    mean_platform_w: float = 12.64
    peak_w: float = 48.59
    # relative strength of each sunlit arc, in order
    arc_weights: tuple[float, ...] = (1.0, 1.0, 0.85, 0.75, 0.3)
    # output decays over an arc: more at the beginning than at the end
    arc_decay: float = 0.45
    noise_w: float = 0.8
    platform_swing_w: float = 1.2


def shape_power(lit: np.ndarray, spec: PowerSpec, rng: np.random.Generator):
    n = lit.size
    gen = np.zeros(n)
    for k, (i, j) in enumerate(sunlit_arcs(lit)):
        w = spec.arc_weights[min(k, len(spec.arc_weights) - 1)]
        x = np.linspace(0.0, 1.0, j - i)
        # ramp-in over the first few percent (array attitude), then decay
        ramp = np.clip(x / 0.04, 0.0, 1.0)
        gen[i:j] = w * ramp * (1.0 - spec.arc_decay * x)
    gen = gen + (gen > 0) * rng.normal(0.0, spec.noise_w / 30.0, n)
    gen = np.clip(gen, 0.0, None)
    gen *= spec.mean_generated_w / gen.mean()
    gen = np.minimum(gen, spec.peak_w)
    # re-scale after clipping so the mean stays exact
    gen *= spec.mean_generated_w / gen.mean()
    plat = spec.mean_platform_w + spec.platform_swing_w * (lit - lit.mean()) \
        + rng.normal(0.0, 0.15, n)
    plat += spec.mean_platform_w - plat.mean()
    return np.round(gen, 2), np.round(np.clip(plat, 0.0, None), 2)


# Descending node near 11:00 local time; epoch and phase put a 270 s Tongchuan
# pass at t = 15189 s, just after the third sunset.
DEFAULT_ORBIT = OrbitSpec(epoch_utc="2023-05-01T11:10:18Z", raan_deg=23.414, arg_lat_deg=250.4896)
# frames count as sunlit for imaging above this solar elevation; with the
# orbit above this yields 40.8 % sunlit frames
IMAGING_MIN_SUN_ELEVATION_DEG = 19.0
DURATION_S = 21600


@dataclass
class Fixture:
    power: PowerTrace
    trajectory: Trajectory
    contacts: ContactSchedule
    epoch_utc: float


def build_fixture(orbit: OrbitSpec = DEFAULT_ORBIT, power: PowerSpec = PowerSpec(),
                  duration: int = DURATION_S, seed: int = 20230501,
                  imaging_min_sun_elevation: float = IMAGING_MIN_SUN_ELEVATION_DEG) -> Fixture:
    rng = np.random.default_rng(seed)
    t = np.arange(duration + 1, dtype=float)
    lat, lon, alt, ecef = propagate(orbit, t)
    lit = in_sunlight(ecef, orbit.epoch + t)
    gen, plat = shape_power(lit[:-1], power, rng)
    ground_sunlit = solar_elevation(lat, lon, orbit.epoch + t) > imaging_min_sun_elevation
    traj = Trajectory(t, np.round(lat, 4), np.round(lon, 4), np.round(alt, 3), ground_sunlit)
    contacts = derive_contacts(traj, TONGCHUAN)
    return Fixture(PowerTrace(t[:-1], gen, plat), traj, contacts, orbit.epoch)


def write_fixture(fixture: Fixture, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_power_trace(d / "power.csv", fixture.power)
    write_trajectory(d / "trajectory.csv", fixture.trajectory)
    write_contacts(d / "contacts.csv", fixture.contacts)


def data_path(name: str) -> Path:
    return Path(resources.files("oecsim") / "data" / name)


def load_fixture() -> Fixture:
    """The bundled six-hour fixture."""
    return Fixture(load_power_trace(data_path("power.csv")),
                   load_trajectory(data_path("trajectory.csv")),
                   load_contacts(data_path("contacts.csv")),
                   DEFAULT_ORBIT.epoch)
