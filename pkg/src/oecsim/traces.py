"""Satellite telemetry: power traces, trajectories, and ground-station contacts.

All file timestamps are seconds relative to the start of the trace. Solar
geometry needs an absolute time, so callers pass ``epoch_utc`` (a POSIX
timestamp for ``t = 0``) where it matters.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

EARTH_RADIUS_KM = 6371.0

POWER_HEADER = ("t_s", "p_generated_w", "p_platform_w")
TRAJECTORY_HEADER = ("t_s", "lat_deg", "lon_deg", "alt_km")
CONTACT_HEADER = ("start_s", "end_s")


class TraceError(ValueError):
    """Raised for malformed or inconsistent telemetry files."""


@dataclass(frozen=True)
class PowerTrace:
    t: np.ndarray
    p_generated: np.ndarray
    p_platform: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        gen = np.asarray(self.p_generated, dtype=float)
        plat = np.asarray(self.p_platform, dtype=float)
        if t.size == 0:
            raise TraceError("empty trace")
        if not (t.shape == gen.shape == plat.shape):
            raise TraceError("power trace columns differ in length")
        if np.any(np.diff(t) <= 0):
            raise TraceError("power trace timestamps must be strictly increasing")
        if np.any(gen < 0) or np.any(plat < 0):
            raise TraceError("power values must be non-negative")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "p_generated", gen)
        object.__setattr__(self, "p_platform", plat)

    def __len__(self) -> int:
        return self.t.size

    @property
    def start(self) -> float:
        return float(self.t[0])

    @property
    def end(self) -> float:
        return float(self.t[-1])

    def window(self, start: float, end: float) -> "PowerTrace":
        """Sub-trace covering [start, end], re-based so it begins at t = 0."""
        i0 = max(int(np.searchsorted(self.t, start, side="right")) - 1, 0)
        i1 = int(np.searchsorted(self.t, end, side="right"))
        t = self.t[i0:i1] - start
        t[0] = max(t[0], 0.0)
        return PowerTrace(t, self.p_generated[i0:i1], self.p_platform[i0:i1])


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    alt: np.ndarray
    # optional per-sample illumination flag supplied by the trace itself
    sunlit: np.ndarray | None = None

    def __post_init__(self):
        cols = [np.asarray(c, dtype=float) for c in (self.t, self.lat, self.lon, self.alt)]
        t, lat, lon, alt = cols
        if t.size == 0:
            raise TraceError("empty trajectory")
        if not all(c.shape == t.shape for c in cols):
            raise TraceError("trajectory columns differ in length")
        if np.any(np.diff(t) <= 0):
            raise TraceError("trajectory timestamps must be strictly increasing")
        if np.any(np.abs(lat) > 90) or np.any(np.abs(lon) > 180) or np.any(alt <= 0):
            raise TraceError("trajectory point out of range")
        for name, col in zip(("t", "lat", "lon", "alt"), cols):
            object.__setattr__(self, name, col)
        if self.sunlit is not None:
            flags = np.asarray(self.sunlit, dtype=bool)
            if flags.shape != t.shape:
                raise TraceError("sunlit column length mismatch")
            object.__setattr__(self, "sunlit", flags)
        object.__setattr__(self, "_lon_unwrapped", np.rad2deg(np.unwrap(np.deg2rad(lon))))

    @property
    def start(self) -> float:
        return float(self.t[0])

    @property
    def end(self) -> float:
        return float(self.t[-1])

    def position(self, t):
        """Linearly interpolated (lat, lon, alt) at time(s) ``t``.

        Longitude is unwrapped before interpolation so that crossing the
        antimeridian does not sweep through zero.
        """
        t = np.asarray(t, dtype=float)
        if np.any(t < self.t[0]) or np.any(t > self.t[-1]):
            raise TraceError("time outside trajectory span")
        lat = np.interp(t, self.t, self.lat)
        lon = np.interp(t, self.t, self._lon_unwrapped)
        lon = (lon + 180.0) % 360.0 - 180.0
        alt = np.interp(t, self.t, self.alt)
        return lat, lon, alt

    def sunlit_at(self, t):
        """Zero-order hold over the trace-provided sunlit flag."""
        if self.sunlit is None:
            raise TraceError("trajectory carries no sunlit column")
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(self.t, t, side="right") - 1, 0, self.t.size - 1)
        return self.sunlit[idx]

    def window(self, start: float, end: float) -> "Trajectory":
        mask = (self.t >= start) & (self.t <= end)
        flags = None if self.sunlit is None else self.sunlit[mask]
        return Trajectory(self.t[mask] - start, self.lat[mask], self.lon[mask],
                          self.alt[mask], flags)


@dataclass(frozen=True)
class GroundStation:
    name: str
    lat: float
    lon: float
    min_elevation: float = 10.0

    def __post_init__(self):
        if not 0.0 <= self.min_elevation < 90.0:
            raise ValueError("min_elevation must be in [0, 90)")


# 15 deg mask: with 10 deg a 270 s pass implies the neighbouring orbit's
# pass is visible too, and the excerpt has a single contact
TONGCHUAN = GroundStation("Tongchuan", 35.08, 109.07, min_elevation=15.0)


@dataclass(frozen=True)
class ContactSchedule:
    windows: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        windows = tuple((float(a), float(b)) for a, b in self.windows)
        for a, b in windows:
            if not a < b:
                raise TraceError(f"contact window ({a}, {b}) has start >= end")
        for (_, b0), (a1, _) in zip(windows, windows[1:]):
            if a1 < b0:
                raise TraceError("contact windows overlap or are unordered")
        object.__setattr__(self, "windows", windows)

    def __len__(self) -> int:
        return len(self.windows)

    def contains(self, t: float) -> bool:
        return any(a <= t < b for a, b in self.windows)

    def overlap(self, t0: float, t1: float) -> float:
        """Seconds of (t0, t1] spent inside any window."""
        return sum(max(0.0, min(b, t1) - max(a, t0)) for a, b in self.windows)

    def total_duration(self) -> float:
        return sum(b - a for a, b in self.windows)

    def window(self, start: float, end: float) -> "ContactSchedule":
        out = []
        for a, b in self.windows:
            a, b = max(a, start), min(b, end)
            if a < b:
                out.append((a - start, b - start))
        return ContactSchedule(tuple(out))


# --- file loading -----------------------------------------------------------

def _read_rows(path, header):
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise TraceError(f"{path}: empty trace") from None
        names = [c.strip() for c in first]
        if names[: len(header)] != list(header):
            raise TraceError(f"{path}: expected header {','.join(header)}, got {','.join(names)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(names):
                raise TraceError(f"{path}:{lineno}: expected {len(names)} fields, got {len(row)}")
            rows.append(row)
    if not rows:
        raise TraceError(f"{path}: empty trace")
    return names, rows


def _floats(rows, path, ncols):
    try:
        return np.array([[float(c) for c in row[:ncols]] for row in rows], dtype=float)
    except ValueError as exc:
        raise TraceError(f"{path}: parse error: {exc}") from None


def load_power_trace(path) -> PowerTrace:
    _, rows = _read_rows(path, POWER_HEADER)
    data = _floats(rows, path, 3)
    return PowerTrace(data[:, 0], data[:, 1], data[:, 2])


def load_trajectory(path) -> Trajectory:
    """Load a trajectory CSV; an extra trailing ``sunlit`` column is honored."""
    names, rows = _read_rows(path, TRAJECTORY_HEADER)
    data = _floats(rows, path, 4)
    sunlit = None
    if "sunlit" in names:
        col = names.index("sunlit")
        sunlit = np.array([_parse_bool(r[col]) for r in rows], dtype=bool)
    return Trajectory(data[:, 0], data[:, 1], data[:, 2], data[:, 3], sunlit)


def load_contacts(path) -> ContactSchedule:
    _, rows = _read_rows(path, CONTACT_HEADER)
    data = _floats(rows, path, 2)
    return ContactSchedule(tuple(map(tuple, data)))


def _parse_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes"):
        return True
    if value in ("0", "false", "no"):
        return False
    raise TraceError(f"not a boolean: {text!r}")


def write_power_trace(path, trace: PowerTrace) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(POWER_HEADER)
        for row in zip(trace.t, trace.p_generated, trace.p_platform):
            w.writerow([f"{row[0]:g}", f"{row[1]:.2f}", f"{row[2]:.2f}"])


def write_trajectory(path, traj: Trajectory) -> None:
    header = TRAJECTORY_HEADER + (("sunlit",) if traj.sunlit is not None else ())
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(traj.t.size):
            row = [f"{traj.t[i]:g}", f"{traj.lat[i]:.4f}", f"{traj.lon[i]:.4f}", f"{traj.alt[i]:.3f}"]
            if traj.sunlit is not None:
                row.append(int(traj.sunlit[i]))
            w.writerow(row)


def write_contacts(path, schedule: ContactSchedule) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CONTACT_HEADER)
        for a, b in schedule.windows:
            w.writerow([f"{a:g}", f"{b:g}"])


# --- queries ----------------------------------------------------------------

def sample_power(trace: PowerTrace, t):
    """Zero-order hold: values of the latest sample with timestamp <= t."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < trace.t[0]):
        raise TraceError(f"t={t} precedes trace start {trace.t[0]}")
    idx = np.searchsorted(trace.t, t_arr, side="right") - 1
    if t_arr.ndim == 0:
        i = int(idx)
        return float(trace.p_generated[i]), float(trace.p_platform[i])
    return trace.p_generated[idx], trace.p_platform[idx]


def utc_timestamp(text: str) -> float:
    """Parse an ISO-8601 UTC time (``2023-05-01T00:00:00Z``) into POSIX seconds."""
    dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


_J2000_POSIX = 946728000.0  # 2000-01-01T12:00:00Z


def sun_equatorial(t_utc):
    """Low-precision solar right ascension and declination (degrees).

    Mean-anomaly / ecliptic-longitude approximation good to about 0.01 deg
    over several decades around J2000.
    """
    n = (np.asarray(t_utc, dtype=float) - _J2000_POSIX) / 86400.0
    mean_lon = np.deg2rad((280.460 + 0.9856474 * n) % 360.0)
    g = np.deg2rad((357.528 + 0.9856003 * n) % 360.0)
    ecl_lon = mean_lon + np.deg2rad(1.915) * np.sin(g) + np.deg2rad(0.020) * np.sin(2 * g)
    obliquity = np.deg2rad(23.439 - 4.0e-7 * n)
    ra = np.arctan2(np.cos(obliquity) * np.sin(ecl_lon), np.cos(ecl_lon))
    dec = np.arcsin(np.sin(obliquity) * np.sin(ecl_lon))
    return np.rad2deg(ra), np.rad2deg(dec)


def gmst_deg(t_utc):
    n = (np.asarray(t_utc, dtype=float) - _J2000_POSIX) / 86400.0
    return (280.46061837 + 360.98564736629 * n) % 360.0


def sun_unit_vector_ecef(t_utc):
    """Unit vector towards the sun in Earth-fixed coordinates, shape (..., 3)."""
    ra, dec = sun_equatorial(t_utc)
    ha = np.deg2rad(ra - gmst_deg(t_utc))
    dec = np.deg2rad(dec)
    return np.stack([np.cos(dec) * np.cos(ha), np.cos(dec) * np.sin(ha), np.sin(dec)], axis=-1)


def solar_elevation(lat, lon, t_utc):
    """Solar elevation angle in degrees for an observer on the ground.

    ``t_utc`` is absolute POSIX time. Accepts scalars or broadcastable arrays.
    """
    ra, dec = sun_equatorial(t_utc)
    hour_angle = np.deg2rad(gmst_deg(t_utc) + np.asarray(lon, dtype=float) - ra)
    lat_r = np.deg2rad(np.asarray(lat, dtype=float))
    dec_r = np.deg2rad(dec)
    s = np.sin(lat_r) * np.sin(dec_r) + np.cos(lat_r) * np.cos(dec_r) * np.cos(hour_angle)
    elev = np.rad2deg(np.arcsin(np.clip(s, -1.0, 1.0)))
    return float(elev) if np.ndim(elev) == 0 else elev


def geodetic_to_ecef(lat, lon, alt_km=0.0):
    """Spherical-Earth Cartesian coordinates in kilometres."""
    lat_r = np.deg2rad(np.asarray(lat, dtype=float))
    lon_r = np.deg2rad(np.asarray(lon, dtype=float))
    r = EARTH_RADIUS_KM + np.asarray(alt_km, dtype=float)
    return np.stack([r * np.cos(lat_r) * np.cos(lon_r),
                     r * np.cos(lat_r) * np.sin(lon_r),
                     r * np.sin(lat_r)], axis=-1)


def look_elevation(station: GroundStation, lat, lon, alt_km):
    """Elevation (degrees) of a satellite above the station's local horizon."""
    g = geodetic_to_ecef(station.lat, station.lon, 0.0)
    s = geodetic_to_ecef(lat, lon, alt_km)
    d = s - g
    up = g / np.linalg.norm(g)
    sin_el = (d @ up) / np.linalg.norm(d, axis=-1)
    return np.rad2deg(np.arcsin(np.clip(sin_el, -1.0, 1.0)))


def derive_contacts(traj: Trajectory, station: GroundStation) -> ContactSchedule:
    """Maximal intervals where the satellite is above the station's mask.

    Window edges are refined by linear interpolation of the elevation between
    neighbouring trajectory samples.
    """
    elev = look_elevation(station, traj.lat, traj.lon, traj.alt) - station.min_elevation
    above = elev >= 0
    if not above.any():
        return ContactSchedule()
    windows = []
    t = traj.t
    n = t.size
    i = 0
    while i < n:
        if not above[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and above[j + 1]:
            j += 1
        start = t[i] if i == 0 else _crossing(t[i - 1], t[i], elev[i - 1], elev[i])
        end = t[j] if j == n - 1 else _crossing(t[j], t[j + 1], elev[j], elev[j + 1])
        if end <= start:
            # single-sample touch of the mask; keep a degenerate-free window
            end = np.nextafter(start, math.inf)
        windows.append((float(start), float(end)))
        i = j + 1
    return ContactSchedule(tuple(windows))


def _crossing(t0, t1, e0, e1):
    if e1 == e0:
        return t1
    return t0 + (t1 - t0) * (0.0 - e0) / (e1 - e0)


def contact_fraction(schedule: ContactSchedule, span: float) -> float:
    if span <= 0:
        raise ValueError("span must be positive")
    return schedule.total_duration() / span
