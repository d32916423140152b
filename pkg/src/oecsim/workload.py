"""Tenant function profiles, profile estimation, and invocation replay."""

from __future__ import annotations

import configparser
import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

PROFILE_HEADER = ("name", "energy_j", "time_s", "compression_ratio", "package_bytes")
SAMPLE_HEADER = ("energy_j", "duration_s", "output_bytes", "input_bytes")


@dataclass(frozen=True)
class FunctionProfile:
    name: str
    energy_per_invocation: float  # J above base draw
    time_per_invocation: float  # s
    compression_ratio: float  # output bytes / input bytes
    package_size: int = 0  # bytes

    def __post_init__(self):
        for attr in ("energy_per_invocation", "time_per_invocation", "compression_ratio", "package_size"):
            if getattr(self, attr) < 0:
                raise ValueError(f"{self.name}: {attr} must be non-negative")
        if self.compression_ratio > 1:
            raise ValueError(f"{self.name}: compression_ratio must be <= 1")

    @property
    def power(self) -> float:
        """Mean power above base while the function runs."""
        if self.time_per_invocation == 0:
            return 0.0
        return self.energy_per_invocation / self.time_per_invocation


# Measured means from the second measurement repetition. Package sizes are
# only known for the moisture model; the others are left at zero.
MEASURED_PROFILES = {
    "methane": FunctionProfile("methane", 0.041, 0.018, 0.051),
    "moisture": FunctionProfile("moisture", 0.092, 0.050, 0.041, 2_770_000),
    "segment": FunctionProfile("segment", 0.755, 0.494, 0.047),
    "vessel": FunctionProfile("vessel", 1.053, 0.585, 0.026),
    "wildfire": FunctionProfile("wildfire", 0.667, 0.353, 0.026),
    "no-op": FunctionProfile("no-op", 0.007, 0.004, 0.000),
}

DEFAULT_SET = ("methane", "moisture", "vessel", "wildfire")
OVERLOAD_SET = DEFAULT_SET + ("segment",)


@dataclass(frozen=True)
class InvocationSample:
    energy: float
    duration: float
    output_bytes: float
    input_bytes: float

    def __post_init__(self):
        if min(self.energy, self.duration, self.output_bytes, self.input_bytes) < 0:
            raise ValueError("invocation sample fields must be non-negative")


@dataclass(frozen=True, slots=True)
class InvocationResult:
    function: str
    frame: int
    duration: float
    energy: float
    output_bytes: int


def estimate_profile(samples, name: str = "function", package_size: int = 0) -> FunctionProfile:
    """Mean energy and duration; compression as total output over total input."""
    samples = list(samples)
    if not samples:
        raise ValueError("cannot estimate a profile from zero samples")
    energy = float(np.mean([s.energy for s in samples]))
    duration = float(np.mean([s.duration for s in samples]))
    total_in = sum(s.input_bytes for s in samples)
    total_out = sum(s.output_bytes for s in samples)
    ratio = total_out / total_in if total_in > 0 else 0.0
    return FunctionProfile(name, energy, duration, ratio, package_size)


class InvocationModel:
    """Replays profile statistics in place of running real functions.

    In deterministic mode every invocation emits ``round(C * frame_size)``
    bytes. In stochastic mode an invocation emits ``kept_bytes`` with
    probability ``C * frame_size / kept_bytes`` and nothing otherwise, so the
    mean output is unchanged.
    """

    def __init__(self, stochastic: bool = False, kept_bytes: int | None = None, seed: int = 0):
        self.stochastic = stochastic
        self.kept_bytes = kept_bytes
        self.rng = np.random.default_rng(seed)

    def __call__(self, profile: FunctionProfile, frame) -> InvocationResult:
        return simulate_invocation(profile, frame, self)


_DETERMINISTIC = InvocationModel()


def simulate_invocation(profile: FunctionProfile, frame, model: InvocationModel | None = None) -> InvocationResult:
    model = model or _DETERMINISTIC
    mean_out = profile.compression_ratio * frame.size
    if not model.stochastic:
        out = int(round(mean_out))
    else:
        kept = model.kept_bytes or frame.size
        p = mean_out / kept
        if p > 1:
            raise ValueError("kept_bytes too small for the profile's mean output")
        out = kept if model.rng.random() < p else 0
    return InvocationResult(profile.name, frame.id, profile.time_per_invocation,
                            profile.energy_per_invocation, out)


def deployment_uplink_seconds(package_size: float, uplink_rate: float, overhead: float = 0.0) -> float:
    """Seconds of contact needed to uplink a package at ``uplink_rate`` bit/s."""
    if uplink_rate <= 0:
        raise ValueError("uplink rate must be positive")
    if not 0.0 <= overhead < 1.0:
        raise ValueError("overhead must be in [0, 1)")
    return package_size * 8.0 / (uplink_rate * (1.0 - overhead))


# --- files ------------------------------------------------------------------

def load_profiles(path) -> dict[str, FunctionProfile]:
    """Read profiles from CSV or from ``[name]`` key = value sections."""
    text = Path(path).read_text()
    return parse_profiles(text, source=str(path))


def parse_profiles(text: str, source: str = "<profiles>") -> dict[str, FunctionProfile]:
    stripped = text.lstrip()
    if stripped.startswith("["):
        parser = configparser.ConfigParser()
        parser.read_string(text, source=source)
        rows = [{"name": sec, **parser[sec]} for sec in parser.sections()]
    else:
        rows = list(csv.DictReader(io.StringIO(text)))
        if rows and tuple(rows[0].keys()) != PROFILE_HEADER:
            raise ValueError(f"{source}: expected header {','.join(PROFILE_HEADER)}")
    profiles = {}
    for row in rows:
        try:
            prof = FunctionProfile(
                row["name"].strip(),
                float(row["energy_j"]),
                float(row["time_s"]),
                float(row["compression_ratio"]),
                int(float(row.get("package_bytes") or 0)),
            )
        except (KeyError, ValueError) as exc:
            raise ValueError(f"{source}: bad profile record {row!r}: {exc}") from None
        if prof.name in profiles:
            raise ValueError(f"{source}: duplicate profile {prof.name}")
        profiles[prof.name] = prof
    if not profiles:
        raise ValueError(f"{source}: no profiles")
    return profiles


def format_profiles(profiles) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PROFILE_HEADER)
    for p in profiles:
        w.writerow([p.name, f"{p.energy_per_invocation:.6g}", f"{p.time_per_invocation:.6g}",
                    f"{p.compression_ratio:.6g}", p.package_size])
    return buf.getvalue()


def load_samples(path) -> list[InvocationSample]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(SAMPLE_HEADER) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        samples = [
            InvocationSample(float(r["energy_j"]), float(r["duration_s"]),
                             float(r["output_bytes"]), float(r["input_bytes"]))
            for r in reader
        ]
    if not samples:
        raise ValueError(f"{path}: no samples")
    return samples
