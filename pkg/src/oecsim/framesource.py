"""Captured-frame stream and the platform prefilter.

Frames are metadata only: position, illumination and an estimated cloud
fraction. Cloud fractions come from a two-component mixture (a near-clear
point mass plus a broad Beta component) whose broad shape is solved so that
the probability of exceeding the prefilter threshold hits a target value.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize, stats

from .traces import TraceError, Trajectory, solar_elevation

FRAME_WIDTH = 256
FRAME_HEIGHT = 256
FRAME_BANDS = 13
FRAME_PERIOD_S = 0.4
FRAME_META_HEADER = ("id", "t_s", "lat_deg", "lon_deg", "sunlit", "cloud_fraction")


def frame_size(width=FRAME_WIDTH, height=FRAME_HEIGHT, bands=FRAME_BANDS) -> int:
    return int(width) * int(height) * int(bands)


@dataclass(frozen=True, slots=True)
class FrameMeta:
    id: int
    t: float
    lat: float
    lon: float
    sunlit: bool
    cloud_fraction: float
    size: int = frame_size()

    def __post_init__(self):
        if not 0.0 <= self.cloud_fraction <= 1.0:
            raise ValueError(f"cloud_fraction {self.cloud_fraction} outside [0, 1]")


@dataclass(frozen=True)
class CloudModel:
    p_exceed_threshold: float = 0.444
    threshold: float = 0.30
    clear_weight: float = 0.40
    clear_max: float = 0.02
    broad_a: float = 1.0
    broad_b: float = field(init=False)

    def __post_init__(self):
        if not 0 < self.p_exceed_threshold < 1 - self.clear_weight:
            raise ValueError("p_exceed_threshold must lie in (0, 1 - clear_weight)")
        if not self.clear_max <= self.threshold:
            raise ValueError("clear component must sit below the threshold")
        target = self.p_exceed_threshold / (1.0 - self.clear_weight)
        b = optimize.brentq(lambda b: stats.beta.sf(self.threshold, self.broad_a, b) - target,
                            1e-3, 1e3, xtol=1e-12)
        object.__setattr__(self, "broad_b", b)

    def exceed_probability(self) -> float:
        """Closed-form P(cloud > threshold) of the mixture."""
        return (1.0 - self.clear_weight) * stats.beta.sf(self.threshold, self.broad_a, self.broad_b)

    def from_uniforms(self, u_component, u_value):
        """Map uniform draws to cloud fractions by inverse transform."""
        u_component = np.asarray(u_component, dtype=float)
        u_value = np.asarray(u_value, dtype=float)
        clear = u_component < self.clear_weight
        broad = stats.beta.ppf(u_value, self.broad_a, self.broad_b)
        out = np.where(clear, u_value * self.clear_max, broad)
        return np.clip(out, 0.0, 1.0)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        u = rng.random((n, 2))
        return self.from_uniforms(u[:, 0], u[:, 1])


class FrameGenerator:
    """Emits one frame per ``period`` seconds, at ``start + k * period``, k >= 1.

    Illumination comes from (in order of precedence) a fixed Bernoulli
    ``sunlit_probability``, the trajectory's own ``sunlit`` column, or the
    solar elevation at the sub-satellite point (needs ``epoch_utc``).

    Every frame consumes exactly three uniforms from the generator's RNG, so
    incremental and batched generation produce identical streams.
    """

    CHUNK = 512

    def __init__(self, trajectory: Trajectory | None = None, *, period: float = FRAME_PERIOD_S,
                 size: int = frame_size(), cloud: CloudModel | None = None, seed: int = 0,
                 epoch_utc: float | None = None, sunlit_probability: float | None = None,
                 start: float | None = None):
        if period <= 0:
            raise ValueError("frame period must be positive")
        if trajectory is None and sunlit_probability is None:
            raise ValueError("need a trajectory or a sunlit_probability")
        self.trajectory = trajectory
        self.period = float(period)
        self.size = int(size)
        self.cloud = cloud or CloudModel()
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.epoch_utc = epoch_utc
        self.sunlit_probability = sunlit_probability
        if start is None:
            start = trajectory.start if trajectory is not None else 0.0
        self.start = float(start)
        self.next_index = 1
        self.next_id = 0
        self._ahead: deque[FrameMeta] = deque()

    def _due_count(self, t: float) -> int:
        # frames k with start + k*period <= t; epsilon guards 3 * 0.4 > 1.2
        return max(0, math.floor((t - self.start) / self.period + 1e-9))

    def _make(self, ks: np.ndarray) -> list[FrameMeta]:
        n = ks.size
        if n == 0:
            return []
        times = self.start + ks * self.period
        u = self.rng.random((n, 3))
        if self.trajectory is not None:
            lat, lon, _ = self.trajectory.position(times)
        else:
            lat = lon = np.zeros(n)
        if self.sunlit_probability is not None:
            sunlit = u[:, 0] < self.sunlit_probability
        elif self.trajectory is not None and self.trajectory.sunlit is not None:
            sunlit = self.trajectory.sunlit_at(times)
        else:
            if self.epoch_utc is None:
                raise ValueError("geometric illumination needs epoch_utc")
            sunlit = solar_elevation(lat, lon, self.epoch_utc + times) > 0.0
            sunlit = np.atleast_1d(sunlit)
        cloud = np.where(sunlit, self.cloud.from_uniforms(u[:, 1], u[:, 2]), 0.0)
        frames = [
            FrameMeta(self.next_id + i, float(times[i]), float(lat[i]), float(lon[i]),
                      bool(sunlit[i]), float(cloud[i]), self.size)
            for i in range(n)
        ]
        self.next_id += n
        return frames

    def _last_index(self) -> int | None:
        """Highest frame index the trajectory can cover, or None if unbounded."""
        if self.trajectory is None:
            return None
        return self._due_count(self.trajectory.end)

    def _fill(self, upto: int) -> None:
        # generate ahead in chunks; the RNG stream is per-frame so chunking
        # does not change the output
        have = self.next_index + len(self._ahead) - 1
        if upto <= have:
            return
        hi = max(upto, have + self.CHUNK)
        cap = self._last_index()
        if cap is not None:
            if upto > cap:
                t_bad = self.start + upto * self.period
                raise TraceError(f"t={t_bad} beyond trajectory end {self.trajectory.end}")
            hi = min(hi, cap)
        ks = np.arange(have + 1, hi + 1, dtype=float)
        self._ahead.extend(self._make(ks))

    def advance(self, t: float) -> list[FrameMeta]:
        """All frames captured since the last call, up to and including ``t``."""
        last = self._due_count(t)
        if last < self.next_index:
            return []
        self._fill(last)
        n = last - self.next_index + 1
        out = [self._ahead.popleft() for _ in range(n)]
        self.next_index = last + 1
        return out

    def next_frame(self, t: float) -> FrameMeta | None:
        """Emit the next frame if its capture time is <= ``t``, else None."""
        if self._due_count(t) < self.next_index:
            return None
        if self.trajectory is not None and t < self.trajectory.start:
            raise TraceError(f"t={t} before trajectory start")
        self._fill(self.next_index)
        self.next_index += 1
        return self._ahead.popleft()


class ReplayFrameSource:
    """Replays a pre-generated frame-metadata file verbatim."""

    def __init__(self, frames: list[FrameMeta]):
        self.frames = frames
        self._pos = 0

    def advance(self, t: float) -> list[FrameMeta]:
        out = []
        while self._pos < len(self.frames) and self.frames[self._pos].t <= t + 1e-9:
            out.append(self.frames[self._pos])
            self._pos += 1
        return out

    def next_frame(self, t: float) -> FrameMeta | None:
        if self._pos < len(self.frames) and self.frames[self._pos].t <= t + 1e-9:
            self._pos += 1
            return self.frames[self._pos - 1]
        return None


def load_frame_metadata(path, size: int = frame_size()) -> list[FrameMeta]:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != FRAME_META_HEADER:
            raise TraceError(f"{path}: expected header {','.join(FRAME_META_HEADER)}")
        frames = []
        for row in reader:
            try:
                frames.append(FrameMeta(int(row["id"]), float(row["t_s"]), float(row["lat_deg"]),
                                        float(row["lon_deg"]), row["sunlit"].strip().lower() in ("1", "true"),
                                        float(row["cloud_fraction"]), size))
            except (TypeError, ValueError) as exc:
                raise TraceError(f"{path}:{reader.line_num}: {exc}") from None
    if not frames:
        raise TraceError(f"{path}: no frames")
    return frames


def write_frame_metadata(path, frames) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FRAME_META_HEADER)
        for f in frames:
            w.writerow([f.id, f"{f.t:.3f}", f"{f.lat:.4f}", f"{f.lon:.4f}", int(f.sunlit), f"{f.cloud_fraction:.6f}"])


@dataclass(frozen=True)
class FilterDecision:
    keep: bool
    reason: str  # "dark" | "cloudy" | "kept"


KEPT = FilterDecision(True, "kept")
DARK = FilterDecision(False, "dark")
CLOUDY = FilterDecision(False, "cloudy")


def prefilter(frame: FrameMeta, cloud_threshold: float = 0.30) -> FilterDecision:
    if not frame.sunlit:
        return DARK
    if frame.cloud_fraction > cloud_threshold:
        return CLOUDY
    return KEPT


def empirical_filter_rate(decisions) -> float:
    """Fraction of decisions that discarded the frame."""
    decisions = list(decisions)
    if not decisions:
        raise ValueError("no filter decisions")
    return sum(not d.keep for d in decisions) / len(decisions)
