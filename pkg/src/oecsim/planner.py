"""Offline admission check for a set of tenant functions.

Everything is in SI units internally; the only place bits appear is the
downlink quantities, which are bit/s by convention.
"""

from __future__ import annotations

import configparser
import itertools
import warnings
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .traces import ContactSchedule, PowerTrace


@dataclass(frozen=True)
class PlatformParams:
    p_generated: float = 2.950  # W, mean available
    p_base: float = 1.518  # W
    e_sendbyte: float = 2e-6  # J/B
    e_pre: float = 0.01  # J per frame
    r_frame: float = 2.5  # Hz
    r_filter: float = 0.770  # fraction discarded
    s_frame: float = 256 * 256 * 13  # B
    b_downlink: float = 600e3  # bit/s
    t_pre: float = 0.038  # s

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be non-negative")
        if self.r_filter > 1:
            raise ValueError("r_filter must be <= 1")

    @property
    def kept_rate(self) -> float:
        """Frames per second reaching the tenant functions."""
        return self.r_frame * (1.0 - self.r_filter)


# key names used in parameter files, with unit suffixes
PARAM_KEYS = {
    "p_generated": "p_generated_w",
    "p_base": "p_base_w",
    "e_sendbyte": "e_sendbyte_j_per_byte",
    "e_pre": "e_pre_j",
    "r_frame": "r_frame_hz",
    "r_filter": "r_filter",
    "s_frame": "s_frame_bytes",
    "b_downlink": "b_downlink_bps",
    "t_pre": "t_pre_s",
}


def load_platform_params(path) -> PlatformParams:
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise FileNotFoundError(path)
    section = parser["platform"] if parser.has_section("platform") else parser[parser.default_section]
    values = {}
    for attr, key in PARAM_KEYS.items():
        if key in section:
            values[attr] = float(section[key])
    unknown = set(section) - set(PARAM_KEYS.values())
    if unknown:
        raise ValueError(f"{path}: unknown keys {sorted(unknown)}")
    return PlatformParams(**values)


def format_platform_params(params: PlatformParams) -> str:
    lines = ["[platform]"]
    for attr, key in PARAM_KEYS.items():
        lines.append(f"{key} = {getattr(params, attr):.10g}")
    return "\n".join(lines) + "\n"


def p_compute(profiles, params: PlatformParams) -> float:
    per_frame = sum(p.energy_per_invocation for p in profiles)
    return params.p_base + params.e_pre * params.r_frame + per_frame * params.kept_rate


def output_rate(profiles, params: PlatformParams) -> float:
    """Mean bytes per second written to the output buffer."""
    return sum(p.compression_ratio for p in profiles) * params.kept_rate * params.s_frame


def p_comm(profiles, params: PlatformParams) -> float:
    return params.e_sendbyte * output_rate(profiles, params)


def downlink_required(profiles, params: PlatformParams) -> float:
    return 8.0 * output_rate(profiles, params)


def frame_time(profiles, params: PlatformParams) -> float:
    return params.t_pre + sum(p.time_per_invocation for p in profiles) * (1.0 - params.r_filter)


@dataclass(frozen=True)
class FeasibilityReport:
    functions: tuple[str, ...]
    p_compute: float
    p_comm: float
    downlink_required: float
    frame_time: float
    power_margin: float  # W
    downlink_margin: float  # bit/s
    time_margin: float  # s

    @property
    def power_ok(self) -> bool:
        return self.power_margin >= 0

    @property
    def downlink_ok(self) -> bool:
        return self.downlink_margin >= 0

    @property
    def time_ok(self) -> bool:
        return self.time_margin >= 0

    @property
    def feasible(self) -> bool:
        return self.power_ok and self.downlink_ok and self.time_ok

    def as_dict(self) -> dict:
        d = asdict(self)
        d["functions"] = ",".join(self.functions)
        d.update(power_ok=self.power_ok, downlink_ok=self.downlink_ok,
                 time_ok=self.time_ok, feasible=self.feasible)
        return d


def check_feasibility(profiles, params: PlatformParams) -> FeasibilityReport:
    profiles = list(profiles)
    pc = p_compute(profiles, params)
    pm = p_comm(profiles, params)
    dr = downlink_required(profiles, params)
    ft = frame_time(profiles, params)
    period = 1.0 / params.r_frame if params.r_frame > 0 else float("inf")
    report = FeasibilityReport(
        functions=tuple(p.name for p in profiles),
        p_compute=pc,
        p_comm=pm,
        downlink_required=dr,
        frame_time=ft,
        power_margin=params.p_generated - (pc + pm),
        downlink_margin=params.b_downlink - dr,
        time_margin=period - ft,
    )
    for name in ("power_margin", "downlink_margin", "time_margin"):
        if getattr(report, name) == 0:
            warnings.warn(f"{name} is exactly zero for {report.functions}; counted as feasible",
                          stacklevel=2)
    return report


MAX_ENUMERATE = 20


def feasible_subsets(profiles, params: PlatformParams) -> list[tuple[tuple, FeasibilityReport]]:
    """Every subset with its report, largest subsets first."""
    profiles = list(profiles)
    if len(profiles) > MAX_ENUMERATE:
        raise ValueError(f"refusing to enumerate 2^{len(profiles)} subsets (limit {MAX_ENUMERATE})")
    out = []
    for size in range(len(profiles), -1, -1):
        for combo in itertools.combinations(profiles, size):
            out.append((combo, check_feasibility(combo, params)))
    return out


def maximal_feasible(results) -> list[tuple]:
    """Feasible subsets not contained in any other feasible subset."""
    feasible = [frozenset(p.name for p in combo) for combo, rep in results if rep.feasible]
    return [tuple(sorted(s)) for s in feasible if not any(s < other for other in feasible)]


@dataclass(frozen=True)
class LinkConfig:
    downlink_bps: float = 100e6
    uplink_bps: float = 1e6
    overhead: float = 0.20
    antenna_power_w: float = 20.0

    @property
    def effective_downlink_bps(self) -> float:
        return self.downlink_bps * (1.0 - self.overhead)


def energy_per_byte(antenna_power_w: float, effective_bps: float) -> float:
    return antenna_power_w / (effective_bps / 8.0)


def downlink_budget(contact_frac: float, effective_bps: float) -> float:
    return contact_frac * effective_bps


def derive_platform_params(trace: PowerTrace, contacts: ContactSchedule, link: LinkConfig,
                           base: PlatformParams | None = None, span: float | None = None) -> PlatformParams:
    """Fill the trace- and link-derived fields of ``base`` (Table defaults otherwise).

    Contact fraction is measured over ``span`` seconds, defaulting to the
    power trace's own duration.
    """
    if len(trace) == 0:
        raise ValueError("empty power trace")
    if span is None:
        span = trace.end - trace.start
        if span <= 0:
            raise ValueError("trace spans zero time; pass span explicitly")
    base = base or PlatformParams()
    eff = link.effective_downlink_bps
    return replace(
        base,
        p_generated=float(np.mean(trace.p_generated) - np.mean(trace.p_platform)),
        e_sendbyte=energy_per_byte(link.antenna_power_w, eff),
        b_downlink=downlink_budget(contacts.total_duration() / span, eff),
    )
