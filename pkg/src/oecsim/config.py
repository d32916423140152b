"""Run configuration for ``oecsim simulate``.

A config file is sectioned ``key = value`` text. Numeric keys carry their
unit in the name (``battery_capacity_wh``, ``dt_s``). Every key has a
default, so an empty file runs the bundled six-hour fixture with the default
four-function deployment. Relative paths resolve against the config file's
directory; the bare word ``bundled`` names the packaged fixture file.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .executor import GatePolicy, SimConfig
from .planner import LinkConfig
from .scenario import data_path
from .workload import DEFAULT_SET


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    # [traces]
    power: str = "bundled"
    trajectory: str = "bundled"
    contacts: str = "bundled"  # "none" disables downlink; "derive" computes from the trajectory
    frames: str = ""  # optional frame-metadata replay file
    profiles: str = "bundled"
    # [workload]
    functions: tuple[str, ...] = DEFAULT_SET
    stochastic_outputs: bool = False
    # [gate]
    gate_enabled: bool = True
    min_soc: float = 0.70
    max_temp_c: float = 50.0
    # [thermal]
    ambient_c: float = 45.0
    initial_temp_c: float = 45.0
    heat_coeff_c_per_j: float = 0.0348
    cool_coeff_per_s: float = 0.01
    # [battery]
    battery_capacity_wh: float = 57.5
    initial_soc: float = 0.60
    # [compute]
    p_base_w: float = 1.518
    e_pre_j: float = 0.01
    t_pre_s: float = 0.038
    cloud_threshold: float = 0.30
    # [frames]
    width_px: int = 256
    height_px: int = 256
    bands: int = 13
    period_s: float = 0.4
    cloud_p_exceed: float = 0.444
    sunlit_probability: float | None = None  # overrides trajectory illumination
    epoch_utc: str = ""  # needed only for geometric illumination
    # [link]
    downlink_bps: float = 100e6
    uplink_bps: float = 1e6
    overhead: float = 0.20
    antenna_power_w: float = 20.0
    # [run]
    dt_s: float = 0.1
    seed: int = 1
    start_s: float | None = None
    end_s: float | None = None
    strict: bool = True
    # [seu]  (t_reset_s, reboot_delay_s) pairs
    resets: tuple[tuple[float, float], ...] = ()
    # [output]  file names inside the output directory
    metrics_file: str = "metrics.csv"
    summary_file: str = "summary.txt"
    summary_json_file: str = "summary.json"
    journal_file: str = "invocations.log"
    outputs_file: str = "outputs.log"
    echo_file: str = "config.echo.ini"

    def __post_init__(self):
        if self.dt_s <= 0:
            raise ConfigError("dt_s must be positive")
        if not 0.0 <= self.initial_soc <= 1.0:
            raise ConfigError("initial_soc must be in [0, 1]")
        if not 0.0 <= self.min_soc <= 1.0:
            raise ConfigError("min_soc must be in [0, 1]")
        if self.period_s <= 0:
            raise ConfigError("period_s must be positive")
        if min(self.width_px, self.height_px, self.bands) <= 0:
            raise ConfigError("frame geometry must be positive")
        if not 0.0 <= self.overhead < 1.0:
            raise ConfigError("overhead must be in [0, 1)")
        if self.downlink_bps <= 0 or self.uplink_bps <= 0:
            raise ConfigError("link rates must be positive")
        if self.sunlit_probability is not None and not 0.0 <= self.sunlit_probability <= 1.0:
            raise ConfigError("sunlit_probability must be in [0, 1]")
        for t_reset, delay in self.resets:
            if delay < 0:
                raise ConfigError("reboot delay must be non-negative")

    @property
    def frame_size(self) -> int:
        return self.width_px * self.height_px * self.bands

    @property
    def gate(self) -> GatePolicy:
        return GatePolicy(self.min_soc, self.max_temp_c, self.gate_enabled)

    @property
    def link(self) -> LinkConfig:
        return LinkConfig(self.downlink_bps, self.uplink_bps, self.overhead, self.antenna_power_w)

    def resolved(self) -> "RunConfig":
        """Same config with ``bundled`` replaced by the packaged file paths."""
        names = {"power": "power.csv", "trajectory": "trajectory.csv",
                 "contacts": "contacts.csv", "profiles": "profiles.csv"}
        return replace(self, **{k: str(data_path(v)) for k, v in names.items()
                                if getattr(self, k) == "bundled"})

    def sim_config(self) -> SimConfig:
        return SimConfig(
            functions=tuple(self.functions), gate=self.gate, dt=self.dt_s,
            battery_capacity_wh=self.battery_capacity_wh, initial_soc=self.initial_soc,
            ambient_c=self.ambient_c, initial_temp_c=self.initial_temp_c,
            heat_coeff_c_per_j=self.heat_coeff_c_per_j, cool_coeff_per_s=self.cool_coeff_per_s,
            p_base_w=self.p_base_w, e_pre_j=self.e_pre_j, t_pre_s=self.t_pre_s,
            cloud_threshold=self.cloud_threshold, link=self.link, seus=tuple(self.resets),
            strict=self.strict,
        )


# field -> config section
SECTIONS = {
    "traces": ("power", "trajectory", "contacts", "frames", "profiles"),
    "workload": ("functions", "stochastic_outputs"),
    "gate": ("gate_enabled", "min_soc", "max_temp_c"),
    "thermal": ("ambient_c", "initial_temp_c", "heat_coeff_c_per_j", "cool_coeff_per_s"),
    "battery": ("battery_capacity_wh", "initial_soc"),
    "compute": ("p_base_w", "e_pre_j", "t_pre_s", "cloud_threshold"),
    "frames": ("width_px", "height_px", "bands", "period_s", "cloud_p_exceed", "sunlit_probability",
               "epoch_utc"),
    "link": ("downlink_bps", "uplink_bps", "overhead", "antenna_power_w"),
    "run": ("dt_s", "seed", "start_s", "end_s", "strict"),
    "seu": ("resets",),
    "output": ("metrics_file", "summary_file", "summary_json_file", "journal_file",
               "outputs_file", "echo_file"),
}
PATH_KEYS = ("power", "trajectory", "contacts", "frames", "profiles")
_FIELDS = {f.name: f for f in fields(RunConfig)}
_BOOL = configparser.ConfigParser.BOOLEAN_STATES


def _parse_value(name: str, raw: str):
    raw = raw.strip()
    default = _FIELDS[name].default
    if name == "functions":
        return tuple(s.strip() for s in raw.split(",") if s.strip())
    if name == "resets":
        pairs = []
        for item in raw.replace(";", ",").split(","):
            item = item.strip()
            if not item:
                continue
            t_reset, _, delay = item.partition(":")
            pairs.append((float(t_reset), float(delay) if delay else 30.0))
        return tuple(pairs)
    if isinstance(default, bool):
        if raw.lower() not in _BOOL:
            raise ConfigError(f"{name}: not a boolean: {raw!r}")
        return _BOOL[raw.lower()]
    if isinstance(default, int):
        return int(raw)
    if default is None:  # optional float
        if raw == "" or raw.lower() == "none":
            return None
        return float(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def _resolve_path(raw: str, base: Path) -> str:
    if raw in ("", "bundled", "none", "derive"):
        return raw
    p = Path(raw)
    if not p.is_absolute():
        p = base / p
    return str(p.resolve())


def parse_config(text: str, base_dir=".", source: str = "<config>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    values = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key, raw in parser[section].items():
            if key not in SECTIONS[section]:
                raise ConfigError(f"{source}: unknown key {key!r} in [{section}]")
            try:
                values[key] = _parse_value(key, raw)
            except ValueError as exc:
                raise ConfigError(f"{source}: [{section}] {key}: {exc}") from None
    base = Path(base_dir)
    for key in PATH_KEYS:
        if key in values:
            values[key] = _resolve_path(values[key], base)
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, path.parent, str(path))


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.12g}"
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return ", ".join(f"{a:g}:{b:g}" for a, b in value)
        return ",".join(value)
    return str(value)


def format_config(cfg: RunConfig) -> str:
    """Fully expanded config; parses back to an equal ``RunConfig``."""
    out = []
    for section, keys in SECTIONS.items():
        out.append(f"[{section}]")
        out.extend(f"{k} = {_format_value(getattr(cfg, k))}" for k in keys)
        out.append("")
    return "\n".join(out)
