"""The time-shifting executor and its simulation loop.

One step of length ``dt`` covers the interval (t, t + dt] and runs, in order:

1. capture the frames due in the interval, charge prefilter energy and CPU
   time for each, and apply the prefilter;
2. enqueue one invocation per deployed function for every kept frame;
3. while the serial core has budget left in the interval and the gate is
   open, start the oldest pending invocation;
4. drain the output buffer while in contact with the ground station;
5. integrate battery charge and chip temperature with the step's ledger.

Invocations run on a single core without preemption. An invocation's energy
is spread uniformly over its duration and may straddle several steps; it
completes (output written, log entry appended) in the step that contains its
end time.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .framesource import prefilter
from .journal import InvocationLog, OutputStore, QueueRecord, parse_invocation_log
from .planner import LinkConfig
from .platform import BatteryState, ThermalState
from .traces import ContactSchedule, PowerTrace, sample_power
from .workload import FunctionProfile, InvocationModel, simulate_invocation

log = logging.getLogger(__name__)


class InvariantViolation(RuntimeError):
    def __init__(self, name: str, detail: str = ""):
        super().__init__(f"invariant violated: {name}" + (f" ({detail})" if detail else ""))
        self.name = name


@dataclass(frozen=True)
class GatePolicy:
    min_soc: float = 0.70
    max_temp: float = 50.0
    enabled: bool = True

    def __post_init__(self):
        if not 0.0 <= self.min_soc <= 1.0:
            raise ValueError("min_soc must be in [0, 1]")


def gate_check(soc: float, temp: float, policy: GatePolicy) -> bool:
    return (not policy.enabled) or (soc >= policy.min_soc and temp < policy.max_temp)


@dataclass(frozen=True)
class DownlinkBuffer:
    bytes_pending: float = 0.0
    bytes_sent: float = 0.0

    def __post_init__(self):
        if self.bytes_pending < 0 or self.bytes_sent < 0:
            raise ValueError("buffer counters must be non-negative")


def downlink_step(buffer: DownlinkBuffer, in_contact: bool, rate: float, overhead: float,
                  dt: float, antenna_power: float = 20.0):
    """Drain the buffer for ``dt`` seconds of contact.

    Returns ``(buffer, bytes_drained, p_comm)``; the antenna draws
    ``antenna_power`` prorated by the fraction of ``dt`` spent transmitting.
    """
    if rate <= 0:
        raise ValueError("downlink rate must be positive")
    if not in_contact or buffer.bytes_pending <= 0 or dt <= 0:
        return buffer, 0.0, 0.0
    capacity = rate * (1.0 - overhead) * dt / 8.0
    drained = min(buffer.bytes_pending, capacity)
    p_comm = antenna_power * drained / capacity
    return (DownlinkBuffer(buffer.bytes_pending - drained, buffer.bytes_sent + drained),
            drained, p_comm)


@dataclass
class SimConfig:
    functions: tuple[str, ...]
    gate: GatePolicy = field(default_factory=GatePolicy)
    dt: float = 0.1
    battery_capacity_wh: float = 57.5
    initial_soc: float = 0.60
    ambient_c: float = 45.0
    initial_temp_c: float = 45.0
    heat_coeff_c_per_j: float = 0.0348
    cool_coeff_per_s: float = 0.01
    p_base_w: float = 1.518
    e_pre_j: float = 0.01
    t_pre_s: float = 0.038
    cloud_threshold: float = 0.30
    link: LinkConfig = field(default_factory=LinkConfig)
    seus: tuple[tuple[float, float], ...] = ()  # (t_reset, reboot_delay)
    strict: bool = False  # raise on invariant violation

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not 0.0 <= self.initial_soc <= 1.0:
            raise ValueError("initial_soc must be in [0, 1]")
        for t_reset, delay in self.seus:
            if delay < 0:
                raise ValueError("reboot delay must be non-negative")


METRIC_COLUMNS = (
    "t_s", "p_generated_w", "p_platform_w", "p_compute_w", "p_comm_w", "soc", "temp_c",
    "queue_len", "buffer_bytes", "frames_captured", "frames_kept", "invocations_done",
    "bytes_sent_total",
)


@dataclass(frozen=True, slots=True)
class StepLedger:
    t: float
    p_generated: float
    p_platform: float
    p_compute: float
    p_comm: float
    soc: float
    temp: float
    queue_len: int
    dequeued: int
    gate_open: bool
    in_contact: bool
    drained: float


class Simulation:
    """Owns every mutable piece of the simulated satellite.

    ``frames`` is any object with ``advance(t) -> list[FrameMeta]``.
    """

    def __init__(self, config: SimConfig, power: PowerTrace, contacts: ContactSchedule, frames,
                 profiles: dict[str, FunctionProfile], *, journal: InvocationLog | None = None,
                 outputs: OutputStore | None = None, invocation_model: InvocationModel | None = None,
                 start: float | None = None, end: float | None = None):
        missing = [f for f in config.functions if f not in profiles]
        if missing:
            raise KeyError(f"no profile for {missing}")
        self.config = config
        self.power = power
        self.contacts = contacts
        self.frames = frames
        self.functions = [profiles[name] for name in config.functions]
        self.functions_by_name = {p.name: p for p in self.functions}
        self.journal = journal or InvocationLog()
        self.outputs = outputs or OutputStore()
        self.invocation_model = invocation_model
        self.policy = config.gate

        self.t0 = power.start if start is None else float(start)
        t_end = power.end + 1.0 if end is None else float(end)  # 1 s hold on the last sample
        self.n_steps = int(math.floor((t_end - self.t0) / config.dt + 1e-9))
        if self.n_steps <= 0:
            raise ValueError("simulation span shorter than one step")
        self.i = 0
        self.t = self.t0

        self.battery = BatteryState.at_soc(config.battery_capacity_wh, config.initial_soc)
        self.thermal = ThermalState(config.initial_temp_c, config.ambient_c,
                                    config.heat_coeff_c_per_j, config.cool_coeff_per_s)
        self.buffer = DownlinkBuffer()

        # volatile executor state
        self.queue: deque = deque()
        self._frames_by_id: dict = {}  # stands in for frame data on flash
        self.running: deque = deque()  # (start, end, power, record, result)
        self.cpu_free_at = self.t0
        self.next_seq = 0
        self.device_on = True
        self.reboot_at: float | None = None
        self._durable_pending = 0
        self._seus = sorted(config.seus)

        # counters
        self.frames_captured = 0
        self.frames_kept = 0
        self.frames_dark = 0
        self.frames_cloudy = 0
        self.frames_dropped_outage = 0
        self.enqueued = 0
        self.completed = 0
        self.dropped = 0
        self.gate_violations = 0
        self.restores = 0
        self.discarded_log_lines = 0
        self.completions: list[tuple[str, int]] = []
        self.outages: list[tuple[float, float]] = []
        self.outage_frames: list[int] = []
        self._last_completed_seq = -1
        self.fifo_violations = 0
        self.clamped = False
        self.energy = dict(generated=0.0, platform=0.0, compute=0.0, comm=0.0)

        # per-step precomputation
        starts = self.t0 + np.arange(self.n_steps) * config.dt
        gen, plat = sample_power(power, starts)
        self._gen = np.asarray(gen, dtype=float)
        self._plat = np.asarray(plat, dtype=float)
        contact = np.zeros(self.n_steps)
        for a, b in contacts.windows:
            contact += np.clip(np.minimum(b, starts + config.dt) - np.maximum(a, starts), 0.0, None)
        # step edges accumulate rounding error; a sliver of overlap is not contact
        contact[contact < 1e-6] = 0.0
        self._contact = contact

        n = self.n_steps
        self.metrics = np.zeros((n, len(METRIC_COLUMNS)))
        self.dequeued_series = np.zeros(n, dtype=np.int32)
        self.gate_series = np.zeros(n, dtype=bool)
        self.device_series = np.ones(n, dtype=bool)

    # -- queue helpers --------------------------------------------------------

    @property
    def queue_len(self) -> int:
        """Pending invocations, counting running ones and any held only in the journal."""
        return len(self.queue) + len(self.running) + self._durable_pending

    @property
    def soc(self) -> float:
        return self.battery.charge / self.battery.capacity

    def _enqueue(self, frame) -> None:
        for prof in self.functions:
            rec = QueueRecord(self.next_seq, prof.name, frame.id)
            self.next_seq += 1
            self.journal.enqueue(rec.seq, rec.function, rec.frame)
            self.queue.append((rec, frame))
            self.enqueued += 1

    # -- faults ---------------------------------------------------------------

    def crash(self) -> None:
        """Hard reset: lose every piece of volatile executor state."""
        self.journal.crash()
        self.outputs.crash()
        self.queue.clear()
        self.running.clear()
        self.device_on = False
        # what the journal still holds is what the queue owns during the outage
        durable = parse_invocation_log(self.journal.log.read_text())
        self._durable_pending = len(durable.pending)

    def restore(self) -> None:
        rec = self.journal.restore()
        out = self.outputs.restore()
        self.discarded_log_lines += rec.discarded_lines + out.discarded_lines
        self.queue = deque((r, self._frames_by_id[r.frame]) for r in rec.pending)
        self.next_seq = rec.next_seq
        # counters follow the journal, which is the durable truth
        self.enqueued = rec.enqueued
        self.completed = rec.completed
        del self.completions[rec.completed:]
        self._durable_pending = 0
        self.buffer = DownlinkBuffer(max(out.bytes_pending, 0.0), out.bytes_sent)
        self.cpu_free_at = self.t
        self.device_on = True
        self.restores += 1
        # a re-executed record may carry a lower seq than the last completion
        self._last_completed_seq = -1

    def inject_seu(self, t_reset: float, reboot_delay: float = 30.0) -> None:
        self._seus = sorted(self._seus + [(t_reset, reboot_delay)])

    # -- main loop ------------------------------------------------------------

    def step(self) -> StepLedger:
        cfg = self.config
        dt = cfg.dt
        i = self.i
        t = self.t0 + i * dt
        t_next = t + dt
        self.t = t

        # faults scheduled at or before this step boundary
        while self._seus and self._seus[0][0] <= t + 1e-9:
            t_reset, delay = self._seus.pop(0)
            if self.device_on:
                self.crash()
                self.reboot_at = t + delay
                self.outages.append((t, t + delay))
                log.info("SEU at t=%.1f, rebooting in %.1f s", t, delay)
        if not self.device_on and self.reboot_at is not None and t >= self.reboot_at - 1e-9:
            self.restore()
            self.reboot_at = None

        on = self.device_on
        e_compute = 0.0

        # (1) capture + prefilter
        captured = self.frames.advance(t_next)
        self.frames_captured += len(captured)
        if on:
            if captured:
                e_compute += cfg.e_pre_j * len(captured)
                self.cpu_free_at = max(self.cpu_free_at, t) + cfg.t_pre_s * len(captured)
            for frame in captured:
                decision = prefilter(frame, cfg.cloud_threshold)
                if decision.keep:
                    self.frames_kept += 1
                    self._frames_by_id[frame.id] = frame
                    # (2) enqueue
                    self._enqueue(frame)
                elif decision.reason == "dark":
                    self.frames_dark += 1
                else:
                    self.frames_cloudy += 1
        else:
            self.frames_dropped_outage += len(captured)
            self.outage_frames.extend(f.id for f in captured)

        # (3) dequeue while budget and gate allow
        soc = self.battery.charge / self.battery.capacity
        temp = self.thermal.temp
        gate_open = gate_check(soc, temp, self.policy)
        dequeued = 0
        if on:
            while self.queue and self.cpu_free_at < t_next - 1e-12:
                if not gate_check(soc, temp, self.policy):
                    break
                if self.policy.enabled and not (soc >= self.policy.min_soc and temp < self.policy.max_temp):
                    self.gate_violations += 1
                rec, frame = self.queue.popleft()
                prof = self.functions_by_name[rec.function]
                result = simulate_invocation(prof, frame, self.invocation_model)
                start = max(self.cpu_free_at, t)
                end = start + result.duration
                self.cpu_free_at = end
                pwr = result.energy / result.duration if result.duration > 0 else 0.0
                self.running.append((start, end, pwr, rec, result))
                dequeued += 1

            # charge running invocations for their overlap with this step
            for start, end, pwr, rec, result in self.running:
                if start >= t_next:
                    break
                if result.duration > 0:
                    e_compute += pwr * (min(end, t_next) - max(start, t))
                else:
                    e_compute += result.energy
            while self.running and self.running[0][1] <= t_next + 1e-12:
                _, _, _, rec, result = self.running.popleft()
                self._complete(rec, result)

        p_compute = (cfg.p_base_w + e_compute / dt) if on else 0.0

        # (4) downlink
        contact_s = self._contact[i]
        in_contact = contact_s > 0
        drained = 0.0
        p_comm = 0.0
        if in_contact:
            self.buffer, drained, p_comm = downlink_step(
                self.buffer, True, cfg.link.downlink_bps, cfg.link.overhead, contact_s,
                cfg.link.antenna_power_w)
            p_comm *= contact_s / dt
            if drained > 0:
                # the radio drains the persisted buffer even while the board reboots
                self.outputs.record_sent(drained)

        # (5) battery + thermal
        p_gen = float(self._gen[i])
        p_plat = float(self._plat[i])
        net = p_gen - p_plat - p_compute - p_comm
        charge = self.battery.charge + net * dt / 3600.0
        if charge < 0.0 or charge > self.battery.capacity:
            self.clamped = True
            charge = min(max(charge, 0.0), self.battery.capacity)
        self.battery = BatteryState(self.battery.capacity, charge)
        p_diss = max(p_compute - cfg.p_base_w, 0.0) if on else 0.0
        th = self.thermal
        new_temp = th.temp + dt * (th.heat_coeff * p_diss - th.cool_coeff * (th.temp - th.ambient))
        self.thermal = ThermalState(new_temp, th.ambient, th.heat_coeff, th.cool_coeff)

        en = self.energy
        en["generated"] += p_gen * dt
        en["platform"] += p_plat * dt
        en["compute"] += p_compute * dt
        en["comm"] += p_comm * dt

        self.journal.flush()
        self.outputs.flush()

        qlen = len(self.queue) + len(self.running) + self._durable_pending
        if self.enqueued != self.completed + qlen + self.dropped:
            self._violation("queue_conservation",
                            f"enqueued={self.enqueued} completed={self.completed} pending={qlen}")
        if drained > 0 and not in_contact:
            self._violation("downlink_only_in_contact")

        row = self.metrics[i]
        row[:] = (t_next, p_gen, p_plat, p_compute, p_comm, self.soc, new_temp, qlen,
                  self.buffer.bytes_pending, self.frames_captured, self.frames_kept,
                  self.completed, self.buffer.bytes_sent)
        self.dequeued_series[i] = dequeued
        self.gate_series[i] = gate_open
        self.device_series[i] = on
        self.i += 1
        self.t = t_next
        return StepLedger(t_next, p_gen, p_plat, p_compute, p_comm, self.soc, new_temp, qlen,
                          dequeued, gate_open, in_contact, drained)

    def _complete(self, rec: QueueRecord, result) -> None:
        if self.outputs.put(rec.function, rec.frame, result.output_bytes):
            self.buffer = DownlinkBuffer(self.buffer.bytes_pending + result.output_bytes,
                                         self.buffer.bytes_sent)
        self.journal.complete(rec.seq, rec.function, rec.frame)
        self.completed += 1
        self.completions.append((rec.function, rec.frame))
        if rec.seq < self._last_completed_seq:
            self.fifo_violations += 1
        self._last_completed_seq = rec.seq

    def _violation(self, name: str, detail: str = "") -> None:
        if self.config.strict:
            raise InvariantViolation(name, detail)
        log.warning("invariant %s violated at t=%.1f %s", name, self.t, detail)

    def run(self) -> "SimReport":
        while self.i < self.n_steps:
            self.step()
        if self.gate_violations:
            self._violation("gate_soundness", f"{self.gate_violations} dequeues with gate closed")
        return self.report()

    def report(self) -> "SimReport":
        m = self.metrics[: self.i]
        summary = {
            "steps": self.i,
            "dt_s": self.config.dt,
            "t_start_s": self.t0,
            "t_end_s": float(m[-1, 0]) if self.i else self.t0,
            "functions": ",".join(self.config.functions),
            "gate_enabled": self.policy.enabled,
            "frames_captured": self.frames_captured,
            "frames_kept": self.frames_kept,
            "frames_dropped_dark": self.frames_dark,
            "frames_dropped_cloudy": self.frames_cloudy,
            "frames_dropped_outage": self.frames_dropped_outage,
            "invocations_enqueued": self.enqueued,
            "invocations_completed": self.completed,
            "invocations_pending": self.queue_len,
            "invocations_dropped": self.dropped,
            "max_temp_c": float(m[:, 6].max()) if self.i else self.thermal.temp,
            "min_soc": float(m[:, 5].min()) if self.i else self.soc,
            "final_soc": self.soc,
            "bytes_downlinked": self.buffer.bytes_sent,
            "bytes_buffered": self.buffer.bytes_pending,
            "max_queue_len": int(m[:, 7].max()) if self.i else 0,
            "gate_violations": self.gate_violations,
            "fifo_violations": self.fifo_violations,
            "duplicate_outputs_suppressed": self.outputs.duplicates,
            "seu_resets": len(self.outages),
            "restores": self.restores,
            "discarded_log_lines": self.discarded_log_lines,
            "battery_clamped": self.clamped,
            "energy_generated_j": self.energy["generated"],
            "energy_platform_j": self.energy["platform"],
            "energy_compute_j": self.energy["compute"],
            "energy_comm_j": self.energy["comm"],
        }
        return SimReport(summary, m.copy(), self.dequeued_series[: self.i].copy(),
                         self.gate_series[: self.i].copy(), self.device_series[: self.i].copy(),
                         list(self.completions), list(self.outages), list(self.outage_frames))


@dataclass
class SimReport:
    summary: dict
    metrics: np.ndarray
    dequeued: np.ndarray
    gate_open: np.ndarray
    device_on: np.ndarray
    completions: list
    outages: list
    outage_frames: list = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return self.metrics[:, METRIC_COLUMNS.index(name)]

    def time_to_soc(self, target: float) -> float | None:
        """Seconds from the run start until SoC first reaches ``target``."""
        soc = self.column("soc")
        hit = np.nonzero(soc >= target)[0]
        if hit.size == 0:
            return None
        return float(self.metrics[hit[0], 0] - (self.metrics[0, 0] - self.summary["dt_s"]))

    def write_metrics_csv(self, path) -> None:
        fmt = ["%.2f", "%.2f", "%.2f", "%.4f", "%.4f", "%.6f", "%.4f", "%d", "%.1f",
               "%d", "%d", "%d", "%.1f"]
        np.savetxt(path, self.metrics, delimiter=",", fmt=fmt, header=",".join(METRIC_COLUMNS),
                   comments="")

    def summary_text(self) -> str:
        lines = []
        for key, value in self.summary.items():
            if isinstance(value, float):
                value = f"{value:.6g}"
            elif isinstance(value, bool):
                value = str(value).lower()
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"
