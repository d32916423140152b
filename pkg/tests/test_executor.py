from collections import Counter

import numpy as np
import pytest
from _support import flat_power

from oecsim.executor import (
    METRIC_COLUMNS,
    DownlinkBuffer,
    GatePolicy,
    InvariantViolation,
    SimConfig,
    Simulation,
    downlink_step,
    gate_check,
)
from oecsim.framesource import FrameGenerator, FrameMeta, ReplayFrameSource
from oecsim.traces import ContactSchedule
from oecsim.workload import DEFAULT_SET, MEASURED_PROFILES

P_BASE, E_PRE = 1.518, 0.01


def _frames(until, p_sun=0.408, seed=4):
    """Synthetic frames with a bounded capture span, so runs can drain afterwards."""
    return [f for f in FrameGenerator(sunlit_probability=p_sun, seed=seed).advance(until)]


def _sim(frames, end, *, functions=DEFAULT_SET, soc=0.9, gate=True, seus=(), contacts=(),
         strict=True, dt=0.1):
    cfg = SimConfig(functions=tuple(functions), gate=GatePolicy(enabled=gate), initial_soc=soc,
                    seus=tuple(seus), strict=strict, dt=dt)
    return Simulation(cfg, flat_power(end), ContactSchedule(tuple(contacts)),
                      ReplayFrameSource(frames), MEASURED_PROFILES, start=0.0, end=end)


# --- gate ---------------------------------------------------------------------

@pytest.mark.parametrize("soc,temp,expected", [
    (0.69, 40.0, False), (0.71, 49.9, True), (0.90, 50.0, False), (0.70, 20.0, True)])
def test_gate_check_examples(soc, temp, expected):
    assert gate_check(soc, temp, GatePolicy()) is expected


def test_disabled_gate_always_open():
    assert gate_check(0.0, 99.0, GatePolicy(enabled=False))
    with pytest.raises(ValueError):
        GatePolicy(min_soc=1.2)


# --- downlink -----------------------------------------------------------------

def test_downlink_not_in_contact():
    buf = DownlinkBuffer(1e6)
    assert downlink_step(buf, False, 100e6, 0.2, 1.0) == (buf, 0.0, 0.0)


def test_downlink_full_second_of_contact():
    buf, drained, p = downlink_step(DownlinkBuffer(100e6), True, 100e6, 0.2, 1.0)
    assert drained == pytest.approx(10e6)
    assert buf.bytes_pending == pytest.approx(90e6) and buf.bytes_sent == pytest.approx(10e6)
    assert p == pytest.approx(20.0)


def test_downlink_prorates_power_for_tiny_buffer():
    buf, drained, p = downlink_step(DownlinkBuffer(1.0), True, 1e12, 0.2, 1.0)
    assert drained == 1.0 and buf.bytes_pending == 0.0
    assert 0 < p < 1e-9
    with pytest.raises(ValueError):
        downlink_step(buf, True, 0.0, 0.2, 1.0)


# --- single steps -------------------------------------------------------------

def test_gate_closed_step_only_charges_prefilter():
    frame = FrameMeta(0, 0.05, 0.0, 0.0, True, 0.0)
    sim = _sim([frame], 1.0, soc=0.5)
    led = sim.step()
    assert led.queue_len == 4 and led.dequeued == 0 and not led.gate_open
    assert led.p_compute == pytest.approx(P_BASE + E_PRE / 0.1)


def test_prefilter_energy_and_time_for_dropped_frames():
    dark = [FrameMeta(i, 0.4 * (i + 1), 0.0, 0.0, False, 0.0) for i in range(5)]
    rep = _sim(dark, 2.1).run()
    assert rep.summary["frames_dropped_dark"] == 5 and rep.summary["invocations_enqueued"] == 0
    assert rep.summary["energy_compute_j"] == pytest.approx(P_BASE * 2.1 + 5 * E_PRE)


def test_invocation_spans_steps_and_energy_spreads():
    frame = FrameMeta(0, 0.1, 0.0, 0.0, True, 0.0)
    rep = _sim([frame], 2.0, functions=("vessel",)).run()
    p = rep.column("p_compute_w")
    vessel = MEASURED_PROFILES["vessel"]
    # vessel starts after the prefilter at 0.038 s and runs 0.585 s at 1.8 W
    busy = p[1:7] - P_BASE
    assert busy.max() == pytest.approx(vessel.power, rel=1e-9)
    assert rep.summary["invocations_completed"] == 1
    done = rep.column("invocations_done")
    assert done[5] == 0 and done[6] == 1  # finishes in (0.6, 0.7]
    assert rep.summary["energy_compute_j"] == pytest.approx(
        P_BASE * 2.0 + E_PRE + vessel.energy_per_invocation, rel=1e-12)


# --- whole runs on a synthetic scenario ---------------------------------------

FRAMES = _frames(500.0)


@pytest.fixture(scope="module")
def clean():
    return _sim(FRAMES, 700.0).run()


def test_synthetic_run_drains(clean):
    s = clean.summary
    assert s["invocations_pending"] == 0
    assert s["invocations_completed"] == s["invocations_enqueued"] == 4 * s["frames_kept"]
    assert s["fifo_violations"] == 0 and s["gate_violations"] == 0


def test_fifo_completion_order(clean):
    kept = [f.id for f in FRAMES if f.sunlit and f.cloud_fraction <= 0.30]
    expected = [(fn, fid) for fid in kept for fn in DEFAULT_SET]
    assert clean.completions == expected


def test_energy_identity(clean):
    s = clean.summary
    # compute energy from first principles: idle draw, prefilter per frame, invocation energies
    invocation = sum(MEASURED_PROFILES[fn].energy_per_invocation for fn, _ in clean.completions)
    oracle = P_BASE * 700.0 + E_PRE * s["frames_captured"] + invocation
    assert s["energy_compute_j"] == pytest.approx(oracle, rel=1e-3)
    net = s["energy_generated_j"] - s["energy_platform_j"] - s["energy_compute_j"] - s["energy_comm_j"]
    charge = clean.column("soc")[-1] * 57.5 * 3600 - 0.9 * 57.5 * 3600
    assert not s["battery_clamped"]
    assert charge == pytest.approx(net, rel=1e-3)


def test_determinism(clean):
    again = _sim(FRAMES, 700.0).run()
    np.testing.assert_array_equal(again.metrics, clean.metrics)
    assert again.summary == clean.summary


def test_seu_with_zero_reboot_loses_nothing(clean):
    rep = _sim(FRAMES, 700.0, seus=[(100.0, 0.0)]).run()
    assert rep.summary["seu_resets"] == 1 and rep.summary["frames_dropped_outage"] == 0
    assert Counter(rep.completions) == Counter(clean.completions)
    assert rep.summary["invocations_completed"] == clean.summary["invocations_completed"]


def test_pending_set_survives_instant_reset():
    sim = _sim(FRAMES, 700.0, soc=0.5)  # gate closed: everything stays pending
    for _ in range(200):
        sim.step()
    before = [(r.seq, r.function, r.frame) for r, _ in sim.queue]
    sim.crash()
    sim.restore()
    assert [(r.seq, r.function, r.frame) for r, _ in sim.queue] == before
    assert sim.next_seq == len(before)


def test_two_resets_differential_multiset(clean):
    rep = _sim(FRAMES, 700.0, seus=[(150.0, 30.0), (400.0, 12.5)]).run()
    s = rep.summary
    assert s["seu_resets"] == 2 and s["restores"] == 2
    lost = set(rep.outage_frames)
    assert len(lost) == s["frames_dropped_outage"] > 0
    # every dropped frame was captured inside an outage interval
    for fid in lost:
        t = FRAMES[fid].t
        assert any(a < t <= b + 0.1 for a, b in rep.outages)
    expected = Counter(c for c in clean.completions if c[1] not in lost)
    assert Counter(rep.completions) == expected
    assert s["duplicate_outputs_suppressed"] == 0
    # the compute ledger reads zero while the board is off
    off = ~rep.device_on
    assert off.sum() == pytest.approx(425, abs=2)
    assert np.all(rep.column("p_compute_w")[off] == 0.0)


def test_mid_invocation_crash_reexecutes():
    frame = FrameMeta(0, 0.1, 0.0, 0.0, True, 0.0)
    base = _sim([frame], 3.0, functions=("vessel",)).run()
    sim = _sim([frame], 3.0, functions=("vessel",), seus=[(0.4, 0.0)])
    rep = sim.run()
    assert rep.completions == base.completions == [("vessel", 0)]
    assert rep.summary["invocations_completed"] == 1
    # the interrupted run is charged twice
    vessel = MEASURED_PROFILES["vessel"]
    assert rep.summary["energy_compute_j"] > base.summary["energy_compute_j"] + 0.3 * vessel.energy_per_invocation
    assert rep.column("invocations_done")[-1] == 1


def test_outage_frames_are_dropped_and_counted():
    rep = _sim(FRAMES, 700.0, seus=[(100.0, 30.0)]).run()
    in_outage = [f.id for f in FRAMES if 100.0 < f.t <= 130.0 + 1e-9]
    assert sorted(rep.outage_frames) == in_outage
    s = rep.summary
    assert s["frames_captured"] == len(FRAMES)
    assert (s["frames_kept"] + s["frames_dropped_dark"] + s["frames_dropped_cloudy"]
            + s["frames_dropped_outage"]) == len(FRAMES)


def test_downlink_only_in_contact_and_near_20w():
    frames = _frames(200.0)
    rep = _sim(frames, 400.0, contacts=[(250.0, 260.0)]).run()
    t = rep.column("t_s")
    sent = np.diff(rep.column("bytes_sent_total"), prepend=0.0)
    contact = (t > 250.0 + 1e-9) & (t <= 260.0 + 1e-9)
    assert np.all(sent[~contact] == 0)
    assert sent[contact].sum() > 0
    p = rep.column("p_comm_w")
    draining = sent > 0
    full = draining & (rep.column("buffer_bytes") > 0)
    assert np.all(p[~contact] == 0)
    assert p[full] == pytest.approx(20.0)
    assert np.all(p[draining] <= 20.0 + 1e-9)


def test_metric_columns_and_csv(clean, tmp_path):
    path = tmp_path / "m.csv"
    clean.write_metrics_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(METRIC_COLUMNS)
    assert len(lines) == 7001
    assert "gate_enabled = true" in clean.summary_text()


def test_strict_mode_raises_named_invariant(caplog):
    sim = _sim(FRAMES, 10.0)
    sim.enqueued += 1  # corrupt the books
    with pytest.raises(InvariantViolation, match="queue_conservation"):
        sim.step()
    lax = _sim(FRAMES, 10.0, strict=False)
    lax.enqueued += 1
    lax.step()
    assert "queue_conservation" in caplog.text


def test_configuration_errors():
    with pytest.raises(ValueError):
        SimConfig(functions=(), dt=0.0)
    with pytest.raises(ValueError):
        SimConfig(functions=(), initial_soc=1.5)
    with pytest.raises(ValueError):
        SimConfig(functions=(), seus=((10.0, -1.0),))
    with pytest.raises(KeyError):
        _sim(FRAMES, 10.0, functions=("nope",))
    with pytest.raises(ValueError):
        _sim(FRAMES, 0.05)


# --- properties of the six-hour run -------------------------------------------

def test_fixture_gate_soundness(default_run):
    soc = default_run.column("soc")
    temp = default_run.column("temp_c")
    prev_soc = np.concatenate([[0.60], soc[:-1]])
    prev_temp = np.concatenate([[45.0], temp[:-1]])
    began = default_run.dequeued > 0
    assert began.any()
    assert np.all(prev_soc[began] >= 0.70)
    assert np.all(prev_temp[began] < 50.0)
    assert default_run.summary["gate_violations"] == 0


def test_fixture_queue_conservation(default_run):
    q = default_run.column("queue_len")
    assert np.all(q == 4 * default_run.column("frames_kept") - default_run.column("invocations_done"))


def test_fixture_overshoot_bound(default_run):
    largest = max(MEASURED_PROFILES[f].energy_per_invocation for f in DEFAULT_SET)
    assert default_run.summary["max_temp_c"] <= 50.0 + 0.0348 * largest
    assert default_run.summary["fifo_violations"] == 0
