"""End-to-end acceptance criteria, one test per criterion.

Each test evaluates every check of its criterion at the stated tolerance,
prints a single PASS/FAIL line (also repeated in the terminal summary) and
then fails if any check failed.
"""

import time
from collections import Counter

import numpy as np
import pytest
import test_journal
import test_planner
import test_platform
from _support import ACCEPTANCE, flat_power, run_fixture

from oecsim.executor import GatePolicy, SimConfig, Simulation
from oecsim.framesource import CloudModel, FrameGenerator, empirical_filter_rate, prefilter
from oecsim.planner import (
    LinkConfig,
    PlatformParams,
    check_feasibility,
    derive_platform_params,
    downlink_required,
    energy_per_byte,
    frame_time,
    p_comm,
    p_compute,
)
from oecsim.traces import ContactSchedule, PowerTrace
from oecsim.workload import DEFAULT_SET, MEASURED_PROFILES, OVERLOAD_SET, deployment_uplink_seconds

FOUR = [MEASURED_PROFILES[n] for n in DEFAULT_SET]
FIVE = [MEASURED_PROFILES[n] for n in OVERLOAD_SET]
CONTACT = (15189.0, 15459.0)


def _close(value, target, rel=None, abs_=None):
    tol = rel * abs(target) if rel is not None else abs_
    return abs(value - target) <= tol


def _verdict(number, title, checks, started):
    """Record and print the criterion line, then fail on any failed check."""
    failed = [f"{name} ({detail})" for name, ok, detail in checks if not ok]
    status = "PASS" if not failed else "FAIL"
    line = f"criterion {number} {title}: {status} [{len(checks) - len(failed)}/{len(checks)} checks, " \
           f"{time.perf_counter() - started:.1f} s]"
    if failed:
        line += " failed: " + "; ".join(failed)
    ACCEPTANCE.append(line)
    print("\n" + line)
    assert not failed, line


def test_criterion_1_planner_golden_numbers():
    t0 = time.perf_counter()
    P = PlatformParams()
    four, five = check_feasibility(FOUR, P), check_feasibility(FIVE, P)
    checks = [
        ("p_compute 4-set 2.59 W +-2%", _close(p_compute(FOUR, P), 2.59, rel=0.02), f"{p_compute(FOUR, P):.4f}"),
        ("p_compute 5-set 3.02 W +-2%", _close(p_compute(FIVE, P), 3.02, rel=0.02), f"{p_compute(FIVE, P):.4f}"),
        ("p_comm 4-set 0.14 W +-5%", _close(p_comm(FOUR, P), 0.14, rel=0.05), f"{p_comm(FOUR, P):.4f}"),
        ("downlink 4-set 564.34 kb/s +-1%", _close(downlink_required(FOUR, P), 564.34e3, rel=0.01),
         f"{downlink_required(FOUR, P):.0f}"),
        ("downlink 5-set 746.01 kb/s +-1%", _close(downlink_required(FIVE, P), 746.01e3, rel=0.01),
         f"{downlink_required(FIVE, P):.0f}"),
        ("frame_time 4-set 0.266 s +-2%", _close(frame_time(FOUR, P), 0.266, rel=0.02), f"{frame_time(FOUR, P):.4f}"),
        ("4-set feasible", four.feasible, str(four.as_dict())),
        ("5-set infeasible on power and downlink", not five.feasible and not five.power_ok
         and not five.downlink_ok, str(five.as_dict())),
    ]
    elapsed = time.perf_counter() - t0
    checks.append(("runtime milliseconds", elapsed < 0.5, f"{elapsed:.3f} s"))
    _verdict(1, "planner golden numbers", checks, t0)


def test_criterion_2_derived_platform_parameters(fixture6h):
    t0 = time.perf_counter()
    link = LinkConfig()
    e = energy_per_byte(link.antenna_power_w, link.effective_downlink_bps)
    # a contact fraction of 0.75 % over a nominal span
    span = 86_400.0
    b = derive_platform_params(PowerTrace([0.0, 1.0], [15.59, 15.59], [12.64, 12.64]),
                               ContactSchedule(((0.0, 0.0075 * span),)), link, span=span).b_downlink
    means = derive_platform_params(PowerTrace(np.arange(2.0), [15.59] * 2, [12.64] * 2),
                                   ContactSchedule(), link, span=1.0).p_generated
    fixture = derive_platform_params(fixture6h.power, fixture6h.contacts, link).p_generated
    checks = [
        ("e_sendbyte 2 uJ/B", _close(e, 2e-6, rel=1e-12), f"{e:.3e}"),
        ("b_downlink 600 kb/s", _close(b, 600e3, rel=1e-12), f"{b:.1f}"),
        ("p_generated 2.95 W +-1% from trace means", _close(means, 2.95, rel=0.01), f"{means:.4f}"),
        ("p_generated 2.95 W +-1% on bundled fixture", _close(fixture, 2.95, rel=0.01), f"{fixture:.4f}"),
    ]
    _verdict(2, "derived platform parameters", checks, t0)


def test_criterion_3_filter_rate():
    t0 = time.perf_counter()
    cloud = CloudModel()
    frames = FrameGenerator(sunlit_probability=0.408, seed=2023).advance(0.4 * 100_000)
    rate = empirical_filter_rate(prefilter(f) for f in frames)
    checks = [
        ("10^5 frames", len(frames) == 100_000, str(len(frames))),
        ("P(cloud > 0.30) = 0.444", _close(cloud.exceed_probability(), 0.444, abs_=1e-9),
         f"{cloud.exceed_probability():.6f}"),
        ("filter rate 0.77 +-0.02", _close(rate, 0.77, abs_=0.02), f"{rate:.4f}"),
    ]
    _verdict(3, "filter-rate reproduction", checks, t0)


def _longest_run(mask):
    best = cur = 0
    for x in mask:
        cur = cur + 1 if x else 0
        best = max(best, cur)
    return best


def test_criterion_4_six_hour_run(fixture6h):
    t0 = time.perf_counter()
    rep = run_fixture(fixture6h)  # strict: any queue-conservation slip raises
    wall = time.perf_counter() - t0
    s = rep.summary
    soc, temp = rep.column("soc"), rep.column("temp_c")
    gen, plat = rep.column("p_generated_w"), rep.column("p_platform_w")
    q, t = rep.column("queue_len"), rep.column("t_s")
    prev_soc = np.concatenate([[0.60], soc[:-1]])
    prev_temp = np.concatenate([[45.0], temp[:-1]])
    began = rep.dequeued > 0
    bound = 50.0 + 0.0348 * max(p.energy_per_invocation for p in FOUR)
    sent = np.diff(rep.column("bytes_sent_total"), prepend=0.0)
    inside = (t > CONTACT[0] + 1e-9) & (t <= CONTACT[1] + 1e-9)
    p_comm_w = rep.column("p_comm_w")
    full = (sent > 0) & (rep.column("buffer_bytes") > 0)
    halted = (prev_soc < 0.70) & (gen > 0) & (q > 0)
    checks = [
        ("runtime < 60 s", wall < 60.0, f"{wall:.1f} s"),
        ("(a) zero gate violations", s["gate_violations"] == 0 and bool(np.all(prev_soc[began] >= 0.70))
         and bool(np.all(prev_temp[began] < 50.0)), f"{s['gate_violations']}"),
        ("(b) max temp <= overshoot bound", s["max_temp_c"] <= bound, f"{s['max_temp_c']:.4f} vs {bound:.4f}"),
        ("(b) max temp <= 51.6 C", s["max_temp_c"] <= 51.6, f"{s['max_temp_c']:.4f}"),
        ("(c) bytes sent only in contact", bool(np.all(sent[~inside] == 0)) and sent[inside].sum() > 0,
         f"{sent[inside].sum():.0f} B in window"),
        ("(c) comm power ~20 W while draining", bool(full.any()) and bool(np.allclose(p_comm_w[full], 20.0)),
         f"{p_comm_w[full].mean() if full.any() else 0:.3f} W"),
        ("(d) queue conservation per step",
         bool(np.all(q == 4 * rep.column("frames_kept") - rep.column("invocations_done"))), ""),
        ("halt below 70 % SoC despite solar power", bool(halted.any()) and rep.dequeued[halted].sum() == 0
         and _longest_run(halted) * 0.1 >= 600, f"longest halt {_longest_run(halted) * 0.1:.0f} s"),
        ("processing mostly in net-positive periods", rep.dequeued[gen > plat].sum() / rep.dequeued.sum() > 0.5,
         f"{rep.dequeued[gen > plat].sum() / rep.dequeued.sum():.2f}"),
    ]
    _verdict(4, "six-hour fixture run", checks, t0)


def test_criterion_5_ablations(fixture6h):
    t0 = time.perf_counter()
    default = run_fixture(fixture6h, end=4000.0)
    no_check = run_fixture(fixture6h, end=4000.0, gate=False, strict=False)
    overload = run_fixture(fixture6h, OVERLOAD_SET, end=4000.0)
    td, tn = default.time_to_soc(0.70), no_check.time_to_soc(0.70)
    ratio = tn / td if td and tn else float("nan")
    checks = [
        ("no-check exceeds 50 C", no_check.summary["max_temp_c"] > 50.0, f"{no_check.summary['max_temp_c']:.2f}"),
        ("no-check recovers strictly slower", tn is not None and td is not None and tn > td, f"{td} vs {tn}"),
        ("recovery ratio 1.10 +-0.05", _close(ratio, 1.10, abs_=0.05), f"{ratio:.3f}"),
        ("overload ends with larger queue", overload.summary["invocations_pending"]
         > default.summary["invocations_pending"],
         f"{overload.summary['invocations_pending']} vs {default.summary['invocations_pending']}"),
    ]
    _verdict(5, "ablation differentials", checks, t0)


def test_criterion_6_seu_resilience(fixture6h):
    t0 = time.perf_counter()
    kw = dict(end=5800.0, soc=0.75)
    clean = run_fixture(fixture6h, **kw)
    hit = run_fixture(fixture6h, seus=((2100.0, 30.0),), **kw)
    t = hit.column("t_s")
    outage = (t > 2100.0 + 1e-9) & (t <= 2130.0 + 1e-9)
    lost = set(hit.outage_frames)
    expected = Counter(c for c in clean.completions if c[1] not in lost)
    checks = [
        ("(a) p_compute 0 W during outage", outage.sum() == 300
         and bool(np.all(hit.column("p_compute_w")[outage] == 0.0))
         and hit.column("p_compute_w")[~outage].min() > 0, f"{outage.sum()} steps"),
        ("processing resumes after reboot", hit.dequeued[t > 2130.0 + 1e-9].sum() > 0
         and hit.summary["restores"] == 1, ""),
        ("(b) completed multiset equals crash-free run", Counter(hit.completions) == expected,
         f"{len(hit.completions)} vs {sum(expected.values())}; {len(lost)} outage frames"),
        ("(c) zero duplicated outputs", hit.summary["duplicate_outputs_suppressed"] == 0
         and len(set(hit.completions)) == len(hit.completions), ""),
        ("queues drained in both runs", clean.summary["invocations_pending"] == 0
         and hit.summary["invocations_pending"] == 0, ""),
    ]
    _verdict(6, "SEU resilience", checks, t0)


def _passes(fn):
    try:
        fn()
        return True, ""
    except AssertionError as exc:
        return False, str(exc).splitlines()[0][:120]


def test_criterion_7_property_suites(fixture6h):
    t0 = time.perf_counter()
    checks = []
    for name, fn in [
        ("battery bounds, 10^4 ledger sequences", test_platform.test_battery_stays_in_bounds),
        ("planner monotonicity, 10^4 profile sets", test_planner.test_adding_a_function_is_monotone),
        ("planner additivity", test_planner.test_quantities_are_additive),
        ("persistence round trip, 10^3 crash points", test_journal.test_round_trip_under_random_crash_points),
    ]:
        ok, detail = _passes(fn)
        checks.append((name, ok, detail))

    coarse = run_fixture(fixture6h, dt=0.1)
    fine = run_fixture(fixture6h, dt=0.01)
    for key in ("energy_compute_j", "invocations_completed"):
        a, b = coarse.summary[key], fine.summary[key]
        checks.append((f"dt 0.1 vs 0.01 {key} within 1%", _close(a, b, rel=0.01), f"{(a - b) / b:+.4%}"))
    total = lambda r: r.summary["energy_compute_j"] + r.summary["energy_comm_j"]  # noqa: E731
    checks.append(("dt 0.1 vs 0.01 total energy within 1%", _close(total(coarse), total(fine), rel=0.01),
                   f"{(total(coarse) - total(fine)) / total(fine):+.4%}"))

    # gate-open synthetic run: flat surplus power, Bernoulli illumination
    span, p_sun = 20_000.0, 0.408
    cfg = SimConfig(functions=DEFAULT_SET, gate=GatePolicy(enabled=False), initial_soc=0.9, strict=True)
    rep = Simulation(cfg, flat_power(span), ContactSchedule(), FrameGenerator(sunlit_probability=p_sun, seed=7),
                     MEASURED_PROFILES).run()
    simulated = rep.column("p_compute_w").mean()
    r_filter = 1 - p_sun * (1 - CloudModel().exceed_probability())
    planned = p_compute(FOUR, PlatformParams(r_filter=r_filter))
    checks.append(("planner vs simulator mean power within 2%", _close(simulated, planned, rel=0.02),
                   f"{simulated:.4f} vs {planned:.4f}"))
    _verdict(7, "property suites", checks, t0)


def test_criterion_8_uplink():
    t0 = time.perf_counter()
    full = deployment_uplink_seconds(75e6, 1e6, 0.0)
    moisture = deployment_uplink_seconds(MEASURED_PROFILES["moisture"].package_size, 1e6, 0.20)
    checks = [
        ("75 MB at 1 Mb/s is exactly 600 s", full == 600.0, f"{full!r}"),
        ("2.77 MB at 0.8 Mb/s is 27.7 s +-0.1 s", _close(moisture, 27.7, abs_=0.1), f"{moisture:.3f}"),
    ]
    _verdict(8, "deployment uplink model", checks, t0)


@pytest.fixture(scope="module", autouse=True)
def _reset_lines():
    ACCEPTANCE.clear()
    yield
