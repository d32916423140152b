"""Command-line entry point: ``oecsim simulate | plan | profile``.

Exit status is 0 on success (or when every planned set is feasible), 2 when
a planned set is infeasible, and 1 on any error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from .config import ConfigError, RunConfig, format_config, load_config
from .executor import InvariantViolation, Simulation
from .framesource import CloudModel, FrameGenerator, ReplayFrameSource, load_frame_metadata
from .journal import InvocationLog, OutputStore
from .planner import check_feasibility, feasible_subsets, load_platform_params, maximal_feasible
from .scenario import data_path
from .traces import (
    TONGCHUAN,
    ContactSchedule,
    TraceError,
    derive_contacts,
    load_contacts,
    load_power_trace,
    load_trajectory,
    utc_timestamp,
)
from .workload import InvocationModel, estimate_profile, format_profiles, load_profiles, load_samples

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2

log = logging.getLogger("oecsim")


class UsageError(Exception):
    pass


# --- simulate ---------------------------------------------------------------

def build_simulation(cfg: RunConfig, out_dir: Path | None = None) -> Simulation:
    """Load every input named by ``cfg`` (already resolved) and wire a run."""
    power = load_power_trace(cfg.power)
    trajectory = load_trajectory(cfg.trajectory)
    if cfg.contacts == "none":
        contacts = ContactSchedule()
    elif cfg.contacts == "derive":
        contacts = derive_contacts(trajectory, TONGCHUAN)
    else:
        contacts = load_contacts(cfg.contacts)
    profiles = load_profiles(cfg.profiles)
    unknown = [f for f in cfg.functions if f not in profiles]
    if unknown:
        raise UsageError(f"unknown function(s) {', '.join(unknown)}; known: {', '.join(profiles)}")
    start = power.start if cfg.start_s is None else cfg.start_s
    if cfg.frames:
        frames = ReplayFrameSource(load_frame_metadata(cfg.frames, cfg.frame_size))
    else:
        frames = FrameGenerator(
            trajectory, period=cfg.period_s, size=cfg.frame_size,
            cloud=CloudModel(p_exceed_threshold=cfg.cloud_p_exceed, threshold=cfg.cloud_threshold),
            seed=cfg.seed, epoch_utc=utc_timestamp(cfg.epoch_utc) if cfg.epoch_utc else None,
            sunlit_probability=cfg.sunlit_probability, start=start)
    journal = outputs = None
    if out_dir is not None:
        for name in (cfg.journal_file, cfg.outputs_file):
            (out_dir / name).unlink(missing_ok=True)
        journal = InvocationLog(out_dir / cfg.journal_file)
        outputs = OutputStore(out_dir / cfg.outputs_file)
    model = InvocationModel(stochastic=True, seed=cfg.seed) if cfg.stochastic_outputs else None
    return Simulation(cfg.sim_config(), power, contacts, frames, profiles, journal=journal,
                      outputs=outputs, invocation_model=model, start=start, end=cfg.end_s)


def cmd_simulate(args) -> int:
    cfg = load_config(args.config).resolved()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    # the echo goes first so even a failed run can be reproduced
    (out / cfg.echo_file).write_text(format_config(cfg))
    sim = build_simulation(cfg, out)
    t0 = time.perf_counter()
    try:
        report = sim.run()
    finally:
        sim.journal.close()
        sim.outputs.close()
    log.info("simulated %d steps in %.1f s", report.summary["steps"], time.perf_counter() - t0)
    report.write_metrics_csv(out / cfg.metrics_file)
    (out / cfg.summary_file).write_text(report.summary_text())
    (out / cfg.summary_json_file).write_text(json.dumps(report.summary, indent=2) + "\n")
    print(report.summary_text(), end="")
    return EXIT_OK


# --- plan -------------------------------------------------------------------

def _format_report(rep) -> str:
    def flag(ok):
        return "ok" if ok else "VIOLATED"
    name = "{" + ", ".join(rep.functions) + "}"
    return "\n".join([
        f"set {name}: {'feasible' if rep.feasible else 'INFEASIBLE'}",
        f"  power     p_compute {rep.p_compute:.4f} W + p_comm {rep.p_comm:.4f} W, "
        f"margin {rep.power_margin:+.4f} W  [{flag(rep.power_ok)}]",
        f"  downlink  required {rep.downlink_required / 1e3:.2f} kb/s, "
        f"margin {rep.downlink_margin / 1e3:+.2f} kb/s  [{flag(rep.downlink_ok)}]",
        f"  time      per frame {rep.frame_time:.4f} s, margin {rep.time_margin:+.4f} s  [{flag(rep.time_ok)}]",
    ])


def _format_kv(index: int, rep) -> str:
    lines = [f"[set {index}]"]
    for key, value in rep.as_dict().items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = f"{value:.10g}"
        lines.append(f"{key} = {value}")
    return "\n".join(lines)


def _parse_set(spec: str, profiles: dict) -> list:
    names = [s.strip() for s in spec.split(",") if s.strip()]
    unknown = [n for n in names if n not in profiles]
    if unknown:
        raise UsageError(f"unknown function(s) {', '.join(unknown)}; known: {', '.join(profiles)}")
    if len(set(names)) != len(names):
        raise UsageError(f"duplicate function in set {spec!r}")
    return [profiles[n] for n in names]


def cmd_plan(args) -> int:
    params = load_platform_params(args.params or data_path("params.ini"))
    profiles = load_profiles(args.profiles or data_path("profiles.csv"))
    sets = args.set if args.set is not None else [",".join(profiles)]
    requested = [_parse_set(s, profiles) for s in sets]
    reports = [check_feasibility(fs, params) for fs in requested]
    payload = {"sets": [r.as_dict() for r in reports]}
    if not args.json:
        for i, rep in enumerate(reports, start=1):
            print(_format_report(rep))
            print(_format_kv(i, rep))
            print()
    if args.enumerate:
        pool = {p.name: p for fs in requested for p in fs}
        results = feasible_subsets(pool.values(), params)
        maximal = maximal_feasible(results)
        if args.json:
            payload["subsets"] = [r.as_dict() for _, r in results]
            payload["maximal_feasible"] = [list(m) for m in maximal]
        else:
            print(f"\nsubsets of {{{', '.join(pool)}}}:")
            for combo, rep in results:
                names = ",".join(p.name for p in combo) or "(empty)"
                print(f"  {'feasible  ' if rep.feasible else 'infeasible'}  {names}")
            print("maximal feasible sets:")
            for m in maximal:
                print("  {" + ", ".join(m) + "}")
    if args.json:
        print(json.dumps(payload, indent=2))
    return EXIT_OK if all(r.feasible for r in reports) else EXIT_INFEASIBLE


# --- profile ----------------------------------------------------------------

def cmd_profile(args) -> int:
    samples = load_samples(args.samples)
    prof = estimate_profile(samples, args.name, args.package_bytes)
    print(format_profiles([prof]), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="oecsim", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="run the executor over a trace")
    sp.add_argument("--config", required=True, help="run config (sectioned key = value)")
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_simulate)

    pp = sub.add_parser("plan", help="check function sets against the admission constraints")
    pp.add_argument("--params", help="platform parameter file (default: bundled)")
    pp.add_argument("--profiles", help="function profile file (default: bundled)")
    pp.add_argument("--set", action="append",
                    help="comma-separated function names; repeatable; '' is the empty set")
    pp.add_argument("--enumerate", action="store_true",
                    help="also evaluate every subset of the named functions")
    pp.add_argument("--json", action="store_true", help="machine-readable output")
    pp.set_defaults(func=cmd_plan)

    fp = sub.add_parser("profile", help="estimate a function profile from invocation samples")
    fp.add_argument("--samples", required=True, help="CSV: energy_j,duration_s,output_bytes,input_bytes")
    fp.add_argument("--name", default="function")
    fp.add_argument("--package-bytes", type=int, default=0)
    fp.set_defaults(func=cmd_profile)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InvariantViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ConfigError, TraceError, UsageError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
