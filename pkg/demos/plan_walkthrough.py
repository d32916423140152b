"""Admission planning before deployment.

Derive the platform budget from the fixture traces and the link, then check
which combinations of the five candidate functions fit it.

    python3 demos/plan_walkthrough.py
"""

from oecsim.planner import (
    LinkConfig,
    PlatformParams,
    check_feasibility,
    derive_platform_params,
    feasible_subsets,
    maximal_feasible,
)
from oecsim.scenario import load_fixture
from oecsim.workload import MEASURED_PROFILES, OVERLOAD_SET, deployment_uplink_seconds

fx = load_fixture()
link = LinkConfig()
derived = derive_platform_params(fx.power, fx.contacts, link)
print("budget from the fixture traces:")
print(f"  surplus power  {derived.p_generated:.3f} W")
print(f"  downlink       {derived.b_downlink / 1e3:.1f} kb/s averaged over the run")
print(f"  energy/byte    {derived.e_sendbyte * 1e6:.2f} uJ")

params = PlatformParams()  # the published long-run figures
print(f"\nplanning against {params.p_generated:.2f} W and {params.b_downlink / 1e3:.0f} kb/s")
candidates = [MEASURED_PROFILES[n] for n in OVERLOAD_SET]
for combo, rep in feasible_subsets(candidates, params):
    if len(combo) >= 4:
        names = ", ".join(p.name for p in combo)
        print(f"  {'ok ' if rep.feasible else 'NO '} {{{names}}}: {rep.p_compute + rep.p_comm:.3f} W, "
              f"{rep.downlink_required / 1e3:.1f} kb/s, {rep.frame_time:.3f} s/frame")

print("\nlargest sets that fit:")
for names in maximal_feasible(feasible_subsets(candidates, params)):
    print("  {" + ", ".join(names) + "}")

five = check_feasibility(candidates, params)
print(f"\nall five: power margin {five.power_margin:+.3f} W, downlink margin "
      f"{five.downlink_margin / 1e3:+.1f} kb/s")

moisture = MEASURED_PROFILES["moisture"]
print(f"\nuplinking the {moisture.package_size / 1e6:.2f} MB moisture package takes "
      f"{deployment_uplink_seconds(moisture.package_size, link.uplink_bps, link.overhead):.1f} s")
