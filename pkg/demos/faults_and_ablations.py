"""Fault injection and the two ablations on the first 4000 s of the fixture.

    python3 demos/faults_and_ablations.py
"""

from collections import Counter

from oecsim.executor import GatePolicy, SimConfig, Simulation
from oecsim.framesource import FrameGenerator
from oecsim.scenario import load_fixture
from oecsim.workload import DEFAULT_SET, MEASURED_PROFILES, OVERLOAD_SET

fx = load_fixture()


def run(functions=DEFAULT_SET, end=4000.0, soc=0.60, gate=True, seus=()):
    cfg = SimConfig(functions=functions, gate=GatePolicy(enabled=gate), initial_soc=soc, seus=seus)
    frames = FrameGenerator(fx.trajectory, seed=1)
    return Simulation(cfg, fx.power, fx.contacts, frames, MEASURED_PROFILES, end=end).run()


base, no_check, overload = run(), run(gate=False), run(OVERLOAD_SET)
print("ablations over [0, 4000] s from 60 % charge")
for name, rep in [("default", base), ("no-check", no_check), ("overload", overload)]:
    t70 = rep.time_to_soc(0.70)
    print(f"  {name:9s} max temp {rep.summary['max_temp_c']:5.2f} C, back to 70 % after "
          f"{t70:6.0f} s, pending at end {rep.summary['invocations_pending']}")
print(f"  no-check takes {no_check.time_to_soc(0.70) / base.time_to_soc(0.70) - 1:.1%} longer to recover")

print("\nsingle-event upset at 2100 s, 30 s reboot")
clean = run(end=5800.0, soc=0.75)
hit = run(end=5800.0, soc=0.75, seus=((2100.0, 30.0),))
lost = set(hit.outage_frames)
same = Counter(hit.completions) == Counter(c for c in clean.completions if c[1] not in lost)
off = hit.column("p_compute_w")[~hit.device_on]
print(f"  {len(lost)} frames dropped while the board was down, compute draw then {off.max():.1f} W")
print(f"  completed invocations match the crash-free run outside the outage: {same}")
print(f"  duplicate outputs suppressed: {hit.summary['duplicate_outputs_suppressed']}")
