"""Build a small signalized grid and look at how timing plans score.

Run: python3 demos/01_simulate_instance.py
"""
# %%
import numpy as np

from saea import traffic

inst = traffic.generate_instance(seed=7, grid=(2, 2), n_vehicles=60, t_s=400)
print(f"{inst.name}: {len(inst.intersections)} intersections, {len(inst.links)} links, "
      f"{inst.n_vehicles} vehicles, D={inst.dimension}, durations in {inst.duration_bounds}")

# %% Every plan is a vector of phase durations. Score a few random ones.
rng = np.random.default_rng(0)
plans = [traffic.random_solution(inst, rng) for _ in range(5)]
for x in plans:
    out = traffic.simulate(inst, x)
    print(f"F={traffic.objective(inst, x):7.4f}  arrived={out.arrived:3d}  stuck={out.not_arrived:3d}  "
          f"travel={out.total_travel_time:5d}  waiting={out.total_waiting_time:5d}")

# %% Short greens everywhere versus long greens everywhere.
lo, hi = inst.duration_bounds
for label, x in (("all short", np.full(inst.dimension, lo)), ("all long", np.full(inst.dimension, hi))):
    print(f"{label:>9}: F={traffic.objective(inst, x):.4f}  phase ratio={traffic.phase_ratio(inst, x):.2f}")

# %% Files carry a format version and round-trip exactly.
traffic.save_instance(inst, "/tmp/demo_instance.json")
assert traffic.load_instance("/tmp/demo_instance.json") == inst
print("instance written to /tmp/demo_instance.json")
