"""What does a surrogate cost to train and to use, and when does a bigger one pay off?

Energy is the wall-time proxy unless RAPL counters are readable.
Run: python3 demos/02_surrogate_energy.py
"""
# %%
import numpy as np

from saea import harness, stats, traffic

inst = traffic.generate_instance(seed=7, grid=(2, 2), n_vehicles=60, t_s=400)

# %% Profile true evaluations; the same rows form the training archive.
bench = harness.eval_bench(inst, n=700, seed=1, track_memory=False)
for row in bench.summary:
    if row["metric"] in ("total_j", "wall_s"):
        print(f"evaluation {row['metric']}: E={row['E']:.3g}  SD={row['SD']:.3g}  NMSE={row['nmse']:.3f}")

# %% Train on two dataset sizes, three repetitions each.
res = harness.train_bench(bench.X, bench.y, grid=(128, 512), repetitions=3, track_memory=False)
for size in (128, 512):
    q = [r for r in res.quality if r["size"] == size]
    print(f"size {size:>4}: MAPE {np.mean([r['mape'] for r in q]):5.2f}%  "
          f"hidden-1 zeros {np.mean([r['zero_ratio_hidden1'] for r in q]):4.1f}%")


# %% Mean joules per training run and per prediction, then the break-even use count.
def mean_j(rows, size):
    return float(np.mean([r["total_j"] for r in rows if r["size"] == size]))


e = [mean_j(res.training, 128), mean_j(res.use, 128), mean_j(res.training, 512), mean_j(res.use, 512)]
try:
    print(f"break-even after {stats.break_even(*e):.0f} uses")
except ValueError as exc:
    # per-use cost barely depends on dataset size, so the gap can have either sign
    print(f"no break-even here: {exc}")
