"""Compare plain, pre-trained and retrained surrogate search under one budget.

Run: python3 demos/03_strategies.py
"""
# %%
from saea import harness, optim, traffic
from saea import surrogate as sg

inst = traffic.generate_instance(seed=7, grid=(2, 2), n_vehicles=60, t_s=400)
res = harness.run_experiment(
    inst, algorithms=("pso",), n_ts=(100,), runs=2,
    base=optim.RunConfig(population_size=50, max_fe=600),
    train_cfg=sg.TrainConfig(epochs=20), track_memory=False,
)

# %% Fewer true evaluations, at the price of training and prediction energy.
for s in res.summary:
    print(f"{s['strategy']:>8} seed {s['seed']}: best F {s['best_F']:.4f} "
          f"true evals {s['true_evaluations']:4d}  trainings {s['trainings']}")

# %% Where did the joules go? Mean over runs per component.
for r in res.report:
    if r["measure"] == "total_j" and r["mean"] != "NA":
        print(f"{r['strategy']:>8} {r['component']:>14}: {r['mean']:9.3f} J")

# %% How wrong was the surrogate during the search?
for r in res.audit:
    print(f"{r['strategy']:>8} generation {r['generation']:2d}: MAPE {r['mape']:.1f}% on {r['n_audited']} points")
