# %% [markdown]
# # Training on MNIST
# Compare the adaptive phase, a noiseless downlink and a frozen random phase.
# Set ROUNDS to 500 to match the acceptance run (a few minutes).

# %%
import numpy as np

from risota.config import load_config
from risota.simulation import load_datasets, run_experiment

ROUNDS = 100
cfg = load_config("configs/fig2.json")
data = load_datasets(cfg)

curves = {}
for variant in ("proposed", "noiseless_downlink", "static_phase"):
    res = run_experiment(cfg.replace(variant=variant), data, rounds=ROUNDS)
    curves[variant] = res.accuracies
    print(f"{variant:20s} final accuracy {res.final_accuracy:.4f}")

# %%
for t in range(0, ROUNDS, max(1, ROUNDS // 10)):
    print(t, "  ".join(f"{curves[v][t]:.3f}" for v in curves))
