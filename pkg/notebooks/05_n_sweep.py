# %% [markdown]
# # Number of RIS elements
# Final accuracy and the estimation constant C as the surface grows.

# %%
import numpy as np

from risota.config import load_config
from risota.simulation import sweep_n

ROUNDS = 100
cfg = load_config("configs/fig2.json")
out = sweep_n(cfg, [15, 45, 75], seeds=[0], rounds=ROUNDS)
for n, runs in out.items():
    acc = np.mean([r.final_accuracy for r in runs])
    c = np.mean([r.diagnostics["C"] for r in runs])
    print(f"N={n:3d}  final accuracy {acc:.4f}  C {c:.3g}")
