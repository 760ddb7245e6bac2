# %% [markdown]
# # One over-the-air round
# With no noise and perfect CSI, a round reduces to a weighted average of the
# local updates. With noise on, the round output drifts away from it.

# %%
import numpy as np

from risota.config import ExperimentConfig
from risota.simulation import Experiment

cfg = ExperimentConfig().replace(**{
    "topology.n_users": 3, "topology.n_elements": 8, "data.source": "synthetic",
    "data.n_classes": 3, "data.n_features": 4, "power.beta_u": 100.0,
})
for label, kw in (("noiseless", {"power.uplink_snr_db": None, "power.downlink_snr_db": None}),
                  ("noisy", {})):
    exp = Experiment(cfg.replace(**kw))
    state = exp.initial_state()
    state.w = np.random.default_rng(0).standard_normal(exp.train.model_dim)
    new, rec = exp.run_round(state)
    print(f"{label:9s} taus {rec.taus}  transmitted {rec.transmitted}  "
          f"|w1 - w0| = {np.linalg.norm(new.w - state.w):.4f}")
    print("          uplink misalignment", np.round(rec.mis_up, 4))
