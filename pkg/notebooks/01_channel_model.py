# %% [markdown]
# # Channel model
# Place the users, build the path-loss table and look at one round of fading.

# %%
import numpy as np

from risota.channel import (
    ChannelConfig, GeometryConfig, build_topology, draw_round_channels, effective_channels,
    path_loss_table,
)
from risota.rng import stream

topo = build_topology(GeometryConfig(), stream(0, "topology"))
table = path_loss_table(topo, ChannelConfig())
print("user positions (x, y):")
print(np.round(topo.user_positions[:, :2], 1))

# %% [markdown]
# Gains are relative to the reference gain, so a value of 1 means a link whose
# receive SNR equals the configured transmit SNR.

# %%
print("direct gain (dB):  ", np.round(10 * np.log10(table.direct_gain), 1))
print("RIS cascade gain (dB):", np.round(10 * np.log10(table.cascade_gain), 1))

# %%
ch = draw_round_channels(table, seed=0, t=0)
for phase_name, theta in (("all zero", np.ones(table.n_elements)),
                          ("random", np.exp(2j * np.pi * np.random.default_rng(1).random(table.n_elements)))):
    up, down = effective_channels(ch, theta)
    print(f"{phase_name:9s} |h_up| = {np.round(np.abs(up), 2)}")
