"""Named, order-independent random streams.

A root seed is expanded through :class:`numpy.random.SeedSequence` spawn keys
``(purpose, round, user)``.  Two calls with the same key always yield the same
generator, regardless of how many other streams were drawn before, so running
per-user work in parallel never changes the draws.
"""
from __future__ import annotations

import numpy as np

# Stable integer tags; never renumber, recorded runs depend on them.
PURPOSES = {
    "topology": 1,
    "direct": 2,
    "ris_user": 3,
    "ris_bs": 4,
    "csi": 5,
    "downlink_noise": 6,
    "local_sgd": 7,
    "uplink_noise": 8,
    "static_phase": 9,
    "calibration": 10,
    "dataset": 11,
    "bench": 12,
}


def stream(seed: int, purpose: str, *key: int) -> np.random.Generator:
    """Return the generator for ``(seed, purpose, *key)``."""
    tag = PURPOSES[purpose]
    ss = np.random.SeedSequence(int(seed), spawn_key=(tag, *(int(k) for k in key)))
    return np.random.Generator(np.random.PCG64(ss))


def complex_normal(rng: np.random.Generator, shape, variance=1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian with *total* variance ``variance``.

    Real and imaginary parts each carry half the variance.  ``variance`` may be
    an array broadcastable to ``shape``.
    """
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return np.sqrt(np.asarray(variance, dtype=float) / 2.0) * z
