"""Analog downlink broadcast and over-the-air uplink aggregation.

Model vectors are real; transmitted symbols and channels are complex.  After
descaling (downlink) or aggregation (uplink) the real part is kept, since the
imaginary component carries only noise and misalignment.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import complex_normal

OFFLINE_THRESHOLD = 1e-12
# Relative slack so a channel sitting exactly on the power threshold passes.
_BOUNDARY_RTOL = 1e-12


@dataclass(frozen=True)
class PowerPolicy:
    p_up: np.ndarray
    p_down: float
    beta_u: float
    sigma2_u: float
    sigma2_d: float

    @classmethod
    def from_snr(cls, p_up, p_down, beta_u, uplink_snr_db, downlink_snr_db, n_users=None):
        p_up = np.asarray(p_up, dtype=float)
        if n_users is not None:
            p_up = np.broadcast_to(p_up, (n_users,)).copy()
        if np.any(p_up <= 0) or p_down <= 0 or beta_u <= 0:
            raise ValueError("power budgets and beta_u must be positive")
        # Every user shares one noise floor, set by the reference user budget.
        sigma2_u = float(np.max(p_up)) / 10 ** (uplink_snr_db / 10)
        sigma2_d = float(p_down) / 10 ** (downlink_snr_db / 10)
        return cls(p_up, float(p_down), float(beta_u), sigma2_u, sigma2_d)


def downlink_scale(w, p_down):
    """Return ``(x_d, beta_d)`` with ``||x_d||^2 = p_down``; a zero model sends nothing with beta_d = 1."""
    w = np.asarray(w, dtype=float)
    norm = np.linalg.norm(w)
    if norm == 0:
        return np.zeros_like(w), 1.0
    beta_d = np.sqrt(p_down) / norm
    return beta_d * w, float(beta_d)


def downlink_receive(x_d, h_eff, h_eff_hat, beta_d, sigma2_d, rng):
    """Receive ``y = h x_d + z`` and descale by ``beta_d * h_hat``; returns ``None`` when offline."""
    if abs(h_eff_hat) < OFFLINE_THRESHOLD:
        return None
    y = h_eff * np.asarray(x_d)
    if sigma2_d > 0:
        y = y + complex_normal(rng, y.shape, sigma2_d)
    return np.real(y / (beta_d * h_eff_hat))


def misalignment(h, h_hat) -> np.ndarray:
    """``|1 - h / h_hat|^2``, the squared multiplicative inversion error."""
    return np.abs(1.0 - np.asarray(h) / np.asarray(h_hat)) ** 2


def pc_factor(beta_u, alpha, tau, h_eff_hat):
    """Channel-inversion factor ``beta_u alpha / (tau h_hat)``; ``None`` when the channel is unusable."""
    if tau < 1:
        raise ValueError("tau must be >= 1")
    if abs(h_eff_hat) < OFFLINE_THRESHOLD:
        return None
    return beta_u * alpha / (tau * complex(h_eff_hat))


def check_power(beta_i, tau, eta, G, power) -> bool:
    """Transmit-power criterion ``3 eta^2 |beta_i| tau G^2 <= P`` (inclusive)."""
    lhs = 3.0 * eta**2 * abs(beta_i) * tau * G**2
    return bool(lhs <= power * (1.0 + _BOUNDARY_RTOL))


def uplink_scale(delta, beta_i):
    """Return ``(x_i, power)`` where ``x_i = beta_i * delta`` and ``power = ||x_i||^2``."""
    x = complex(beta_i) * np.asarray(delta, dtype=float)
    return x, float(np.vdot(x, x).real)


def uplink_aggregate(w, signals, h_eff, beta_u, sigma2_u, rng):
    """Superpose the users' signals over their true channels and apply the noisy sum to ``w``.

    ``signals`` maps user index to its complex transmit vector; silent users are
    simply absent.  Summation runs in increasing user index.
    """
    w = np.asarray(w, dtype=float)
    y = np.zeros(w.shape, dtype=complex)
    for i in sorted(signals):
        y += h_eff[i] * signals[i]
    if sigma2_u > 0:
        y += complex_normal(rng, w.shape, sigma2_u)
    return w + np.real(y) / beta_u
