"""Convergence-bound diagnostics evaluated from a finished run.

Every error term, the model-norm accumulator V(t) and the estimation
constant C use realized per-round quantities in place of expectations.  The
results are diagnostics rather than certified bounds, because the smoothness
constant and the SGD variance are user-supplied estimates.
"""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

TAYLOR_QUANTILE = 0.9
TAYLOR_LIMIT = 0.3


@dataclass(frozen=True)
class BoundInputs:
    L: float = 1.0
    sigma2_sgd: float = 1.0
    G: float = 1.0
    F_star: Optional[float] = None
    T: Optional[int] = None

    def __post_init__(self):
        if not self.L > 0 or not self.G > 0 or self.sigma2_sgd < 0:
            raise ValueError("need L > 0, G > 0 and sigma2_sgd >= 0")


@dataclass(frozen=True)
class ErrorDecomposition:
    optimization_error: float
    uplink_noise_error: float
    local_update_error: float
    statistical_error: float
    uplink_estimation_error: float
    downlink_estimation_error: float
    downlink_noise_error: float

    def as_dict(self) -> dict:
        return asdict(self)

    @property
    def total(self) -> float:
        return float(sum(self.as_dict().values()))


@dataclass
class RunLog:
    """Raw per-round quantities, arrays indexed ``[t]`` or ``[t, user]``.

    Complex channel arrays hold the effective (direct + RIS) coefficients; the
    ``*_hat`` variants are the users' estimates.  ``beta_i`` is NaN where the
    power-control factor was undefined (unusable channel).
    """

    alpha: np.ndarray
    p_up: np.ndarray
    eta: float
    G: float
    n_elements: int
    csi_variance: float
    sigma2_u: float
    sigma2_d: float
    w0_norm2: float
    loss_w0: float
    losses: np.ndarray
    beta_u: np.ndarray
    beta_d: np.ndarray
    beta_i: np.ndarray
    h_up: np.ndarray
    h_up_hat: np.ndarray
    h_down: np.ndarray
    h_down_hat: np.ndarray
    h_ub_min: np.ndarray = field(default_factory=lambda: np.zeros(0))
    h_ur_max: np.ndarray = field(default_factory=lambda: np.zeros(0))
    h_rb_max: np.ndarray = field(default_factory=lambda: np.zeros(0))
    g_min: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def T(self) -> int:
        return int(self.beta_u.shape[0])

    @property
    def m(self) -> int:
        return int(self.alpha.shape[0])


def channel_ratio(h, h_hat):
    """``h / h_hat`` written as ``1 - (h_hat - h) / h_hat`` so perfect CSI gives exactly 1."""
    h = np.asarray(h)
    h_hat = np.asarray(h_hat)
    return 1.0 - (h_hat - h) / h_hat


def _usable(h_hat):
    return np.isfinite(h_hat) & (np.abs(h_hat) > 0)


def _ratio_terms(h, h_hat):
    """Per (t, i): ``|h/h_hat|^2`` and ``|1 - h/h_hat|^2``, zero where the estimate is unusable."""
    ok = _usable(h_hat)
    safe = np.where(ok, h_hat, 1.0)
    err = np.where(ok, (safe - h) / safe, 0.0)
    ratio2 = np.where(ok, np.abs(1.0 - err) ** 2, 0.0)
    return ratio2, np.abs(err) ** 2


def v_series(log: RunLog) -> np.ndarray:
    """``V(t)`` for ``t = 0 .. T``."""
    ratio2, _ = _ratio_terms(log.h_up, log.h_up_hat)
    a2 = log.alpha**2
    noise = np.concatenate([[0.0], np.cumsum(log.sigma2_u / log.beta_u**2)])
    weighted = np.concatenate([[0.0], np.cumsum(ratio2 @ a2)])
    t = np.arange(log.T + 1)
    return 2.0 * log.w0_norm2 + noise + 2.0 * t * log.m * log.G**2 * log.eta**2 * weighted


def v_of_t(log: RunLog, t: int) -> float:
    if not 0 <= t <= log.T:
        raise ValueError(f"t={t} outside the logged horizon 0..{log.T}")
    return float(v_series(log)[t])


def corollary_constant(n_elements, csi_variance, h_ub_min, h_ur_max, h_rb_max) -> float:
    """Estimation-error constant; NaN when the weakest direct link is zero."""
    if h_ub_min <= 0:
        return float("nan")
    s2 = csi_variance
    return float(
        s2 * (1.0 + n_elements**2 * (h_ur_max**2 + h_rb_max**2 + s2)) / h_ub_min**2
    )


def run_corollary_constant(log: RunLog) -> float:
    return corollary_constant(
        log.n_elements, log.csi_variance,
        float(np.min(log.h_ub_min)), float(np.max(log.h_ur_max)), float(np.max(log.h_rb_max)),
    )


def empirical_decomposition(log: RunLog, inputs: BoundInputs) -> ErrorDecomposition:
    T = log.T if inputs.T is None else inputs.T
    # eta = 0 lies outside the bound's domain; the 1/eta terms then come out inf or nan
    m, L, G, eta = log.m, inputs.L, inputs.G, np.float64(log.eta)
    a2 = log.alpha**2
    f_star = inputs.F_star
    if f_star is None:
        f_star = float(min(log.loss_w0, np.min(log.losses, initial=np.inf)))

    with np.errstate(divide="ignore", invalid="ignore"):
        optimization = 2.0 * (log.loss_w0 - f_star) / (T * eta)
        inv_beta_bar2 = np.mean(1.0 / log.beta_u**2)
        uplink_noise = L * log.sigma2_u * inv_beta_bar2 / eta

    inv_beta_i2 = np.zeros(m)
    for i in range(m):
        b = log.beta_i[:, i]
        b = b[np.isfinite(b)]
        if b.size:
            inv_beta_i2[i] = np.mean(1.0 / np.abs(b) ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        local_update = (
            2.0 * m * L**2 / (9.0 * eta**2 * G**2) * np.sum(a2 * log.p_up**2 * inv_beta_i2)
        )

    up_ratio2, up_mis = _ratio_terms(log.h_up, log.h_up_hat)
    statistical = L * eta * inputs.sigma2_sgd * np.sum(up_ratio2 @ a2) / T
    uplink_est = 2.0 * m * G**2 * np.sum(up_mis @ a2) / T

    _, down_mis = _ratio_terms(log.h_down, log.h_down_hat)
    V = v_series(log)[:log.T]
    downlink_est = 2.0 * m * L**2 * np.sum((down_mis @ a2) * V) / T

    ok = _usable(log.h_down_hat)
    hd2 = np.where(ok, np.abs(np.where(ok, log.h_down_hat, 1.0)) ** 2, np.inf)
    per_round = (log.sigma2_d / (hd2 * log.beta_d[:, None] ** 2)) @ a2
    downlink_noise = 2.0 * m * L**2 * np.sum(per_round) / T

    return ErrorDecomposition(
        optimization_error=float(optimization),
        uplink_noise_error=float(uplink_noise),
        local_update_error=float(local_update),
        statistical_error=float(statistical),
        uplink_estimation_error=float(uplink_est),
        downlink_estimation_error=float(downlink_est),
        downlink_noise_error=float(downlink_noise),
    )


def csi_ratio_expansion(h: complex, delta: complex):
    """Exact ``h / (h + delta)`` and its first-order expansion ``1 - delta / h``."""
    if h == 0:
        raise ValueError("true channel must be nonzero")
    if h + delta == 0:
        raise ValueError("estimated channel is zero")
    return h / (h + delta), 1.0 - delta / h


def relative_estimation_errors(log: RunLog) -> np.ndarray:
    """All finite ``|delta / h|`` values of the run, uplink and downlink pooled."""
    vals = []
    for h, h_hat in ((log.h_up, log.h_up_hat), (log.h_down, log.h_down_hat)):
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.abs((h_hat - h) / h)
        vals.append(r[np.isfinite(r)])
    return np.concatenate(vals)


def taylor_regime_ok(log: RunLog, warn: bool = True) -> bool:
    r = relative_estimation_errors(log)
    if r.size == 0:
        return True
    q = float(np.quantile(r, TAYLOR_QUANTILE))
    ok = q <= TAYLOR_LIMIT
    if not ok and warn:
        warnings.warn(
            f"90th percentile of |delta/h| is {q:.3g} > {TAYLOR_LIMIT}; "
            "first-order CSI expansion is unreliable for this run",
            RuntimeWarning,
            stacklevel=2,
        )
    return ok


def diagnostics(log: RunLog, inputs: BoundInputs, warn: bool = True) -> dict:
    """JSON-ready summary of the bound diagnostics."""
    decomposition = empirical_decomposition(log, inputs)
    return {
        "C": run_corollary_constant(log),
        "V_of_T": float(v_series(log)[-1]),
        "terms": decomposition.as_dict(),
        "taylor_regime_ok": taylor_regime_ok(log, warn=warn),
    }
