"""RIS phase design by successive convex approximation.

The anchor user's estimated effective channel ``h_ub + g^H theta`` is pushed
toward the real power-control threshold by minimizing
``|s - g^H exp(j phi)|^2`` over the phase angles ``phi``.  Each SCA step
minimizes the proximal surrogate

    f1(phi_j) + grad f1(phi_j)^T (phi - phi_j) + lam/2 ||phi - phi_j||^2,

whose minimizer is the plain gradient step ``phi_j - grad / lam``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

LAMBDA_FLOOR = 1e-12


@dataclass(frozen=True)
class PhaseVector:
    phi: np.ndarray

    @property
    def theta(self) -> np.ndarray:
        return np.exp(1j * self.phi)

    @property
    def n_elements(self) -> int:
        return self.phi.shape[0]

    @classmethod
    def zeros(cls, n: int) -> "PhaseVector":
        return cls(np.zeros(n))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "PhaseVector":
        return cls(rng.uniform(0.0, 2 * np.pi, n))


@dataclass(frozen=True)
class ScaConfig:
    max_iters: int = 50
    step_curvature: Union[float, str] = "auto"
    tol: float = 1e-8

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.step_curvature != "auto" and not float(self.step_curvature) > 0:
            raise ValueError("step_curvature must be positive or 'auto'")
        if self.tol < 0:
            raise ValueError("tol must be nonnegative")


@dataclass(frozen=True)
class ScaProblem:
    """Fit ``g^H theta`` to the complex target ``s``; ``U = g g^H`` is kept implicit."""

    g: np.ndarray
    s: complex

    @property
    def v(self) -> np.ndarray:
        return self.s * self.g

    def apply_u(self, theta: np.ndarray) -> np.ndarray:
        return self.g * (np.conj(self.g) @ theta)


def select_phase_user(prev_taus) -> int:
    """Anchor user: largest previous local-step count, lowest index on ties."""
    taus = np.asarray(prev_taus)
    if taus.size == 0:
        raise ValueError("no users")
    return int(np.argmax(taus))


def power_threshold(beta_u, alpha, eta, G, power) -> float:
    """Smallest estimated channel magnitude that passes the transmit-power criterion."""
    if not power > 0:
        raise ValueError("transmit power must be positive")
    return 3.0 * eta**2 * beta_u * alpha * G**2 / power


def build_phase_problem(g_hat, h_ub_hat, beta_u, alpha, eta, G, power) -> ScaProblem:
    g_hat = np.asarray(g_hat, dtype=complex)
    values = (h_ub_hat, beta_u, alpha, eta, G, power)
    if not (np.all(np.isfinite(g_hat)) and all(np.isfinite(v) for v in values)):
        raise ValueError("phase problem inputs must be finite")
    s = power_threshold(beta_u, alpha, eta, G, power) - complex(h_ub_hat)
    return ScaProblem(g_hat, complex(s))


def objective(problem: ScaProblem, phi) -> float:
    z = np.conj(problem.g) @ np.exp(1j * np.asarray(phi))
    return float(abs(problem.s - z) ** 2)


def surrogate_base(problem: ScaProblem, phi) -> float:
    """``f1 = theta^H U theta - 2 Re(theta^H v)``, i.e. the objective minus ``|s|^2``."""
    theta = np.exp(1j * np.asarray(phi))
    z = np.conj(problem.g) @ theta
    return float(abs(z) ** 2 - 2.0 * np.real(np.conj(z) * problem.s))


def gradient(problem: ScaProblem, phi) -> np.ndarray:
    """d f1 / d phi_n = 2 Im{ conj(theta_n) (U theta - v)_n }."""
    theta = np.exp(1j * np.asarray(phi))
    residual = problem.apply_u(theta) - problem.v
    return 2.0 * np.imag(np.conj(theta) * residual)


def curvature_bound(problem: ScaProblem) -> float:
    lam = 4.0 * (np.sum(np.abs(problem.g) ** 2) + np.sum(np.abs(problem.v)))
    return float(max(lam, LAMBDA_FLOOR))


def surrogate(problem: ScaProblem, phi, phi_ref, lam: float) -> float:
    phi = np.asarray(phi)
    phi_ref = np.asarray(phi_ref)
    step = phi - phi_ref
    return (
        surrogate_base(problem, phi_ref)
        + float(gradient(problem, phi_ref) @ step)
        + 0.5 * lam * float(step @ step)
    )


@dataclass
class ScaResult:
    phase: PhaseVector
    objectives: list = field(default_factory=list)
    n_iter: int = 0
    step_curvature: float = 0.0

    @property
    def objective(self) -> float:
        return self.objectives[-1]


def sca_solve(problem: ScaProblem, config: ScaConfig = ScaConfig(), phi_init=None) -> ScaResult:
    """Run up to ``config.max_iters`` surrogate steps; ``objectives[0]`` is the start value."""
    n = problem.g.shape[0]
    phi = np.zeros(n) if phi_init is None else np.array(phi_init, dtype=float)
    if phi.shape != (n,):
        raise ValueError(f"phi_init has shape {phi.shape}, expected ({n},)")
    if config.step_curvature == "auto":
        lam = curvature_bound(problem)
    else:
        lam = float(config.step_curvature)

    objectives = [objective(problem, phi)]
    n_iter = 0
    for _ in range(config.max_iters):
        grad = gradient(problem, phi)
        if not np.all(np.isfinite(grad)):
            raise FloatingPointError(f"non-finite SCA gradient at iteration {n_iter}")
        step = grad / lam
        phi = phi - step
        n_iter += 1
        objectives.append(objective(problem, phi))
        if np.max(np.abs(step), initial=0.0) < config.tol:
            break
    return ScaResult(PhaseVector(phi), objectives, n_iter, lam)
