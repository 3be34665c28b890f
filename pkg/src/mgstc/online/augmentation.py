"""Gaussian input perturbation and the closed-form augmentation gap.

The gap measures how far a sub-population auto-correlation matrix ``R_A``
is from the full one ``R = (1-g) R_A + g R_B`` after whitening by ``R``:
``||R^{-1/2} (R - R_A) R^{-1/2}||_2``. With ``R_A = a I + U diag(nu) U^T``
and ``R_B = b I`` the plain gap is ``g (b - a) / lam`` with
``lam = (1-g) a + g b``; adding input noise of variance ``xi`` gives the
augmented value ``1 - (g (b - a - xi) + lam) / (lam + g |nu|_inf)``.
"""
from __future__ import annotations

import numpy as np

from ..errors import ConfigError, DomainError


# (alpha, beta, gamma, xi, nu_inf)
WORKED_EXAMPLE = (1.0, 2.0, 0.5, 0.2, 1.5)


def augment_sample(x, xi: float, rng: np.random.Generator) -> np.ndarray:
    """``x`` plus i.i.d. N(0, xi) noise; the target is left alone by callers."""
    if xi < 0:
        raise ConfigError(f"perturbation variance must be >= 0, got {xi}")
    x = np.asarray(x, dtype=np.float64)
    return x + np.sqrt(xi) * rng.standard_normal(x.shape)


def _validate(alpha, beta, gamma, xi, nu_inf):
    delta = beta - alpha
    if not 0 < alpha < beta:
        raise DomainError(f"need 0 < alpha < beta, got alpha={alpha}, beta={beta}")
    if not 0 < gamma < 1:
        raise DomainError(f"gamma must lie in (0, 1), got {gamma}")
    if not xi > 0:
        raise DomainError(f"xi must be positive, got {xi}")
    if not delta <= nu_inf <= 2 * delta:
        raise DomainError(f"nu_inf={nu_inf} outside [beta-alpha, 2(beta-alpha)] = [{delta}, {2 * delta}]")


def augmentation_gap(alpha: float, beta: float, gamma: float, xi: float, nu_inf: float):
    """``(gap_plain, gap_augmented)`` from the closed forms."""
    _validate(alpha, beta, gamma, xi, nu_inf)
    lam = (1 - gamma) * alpha + gamma * beta
    plain = gamma * (beta - alpha) / lam
    augmented = 1 - (gamma * (beta - alpha - xi) + lam) / (lam + gamma * nu_inf)
    return plain, augmented


def max_admissible_xi(alpha: float, beta: float, gamma: float, nu_inf: float) -> float:
    """Supremum of the noise variances for which the augmented gap stays below the plain one."""
    delta = beta - alpha
    lam = (1 - gamma) * alpha + gamma * beta
    return 2 * delta - nu_inf + gamma * nu_inf * delta / lam


def explicit_gap_norm(alpha: float, beta: float, gamma: float, u: np.ndarray, nu) -> float:
    """Spectral norm of the whitened gap built from explicit matrices."""
    t = u.shape[0]
    r_a = alpha * np.eye(t) + (u * np.asarray(nu)) @ u.T
    r_b = beta * np.eye(t)
    r = (1 - gamma) * r_a + gamma * r_b
    w, v = np.linalg.eigh(r)
    r_inv_half = (v / np.sqrt(w)) @ v.T
    g = r_inv_half @ (r - r_a) @ r_inv_half
    return float(np.linalg.norm(g, 2))


def random_orthonormal(rng: np.random.Generator, t: int, k: int) -> np.ndarray:
    if not 0 < k < t:
        raise DomainError(f"need 0 < K < T, got K={k}, T={t}")
    q, r = np.linalg.qr(rng.standard_normal((t, k)))
    return q * np.sign(np.diag(r))


def sample_valid_tuple(rng: np.random.Generator) -> tuple:
    """Draw ``(alpha, beta, gamma, xi, nu_inf)`` inside the region where the
    inequality is claimed, with ``xi`` below :func:`max_admissible_xi`."""
    alpha = rng.uniform(0.05, 5.0)
    beta = alpha + rng.uniform(0.05, 5.0)
    gamma = rng.uniform(0.01, 0.99)
    delta = beta - alpha
    nu_inf = rng.uniform(delta, 2 * delta)
    xi = max_admissible_xi(alpha, beta, gamma, nu_inf) * rng.uniform(1e-9, 1 - 1e-9)
    return alpha, beta, gamma, xi, nu_inf


def verify_appendix(n_trials: int, seed: int = 0, n_spectral: int = 200) -> dict:
    """Monte Carlo check of the inequality plus an explicit-matrix cross-check."""
    if n_trials < 1:
        raise ConfigError("n_trials must be >= 1")
    rng = np.random.default_rng(seed)
    violations = 0
    worst_margin = np.inf
    loose = 0
    for _ in range(n_trials):
        alpha, beta, gamma, xi, nu_inf = sample_valid_tuple(rng)
        plain, aug = augmentation_gap(alpha, beta, gamma, xi, nu_inf)
        violations += not aug < plain
        worst_margin = min(worst_margin, plain - aug)
        # same tuple with xi drawn up to beta-alpha, ignoring the admissible cap
        xi_wide = (beta - alpha) * rng.uniform(1e-9, 1.0)
        p2, a2 = augmentation_gap(alpha, beta, gamma, xi_wide, nu_inf)
        loose += not a2 < p2
    max_err = 0.0
    for _ in range(n_spectral):
        t = int(rng.integers(2, 33))
        k = int(rng.integers(1, min(8, t - 1) + 1))
        alpha = rng.uniform(0.05, 5.0)
        beta = alpha + rng.uniform(0.05, 5.0)
        gamma = rng.uniform(0.01, 0.99)
        delta = beta - alpha
        nu = rng.uniform(0.0, 2 * delta, size=k)
        nu[rng.integers(k)] = rng.uniform(delta, 2 * delta)
        u = random_orthonormal(rng, t, k)
        lam = (1 - gamma) * alpha + gamma * beta
        max_err = max(max_err, abs(explicit_gap_norm(alpha, beta, gamma, u, nu) - gamma * delta / lam))
    plain, aug = augmentation_gap(*WORKED_EXAMPLE)
    return {
        "worked_example": {"alpha": 1.0, "beta": 2.0, "gamma": 0.5, "xi": 0.2, "nu_inf": 1.5,
                           "gap_plain": plain, "gap_augmented": aug},
        "n_trials": n_trials,
        "violations": violations,
        "min_margin": float(worst_margin),
        "violations_without_xi_cap": loose,
        "spectral_checks": n_spectral,
        "spectral_max_abs_error": max_err,
    }
