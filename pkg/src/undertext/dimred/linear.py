"""PCA and probabilistic PCA.

PCA is the explicit covariance eigendecomposition; PPCA is the isotropic
factor model ``x = W z + mu + eps`` fitted by EM on the sample covariance,
which keeps each iteration O(D^2 q) regardless of N.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DataError
from .types import Embedding, as_matrix, check_columns, fix_signs


@dataclass
class LinearModel:
    """Affine projection model shared by PCA and PPCA.

    ``components`` rows are orthonormal; for PPCA they are the orthonormal
    basis of the maximum-likelihood subspace and ``eigenvalues`` the modeled
    data variances along them (factor variance + noise floor).
    """

    mean: np.ndarray  # (D,)
    components: np.ndarray  # (q, D)
    eigenvalues: np.ndarray  # (q,) non-increasing, >= 0
    noise_variance: float = 0.0
    converged: bool = True
    loglik_trace: list[float] = field(default_factory=list)

    @property
    def n_dims(self) -> int:
        return self.components.shape[0]


def pca_fit(data, q: int) -> LinearModel:
    """Top-q principal components of the sample covariance (divisor N-1).

    Component rows are sign-fixed so their largest-magnitude entry is
    positive; eigenvalues are floored at zero so rank-deficient data still
    fits cleanly.
    """
    x = as_matrix(data)
    n, d = x.shape
    if n < 2:
        raise DataError(f"PCA needs at least 2 samples, got {n}")
    if not 1 <= q <= min(n - 1, d):
        raise ConfigError(f"q={q} outside 1..min(N-1, D)={min(n - 1, d)}")

    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    if not np.any(cov):
        raise DataError("all rows identical: covariance is zero")

    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:q]
    eigenvalues = np.maximum(evals[order], 0.0)
    components = fix_signs(evecs[:, order].T)
    return LinearModel(mean=mean, components=components, eigenvalues=eigenvalues)


def project_linear(model: LinearModel, data) -> Embedding:
    """Project rows onto the model subspace: (x - mean) @ components.T."""
    x = as_matrix(data)
    check_columns(x, model.mean.shape[0], "project_linear")
    return Embedding(values=(x - model.mean) @ model.components.T)


def ppca_fit(data, q: int, tol: float = 1e-7, max_iter: int = 500) -> LinearModel:
    """Fit PPCA by EM; stops on relative log-likelihood change < tol.

    The returned components span the ML subspace (orthonormalized W),
    eigenvalues are the modeled variances along them, and noise_variance is
    the isotropic residual. Hitting max_iter sets ``converged=False`` rather
    than raising.
    """
    x = as_matrix(data)
    n, d = x.shape
    if n < 2:
        raise DataError(f"PPCA needs at least 2 samples, got {n}")
    if not 1 <= q < d:
        raise ConfigError(f"q={q} outside 1..D-1={d - 1}")
    if not tol > 0:
        raise ConfigError("tol must be positive")

    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / n  # ML covariance, divisor N
    total_var = float(np.trace(cov))
    if total_var == 0.0:
        raise DataError("all rows identical: covariance is zero")

    rng = np.random.default_rng(0)  # fixed stream: the fit takes no seed
    w = rng.standard_normal((d, q)) * np.sqrt(total_var / (d * q))
    sigma2 = 0.5 * total_var / d

    trace: list[float] = []
    converged = False
    prev = -np.inf
    for _ in range(max_iter):
        m = w.T @ w + sigma2 * np.eye(q)
        m_inv = np.linalg.inv(m)
        sw = cov @ w
        w_new = sw @ np.linalg.inv(sigma2 * np.eye(q) + m_inv @ w.T @ sw)
        sigma2 = float(np.trace(cov - sw @ m_inv @ w_new.T)) / d
        sigma2 = max(sigma2, 1e-300)
        w = w_new
        ll = _ppca_loglik(cov, w, sigma2, n, d)
        trace.append(ll)
        if np.isfinite(prev) and ll - prev < tol * abs(prev):
            converged = True
            break
        prev = ll

    u, s, _ = np.linalg.svd(w, full_matrices=False)
    order = np.argsort(s)[::-1]
    components = fix_signs(u[:, order].T)
    eigenvalues = s[order] ** 2 + sigma2
    return LinearModel(
        mean=mean,
        components=components,
        eigenvalues=eigenvalues,
        noise_variance=sigma2,
        converged=converged,
        loglik_trace=trace,
    )


def _ppca_loglik(cov: np.ndarray, w: np.ndarray, sigma2: float, n: int, d: int) -> float:
    c = w @ w.T + sigma2 * np.eye(d)
    sign, logdet = np.linalg.slogdet(c)
    if sign <= 0:
        raise DataError("PPCA model covariance lost positive definiteness")
    return float(-0.5 * n * (d * np.log(2 * np.pi) + logdet + np.trace(np.linalg.solve(c, cov))))
