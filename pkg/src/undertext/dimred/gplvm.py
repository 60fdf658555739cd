"""Gaussian process latent variable model.

Maximizes the GP marginal log-likelihood
``-(D/2) ln|K| - (1/2) tr(K^-1 Y Y^T) - (nD/2) ln 2pi`` over the latent
coordinates and the kernel hyperparameters (signal variance, inverse length
scale, noise variance, all optimized in log space) with an RBF kernel
``sf2 * exp(-gamma/2 |x_i - x_j|^2) + sn2 I``. Gradients are analytic; the
optimizer is a quasi-Newton line search (L-BFGS-B), which only ever accepts
improving steps, so the returned objective is never below the initial one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

from ..errors import ConfigError, NumericError
from .types import Embedding, as_matrix, check_columns
from .linear import pca_fit, project_linear

JITTER_MAX_REL = 1e-2
_LOG_BOUND = 25.0  # keeps exp() of log-hyperparameters finite


@dataclass
class GplvmModel:
    latent: np.ndarray  # (n, q)
    signal_variance: float
    inv_lengthscale: float
    noise_variance: float
    training_outputs: np.ndarray  # (n, D), as passed in
    objective: float
    objective_init: float

    @property
    def n_dims(self) -> int:
        return self.latent.shape[1]


def _chol_with_jitter(k: np.ndarray, jitter_rel: float):
    """Cholesky with escalating relative jitter, per the PD contract."""
    scale = float(np.mean(np.diag(k)))
    rel = jitter_rel
    while rel <= JITTER_MAX_REL:
        try:
            return cho_factor(k + rel * scale * np.eye(k.shape[0]), lower=True)
        except np.linalg.LinAlgError:
            rel *= 10.0
    raise NumericError("kernel matrix not positive definite even at maximum jitter")


def marginal_likelihood(
    latent: np.ndarray,
    log_hypers: np.ndarray,
    outputs: np.ndarray,
    jitter_rel: float = 1e-8,
):
    """Objective and analytic gradients at (latent, log hyperparameters).

    Returns ``(value, grad_latent, grad_log_hypers)`` where the gradients are
    of the log-likelihood (ascent direction). Exposed separately so the
    finite-difference check can probe it directly.
    """
    x = np.asarray(latent, np.float64)
    yc = outputs - outputs.mean(axis=0)
    n, d = yc.shape
    sf2, gamma, sn2 = np.exp(np.clip(log_hypers, -_LOG_BOUND, _LOG_BOUND))

    sq = cdist(x, x, "sqeuclidean")
    k_rbf = sf2 * np.exp(-0.5 * gamma * sq)
    k = k_rbf + sn2 * np.eye(n)

    cho = _chol_with_jitter(k, jitter_rel)
    logdet = 2.0 * float(np.sum(np.log(np.diag(cho[0]))))
    alpha = cho_solve(cho, yc)  # K^-1 Y
    k_inv = cho_solve(cho, np.eye(n))

    value = -0.5 * d * logdet - 0.5 * float(np.sum(alpha * yc)) - 0.5 * n * d * np.log(2 * np.pi)

    g = 0.5 * (alpha @ alpha.T - d * k_inv)  # dL/dK, symmetric
    w = g * k_rbf
    grad_latent = -2.0 * gamma * (x * w.sum(axis=1)[:, None] - w @ x)
    grad_hypers = np.array(
        [
            float(np.sum(g * k_rbf)),  # d/d log sf2
            float(np.sum(w * (-0.5 * gamma * sq))),  # d/d log gamma
            sn2 * float(np.trace(g)),  # d/d log sn2
        ]
    )
    return value, grad_latent, grad_hypers


def gplvm_fit(
    data, q: int, max_iter: int = 200, jitter: float = 1e-8, seed: int = 0, cap: int = 500
) -> GplvmModel:
    """Fit the GPLVM on at most ``cap`` points; latents start from PCA."""
    y = as_matrix(data)
    n, d = y.shape
    if n > cap:
        raise ConfigError(f"gplvm: {n} points exceed the configured cap {cap}; subsample first")
    if q < 1:
        raise ConfigError(f"q must be >= 1, got {q}")

    yc = y - y.mean(axis=0)
    total_var = float(np.mean(np.sum(yc**2, axis=1)))
    if total_var == 0.0:
        # all rows identical: nothing to embed, return a trivial stationary model
        latent = np.zeros((n, q))
        hypers = np.log([1.0, 1.0, 1.0])
        value, _, _ = marginal_likelihood(latent, hypers, y, jitter)
        return GplvmModel(latent, 1.0, 1.0, 1.0, y, value, value)

    q_pca = min(q, y.shape[1], n - 1) if n > 1 else q
    latent0 = np.zeros((n, q))
    if n > 1:
        pca = pca_fit(y, q_pca)
        latent0[:, :q_pca] = project_linear(pca, y).values
    spread = latent0.std()
    if spread > 0:
        latent0 /= spread
    else:
        latent0 = np.random.default_rng(seed).standard_normal((n, q)) * 0.1

    sf2_0 = total_var / d
    hypers0 = np.log([sf2_0, 1.0, 0.01 * sf2_0 + 1e-12])
    theta0 = np.concatenate([latent0.ravel(), hypers0])

    def negative(theta):
        lat = theta[: n * q].reshape(n, q)
        value, g_lat, g_hyp = marginal_likelihood(lat, theta[n * q :], y, jitter)
        return -value, -np.concatenate([g_lat.ravel(), g_hyp])

    f0 = -negative(theta0)[0]
    bounds = [(None, None)] * (n * q) + [(-_LOG_BOUND, _LOG_BOUND)] * 3
    result = minimize(
        negative,
        theta0,
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={"maxiter": max_iter},
    )
    theta = result.x if -result.fun >= f0 else theta0
    final = max(-result.fun, f0)

    latent = theta[: n * q].reshape(n, q)
    sf2, gamma, sn2 = np.exp(np.clip(theta[n * q :], -_LOG_BOUND, _LOG_BOUND))
    return GplvmModel(
        latent=latent,
        signal_variance=float(sf2),
        inv_lengthscale=float(gamma),
        noise_variance=float(sn2),
        training_outputs=y,
        objective=float(final),
        objective_init=float(f0),
    )


def gplvm_project(model: GplvmModel, data) -> Embedding:
    """Similarity-weighted average of training latents.

    Weights ``w_i propto exp(-gamma/2 |y - y_i|^2)`` over the training
    outputs, normalized to sum 1 (softmax with the max exponent subtracted
    for stability, so an isolated training output maps onto its own latent).
    """
    y = as_matrix(data)
    check_columns(y, model.training_outputs.shape[1], "gplvm_project")
    out = np.empty((y.shape[0], model.latent.shape[1]))
    block = max(1, int(2_000_000 // max(model.training_outputs.shape[0], 1)))
    for start in range(0, y.shape[0], block):
        stop = min(start + block, y.shape[0])
        sq = cdist(y[start:stop], model.training_outputs, "sqeuclidean")
        logits = -0.5 * model.inv_lengthscale * sq
        logits -= logits.max(axis=1, keepdims=True)
        weights = np.exp(logits)
        weights /= weights.sum(axis=1, keepdims=True)
        out[start:stop] = weights @ model.latent
    return Embedding(values=out)
