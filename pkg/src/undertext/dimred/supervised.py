"""Supervised embeddings trained on operator-labeled pixels.

LDA is the multiclass canonical-variates construction (scatter matrices plus
shrinkage); GDA is the kernel Fisher discriminant solved in the dual; NCA
maximizes the stochastic leave-one-out neighbor objective by gradient ascent
with a backtracking line search.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh
from scipy.special import logsumexp
from scipy.spatial.distance import cdist, pdist

from ..errors import ConfigError, DataError, NumericError
from .types import Embedding, as_matrix, check_columns, fix_signs
from .linear import pca_fit


def _class_info(labels) -> tuple[np.ndarray, list[int], list[np.ndarray]]:
    y = np.asarray(labels).ravel().astype(np.int64)
    classes = sorted(set(y.tolist()))
    if len(classes) < 2:
        raise DataError(f"need at least 2 classes, got {len(classes)}")
    members = [np.flatnonzero(y == c) for c in classes]
    for c, rows in zip(classes, members):
        if rows.size < 2:
            raise DataError(f"class {c} has {rows.size} samples; need at least 2")
    return y, classes, members


# ---------------------------------------------------------------------------
# LDA / CVA


@dataclass
class LdaModel:
    classes: list[int]
    class_means: np.ndarray  # (C, D)
    within_scatter: np.ndarray  # (D, D)
    between_scatter: np.ndarray  # (D, D)
    shrinkage: float
    directions: np.ndarray  # (q, D), unit rows
    eigenvalues: np.ndarray  # (q,)
    global_mean: np.ndarray  # (D,)
    degenerate: bool = False

    @property
    def n_dims(self) -> int:
        return self.directions.shape[0]


def lda_fit(data, labels, q: int, lambda_rel: float = 1e-3) -> LdaModel:
    """Multiclass LDA via the shrinkage-regularized generalized eigenproblem.

    ``S_w`` and ``S_b`` are the within/between scatter matrices; directions
    solve ``S_b v = ev (S_w + lambda I) v`` with
    ``lambda = lambda_rel * trace(S_w) / D``, are normalized to unit length,
    and sign-fixed. Identical class means yield all-zero eigenvalues and set
    ``degenerate`` instead of hiding the failure.
    """
    x = as_matrix(data)
    y, classes, members = _class_info(labels)
    if y.shape[0] != x.shape[0]:
        raise DataError("labels length does not match data rows")
    n_classes = len(classes)
    if not 1 <= q <= n_classes - 1:
        raise ConfigError(f"q={q} outside 1..C-1={n_classes - 1}")

    d = x.shape[1]
    global_mean = x.mean(axis=0)
    class_means = np.stack([x[rows].mean(axis=0) for rows in members])
    s_w = np.zeros((d, d))
    s_b = np.zeros((d, d))
    for rows, mu in zip(members, class_means):
        centered = x[rows] - mu
        s_w += centered.T @ centered
        offset = (mu - global_mean)[:, None]
        s_b += rows.size * (offset @ offset.T)

    shrink = lambda_rel * float(np.trace(s_w)) / d
    if shrink <= 0:
        shrink = max(lambda_rel, 1e-12)  # zero within-scatter still needs a PD right side
    evals, evecs = eigh(s_b, s_w + shrink * np.eye(d))
    order = np.argsort(evals)[::-1][:q]
    eigenvalues = np.maximum(evals[order], 0.0)
    directions = evecs[:, order].T
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    directions = fix_signs(directions)
    return LdaModel(
        classes=classes,
        class_means=class_means,
        within_scatter=s_w,
        between_scatter=s_b,
        shrinkage=shrink,
        directions=directions,
        eigenvalues=eigenvalues,
        global_mean=global_mean,
        degenerate=bool(eigenvalues.max(initial=0.0) < 1e-12),
    )


def lda_project(model: LdaModel, data) -> Embedding:
    """Project onto the discriminant directions, centered by the global mean."""
    x = as_matrix(data)
    check_columns(x, model.global_mean.shape[0], "lda_project")
    return Embedding(values=(x - model.global_mean) @ model.directions.T)


# ---------------------------------------------------------------------------
# GDA (kernel Fisher discriminant)


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"  # "rbf" | "linear"
    gamma: float | None = None  # None = median heuristic at fit time


@dataclass
class GdaModel:
    training_points: np.ndarray  # (n, D)
    kernel: KernelSpec  # gamma resolved
    dual_coef: np.ndarray  # (q, n)
    row_means: np.ndarray  # (n,) kernel column means
    grand_mean: float
    regularization: float
    eigenvalues: np.ndarray
    classes: list[int] = field(default_factory=list)

    @property
    def n_dims(self) -> int:
        return self.dual_coef.shape[0]


def _kernel_matrix(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if spec.kind == "linear":
        return a @ b.T
    if spec.kind == "rbf":
        return np.exp(-spec.gamma * cdist(a, b, "sqeuclidean"))
    raise ConfigError(f"unknown kernel {spec.kind!r}")


def _median_gamma(x: np.ndarray) -> float:
    dists = pdist(x)
    med = float(np.median(dists)) if dists.size else 0.0
    if med <= 0:
        return 1.0
    return 1.0 / (2.0 * med**2)


def gda_fit(
    data,
    labels,
    q: int,
    kernel: KernelSpec = KernelSpec(),
    lambda_rel: float = 1e-3,
    cap: int = 2000,
) -> GdaModel:
    """Kernel Fisher discriminant in the dual.

    The kernel matrix is double-centered (feature-space centering), the
    between term is ``Kc W Kc`` with the block class-indicator ``W`` and the
    within term ``Kc (I - W) Kc`` regularized by
    ``lambda = lambda_rel * trace(Kc) / n``. If the within term is still
    degenerate the regularizer escalates tenfold before giving up.
    """
    x = as_matrix(data)
    y, classes, members = _class_info(labels)
    if y.shape[0] != x.shape[0]:
        raise DataError("labels length does not match data rows")
    n = x.shape[0]
    if n > cap:
        raise ConfigError(f"gda: {n} points exceed the configured cap {cap}; subsample first")
    n_classes = len(classes)
    if not 1 <= q <= n_classes - 1:
        raise ConfigError(f"q={q} outside 1..C-1={n_classes - 1}")

    if kernel.kind == "rbf" and kernel.gamma is None:
        kernel = KernelSpec("rbf", _median_gamma(x))

    k = _kernel_matrix(kernel, x, x)
    row_means = k.mean(axis=0)
    grand_mean = float(k.mean())
    kc = k - row_means[None, :] - row_means[:, None] + grand_mean

    w = np.zeros((n, n))
    for rows in members:
        w[np.ix_(rows, rows)] = 1.0 / rows.size
    between = kc @ w @ kc
    between = 0.5 * (between + between.T)
    within_raw = kc @ kc - between
    within_raw = 0.5 * (within_raw + within_raw.T)

    lam = lambda_rel * float(np.trace(kc)) / n
    lam = max(lam, 1e-12)
    last_error = None
    for _ in range(6):
        try:
            evals, evecs = eigh(between, within_raw + lam * np.eye(n))
            break
        except np.linalg.LinAlgError as exc:
            last_error = exc
            lam *= 10.0
    else:
        raise NumericError(f"gda kernel degenerate after maximum regularization: {last_error}")

    order = np.argsort(evals)[::-1][:q]
    alphas = evecs[:, order].T
    alphas /= np.linalg.norm(alphas, axis=1, keepdims=True)
    alphas = fix_signs(alphas)
    return GdaModel(
        training_points=x,
        kernel=kernel,
        dual_coef=alphas,
        row_means=row_means,
        grand_mean=grand_mean,
        regularization=lam,
        eigenvalues=np.maximum(evals[order], 0.0),
        classes=classes,
    )


def gda_project(model: GdaModel, data) -> Embedding:
    """Kernel vector against the training points, centered, times the duals."""
    x = as_matrix(data)
    check_columns(x, model.training_points.shape[1], "gda_project")
    out = np.empty((x.shape[0], model.dual_coef.shape[0]))
    block = max(1, int(2_000_000 // max(model.training_points.shape[0], 1)))
    for start in range(0, x.shape[0], block):
        stop = min(start + block, x.shape[0])
        kx = _kernel_matrix(model.kernel, x[start:stop], model.training_points)
        kx_centered = (
            kx - model.row_means[None, :] - kx.mean(axis=1, keepdims=True) + model.grand_mean
        )
        out[start:stop] = kx_centered @ model.dual_coef.T
    return Embedding(values=out)


# ---------------------------------------------------------------------------
# NCA


@dataclass
class NcaModel:
    transform: np.ndarray  # (q, D)
    objective_trace: list[float]
    n_training: int
    seed: int
    step_init: float
    step_final: float

    @property
    def n_dims(self) -> int:
        return self.transform.shape[0]


def nca_objective(a: np.ndarray, x: np.ndarray, labels: np.ndarray):
    """NCA objective and gradient at transform ``a`` (rows q, cols D).

    ``f(A) = sum_i p_i`` with ``p_ij`` the softmax over ``-|Ax_i - Ax_j|^2``
    and ``p_i`` the same-class mass. Returns ``(f, df/dA)``.
    """
    y = np.asarray(labels).ravel()
    emb = x @ a.T
    sq = cdist(emb, emb, "sqeuclidean")
    np.fill_diagonal(sq, np.inf)
    log_p = -sq - logsumexp(-sq, axis=1, keepdims=True)
    p = np.exp(log_p)
    same = (y[:, None] == y[None, :]) & ~np.eye(y.size, dtype=bool)
    p_i = (p * same).sum(axis=1)
    f = float(p_i.sum())

    # df/dd_ik = p_ik (p_i - [k same class as i]); gradient via the
    # graph-Laplacian identity over the symmetrized pair weights
    w = p * p_i[:, None] - p * same
    s = w + w.T
    lap = np.diag(s.sum(axis=1)) - s
    grad = 2.0 * (a @ x.T) @ lap @ x
    return f, grad


def nca_fit(
    data,
    labels,
    q: int,
    max_iter: int = 100,
    step_init: float = 1.0,
    seed: int = 0,
    cap: int = 1000,
) -> NcaModel:
    """Gradient ascent on the NCA objective with a backtracking line search.

    Steps that decrease the objective halve the step size and retry; accepted
    steps may grow it modestly. The transform starts at the top-q PCA
    directions scaled by inverse root eigenvalue. Stops on ``max_iter``
    accepted steps or relative objective change below 1e-7.
    """
    x = as_matrix(data)
    y, _, _ = _class_info(labels)
    if y.shape[0] != x.shape[0]:
        raise DataError("labels length does not match data rows")
    n = x.shape[0]
    if n > cap:
        raise ConfigError(f"nca: {n} points exceed the configured cap {cap}; subsample first")
    if not 1 <= q <= x.shape[1]:
        raise ConfigError(f"q={q} outside 1..D={x.shape[1]}")

    pca = pca_fit(x, min(q, min(n - 1, x.shape[1])))
    scale = 1.0 / np.sqrt(np.maximum(pca.eigenvalues, 1e-8 * max(pca.eigenvalues.max(), 1e-30)))
    a = np.zeros((q, x.shape[1]))
    a[: pca.components.shape[0]] = pca.components * scale[:, None]

    f, grad = nca_objective(a, x, y)
    trace = [f]
    step = step_init
    accepted = 0
    while accepted < max_iter:
        moved = False
        while step > 1e-15:
            a_try = a + step * grad
            f_try, grad_try = nca_objective(a_try, x, y)
            if f_try > f:
                rel = (f_try - f) / max(abs(f), 1e-30)
                a, f, grad = a_try, f_try, grad_try
                trace.append(f)
                accepted += 1
                step *= 1.2
                moved = True
                if rel < 1e-7:
                    accepted = max_iter
                break
            step *= 0.5
        if not moved:
            break

    return NcaModel(
        transform=a,
        objective_trace=trace,
        n_training=n,
        seed=seed,
        step_init=step_init,
        step_final=step,
    )


def nca_project(model: NcaModel, data) -> Embedding:
    """Linear map ``x @ A.T``; no centering, the transform absorbs scale."""
    x = as_matrix(data)
    check_columns(x, model.transform.shape[1], "nca_project")
    return Embedding(values=x @ model.transform.T)
