"""Isomap and Landmark Isomap: k-NN graph, shortest-path geodesics,
classical MDS, and landmark triangulation for out-of-sample points.

The landmark machinery follows the standard landmark-MDS construction: embed
the landmarks by double-centered eigendecomposition, then place any other
point x from its squared distances to the landmarks,
``y = -1/2 * pinv(L_emb) @ (delta_x - delta_mean)``. The full Isomap model is
the L = N special case, so one projection path serves both.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial.distance import cdist

from ..errors import ConfigError, DataError, GraphDisconnectedError
from .types import Embedding, as_matrix, check_columns, fix_signs

DUPLICATE_EDGE_WEIGHT = 1e-12  # keeps Dijkstra ordering defined for duplicate points


@dataclass
class NeighborGraph:
    """Symmetrized k-NN graph with positive euclidean edge weights."""

    n: int
    k: int
    matrix: csr_matrix  # symmetric, zero diagonal
    symmetric: bool = True

    def neighbors(self, i: int) -> list[tuple[int, float]]:
        row = self.matrix.getrow(i)
        return list(zip(row.indices.tolist(), row.data.tolist()))


def knn_graph(data, k: int) -> NeighborGraph:
    """Link each point to its k nearest neighbors (ties to the lower index),
    then symmetrize by union. Duplicate points get a tiny positive weight."""
    x = as_matrix(data)
    n = x.shape[0]
    if not 1 <= k < n:
        raise ConfigError(f"k={k} outside 1..N-1={n - 1}")

    dists = cdist(x, x)
    rows = []
    cols = []
    vals = []
    for i in range(n):
        order = np.argsort(dists[i], kind="stable")
        picked = [j for j in order if j != i][:k]
        for j in picked:
            w = dists[i, j]
            rows.append(i)
            cols.append(j)
            vals.append(w if w > 0 else DUPLICATE_EDGE_WEIGHT)
    mat = csr_matrix((vals, (rows, cols)), shape=(n, n))
    sym = mat.maximum(mat.T)  # union; weights already symmetric
    return NeighborGraph(n=n, k=k, matrix=sym)


def geodesics(
    graph: NeighborGraph,
    sources: np.ndarray | list[int] | None = None,
    allow_largest_component: bool = False,
) -> np.ndarray:
    """Exact shortest-path distances from each source (all nodes if absent).

    A disconnected graph raises with the component sizes unless
    ``allow_largest_component`` is set, in which case unreachable pairs come
    back as inf and the caller is expected to have restricted itself already.
    """
    n_comp, labels = connected_components(graph.matrix, directed=False)
    if n_comp > 1 and not allow_largest_component:
        raise GraphDisconnectedError(np.bincount(labels).tolist())
    indices = None if sources is None else np.asarray(sources, np.int64)
    dist = dijkstra(graph.matrix, directed=False, indices=indices)
    return np.atleast_2d(dist)


def largest_component(graph: NeighborGraph) -> np.ndarray:
    """Indices of the largest connected component (ties to the lower label)."""
    _, labels = connected_components(graph.matrix, directed=False)
    keep = int(np.argmax(np.bincount(labels)))
    return np.flatnonzero(labels == keep)


@dataclass
class MdsResult:
    embedding: np.ndarray  # (m, q), coordinates scaled by sqrt(eigenvalue)
    eigenvalues: np.ndarray  # (q,) non-increasing, zero-padded when deficient
    eigenvectors: np.ndarray  # (m, q) orthonormal columns (zero-padded)
    deficient: bool


def classical_mds(distances: np.ndarray, q: int) -> MdsResult:
    """Classical (Torgerson) MDS of a symmetric distance matrix.

    Double-centers B = -1/2 J D^2 J and embeds with the top-q positive
    eigenpairs, coordinates scaled by sqrt(eigenvalue). Fewer than q positive
    eigenvalues pads zero columns and flags the result as deficient.
    """
    d = np.asarray(distances, np.float64)
    if q < 1:
        raise ConfigError(f"q must be >= 1, got {q}")
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise DataError(f"distance matrix must be square, got {d.shape}")
    if np.max(np.abs(d - d.T), initial=0.0) > 1e-9:
        raise DataError("distance matrix is asymmetric beyond 1e-9")

    m = d.shape[0]
    sq = d**2
    row_mean = sq.mean(axis=1)
    b = -0.5 * (sq - row_mean[:, None] - row_mean[None, :] + sq.mean())
    b = 0.5 * (b + b.T)

    evals, evecs = np.linalg.eigh(b)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = fix_signs(evecs[:, order].T).T

    positive = evals > max(1e-12, 1e-12 * abs(evals[0]))
    n_pos = min(int(positive[:q].sum()), q)
    embedding = np.zeros((m, q))
    eigenvalues = np.zeros(q)
    eigenvectors = np.zeros((m, q))
    if n_pos:
        eigenvalues[:n_pos] = evals[:n_pos]
        eigenvectors[:, :n_pos] = evecs[:, :n_pos]
        embedding[:, :n_pos] = evecs[:, :n_pos] * np.sqrt(evals[:n_pos])
    return MdsResult(
        embedding=embedding,
        eigenvalues=eigenvalues,
        eigenvectors=eigenvectors,
        deficient=n_pos < q,
    )


@dataclass
class IsomapModel:
    """Fitted (landmark) Isomap with everything needed to place new points."""

    training_points: np.ndarray  # (m, D)
    landmark: bool
    landmark_indices: np.ndarray  # (L,) into training rows
    geodesic: np.ndarray  # (L, m) shortest-path distances landmark -> training
    embedding: np.ndarray  # (m, q)
    eigenvalues: np.ndarray  # (q,)
    eigenvectors: np.ndarray  # (L, q)
    delta_mean: np.ndarray  # (L,) column mean of squared landmark geodesics
    k: int
    q: int
    dropped_indices: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))

    @property
    def n_positive(self) -> int:
        return int(np.sum(self.eigenvalues > 0))


def isomap_embed(
    data, k: int, q: int, cap: int = 2000, allow_largest_component: bool = False
) -> IsomapModel:
    """Full Isomap: k-NN graph, all-pairs geodesics, classical MDS."""
    x = as_matrix(data)
    _check_cap(x.shape[0], cap, "isomap")
    graph = knn_graph(x, k)
    x, graph, dropped = _restrict_to_largest(x, graph, k, allow_largest_component)
    geo = geodesics(graph)
    geo = 0.5 * (geo + geo.T)
    mds = classical_mds(geo, q)
    return IsomapModel(
        training_points=x,
        landmark=False,
        landmark_indices=np.arange(x.shape[0]),
        geodesic=geo,
        embedding=mds.embedding,
        eigenvalues=mds.eigenvalues,
        eigenvectors=mds.eigenvectors,
        delta_mean=(geo**2).mean(axis=1),
        k=k,
        q=q,
        dropped_indices=dropped,
    )


def landmark_isomap_embed(
    data,
    k: int,
    q: int,
    n_landmarks: int,
    selection: str = "maxmin",
    seed: int = 0,
    cap: int = 2000,
    allow_largest_component: bool = False,
) -> IsomapModel:
    """Landmark Isomap: Dijkstra only from the landmarks, landmark MDS on the
    L x L block, every point placed by distance triangulation."""
    x = as_matrix(data)
    _check_cap(x.shape[0], cap, "landmark isomap")
    graph = knn_graph(x, k)
    x, graph, dropped = _restrict_to_largest(x, graph, k, allow_largest_component)
    m = x.shape[0]
    if not q + 1 <= n_landmarks <= m:
        raise ConfigError(f"landmark count {n_landmarks} outside q+1..N = {q + 1}..{m}")

    if selection == "maxmin":
        landmarks = _maxmin_landmarks(x, n_landmarks)
    elif selection == "random":
        rng = np.random.default_rng(seed)
        landmarks = np.sort(rng.choice(m, size=n_landmarks, replace=False))
    else:
        raise ConfigError(f"unknown landmark selection {selection!r}")

    geo = geodesics(graph, sources=landmarks)
    block = geo[:, landmarks]
    block = 0.5 * (block + block.T)
    mds = classical_mds(block, q)
    delta_mean = (block**2).mean(axis=1)
    model = IsomapModel(
        training_points=x,
        landmark=True,
        landmark_indices=landmarks,
        geodesic=geo,
        embedding=np.empty((0, q)),
        eigenvalues=mds.eigenvalues,
        eigenvectors=mds.eigenvectors,
        delta_mean=delta_mean,
        k=k,
        q=q,
        dropped_indices=dropped,
    )
    model.embedding = _triangulate(model, geo.T**2)
    return model


def isomap_project(model: IsomapModel, data) -> Embedding:
    """Place new spectra via approximate geodesics to the landmarks.

    The geodesic from a new point x to landmark l is approximated as
    ``min_t (|x - t| + geodesic(t, l))`` over the training points t, then the
    landmark triangulation is applied. Runs in row blocks to bound memory.
    """
    x = as_matrix(data)
    check_columns(x, model.training_points.shape[1], "isomap_project")
    n = x.shape[0]
    n_landmarks = model.landmark_indices.shape[0]
    out = np.empty((n, model.q))
    block = max(1, int(2_000_000 // max(model.training_points.shape[0], 1)))
    for start in range(0, n, block):
        stop = min(start + block, n)
        to_train = cdist(x[start:stop], model.training_points)
        approx = np.empty((stop - start, n_landmarks))
        for li in range(n_landmarks):
            approx[:, li] = np.min(to_train + model.geodesic[li][None, :], axis=1)
        out[start:stop] = _triangulate(model, approx**2)
    return Embedding(values=out)


def _triangulate(model: IsomapModel, sq_dists: np.ndarray) -> np.ndarray:
    """Landmark-MDS placement from squared distances to the landmarks."""
    n_pos = model.n_positive
    coords = np.zeros((sq_dists.shape[0], model.q))
    if n_pos == 0:
        return coords
    vecs = model.eigenvectors[:, :n_pos]
    inv_root = 1.0 / np.sqrt(model.eigenvalues[:n_pos])
    centered = sq_dists - model.delta_mean[None, :]
    coords[:, :n_pos] = -0.5 * (centered @ vecs) * inv_root[None, :]
    return coords


def _maxmin_landmarks(x: np.ndarray, count: int) -> np.ndarray:
    """Farthest-point traversal seeded by index 0; ties to the lower index."""
    chosen = [0]
    min_dist = cdist(x[[0]], x)[0]
    min_dist[0] = -np.inf  # chosen points never re-picked, even duplicates
    while len(chosen) < count:
        nxt = int(np.argmax(min_dist))
        chosen.append(nxt)
        np.minimum(min_dist, cdist(x[[nxt]], x)[0], out=min_dist)
        min_dist[nxt] = -np.inf
    return np.sort(np.asarray(chosen, np.int64))


def _restrict_to_largest(x, graph, k, allow: bool):
    n_comp, labels = connected_components(graph.matrix, directed=False)
    if n_comp == 1:
        return x, graph, np.empty(0, np.int64)
    if not allow:
        raise GraphDisconnectedError(np.bincount(labels).tolist())
    keep = largest_component(graph)
    dropped = np.setdiff1d(np.arange(x.shape[0]), keep)
    sub = graph.matrix[keep][:, keep]
    return x[keep], NeighborGraph(n=keep.size, k=k, matrix=csr_matrix(sub)), dropped


def _check_cap(n: int, cap: int, what: str) -> None:
    if n > cap:
        raise ConfigError(f"{what}: {n} points exceed the configured cap {cap}; subsample first")
