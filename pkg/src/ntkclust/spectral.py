"""Spectral embedding and centroid rounding.

The embedding is the trace-minimizing orthonormal basis of the normalized
Laplacian I - D^{-1/2} A D^{-1/2}: its K smallest eigenpairs, equivalently
the K largest of the normalized affinity, which is the form both solver
paths actually target.  Instances up to ``dense_cutoff`` go through the
dense symmetric solver; larger ones use ARPACK's implicitly restarted
Lanczos on the sparse operator.  Eigenvector signs are fixed so the
largest-magnitude entry of each column is positive, making the embedding
deterministic up to genuinely degenerate eigenvalue gaps.

Rounding is plain k-means with k-means++ seeding and restarts.  Each
restart draws its RNG stream from (seed, restart index), so serial and
pooled execution produce identical labels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.csgraph
import scipy.sparse.linalg

from ._threads import map_ordered
from .graph import SparseAffinity

DENSE_EIGH_CUTOFF = 2048


@dataclass(frozen=True)
class KMeansConfig:
    n_clusters: int
    n_init: int = 10
    max_iter: int = 300
    seed: int = 0
    tol: float = 1e-6

    def __post_init__(self) -> None:
        if self.n_clusters < 2:
            raise ValueError(f"need at least 2 clusters, got {self.n_clusters}")
        if self.n_init < 1 or self.max_iter < 1:
            raise ValueError("n_init and max_iter must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass
class SpectralEmbedding:
    """Orthonormal eigenvector block Y (M x K) and the Laplacian eigenvalues, ascending."""

    vectors: np.ndarray
    eigenvalues: np.ndarray


@dataclass
class ClusterResult:
    labels: np.ndarray
    embedding: SpectralEmbedding


def _as_affinity_operand(a) -> tuple[sp.csr_matrix | np.ndarray, int]:
    if isinstance(a, SparseAffinity):
        return a.matrix, a.size
    if sp.issparse(a):
        mat = sp.csr_matrix(a)
        return mat, mat.shape[0]
    mat = np.asarray(a, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"affinity must be a square matrix, got shape {mat.shape}")
    return mat, mat.shape[0]


def spectral_embed(
    a,
    n_clusters: int,
    dense_cutoff: int = DENSE_EIGH_CUTOFF,
    solver_tol: float = 1e-8,
    solver_maxiter: int = 300,
) -> SpectralEmbedding:
    """K smallest eigenpairs of the normalized Laplacian of ``a``.

    ``a`` may be a SparseAffinity, a scipy sparse matrix, or a dense array;
    it must be symmetric and non-negative with strictly positive degrees.
    """
    mat, m = _as_affinity_operand(a)
    if not 2 <= n_clusters < m:
        raise ValueError(f"need 2 <= K < M, got K={n_clusters}, M={m}")
    dense = not sp.issparse(mat)
    minval = mat.min() if dense else (mat.data.min() if mat.nnz else 0.0)
    if minval < -1e-10:
        raise ValueError("affinity has negative entries; clip before embedding")

    degrees = np.asarray(mat.sum(axis=1)).ravel()
    if (degrees <= 0).any():
        raise ValueError(f"row {int(np.argmin(degrees))} has zero degree")
    inv_sqrt = 1.0 / np.sqrt(degrees)

    if m <= dense_cutoff:
        s = (mat if dense else mat.toarray()) * np.outer(inv_sqrt, inv_sqrt)
        s = (s + s.T) * 0.5
        vals, vecs = scipy.linalg.eigh(s, subset_by_index=[m - n_clusters, m - 1])
        # eigh returns ascending affinity eigenvalues; reverse so Laplacian
        # eigenvalues 1 - vals come out ascending
        vals = vals[::-1]
        vecs = vecs[:, ::-1]
    else:
        scale = sp.diags(inv_sqrt)
        s_op = sp.csr_matrix(scale @ sp.csr_matrix(mat) @ scale)
        s_op = (s_op + s_op.T) * 0.5
        vals, vecs = _top_eigenpairs_by_component(
            s_op, n_clusters, solver_tol, solver_maxiter
        )

    for col in range(vecs.shape[1]):
        anchor = int(np.argmax(np.abs(vecs[:, col])))
        if vecs[anchor, col] < 0:
            vecs[:, col] = -vecs[:, col]
    return SpectralEmbedding(vectors=vecs, eigenvalues=1.0 - vals)


def _top_eigenpairs_by_component(
    s_op: sp.csr_matrix, k: int, tol: float, maxiter: int
) -> tuple[np.ndarray, np.ndarray]:
    """Largest-k eigenpairs of a normalized affinity, solved per connected component.

    A single Krylov sequence cannot separate the eigenvalue-1 copies a
    disconnected graph carries (one per component), but restricted to one
    component the top eigenvalue is simple, so the per-component solves are
    well conditioned.  The global spectrum is the union of the component
    spectra; candidates are merged and the k largest kept, with ties broken
    by (component, position) so the basis is deterministic.
    """
    m = s_op.shape[0]
    n_comp, comp_labels = sp.csgraph.connected_components(s_op, directed=False)
    candidates: list[tuple[float, int, int, np.ndarray, np.ndarray]] = []
    for comp in range(n_comp):
        nodes = np.flatnonzero(comp_labels == comp)
        block = s_op[np.ix_(nodes, nodes)]
        size = nodes.size
        want = min(k, size)
        if size <= max(4 * k, 64):
            vals, vecs = scipy.linalg.eigh(np.asarray(block.todense()))
            vals = vals[-want:][::-1]
            vecs = vecs[:, -want:][:, ::-1]
        else:
            # deterministic start vector keeps repeated runs identical
            v0 = np.full(size, 1.0 / np.sqrt(size))
            try:
                vals, vecs = sp.linalg.eigsh(
                    block,
                    k=want,
                    which="LA",
                    tol=tol,
                    maxiter=maxiter * size,
                    ncv=min(size, max(2 * want + 1, 20)),
                    v0=v0,
                )
            except sp.linalg.ArpackNoConvergence as exc:
                raise RuntimeError(f"eigensolver failed to converge: {exc}") from exc
            order = np.argsort(vals)[::-1]
            vals = vals[order]
            vecs = vecs[:, order]
        for pos in range(want):
            candidates.append((float(vals[pos]), comp, pos, nodes, vecs[:, pos]))

    candidates.sort(key=lambda item: (-item[0], item[1], item[2]))
    top_vals = np.empty(k)
    top_vecs = np.zeros((m, k))
    for col, (value, _comp, _pos, nodes, vec) in enumerate(candidates[:k]):
        top_vals[col] = value
        top_vecs[nodes, col] = vec
    return top_vals, top_vecs


def _kmeans_pp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    m = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(m)]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            # remaining candidates coincide with chosen centers; take the
            # first point not yet used as a center
            used = {tuple(centers[i]) for i in range(c)}
            idx = next(i for i in range(m) if tuple(points[i]) not in used)
        else:
            idx = rng.choice(m, p=d2 / total)
        centers[c] = points[idx]
        d2 = np.minimum(d2, np.sum((points - centers[c]) ** 2, axis=1))
    return centers


def _lloyd(
    points: np.ndarray, centers: np.ndarray, max_iter: int, tol: float
) -> tuple[np.ndarray, float]:
    k = centers.shape[0]
    sq = np.sum(points * points, axis=1)
    labels = np.zeros(points.shape[0], dtype=np.int64)
    for _ in range(max_iter):
        d2 = sq[:, None] - 2.0 * points @ centers.T + np.sum(centers * centers, axis=1)
        labels = np.argmin(d2, axis=1)
        new_centers = centers.copy()
        for c in range(k):
            mask = labels == c
            if mask.any():
                new_centers[c] = points[mask].mean(axis=0)
            else:
                # re-seat an empty cluster on the point farthest from its center
                worst = int(np.argmax(d2[np.arange(points.shape[0]), labels]))
                new_centers[c] = points[worst]
                labels[worst] = c
        shift = np.sqrt(np.max(np.sum((new_centers - centers) ** 2, axis=1)))
        centers = new_centers
        if shift < tol:
            break
    d2 = sq[:, None] - 2.0 * points @ centers.T + np.sum(centers * centers, axis=1)
    labels = np.argmin(d2, axis=1)
    inertia = float(np.maximum(d2[np.arange(points.shape[0]), labels], 0.0).sum())
    return labels, inertia


def kmeans(points: np.ndarray, config: KMeansConfig) -> np.ndarray:
    """Restarted k-means returning the labels of the lowest-inertia run.

    Deterministic for a fixed config: restart r uses the RNG stream seeded
    by (config.seed, r) and ties in inertia resolve to the earliest restart.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be a 2-D matrix")
    m = points.shape[0]
    k = config.n_clusters
    if k > m:
        raise ValueError(f"cannot form {k} clusters from {m} points")
    if np.unique(points, axis=0).shape[0] < k:
        raise ValueError(f"need at least {k} distinct points")

    def run(restart: int) -> tuple[np.ndarray, float]:
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, restart]))
        centers = _kmeans_pp(points, k, rng)
        return _lloyd(points, centers, config.max_iter, config.tol)

    results = map_ordered(run, range(config.n_init))
    best_labels, best_inertia = results[0]
    for labels, inertia in results[1:]:
        if inertia < best_inertia:
            best_labels, best_inertia = labels, inertia
    return best_labels


def spectral_cluster(
    a,
    n_clusters: int,
    kmeans_config: KMeansConfig | None = None,
    row_normalize: bool = True,
    dense_cutoff: int = DENSE_EIGH_CUTOFF,
) -> ClusterResult:
    """Embed, optionally row-normalize the embedding, and round with k-means."""
    embedding = spectral_embed(a, n_clusters, dense_cutoff=dense_cutoff)
    points = embedding.vectors
    if row_normalize:
        norms = np.linalg.norm(points, axis=1, keepdims=True)
        points = np.where(norms > 1e-12, points / np.where(norms == 0, 1.0, norms), points)
    if kmeans_config is None:
        kmeans_config = KMeansConfig(n_clusters=n_clusters)
    elif kmeans_config.n_clusters != n_clusters:
        raise ValueError("kmeans_config.n_clusters disagrees with n_clusters")
    labels = kmeans(points, kmeans_config)
    return ClusterResult(labels=labels, embedding=embedding)
