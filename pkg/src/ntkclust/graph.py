"""Sparse mutual q-NN affinity graphs and their normalized forms.

An affinity graph keeps the pair (i, j) only when each point is among the
other's top-q kernel neighbors; everything else is zero.  Self-pairs are
excluded from the candidate lists (the self kernel value is always maximal
and carries no pairing information), ties are broken toward the smaller
index so runs are deterministic across platforms, and negative surviving
weights (possible under the linear/sigmoid/tangent kernels) are dropped so
degrees stay positive and D^{-1/2} is well defined.

If mutual filtering strands a row with no edges at all, the row is
repaired with a single edge to its best positive-affinity neighbor (both
directions).  Repairs can push a neighbor's row past the usual <= 2q
nonzero bound; they exist only to keep the degree matrix invertible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .kernels import KernelSpec, kernel_matrix


@dataclass
class SparseAffinity:
    """Symmetric nonnegative affinity with explicit sparsity and cached degrees."""

    matrix: sp.csr_matrix
    degrees: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        mat = sp.csr_matrix(self.matrix)
        mat.sum_duplicates()
        mat.sort_indices()
        if mat.shape[0] != mat.shape[1]:
            raise ValueError(f"affinity must be square, got {mat.shape}")
        if mat.nnz and mat.data.min() < 0:
            raise ValueError("affinity weights must be non-negative")
        asym = abs(mat - mat.T)
        if asym.nnz and asym.data.max() > 1e-10:
            raise ValueError("affinity must be symmetric")
        if mat.diagonal().any():
            raise ValueError("affinity must have an empty diagonal")
        degrees = np.asarray(mat.sum(axis=1)).ravel()
        if (degrees <= 0).any():
            bad = int(np.argmin(degrees))
            raise ValueError(f"row {bad} has zero degree")
        self.matrix = mat
        self.degrees = degrees

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz


def affinity_from_kernel_matrix(kmat: np.ndarray, q: int) -> SparseAffinity:
    """Sparsify a precomputed dense kernel matrix by the mutual top-q rule."""
    kmat = np.asarray(kmat, dtype=np.float64)
    if kmat.ndim != 2 or kmat.shape[0] != kmat.shape[1]:
        raise ValueError(f"kernel matrix must be square, got {kmat.shape}")
    m = kmat.shape[0]
    if not 0 < q < m:
        raise ValueError(f"q must satisfy 1 <= q <= M-1, got q={q} for M={m}")

    vals = kmat.copy()
    np.fill_diagonal(vals, -np.inf)
    # stable argsort on the negated values = descending by value, ties by index
    order = np.argsort(-vals, axis=1, kind="stable")
    top = order[:, :q]

    rows = np.repeat(np.arange(m), q)
    cols = top.ravel()
    data = vals[rows, cols]
    directed = sp.csr_matrix((data, (rows, cols)), shape=(m, m))
    pattern = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(m, m))
    mutual = pattern.multiply(pattern.T)

    aff = sp.csr_matrix(directed.multiply(mutual))
    aff.data[aff.data <= 0] = 0.0
    aff.eliminate_zeros()

    degrees = np.asarray(aff.sum(axis=1)).ravel()
    isolated = np.flatnonzero(degrees == 0)
    if isolated.size:
        repairs: dict[tuple[int, int], float] = {}
        for i in isolated:
            hit = -1
            for j in order[i]:
                if vals[i, j] > 0:
                    hit = int(j)
                    break
            if hit < 0:
                raise ValueError(
                    f"row {i} has no positive-affinity neighbor; graph cannot be repaired"
                )
            w = float(vals[i, hit])
            repairs[(i, hit)] = w
            repairs[(hit, i)] = w
        ridx = np.array([ij[0] for ij in repairs])
        cidx = np.array([ij[1] for ij in repairs])
        rdata = np.array(list(repairs.values()))
        patch = sp.csr_matrix((rdata, (ridx, cidx)), shape=(m, m))
        # rows being patched are empty and the partner entry is either
        # absent or identical, so maximum() is a pure insert
        aff = sp.csr_matrix(aff.maximum(patch))

    return SparseAffinity(aff)


def build_affinity(
    feats: np.ndarray,
    spec: KernelSpec,
    q: int,
    anchors: np.ndarray | None = None,
) -> SparseAffinity:
    """All-pairs kernel evaluation followed by mutual top-q sparsification."""
    feats = np.asarray(feats, dtype=np.float64)
    if spec.kind == "ntk" and anchors is None:
        raise ValueError("ntk affinity requires an anchor matrix")
    if not 0 < q < feats.shape[0]:
        raise ValueError(f"q must satisfy 1 <= q <= M-1, got q={q} for M={feats.shape[0]}")
    kmat = kernel_matrix(spec, feats, anchors=anchors)
    return affinity_from_kernel_matrix(kmat, q)


def normalize(aff: SparseAffinity) -> sp.csr_matrix:
    """Symmetric degree normalization D^{-1/2} A D^{-1/2}; pattern preserved."""
    inv_sqrt = 1.0 / np.sqrt(aff.degrees)
    scale = sp.diags(inv_sqrt)
    return sp.csr_matrix(scale @ aff.matrix @ scale)


def laplacian(aff: SparseAffinity) -> sp.csr_matrix:
    """Normalized graph Laplacian I - D^{-1/2} A D^{-1/2}; eigenvalues lie in [0, 2]."""
    m = aff.size
    return sp.csr_matrix(sp.eye(m) - normalize(aff))


def dump_affinity(aff: SparseAffinity, path: str | Path) -> None:
    """Text dump for external heatmap tooling: header "M nnz", then "i j w" lines."""
    coo = aff.matrix.tocoo()
    lines = [f"{aff.size} {coo.nnz}\n"]
    lines += [f"{i} {j} {w:.17g}\n" for i, j, w in zip(coo.row, coo.col, coo.data)]
    Path(path).write_text("".join(lines))
