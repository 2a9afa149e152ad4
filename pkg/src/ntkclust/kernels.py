"""Pairwise kernels over unit-norm embeddings.

Two ingredients feed the affinity graphs.  First, a zoo of classical
kernels (linear, polynomial, rbf, exponential, laplacian, sigmoid) used
as single-modality baselines.  Second, the text-anchored tangent kernel:
anchor a scalar score function

    g(z) = log sum_k exp(w_k . z / tau)

at the anchor matrix W (one text embedding per row) and take the inner
product of its parameter gradients at two inputs.  That inner product has
a closed form,

    k(z_i, z_j) = (1 / tau^2) * (z_i . z_j) * sum_k s_i[k] * s_j[k],

with s_i = softmax(W z_i / tau): the cosine similarity of the two inputs
multiplied by the overlap of their anchor softmax distributions.  The
closed form is what production paths use; ``ntk_oracle`` materializes the
full N*d gradients and is kept as the independent cross-check.

Scalar entry points define the semantics; ``kernel_matrix`` is the
blocked all-pairs form and must agree with the scalar ops to 1e-10.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._threads import map_ordered

KERNEL_KINDS = (
    "linear",
    "polynomial",
    "rbf",
    "exponential",
    "laplacian",
    "sigmoid",
    "ntk",
)

# Zoo hyperparameter defaults follow common library conventions; the
# temperature default is the production setting used everywhere else.
DEFAULT_TAU = 0.04
DEFAULT_POLY_DEGREE = 3
DEFAULT_COEF0 = 1.0


@dataclass(frozen=True)
class KernelSpec:
    """Kernel choice plus hyperparameters.

    ``gamma=None`` means "1/d, resolved at evaluation time", mirroring the
    usual library default for polynomial/laplacian/sigmoid kernels.
    """

    kind: str = "ntk"
    tau: float = DEFAULT_TAU
    poly_degree: int = DEFAULT_POLY_DEGREE
    poly_coef0: float = DEFAULT_COEF0
    gamma: float | None = None
    sigmoid_coef0: float = DEFAULT_COEF0

    def __post_init__(self) -> None:
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}; choose from {KERNEL_KINDS}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.poly_degree < 1:
            raise ValueError(f"poly_degree must be >= 1, got {self.poly_degree}")
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    def effective_gamma(self, dim: int) -> float:
        return self.gamma if self.gamma is not None else 1.0 / dim


def _check_dims(feats: np.ndarray, anchors: np.ndarray) -> None:
    if feats.ndim != 2 or anchors.ndim != 2:
        raise ValueError("feats and anchors must be 2-D matrices")
    if feats.shape[1] != anchors.shape[1]:
        raise ValueError(
            f"dimension mismatch: features are {feats.shape[1]}-d, "
            f"anchors are {anchors.shape[1]}-d"
        )


def softmax_scores(feats: np.ndarray, anchors: np.ndarray, tau: float) -> np.ndarray:
    """Row-wise softmax of anchor similarities: row i is softmax(anchors @ feats_i / tau).

    Subtracts the row maximum before exponentiating; at production
    temperatures the raw exponents overflow float64 otherwise.
    """
    feats = np.atleast_2d(np.asarray(feats, dtype=np.float64))
    anchors = np.atleast_2d(np.asarray(anchors, dtype=np.float64))
    _check_dims(feats, anchors)
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    logits = feats @ anchors.T / tau
    logits -= logits.max(axis=1, keepdims=True)
    np.exp(logits, out=logits)
    logits /= logits.sum(axis=1, keepdims=True)
    return logits


def logsumexp_score(feats: np.ndarray, anchors: np.ndarray, tau: float) -> np.ndarray:
    """The anchored score g(z) = log sum_k exp(w_k . z / tau), per row of feats."""
    feats = np.atleast_2d(np.asarray(feats, dtype=np.float64))
    anchors = np.atleast_2d(np.asarray(anchors, dtype=np.float64))
    _check_dims(feats, anchors)
    logits = feats @ anchors.T / tau
    peak = logits.max(axis=1)
    return peak + np.log(np.exp(logits - peak[:, None]).sum(axis=1))


def score_gradient(z: np.ndarray, anchors: np.ndarray, tau: float) -> np.ndarray:
    """Gradient of the anchored score w.r.t. the anchor matrix, shape (N, d).

    Row k is s[k] * z / tau with s the softmax of anchor similarities.
    """
    z = np.asarray(z, dtype=np.float64)
    s = softmax_scores(z[None, :], anchors, tau)[0]
    return np.outer(s, z) / tau


def ntk_value(z_i: np.ndarray, z_j: np.ndarray, anchors: np.ndarray, tau: float) -> float:
    """Closed-form tangent-kernel value for one pair of unit vectors."""
    z_i = np.asarray(z_i, dtype=np.float64)
    z_j = np.asarray(z_j, dtype=np.float64)
    if z_i.shape != z_j.shape:
        raise ValueError(f"shape mismatch: {z_i.shape} vs {z_j.shape}")
    s = softmax_scores(np.stack([z_i, z_j]), anchors, tau)
    overlap = float(s[0] @ s[1])
    return float(z_i @ z_j) * overlap / (tau * tau)


def ntk_oracle(z_i: np.ndarray, z_j: np.ndarray, anchors: np.ndarray, tau: float) -> float:
    """Tangent kernel via explicit N*d gradients; independent check of ntk_value."""
    g_i = score_gradient(z_i, anchors, tau).ravel()
    g_j = score_gradient(z_j, anchors, tau).ravel()
    return float(g_i @ g_j)


def kernel_value(
    spec: KernelSpec,
    z_i: np.ndarray,
    z_j: np.ndarray,
    anchors: np.ndarray | None = None,
) -> float:
    """Scalar kernel evaluation; defines the semantics the batched path must match."""
    z_i = np.asarray(z_i, dtype=np.float64)
    z_j = np.asarray(z_j, dtype=np.float64)
    if z_i.shape != z_j.shape:
        raise ValueError(f"shape mismatch: {z_i.shape} vs {z_j.shape}")
    kind = spec.kind
    if kind == "ntk":
        if anchors is None:
            raise ValueError("ntk kernel requires an anchor matrix")
        return ntk_value(z_i, z_j, anchors, spec.tau)
    dot = float(z_i @ z_j)
    gamma = spec.effective_gamma(z_i.shape[0])
    if kind == "linear":
        return dot
    if kind == "polynomial":
        return (gamma * dot + spec.poly_coef0) ** spec.poly_degree
    if kind == "rbf":
        return float(np.exp(-np.sum((z_i - z_j) ** 2) / spec.tau))
    if kind == "exponential":
        return float(np.exp(dot / spec.tau))
    if kind == "laplacian":
        return float(np.exp(-np.sum(np.abs(z_i - z_j)) * gamma))
    if kind == "sigmoid":
        return float(np.tanh(gamma * dot + spec.sigmoid_coef0))
    raise ValueError(f"unknown kernel kind {kind!r}")


def _block_ranges(m: int, block: int) -> list[tuple[int, int]]:
    return [(start, min(start + block, m)) for start in range(0, m, block)]


def kernel_matrix(
    spec: KernelSpec,
    feats: np.ndarray,
    anchors: np.ndarray | None = None,
    block_size: int = 512,
) -> np.ndarray:
    """All-pairs kernel values as a dense symmetric M x M matrix.

    Row blocks are computed independently (in the shared worker pool) and
    merged in block order, then the result is symmetrized so the output is
    exactly symmetric regardless of BLAS summation order.
    """
    feats = np.asarray(feats, dtype=np.float64)
    if feats.ndim != 2:
        raise ValueError("feats must be a 2-D matrix")
    m, d = feats.shape
    out = np.empty((m, m), dtype=np.float64)
    kind = spec.kind

    scores = None
    if kind == "ntk":
        if anchors is None:
            raise ValueError("ntk kernel requires an anchor matrix")
        scores = softmax_scores(feats, anchors, spec.tau)
    gamma = spec.effective_gamma(d)
    sqnorms = np.einsum("ij,ij->i", feats, feats) if kind == "rbf" else None

    # The laplacian kernel broadcasts a (rows, M, d) difference tensor;
    # cap the block so that tensor stays around ~2^24 elements.
    block = block_size
    if kind == "laplacian":
        block = max(1, min(block_size, (1 << 24) // max(m * d, 1)))

    def fill(rows: tuple[int, int]) -> None:
        lo, hi = rows
        chunk = feats[lo:hi]
        if kind == "ntk":
            u = chunk @ feats.T
            v = scores[lo:hi] @ scores.T
            out[lo:hi] = u * v / (spec.tau * spec.tau)
            return
        if kind == "laplacian":
            diff = np.abs(chunk[:, None, :] - feats[None, :, :]).sum(axis=2)
            out[lo:hi] = np.exp(-gamma * diff)
            return
        dot = chunk @ feats.T
        if kind == "linear":
            out[lo:hi] = dot
        elif kind == "polynomial":
            out[lo:hi] = (gamma * dot + spec.poly_coef0) ** spec.poly_degree
        elif kind == "rbf":
            # true squared distances, not the unit-norm shortcut, so rows
            # sitting anywhere inside the norm tolerance match the scalar op
            d2 = np.maximum(sqnorms[lo:hi, None] + sqnorms[None, :] - 2.0 * dot, 0.0)
            out[lo:hi] = np.exp(-d2 / spec.tau)
        elif kind == "exponential":
            out[lo:hi] = np.exp(dot / spec.tau)
        elif kind == "sigmoid":
            out[lo:hi] = np.tanh(gamma * dot + spec.sigmoid_coef0)
        else:
            raise ValueError(f"unknown kernel kind {kind!r}")

    map_ordered(fill, _block_ranges(m, block))
    out += out.T
    out *= 0.5
    return out
