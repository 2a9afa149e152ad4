"""Ensembling prompt-specific affinity graphs by regularized diffusion.

Given B normalized affinity matrices S_1..S_B (one per prompt), this
module jointly learns a dense consensus affinity A and a simplex weight
vector beta by alternating two exact subproblem solves:

* ``diffusion_loss`` scores how well A respects one graph's structure:
  the quadratic form vec(A)^T (I - S (x) S) vec(A), computed in the
  reduced form ||A||_F^2 - <A, S A S^T> (the Kronecker lift is only ever
  materialized by the test oracles and ``closed_form_affinity``).
* With beta fixed, the optimal A solves a strictly convex quadratic whose
  fixed point is reached by iterating
      A <- sum_b beta_b/(mu+1) * S_b A S_b^T + mu/(mu+1) * E.
  Each sweep is a gradient-descent step with step size 1/(2(mu+1)), below
  the 2/L stability bound, so every sweep decreases the objective and the
  iteration contracts with factor at most 1/(mu+1) < 1.
* With A fixed, the optimal beta is the Euclidean projection of -H/lambda
  onto the probability simplex (H holding the per-graph diffusion losses),
  solved in closed form by the sorted KKT single pass.

The reference matrix E (identity by default) keeps the consensus from
smoothing into a rank-one blur; mu sets the pull toward it and lambda
controls how evenly beta spreads across prompts.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .graph import SparseAffinity, normalize
from .tensorio import AnchorBank

CLOSED_FORM_MAX_SIZE = 64


@dataclass(frozen=True)
class DiffusionConfig:
    """Knobs of the alternating optimization.

    The production defaults are mu=0.1, lambda=10.  Iteration caps and
    tolerances are exposed because the inner fixed-point contraction slows
    down as mu shrinks (factor 1/(mu+1) per sweep); oracle-grade agreement
    with the closed form needs a tighter budget than the defaults.
    """

    mu: float = 0.1
    lam: float = 10.0
    max_outer: int = 50
    max_inner: int = 100
    inner_tol: float = 1e-7
    outer_tol: float = 1e-6
    pattern_restricted: bool = False

    def __post_init__(self) -> None:
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if not (self.inner_tol > 0 and self.outer_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration caps must be >= 1")


@dataclass
class EnsembleState:
    """Result of one ensembling run: consensus affinity, weights, and the trace.

    ``objective_trace[t]`` and ``beta_trace[t]`` describe the state after
    outer iteration t, with row 0 holding the initial point (A = E,
    uniform weights).
    """

    a_hat: np.ndarray
    beta: np.ndarray
    objective_trace: list[float]
    beta_trace: list[np.ndarray]
    losses: np.ndarray
    outer_iterations: int = 0


def _sandwich(s: sp.csr_matrix, a: np.ndarray) -> np.ndarray:
    # S A S^T without densifying S: (S (S A)^T)^T
    return np.asarray((s @ np.asarray(s @ a).T).T)


def diffusion_loss(a_hat: np.ndarray, s: sp.spmatrix | np.ndarray) -> float:
    """Quadratic diffusion objective ||A||_F^2 - <A, S A S^T> for one graph.

    Non-negative whenever the spectral radius of S is at most 1, which the
    symmetric degree normalization guarantees.
    """
    a_hat = np.asarray(a_hat, dtype=np.float64)
    if a_hat.shape[0] != a_hat.shape[1]:
        raise ValueError(f"consensus affinity must be square, got {a_hat.shape}")
    if s.shape != a_hat.shape:
        raise ValueError(f"size mismatch: affinity {a_hat.shape}, graph {s.shape}")
    s = sp.csr_matrix(s)
    return float(np.sum(a_hat * a_hat) - np.sum(a_hat * _sandwich(s, a_hat)))


def update_affinity(
    s_list: Sequence[sp.spmatrix],
    beta: np.ndarray,
    reference: np.ndarray,
    config: DiffusionConfig,
    start: np.ndarray | None = None,
    pattern_mask: np.ndarray | None = None,
) -> np.ndarray:
    """Fixed-point iteration for the consensus affinity at fixed beta.

    Starts from the reference matrix unless ``start`` is given, and stops
    once the relative Frobenius change drops below ``config.inner_tol`` or
    the sweep budget runs out.  With ``pattern_mask`` set, every sweep is
    followed by projection onto the allowed sparsity pattern (union of the
    input patterns plus the diagonal) -- the documented large-M mode, which
    is not numerically identical to the dense one.
    """
    beta = np.asarray(beta, dtype=np.float64)
    mu = config.mu
    a = np.array(start if start is not None else reference, dtype=np.float64)
    pull = reference * (mu / (mu + 1.0))
    scale = beta / (mu + 1.0)
    for _ in range(config.max_inner):
        nxt = pull.copy()
        for coef, s in zip(scale, s_list):
            if coef != 0.0:
                nxt += coef * _sandwich(s, a)
        if pattern_mask is not None:
            nxt *= pattern_mask
        nxt = (nxt + nxt.T) * 0.5
        if not np.isfinite(nxt).all():
            raise FloatingPointError("diffusion iteration produced non-finite values")
        delta = np.linalg.norm(nxt - a) / max(np.linalg.norm(a), np.finfo(float).tiny)
        a = nxt
        if delta < config.inner_tol:
            break
    return a


def closed_form_affinity(
    s_list: Sequence[sp.spmatrix],
    beta: np.ndarray,
    reference: np.ndarray,
    mu: float,
) -> np.ndarray:
    """Direct solve of the consensus subproblem through the M^2 x M^2 system.

    Builds the Kronecker-lifted operator explicitly, so it is guarded to
    M <= 64 and intended as the small-scale reference for the iterative
    solver.  Column-major vec/unvec keeps vec(S A S^T) = (S (x) S) vec(A)
    exact for symmetric S.
    """
    m = reference.shape[0]
    if m > CLOSED_FORM_MAX_SIZE:
        raise ValueError(
            f"closed-form solve builds an {m * m} x {m * m} system; "
            f"limit is M <= {CLOSED_FORM_MAX_SIZE}"
        )
    beta = np.asarray(beta, dtype=np.float64)
    system = np.eye(m * m)
    for b, s in zip(beta, s_list):
        dense = np.asarray(s.todense() if sp.issparse(s) else s, dtype=np.float64)
        system -= (b / (mu + 1.0)) * np.kron(dense, dense)
    rhs = reference.flatten(order="F")
    solution = np.linalg.solve(system, rhs)
    return (mu / (mu + 1.0)) * solution.reshape((m, m), order="F")


def solve_simplex_weights(losses: np.ndarray, lam: float) -> np.ndarray:
    """Exact minimizer of beta . H + (lambda/2)||beta||^2 over the simplex.

    Equivalent to projecting -H/lambda onto the simplex.  Sorting H
    ascending, the active set is the largest prefix whose members satisfy
    H_b < (sum of the prefix + lambda) / (prefix size); every active
    coordinate gets (eta - H_b)/lambda with eta the prefix threshold.
    """
    h = np.asarray(losses, dtype=np.float64).ravel()
    if h.size == 0:
        raise ValueError("need at least one loss value")
    if not np.isfinite(h).all():
        raise ValueError("losses must be finite")
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    order = np.argsort(h, kind="stable")
    sorted_h = h[order]
    sizes = np.arange(1, h.size + 1, dtype=np.float64)
    eta = (np.cumsum(sorted_h) + lam) / sizes
    valid = np.flatnonzero(sorted_h < eta)
    if valid.size == 0:  # cannot happen for finite H and lam > 0
        raise RuntimeError("empty active set in simplex solve")
    k = int(valid[-1]) + 1
    beta = np.zeros_like(h)
    beta[order[:k]] = (eta[k - 1] - sorted_h[:k]) / lam
    return beta


def _objective(
    losses: np.ndarray,
    beta: np.ndarray,
    a_hat: np.ndarray,
    reference: np.ndarray,
    config: DiffusionConfig,
) -> float:
    fit = float(beta @ losses)
    pull = config.mu * float(np.sum((a_hat - reference) ** 2))
    spread = 0.5 * config.lam * float(beta @ beta)
    return fit + pull + spread


def ensemble_affinities(
    affinities: Sequence[SparseAffinity],
    reference: np.ndarray | None = None,
    config: DiffusionConfig | None = None,
    callback: Callable[[int, np.ndarray, np.ndarray, float], None] | None = None,
) -> EnsembleState:
    """Alternating optimization of the consensus affinity and prompt weights.

    Starts from uniform weights and A = E, then repeats: diffuse A at the
    current weights (warm-started from the previous consensus, so every
    sweep keeps decreasing the joint objective even when the sweep budget
    truncates the inner solve), re-score the per-graph losses, and re-solve
    the weights in closed form.  Stops when the relative change of the
    joint objective falls below ``config.outer_tol``.

    The recorded objective trace is non-increasing; ``callback`` (if given)
    observes each outer iterate.
    """
    if not affinities:
        raise ValueError("need at least one affinity graph")
    config = config or DiffusionConfig()
    m = affinities[0].size
    for i, aff in enumerate(affinities):
        if aff.size != m:
            raise ValueError(f"graph {i} has {aff.size} nodes, expected {m}")
    s_list = [normalize(aff) for aff in affinities]

    if reference is None:
        reference = np.eye(m)
    else:
        reference = np.asarray(reference, dtype=np.float64)
        if reference.shape != (m, m):
            raise ValueError(f"reference must be {m}x{m}, got {reference.shape}")
        if not np.allclose(reference, reference.T, atol=1e-10):
            raise ValueError("reference matrix must be symmetric")
        if reference.min() < 0:
            raise ValueError("reference matrix must be non-negative")

    pattern_mask = None
    if config.pattern_restricted:
        union = sum((aff.matrix != 0).astype(np.int8) for aff in affinities)
        pattern_mask = np.asarray(union.todense()) > 0
        np.fill_diagonal(pattern_mask, True)

    n_prompts = len(affinities)
    beta = np.full(n_prompts, 1.0 / n_prompts)
    a_hat = reference.copy()
    losses = np.array([diffusion_loss(a_hat, s) for s in s_list])
    trace = [_objective(losses, beta, a_hat, reference, config)]
    beta_trace = [beta.copy()]

    iterations = 0
    for step in range(config.max_outer):
        a_hat = update_affinity(
            s_list, beta, reference, config, start=a_hat, pattern_mask=pattern_mask
        )
        losses = np.array([diffusion_loss(a_hat, s) for s in s_list])
        beta = solve_simplex_weights(losses, config.lam)
        value = _objective(losses, beta, a_hat, reference, config)
        trace.append(value)
        beta_trace.append(beta.copy())
        iterations = step + 1
        if callback is not None:
            callback(step, a_hat, beta, value)
        if abs(trace[-2] - value) <= config.outer_tol * max(1.0, abs(trace[-2])):
            break

    return EnsembleState(
        a_hat=a_hat,
        beta=beta,
        objective_trace=trace,
        beta_trace=beta_trace,
        losses=losses,
        outer_iterations=iterations,
    )


def average_affinities(affinities: Sequence[SparseAffinity]) -> sp.csr_matrix:
    """Uniform-weight baseline: the elementwise mean of the input graphs."""
    if not affinities:
        raise ValueError("need at least one affinity graph")
    m = affinities[0].size
    total = sp.csr_matrix((m, m))
    for aff in affinities:
        if aff.size != m:
            raise ValueError("affinity graphs must share their node count")
        total = total + aff.matrix
    return sp.csr_matrix(total / len(affinities))


def average_anchor_banks(bank: AnchorBank) -> np.ndarray:
    """Per-anchor mean of the prompt embeddings (the prompt-ensembling baseline).

    The averaged rows are returned as-is -- not re-normalized -- and feed
    the softmax/tangent-kernel ops directly.  Rows that cancel to (near)
    zero make the downstream softmax uninformative, hence the warning.
    """
    stacked = np.stack(bank.banks)
    mean = stacked.mean(axis=0)
    norms = np.linalg.norm(mean, axis=1)
    if (norms < 1e-8).any():
        degenerate = np.flatnonzero(norms < 1e-8).tolist()
        warnings.warn(
            f"prompt-averaged anchors {degenerate} are numerically zero; "
            "their softmax scores carry no signal",
            RuntimeWarning,
            stacklevel=2,
        )
    return mean


def write_trace(
    path: str | Path,
    state: EnsembleState,
    nmi_per_iteration: Sequence[float] | None = None,
) -> None:
    """Convergence trace as CSV: iteration, objective, beta values[, nmi].

    Row 0 is the initial state (uniform weights, A = E); the optional nmi
    column is aligned with rows 1..T and blank on row 0.
    """
    n_prompts = state.beta.size
    header = ["iteration", "objective"] + [f"beta_{b}" for b in range(n_prompts)]
    if nmi_per_iteration is not None:
        header.append("nmi")
    rows = [",".join(header)]
    for it, (value, beta) in enumerate(zip(state.objective_trace, state.beta_trace)):
        cells = [str(it), f"{value:.17g}"]
        cells += [f"{w:.17g}" for w in beta]
        if nmi_per_iteration is not None:
            if 1 <= it <= len(nmi_per_iteration):
                cells.append(f"{nmi_per_iteration[it - 1]:.6f}")
            else:
                cells.append("")
        rows.append(",".join(cells))
    Path(path).write_text("\n".join(rows) + "\n")
