"""Consensus-affinity ensembling: losses, solvers, weights, and the full loop."""

from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sp

from ntkclust import (
    AnchorBank,
    DiffusionConfig,
    KernelSpec,
    SparseAffinity,
    average_affinities,
    average_anchor_banks,
    build_affinity,
    closed_form_affinity,
    diffusion_loss,
    ensemble_affinities,
    normalize,
    solve_simplex_weights,
    update_affinity,
)

from conftest import random_unit_vectors
from oracles import (
    grid_simplex_argmin,
    kron_diffusion_loss,
    kron_fixed_point,
    pairwise_descent_weights,
    simplex_objective,
)


def random_affinity(m: int, q: int, seed: int) -> SparseAffinity:
    pts = random_unit_vectors(m, 6, np.random.default_rng(seed))
    return build_affinity(pts, KernelSpec(kind="rbf", tau=0.5), q=q)


def block_affinity(m: int) -> SparseAffinity:
    half = m // 2
    dense = np.zeros((m, m))
    dense[:half, :half] = 1.0
    dense[half:, half:] = 1.0
    np.fill_diagonal(dense, 0.0)
    return SparseAffinity(sp.csr_matrix(dense))


def noise_affinity(m: int, seed: int) -> SparseAffinity:
    """Relabeled circulant: same degree and weights as the block graph, no communities."""
    rng = np.random.default_rng(seed)
    dense = np.zeros((m, m))
    for i in range(m):
        for k in range(1, m // 4):  # degree matches the two-clique blocks
            dense[i, (i + k) % m] = dense[(i + k) % m, i] = 1.0
        dense[i, (i + m // 2) % m] = dense[(i + m // 2) % m, i] = 1.0
    perm = rng.permutation(m)
    return SparseAffinity(sp.csr_matrix(dense[np.ix_(perm, perm)]))


# diffusion loss -------------------------------------------------------------


def test_loss_zero_matrix():
    s = normalize(random_affinity(5, 2, seed=0))
    assert diffusion_loss(np.zeros((5, 5)), s) == 0.0


@pytest.mark.parametrize("m", [3, 4])
def test_loss_matches_kronecker_oracle(m):
    rng = np.random.default_rng(m)
    s = normalize(random_affinity(m, min(2, m - 1), seed=m)).toarray()
    for _ in range(5):
        a_hat = rng.normal(size=(m, m))
        a_hat = (a_hat + a_hat.T) / 2
        got = diffusion_loss(a_hat, sp.csr_matrix(s))
        want = kron_diffusion_loss(a_hat, s)
        assert abs(got - want) <= 1e-12 * (1 + abs(want))


def test_loss_vanishes_on_unit_eigenvector_pair():
    aff = random_affinity(6, 2, seed=3)
    s = normalize(aff)
    # eigenvalue 1 of the normalized affinity belongs to D^{1/2} 1
    vec = np.sqrt(aff.degrees)
    vec /= np.linalg.norm(vec)
    outer = np.outer(vec, vec)
    assert abs(diffusion_loss(outer, s)) <= 1e-10


def test_loss_nonnegative_on_randoms():
    rng = np.random.default_rng(4)
    for seed in range(10):
        m = int(rng.integers(4, 12))
        s = normalize(random_affinity(m, 2, seed=seed))
        a_hat = rng.normal(size=(m, m))
        assert diffusion_loss(a_hat, s) >= -1e-10


def test_loss_size_mismatch():
    s = normalize(random_affinity(5, 2, seed=5))
    with pytest.raises(ValueError, match="size"):
        diffusion_loss(np.zeros((4, 4)), s)


# affinity update ------------------------------------------------------------


def test_update_identity_graph_fixed_point():
    e = np.diag(np.array([1.0, 2.0, 3.0]))
    s = sp.identity(3, format="csr")
    cfg = DiffusionConfig(mu=0.1)
    out = update_affinity([s], np.array([1.0]), e, cfg)
    assert np.array_equal(out, e)


@pytest.mark.parametrize("mu", [0.1, 1.0])
@pytest.mark.parametrize("n_graphs", [1, 2, 3])
def test_update_matches_closed_form(mu, n_graphs):
    m = 4
    s_list = [normalize(random_affinity(m, 2, seed=10 * n_graphs + i)) for i in range(n_graphs)]
    beta = solve_simplex_weights(np.random.default_rng(n_graphs).uniform(0, 2, n_graphs), 10.0)
    e = np.eye(m)
    cfg = DiffusionConfig(mu=mu, inner_tol=1e-13, max_inner=5000)
    iterated = update_affinity(s_list, beta, e, cfg)
    closed = closed_form_affinity(s_list, beta, e, mu)
    rel = np.linalg.norm(iterated - closed) / np.linalg.norm(closed)
    assert rel <= 1e-8
    oracle = kron_fixed_point([s.toarray() for s in s_list], beta, e, mu)
    assert np.allclose(closed, oracle, atol=1e-12)


def test_update_large_mu_pins_reference():
    m = 5
    s_list = [normalize(random_affinity(m, 2, seed=20))]
    e = np.eye(m)
    cfg = DiffusionConfig(mu=1e6, inner_tol=1e-12, max_inner=200)
    out = update_affinity(s_list, np.array([1.0]), e, cfg)
    assert np.abs(out - e).max() <= 1e-5


def test_closed_form_zero_graph():
    m = 4
    s = sp.csr_matrix((m, m))
    e = np.arange(16, dtype=float).reshape(4, 4)
    e = (e + e.T) / 2
    out = closed_form_affinity([s], np.array([1.0]), e, mu=0.1)
    assert np.allclose(out, (0.1 / 1.1) * e, atol=1e-14)


def test_closed_form_size_guard():
    m = 65
    with pytest.raises(ValueError, match="M <= 64"):
        closed_form_affinity([sp.identity(m)], np.array([1.0]), np.eye(m), mu=0.1)


def test_closed_form_identity_reference_diagonal_dominates():
    # with E = I the solution is a positive sum of Gram matrices, hence PSD:
    # every off-diagonal entry is bounded by the larger of its two diagonals
    for seed in range(5):
        s_list = [normalize(random_affinity(5, 2, seed=30 + seed))]
        out = closed_form_affinity(s_list, np.array([1.0]), np.eye(5), mu=0.1)
        diag = np.diag(out)
        for i in range(5):
            for j in range(5):
                if i != j:
                    assert out[i, j] <= max(diag[i], diag[j]) + 1e-12
        assert diag.max() >= out[~np.eye(5, dtype=bool)].max() - 1e-12
        assert np.linalg.eigvalsh(out).min() >= -1e-10


# weight solve ---------------------------------------------------------------


def test_weights_equal_losses_uniform():
    beta = solve_simplex_weights(np.array([2.0, 2.0, 2.0, 2.0]), lam=10.0)
    assert np.allclose(beta, 0.25, atol=1e-15)


def test_weights_boundary_case():
    beta = solve_simplex_weights(np.array([0.0, 12.0]), lam=10.0)
    assert np.allclose(beta, [1.0, 0.0], atol=1e-15)
    beta = solve_simplex_weights(np.array([0.0, 10.0]), lam=10.0)
    assert np.allclose(beta, [1.0, 0.0], atol=1e-15)


def test_weights_on_simplex_randoms():
    rng = np.random.default_rng(6)
    for _ in range(200):
        b = int(rng.integers(1, 8))
        h = rng.uniform(0, 50, size=b)
        lam = float(rng.uniform(0.5, 20))
        beta = solve_simplex_weights(h, lam)
        assert abs(beta.sum() - 1.0) <= 1e-12
        assert (beta >= 0).all() and (beta <= 1 + 1e-12).all()


def test_weights_match_grid_oracle():
    rng = np.random.default_rng(7)
    for _ in range(10):
        b = int(rng.integers(2, 5))
        h = rng.uniform(0, 20, size=b)
        lam = 10.0
        beta = solve_simplex_weights(h, lam)
        grid = grid_simplex_argmin(h, lam, resolution=1e-3)
        assert np.abs(beta - grid).max() <= 2e-3
        assert simplex_objective(beta, h, lam) <= simplex_objective(grid, h, lam) + 1e-12


def test_weights_match_pairwise_descent():
    rng = np.random.default_rng(8)
    for _ in range(20):
        b = int(rng.integers(2, 7))
        h = rng.uniform(0, 30, size=b)
        lam = float(rng.uniform(1, 15))
        beta = solve_simplex_weights(h, lam)
        cd = pairwise_descent_weights(h, lam)
        assert np.abs(beta - cd).max() <= 1e-8


def test_weights_reject_bad_input():
    with pytest.raises(ValueError, match="finite"):
        solve_simplex_weights(np.array([1.0, np.inf]), 1.0)
    with pytest.raises(ValueError, match="lambda"):
        solve_simplex_weights(np.array([1.0]), 0.0)


# full loop ------------------------------------------------------------------


def test_single_graph_keeps_unit_weight():
    aff = random_affinity(8, 3, seed=9)
    state = ensemble_affinities([aff])
    assert np.allclose(state.beta, [1.0])
    closed = closed_form_affinity([normalize(aff)], np.array([1.0]), np.eye(8), mu=0.1)
    assert np.linalg.norm(state.a_hat - closed) <= 1e-3 * np.linalg.norm(closed)


def test_structured_graph_outweighs_noise():
    m = 24
    structured = block_affinity(m)
    noisy = noise_affinity(m, seed=10)
    state = ensemble_affinities([structured, noisy])
    assert state.beta[0] > state.beta[1]


def test_trace_non_increasing_on_randoms():
    rng = np.random.default_rng(11)
    for run in range(10):
        m = int(rng.integers(6, 20))
        n_graphs = int(rng.integers(1, 4))
        affs = [random_affinity(m, 3, seed=100 * run + g) for g in range(n_graphs)]
        state = ensemble_affinities(affs)
        trace = state.objective_trace
        assert all(trace[t + 1] <= trace[t] + 1e-12 for t in range(len(trace) - 1))


def test_a_hat_stays_symmetric():
    affs = [random_affinity(10, 3, seed=s) for s in (12, 13)]
    state = ensemble_affinities(affs)
    assert np.abs(state.a_hat - state.a_hat.T).max() <= 1e-10


def test_contraction_bound_dense():
    rng = np.random.default_rng(14)
    for seed in range(5):
        m = int(rng.integers(4, 9))
        n_graphs = int(rng.integers(1, 4))
        s_list = [normalize(random_affinity(m, 2, seed=200 + 10 * seed + g)).toarray()
                  for g in range(n_graphs)]
        beta = solve_simplex_weights(rng.uniform(0, 5, n_graphs), 10.0)
        mu = 0.1
        lifted = sum(
            (b / (mu + 1)) * np.kron(s, s) for b, s in zip(beta, s_list)
        )
        radius = np.max(np.abs(np.linalg.eigvals(lifted)))
        assert radius <= 1 / (mu + 1) + 1e-10


def test_pattern_restricted_mode():
    affs = [random_affinity(12, 3, seed=s) for s in (15, 16)]
    cfg = DiffusionConfig(pattern_restricted=True)
    state = ensemble_affinities(affs, config=cfg)
    union = (affs[0].matrix + affs[1].matrix).toarray() != 0
    np.fill_diagonal(union, True)
    assert (state.a_hat[~union] == 0).all()
    assert np.abs(state.a_hat - state.a_hat.T).max() <= 1e-10
    dense_state = ensemble_affinities(affs)
    # the two modes deliberately differ numerically
    assert not np.allclose(state.a_hat, dense_state.a_hat)


def test_reference_validation():
    aff = random_affinity(6, 2, seed=17)
    with pytest.raises(ValueError, match="symmetric"):
        ensemble_affinities([aff], reference=np.triu(np.ones((6, 6))))
    with pytest.raises(ValueError, match="non-negative"):
        ensemble_affinities([aff], reference=-np.eye(6))
    with pytest.raises(ValueError, match="6x6"):
        ensemble_affinities([aff], reference=np.eye(5))


# baselines ------------------------------------------------------------------


def test_average_single_graph_is_identity_map():
    aff = random_affinity(7, 2, seed=18)
    avg = average_affinities([aff])
    assert np.allclose(avg.toarray(), aff.matrix.toarray(), atol=1e-15)


def test_average_matches_mean():
    affs = [random_affinity(9, 3, seed=s) for s in (19, 20, 21)]
    avg = average_affinities(affs).toarray()
    want = sum(a.matrix.toarray() for a in affs) / 3
    assert np.abs(avg - want).max() <= 1e-15


def test_prompt_average_single_bank_identity():
    rng = np.random.default_rng(22)
    bank = AnchorBank(banks=[random_unit_vectors(5, 6, rng)])
    assert np.array_equal(average_anchor_banks(bank), bank.banks[0])


def test_prompt_average_degenerate_warns():
    rng = np.random.default_rng(23)
    w = random_unit_vectors(4, 6, rng)
    bank = AnchorBank(banks=[w, -w])
    with pytest.warns(RuntimeWarning, match="zero"):
        mean = average_anchor_banks(bank)
    assert np.abs(mean).max() <= 1e-12


def test_prompt_average_matches_mean():
    rng = np.random.default_rng(24)
    banks = [random_unit_vectors(6, 8, rng) for _ in range(3)]
    bank = AnchorBank(banks=banks)
    got = average_anchor_banks(bank)
    want = (banks[0] + banks[1] + banks[2]) / 3
    assert np.abs(got - want).max() <= 1e-15
