import numpy as np
import pytest

from covlink import (
    PenaltySpec,
    penalty_value,
    prox_group_rows,
    prox_l1,
    prox_nuclear,
    prox_sparse_group,
    prox_weighted_l1,
)
from oracles import cvxpy_prox, prox_objective

KINDS = {
    "l1": lambda M, t: prox_l1(M, t),
    "group_rows": lambda M, t: prox_group_rows(M, t),
    "sparse_group": lambda M, t: prox_sparse_group(M, 0.7 * t, 1.3 * t),
    "nuclear": lambda M, t: prox_nuclear(M, t),
}


def test_l1_scalar_cases():
    assert prox_l1(np.array([[2.5]]), 1.0)[0, 0] == pytest.approx(1.5)
    assert prox_l1(np.array([[-0.5]]), 1.0)[0, 0] == 0.0
    M = np.random.default_rng(0).standard_normal((4, 3))
    assert np.array_equal(prox_l1(M, 0.0), M)


def test_group_rows_cases():
    out = prox_group_rows(np.array([[3.0, 4.0]]), 1.0)
    assert np.allclose(out, [[2.4, 3.2]])
    out = prox_group_rows(np.array([[0.3, 0.4]]), 1.0)
    assert np.all(out == 0.0)
    assert np.all(prox_group_rows(np.zeros((2, 2)), 1.0) == 0.0)


def test_sparse_group_degenerate_thresholds():
    rng = np.random.default_rng(1)
    M = rng.standard_normal((5, 3))
    assert np.allclose(prox_sparse_group(M, 0.4, 0.0), prox_l1(M, 0.4))
    assert np.allclose(prox_sparse_group(M, 0.0, 0.4), prox_group_rows(M, 0.4))


def test_nuclear_diagonal_case():
    M = np.diag([3.0, 1.0])
    out = prox_nuclear(M, 2.0)
    assert np.allclose(out, np.diag([1.0, 0.0]), atol=1e-12)
    rng = np.random.default_rng(2)
    M = rng.standard_normal((3, 4))
    assert np.allclose(prox_nuclear(M, 0.0), M, atol=1e-12)


def test_nuclear_svd_structure():
    rng = np.random.default_rng(3)
    M = rng.standard_normal((6, 4))
    t = 0.7
    out = prox_nuclear(M, t)
    s_in = np.linalg.svd(M, compute_uv=False)
    s_out = np.linalg.svd(out, compute_uv=False)
    assert np.allclose(s_out, np.maximum(s_in - t, 0.0), atol=1e-10)
    # nonzero part keeps the singular subspaces: M out' = U diag(s (s-t)+) U'
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    recon = (U * np.maximum(s - t, 0.0)) @ Vt
    assert np.allclose(out, recon, atol=1e-10)


def test_weighted_l1_cases():
    rng = np.random.default_rng(4)
    M = rng.standard_normal((4, 3))
    assert np.allclose(prox_weighted_l1(M, 0.3, np.ones(3)), prox_l1(M, 0.3))
    out = prox_weighted_l1(np.array([[2.5]]), 1.0, np.array([2.0]))
    assert out[0, 0] == pytest.approx(0.5)
    # columnwise oracle: each column is a plain soft-threshold at t * w_k
    w = np.array([0.5, 1.0, 2.0])
    out = prox_weighted_l1(M, 0.4, w)
    for j in range(3):
        assert np.allclose(out[:, j], prox_l1(M[:, [j]], 0.4 * w[j])[:, 0])
    with pytest.raises(ValueError):
        prox_weighted_l1(M, 0.4, np.array([1.0, -1.0, 1.0]))


@pytest.mark.parametrize("kind", sorted(KINDS))
@pytest.mark.parametrize("seed", range(3))
def test_prox_beats_random_probes(kind, seed):
    rng = np.random.default_rng(10 * seed + 5)
    M = rng.standard_normal((5, 4))
    t = 0.6
    kw = dict(gamma1=0.7 * t, gamma2=1.3 * t) if kind == "sparse_group" else {}
    t_eff = 1.0 if kind == "sparse_group" else t
    out = KINDS[kind](M, t)
    ours = prox_objective(out, M, t_eff, kind, **kw)
    for _ in range(100):
        probe = out + 0.3 * rng.standard_normal(M.shape)
        assert ours <= prox_objective(probe, M, t_eff, kind, **kw) + 1e-12


@pytest.mark.parametrize("kind", sorted(KINDS))
def test_prox_matches_convex_solver(kind):
    rng = np.random.default_rng(77)
    for _ in range(3):
        M = rng.standard_normal((5, 4))
        t = 0.5
        kw = dict(gamma1=0.7 * t, gamma2=1.3 * t) if kind == "sparse_group" else {}
        t_eff = 1.0 if kind == "sparse_group" else t
        out = KINDS[kind](M, t)
        ours = prox_objective(out, M, t_eff, kind, **kw)
        _, ref = cvxpy_prox(M, t_eff, kind, **kw)
        assert ours <= ref + 1e-8


@pytest.mark.parametrize("kind", sorted(KINDS))
def test_firm_nonexpansiveness_spot_check(kind):
    rng = np.random.default_rng(88)
    for _ in range(5):
        A = rng.standard_normal((5, 4))
        B = rng.standard_normal((5, 4))
        fa, fb = KINDS[kind](A, 0.8), KINDS[kind](B, 0.8)
        assert np.linalg.norm(fa - fb) <= np.linalg.norm(A - B) + 1e-12


def test_penalty_values():
    rng = np.random.default_rng(9)
    B = rng.standard_normal((4, 3))
    assert penalty_value(B, PenaltySpec.l1()) == pytest.approx(np.abs(B).sum())
    assert penalty_value(B, PenaltySpec.group_rows()) == pytest.approx(
        np.sqrt((B**2).sum(axis=1)).sum()
    )
    assert penalty_value(B, PenaltySpec.nuclear()) == pytest.approx(
        np.linalg.svd(B, compute_uv=False).sum()
    )
    w = np.array([1.0, 2.0, 0.5])
    assert penalty_value(B, PenaltySpec.weighted_l1(w)) == pytest.approx(
        (np.abs(B).sum(axis=0) * w).sum()
    )
    assert penalty_value(B, PenaltySpec.sparse_group(0.3, 0.7)) == pytest.approx(
        0.3 * np.abs(B).sum() + 0.7 * np.sqrt((B**2).sum(axis=1)).sum()
    )
