import numpy as np
import pytest

from covlink import backend
from covlink import _kernels_np

numba_missing = "numba" not in backend.available_backends()
pytestmark = pytest.mark.skipif(numba_missing, reason="numba backend unavailable")


def _instances(seed):
    rng = np.random.default_rng(seed)
    n, p, q = 12, 5, 3
    X = rng.standard_normal((n, p))
    Y = rng.standard_normal((n, q))
    M = (rng.random((n, q)) > 0.3).astype(np.float64)
    M[0] = 1.0
    beta = rng.standard_normal((p, q))
    return X, Y, M, beta


@pytest.mark.parametrize("seed", range(4))
def test_numba_and_numpy_kernels_agree(seed):
    nb = backend.kernels("numba")
    np_ = backend.kernels("numpy")
    X, Y, M, beta = _instances(seed)
    tau = 0.7
    wide = np.ascontiguousarray(np.random.default_rng(seed).standard_normal((2, 6)))

    assert np.abs(nb.omega_inv(beta, tau) - np_.omega_inv(beta, tau)).max() < 1e-12
    assert np.abs(nb.omega_inv(wide, tau) - np_.omega_inv(wide, tau)).max() < 1e-12
    assert nb.loss_full(X, Y, beta, tau) == pytest.approx(
        np_.loss_full(X, Y, beta, tau), rel=1e-12)
    assert np.abs(nb.grad_full(X, Y, beta, tau)
                  - np_.grad_full(X, Y, beta, tau)).max() < 1e-12
    assert nb.loss_observed(X, Y, M, beta, tau) == pytest.approx(
        np_.loss_observed(X, Y, M, beta, tau), rel=1e-12)
    assert np.abs(nb.grad_observed(X, Y, M, beta, tau)
                  - np_.grad_observed(X, Y, M, beta, tau)).max() < 1e-12

    Syy, C, G = Y.T @ Y, X.T @ Y, X.T @ X
    n = float(X.shape[0])
    assert nb.loss_full_gram(Syy, C, G, beta, tau, n) == pytest.approx(
        np_.loss_full_gram(Syy, C, G, beta, tau, n), rel=1e-12)
    assert np.abs(nb.grad_full_gram(Syy, C, G, beta, tau, n)
                  - np_.grad_full_gram(Syy, C, G, beta, tau, n)).max() < 1e-12
    winv = np.eye(3) * 0.5
    assert nb.loss_fixed_gram(Syy, C, G, beta, winv, n) == pytest.approx(
        np_.loss_fixed_gram(Syy, C, G, beta, winv, n), rel=1e-12)
    assert np.abs(nb.grad_fixed_gram(Syy, C, G, beta, winv, n)
                  - np_.grad_fixed_gram(Syy, C, G, beta, winv, n)).max() < 1e-12

    for args in ((beta, 0.4),):
        assert np.abs(nb.prox_l1(*args) - np_.prox_l1(*args)).max() == 0.0
        assert np.abs(nb.prox_group_rows(*args) - np_.prox_group_rows(*args)).max() == 0.0
        assert np.abs(nb.prox_nuclear(*args) - np_.prox_nuclear(*args)).max() < 1e-12
    assert np.abs(nb.prox_sparse_group(beta, 0.2, 0.3)
                  - np_.prox_sparse_group(beta, 0.2, 0.3)).max() == 0.0
    w = np.array([0.5, 1.0, 2.0])
    assert np.abs(nb.prox_weighted_l1(beta, 0.3, w)
                  - np_.prox_weighted_l1(beta, 0.3, w)).max() == 0.0


def test_gram_and_residual_paths_agree():
    K = _kernels_np
    X, Y, M, beta = _instances(11)
    tau = 1.3
    Syy, C, G = Y.T @ Y, X.T @ Y, X.T @ X
    n = float(X.shape[0])
    assert K.loss_full(X, Y, beta, tau) == pytest.approx(
        K.loss_full_gram(Syy, C, G, beta, tau, n), rel=1e-10)
    assert np.abs(K.grad_full(X, Y, beta, tau)
                  - K.grad_full_gram(Syy, C, G, beta, tau, n)).max() < 1e-10


def test_set_backend_round_trip():
    prev = backend.set_backend("numpy")
    try:
        assert backend.active_backend() == "numpy"
        from covlink import prox_l1

        out = prox_l1(np.array([[2.0]]), 0.5)
        assert out[0, 0] == 1.5
    finally:
        backend.set_backend(prev)
    with pytest.raises(ValueError):
        backend.set_backend("tpu")


def test_solver_results_match_across_backends():
    from covlink import FitConfig, PenaltySpec, center_data, solve

    rng = np.random.default_rng(21)
    X = rng.standard_normal((25, 6))
    Y = X @ rng.standard_normal((6, 3)) + rng.standard_normal((25, 3))
    data = center_data(X, Y)
    config = FitConfig(tau=0.5, lam=0.1)
    prev = backend.active_backend()
    try:
        backend.set_backend("numba")
        a = solve(data, PenaltySpec.l1(), config)
        backend.set_backend("numpy")
        b = solve(data, PenaltySpec.l1(), config)
    finally:
        backend.set_backend(prev)
    assert np.abs(a.beta_hat - b.beta_hat).max() < 1e-10
