import numpy as np
import pytest

from covlink import backend


def make_dataset(seed, n=20, p=6, q=4, missing=0.0, k=0, noise=0.5, beta_scale=1.0):
    """A random centered dataset with a planted linear signal."""
    from covlink import center_data

    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    beta = beta_scale * rng.standard_normal((p, q))
    Y = X @ beta + noise * rng.standard_normal((n, q))
    mask = None
    if missing > 0.0:
        mask = rng.random((n, q)) > missing
        for j in range(q):
            if mask[:, j].sum() < 2:
                mask[:2, j] = True
    V = None
    if k > 0:
        V = rng.standard_normal((n, k))
        Y = Y + V @ rng.standard_normal((k, q))
    return center_data(X, Y, raw_V=V, mask=mask)


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Trigger numba JIT once per session so timed tests measure steady state."""
    if backend.active_backend() != "numba":
        return
    K = backend.kernels()
    rng = np.random.default_rng(0)
    X = rng.standard_normal((6, 3))
    Y = rng.standard_normal((6, 2))
    M = np.ones((6, 2))
    b = rng.standard_normal((3, 2))
    wide = rng.standard_normal((2, 5))
    K.omega_inv(b, 1.0)
    K.omega_inv(np.ascontiguousarray(wide), 1.0)
    K.loss_full(X, Y, b, 1.0)
    K.grad_full(X, Y, b, 1.0)
    K.loss_observed(X, Y, M, b, 1.0)
    K.grad_observed(X, Y, M, b, 1.0)
    Syy, C, G = Y.T @ Y, X.T @ Y, X.T @ X
    K.loss_full_gram(Syy, C, G, b, 1.0, 6)
    K.grad_full_gram(Syy, C, G, b, 1.0, 6)
    K.loss_fixed_gram(Syy, C, G, b, np.eye(2), 6)
    K.grad_fixed_gram(Syy, C, G, b, np.eye(2), 6)
    K.prox_l1(b, 0.1)
    K.prox_group_rows(b, 0.1)
    K.prox_sparse_group(b, 0.1, 0.1)
    K.prox_weighted_l1(b, 0.1, np.ones(2))
    K.prox_nuclear(b, 0.1)
