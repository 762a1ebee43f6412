# Pure-numpy implementations of the hot kernels: weighted-residual loss and
# gradient (complete and observed-data forms), their Gram-matrix variants used
# inside the solver, and the proximal operators.  The numba backend in
# _kernels_nb.py provides loop-fused twins of the same functions.

import numpy as np


def omega_inv(beta, tau):
    # (beta'beta + tau I)^{-1}; Woodbury route when p < q keeps the solve p x p.
    p, q = beta.shape
    if q <= p:
        return np.linalg.inv(beta.T @ beta + tau * np.eye(q))
    B = np.eye(p) + (beta @ beta.T) / tau
    Binv_beta = np.linalg.solve(B, beta)
    return np.eye(q) / tau - (beta.T @ Binv_beta) / tau**2


def loss_full(X, Y, beta, tau):
    n = X.shape[0]
    W = omega_inv(beta, tau)
    R = Y - X @ beta
    return float(np.sum(R * (R @ W)) / n)


def grad_full(X, Y, beta, tau):
    n = X.shape[0]
    W = omega_inv(beta, tau)
    R = Y - X @ beta
    return (-2.0 / n) * (beta @ W @ (R.T @ R) @ W + X.T @ (R @ W))


def loss_observed(X, Y, M, beta, tau):
    # M is the float {0,1} mask; Y holds zeros at unobserved cells.
    n = X.shape[0]
    W = omega_inv(beta, tau)
    R = (Y - X @ beta) * M
    return float(np.sum(R * (R @ W)) / n)


def grad_observed(X, Y, M, beta, tau):
    n = X.shape[0]
    W = omega_inv(beta, tau)
    R = (Y - X @ beta) * M
    return (-2.0 / n) * (beta @ W @ (R.T @ R) @ W + X.T @ ((R @ W) * M))


def loss_full_gram(Syy, C, G, beta, tau, n):
    W = omega_inv(beta, tau)
    Gb = G @ beta
    RtR = Syy - C.T @ beta - beta.T @ C + beta.T @ Gb
    return float(np.sum(RtR * W) / n)


def grad_full_gram(Syy, C, G, beta, tau, n):
    W = omega_inv(beta, tau)
    Gb = G @ beta
    RtR = Syy - C.T @ beta - beta.T @ C + beta.T @ Gb
    return (-2.0 / n) * (beta @ W @ RtR @ W + (C - Gb) @ W)


def loss_fixed_gram(Syy, C, G, beta, Winv, n):
    Gb = G @ beta
    RtR = Syy - C.T @ beta - beta.T @ C + beta.T @ Gb
    return float(np.sum(RtR * Winv) / n)


def grad_fixed_gram(Syy, C, G, beta, Winv, n):
    return (2.0 / n) * ((G @ beta - C) @ Winv)


def prox_l1(M, t):
    return np.sign(M) * np.maximum(np.abs(M) - t, 0.0)


def prox_group_rows(M, t):
    norms = np.sqrt(np.sum(M * M, axis=1))
    # shrinkage factor is 0 on exactly-zero rows (limit of the formula)
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(norms > 0.0, np.maximum(1.0 - t / norms, 0.0), 0.0)
    return M * factor[:, None]


def prox_sparse_group(M, t_l1, t_group):
    return prox_group_rows(prox_l1(M, t_l1), t_group)


def prox_weighted_l1(M, t, weights):
    thr = t * weights
    return np.sign(M) * np.maximum(np.abs(M) - thr[None, :], 0.0)


def prox_nuclear(M, t):
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    s = np.maximum(s - t, 0.0)
    return (U * s) @ Vt
