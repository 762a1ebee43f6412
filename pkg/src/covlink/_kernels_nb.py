# Numba-compiled twins of the kernels in _kernels_np.py.  Matrix products go
# through np.dot (LAPACK/BLAS inside nopython mode); the elementwise parts are
# written as explicit loops so numba can fuse them.  First call pays a JIT
# compile; cache=True persists the compiled code across processes.

import numpy as np
from numba import njit


@njit(cache=True)
def omega_inv(beta, tau):
    p, q = beta.shape
    bt = np.ascontiguousarray(beta.T)
    if q <= p:
        A = np.dot(bt, beta)
        for j in range(q):
            A[j, j] += tau
        return np.ascontiguousarray(np.linalg.inv(A))
    B = np.dot(beta, bt) / tau
    for i in range(p):
        B[i, i] += 1.0
    Binv_beta = np.linalg.solve(B, beta)
    W = np.dot(bt, Binv_beta) / (-tau * tau)
    for j in range(q):
        W[j, j] += 1.0 / tau
    return W


@njit(cache=True)
def loss_full(X, Y, beta, tau):
    n = X.shape[0]
    W = omega_inv(beta, tau)
    R = Y - np.dot(X, beta)
    RW = np.dot(R, W)
    acc = 0.0
    for i in range(R.shape[0]):
        for j in range(R.shape[1]):
            acc += R[i, j] * RW[i, j]
    return acc / n


@njit(cache=True)
def grad_full(X, Y, beta, tau):
    n = X.shape[0]
    W = omega_inv(beta, tau)
    R = Y - np.dot(X, beta)
    RW = np.dot(R, W)
    Rt = np.ascontiguousarray(R.T)
    Xt = np.ascontiguousarray(X.T)
    G = np.dot(np.dot(beta, W), np.dot(Rt, RW)) + np.dot(Xt, RW)
    return (-2.0 / n) * G


@njit(cache=True)
def loss_observed(X, Y, M, beta, tau):
    n, q = Y.shape
    W = omega_inv(beta, tau)
    R = np.dot(X, beta)
    for i in range(n):
        for j in range(q):
            R[i, j] = (Y[i, j] - R[i, j]) * M[i, j]
    RW = np.dot(R, W)
    acc = 0.0
    for i in range(n):
        for j in range(q):
            acc += R[i, j] * RW[i, j]
    return acc / n


@njit(cache=True)
def grad_observed(X, Y, M, beta, tau):
    n, q = Y.shape
    W = omega_inv(beta, tau)
    R = np.dot(X, beta)
    for i in range(n):
        for j in range(q):
            R[i, j] = (Y[i, j] - R[i, j]) * M[i, j]
    RW = np.dot(R, W)
    RWM = np.empty_like(RW)
    for i in range(n):
        for j in range(q):
            RWM[i, j] = RW[i, j] * M[i, j]
    Rt = np.ascontiguousarray(R.T)
    Xt = np.ascontiguousarray(X.T)
    G = np.dot(np.dot(beta, W), np.dot(Rt, RW)) + np.dot(Xt, RWM)
    return (-2.0 / n) * G


@njit(cache=True)
def _rtr_gram(Syy, C, G, beta):
    bt = np.ascontiguousarray(beta.T)
    Gb = np.dot(G, beta)
    BC = np.dot(bt, C)
    RtR = Syy - BC - BC.T + np.dot(bt, Gb)
    return RtR, Gb


@njit(cache=True)
def loss_full_gram(Syy, C, G, beta, tau, n):
    W = omega_inv(beta, tau)
    RtR, _ = _rtr_gram(Syy, C, G, beta)
    q = W.shape[0]
    acc = 0.0
    for i in range(q):
        for j in range(q):
            acc += RtR[i, j] * W[i, j]
    return acc / n


@njit(cache=True)
def grad_full_gram(Syy, C, G, beta, tau, n):
    W = omega_inv(beta, tau)
    RtR, Gb = _rtr_gram(Syy, C, G, beta)
    out = np.dot(np.dot(beta, W), np.dot(RtR, W)) + np.dot(C - Gb, W)
    return (-2.0 / n) * out


@njit(cache=True)
def loss_fixed_gram(Syy, C, G, beta, Winv, n):
    RtR, _ = _rtr_gram(Syy, C, G, beta)
    q = Winv.shape[0]
    acc = 0.0
    for i in range(q):
        for j in range(q):
            acc += RtR[i, j] * Winv[i, j]
    return acc / n


@njit(cache=True)
def grad_fixed_gram(Syy, C, G, beta, Winv, n):
    return (2.0 / n) * np.dot(np.dot(G, beta) - C, Winv)


@njit(cache=True)
def prox_l1(M, t):
    p, q = M.shape
    out = np.empty_like(M)
    for i in range(p):
        for j in range(q):
            v = M[i, j]
            if v > t:
                out[i, j] = v - t
            elif v < -t:
                out[i, j] = v + t
            else:
                out[i, j] = 0.0
    return out


@njit(cache=True)
def prox_group_rows(M, t):
    p, q = M.shape
    out = np.empty_like(M)
    for i in range(p):
        nrm = 0.0
        for j in range(q):
            nrm += M[i, j] * M[i, j]
        nrm = np.sqrt(nrm)
        factor = 0.0
        if nrm > t:
            factor = 1.0 - t / nrm
        for j in range(q):
            out[i, j] = factor * M[i, j]
    return out


@njit(cache=True)
def prox_sparse_group(M, t_l1, t_group):
    return prox_group_rows(prox_l1(M, t_l1), t_group)


@njit(cache=True)
def prox_weighted_l1(M, t, weights):
    p, q = M.shape
    out = np.empty_like(M)
    for j in range(q):
        thr = t * weights[j]
        for i in range(p):
            v = M[i, j]
            if v > thr:
                out[i, j] = v - thr
            elif v < -thr:
                out[i, j] = v + thr
            else:
                out[i, j] = 0.0
    return out


@njit(cache=True)
def prox_nuclear(M, t):
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    for i in range(s.shape[0]):
        s[i] = max(s[i] - t, 0.0)
    return np.dot(U * s, Vt)
