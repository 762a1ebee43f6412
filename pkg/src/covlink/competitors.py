# Baseline estimators: L1 penalized least squares with one shared or q
# separate tuning parameters, a two-step convex approximation with a frozen
# weight matrix, and the corrected-Gram lasso for predictors measured with
# additive noise (noise variance supplied).

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import backend
from .data import FitConfig, FittedModel, PenaltySpec, RegressionData, center_data, recover_intercept
from .prox import prox_for_spec, penalty_value
from .solver import NumericError, minimize_penalized, solve
from .tuning import fold_indices, geometric_lambdas, lambda_max

LS_CONFIG = FitConfig(tau=1.0, lam=1.0, tol=1e-12, max_iter=5000)


def _ls_path(data, lambdas, config, winv=None, tau=1.0):
    """Warm-started penalized least-squares path (identity weight unless
    ``winv`` is given)."""
    q = data.q
    if winv is None:
        winv = np.eye(q)
    fits = []
    init = np.zeros((data.p, q))
    for lam in lambdas:
        model = solve(data, PenaltySpec.l1(), config.with_params(tau=float(tau), lam=float(lam)),
                      init=init, loss_kind="fixed_weight", winv=winv)
        fits.append(model)
        init = model.beta_hat
    return fits


def _column_data(data, j):
    return replace(data, Y=np.ascontiguousarray(data.Y[:, [j]]),
                   y_bar=data.y_bar[[j]])


def _center_fold(data, test_idx):
    n = data.n
    train_idx = np.setdiff1d(np.arange(n), test_idx)
    train = center_data(data.X[train_idx], data.Y[train_idx])
    Xte = data.X[test_idx] - train.x_bar
    Yte = data.Y[test_idx] - train.y_bar
    return train, Xte, Yte


def lasso_fit(data: RegressionData, mode="shared_lambda", cv_folds=5, M=10,
              delta=0.1, seed=0, config=LS_CONFIG) -> FittedModel:
    """L1 penalized least squares, lambda chosen by V-fold cross-validation.

    ``mode="shared_lambda"`` selects one lambda minimizing prediction error
    summed over all responses; ``mode="per_response"`` tunes each response
    column separately.
    """
    if data.mask is not None:
        raise ValueError("lasso_fit does not support missing responses")
    if mode not in ("shared_lambda", "per_response"):
        raise ValueError(f"unknown mode {mode!r}")
    folds = fold_indices(data.n, cv_folds, seed)

    if mode == "shared_lambda":
        lams = geometric_lambdas(lambda_max(data, PenaltySpec.l1()), M, delta)
        errs = np.zeros(M)
        for te in folds:
            train, Xte, Yte = _center_fold(data, te)
            for li, model in enumerate(_ls_path(train, lams, config)):
                resid = Yte - Xte @ model.beta_hat
                errs[li] += float(np.sum(resid * resid))
        best = lams[int(np.argmin(errs))]
        path = _ls_path(data, lams[lams >= best], config)
        return replace(path[-1], tau=float("inf"))

    # per_response: q independent single-column problems
    betas = []
    traces = []
    for j in range(data.q):
        col = _column_data(data, j)
        lams = geometric_lambdas(lambda_max(col, PenaltySpec.l1()), M, delta)
        errs = np.zeros(M)
        for te in folds:
            train, Xte, Yte = _center_fold(col, te)
            for li, model in enumerate(_ls_path(train, lams, config)):
                resid = Yte - Xte @ model.beta_hat
                errs[li] += float(np.sum(resid * resid))
        best = lams[int(np.argmin(errs))]
        fit = _ls_path(col, lams[lams >= best], config)[-1]
        betas.append(fit.beta_hat[:, 0])
        traces.append(fit.objective_trace)
    beta = np.column_stack(betas)
    return FittedModel(
        beta_hat=beta,
        mu_hat=recover_intercept(beta, data),
        tau=float("inf"),
        lam=float("nan"),
        objective_trace=traces[-1],
        converged=True,
        iterations=max(len(t) - 1 for t in traces),
    )


def _fixed_weight_lambda_max(data, winv, tau):
    # first-order condition at beta = 0 for the frozen-weight criterion
    C = (2.0 / data.n) * np.abs(data.X.T @ data.Y @ winv)
    return float(tau * C.max())


def ca_fit(data: RegressionData, penalty: PenaltySpec = None, taus=None,
           cv_folds=5, M=10, delta=0.1, seed=0, config=LS_CONFIG):
    """Two-step convex approximation: freeze the weight matrix at an initial
    per-response lasso estimate, then tune (tau, lambda) by CV.

    The initial estimate is refit inside every training fold so the held-out
    rows never leak into the frozen weights.
    """
    if penalty is None:
        penalty = PenaltySpec.l1()
    if penalty.kind != "l1":
        raise ValueError("ca_fit currently supports the l1 penalty")
    if taus is None:
        taus = 10.0 ** np.arange(4, -5, -1)
    taus = np.sort(np.asarray(taus, dtype=np.float64))[::-1]
    folds = fold_indices(data.n, cv_folds, seed)

    def weight(beta_init, tau):
        q = beta_init.shape[1]
        return np.linalg.inv(beta_init.T @ beta_init + tau * np.eye(q))

    # the candidate lambda values are fixed from the full-data initial
    # estimate so every fold scores the same grid points
    tilde_full = lasso_fit(data, mode="per_response", cv_folds=cv_folds,
                           M=M, delta=delta, seed=seed, config=config)
    lam_grids = []
    for tau in taus:
        winv = weight(tilde_full.beta_hat, tau)
        lam_grids.append(geometric_lambdas(
            _fixed_weight_lambda_max(data, winv, tau), M, delta))

    surface = np.zeros((len(taus), M))
    for fi, te in enumerate(folds):
        train, Xte, Yte = _center_fold(data, te)
        tilde = lasso_fit(train, mode="per_response", cv_folds=cv_folds,
                          M=M, delta=delta, seed=seed + 1 + fi, config=config)
        for ti, tau in enumerate(taus):
            winv = weight(tilde.beta_hat, tau)
            for li, model in enumerate(_ls_path(train, lam_grids[ti], config,
                                                winv=winv, tau=tau)):
                resid = Yte - Xte @ model.beta_hat
                surface[ti, li] += float(np.sum(resid * resid))

    ti, li = np.unravel_index(int(np.argmin(surface)), surface.shape)
    best_tau = float(taus[ti])
    winv = weight(tilde_full.beta_hat, best_tau)
    path = _ls_path(data, lam_grids[ti][: li + 1], config, winv=winv, tau=best_tau)
    return replace(path[-1], tau=best_tau)


def _project_l1_ball(v, radius):
    # Euclidean projection of a flat vector onto {x : ||x||_1 <= radius}
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, len(u) + 1)
    rho = np.nonzero(u * idx > css - radius)[0][-1]
    theta = (css[rho] - radius) / (rho + 1.0)
    return np.sign(v) * np.maximum(a - theta, 0.0)


def coco_project(S_tilde, tol=1e-6, max_iter=5000, rho=1.0):
    """Nearest positive semidefinite matrix in the entrywise max norm.

    Alternating-direction scheme splitting between the PSD cone (eigenvalue
    clipping) and the max-norm term (whose prox is an l1-ball projection).
    The eigenvalue-clipped matrix seeds the incumbent, so the result is never
    worse than plain clipping.  Stops when the feasible objective stalls.
    """
    S_tilde = np.asarray(S_tilde, dtype=np.float64)
    p = S_tilde.shape[0]
    if S_tilde.shape != (p, p):
        raise ValueError("S_tilde must be square")
    if np.abs(S_tilde - S_tilde.T).max() > 1e-8 * max(1.0, np.abs(S_tilde).max()):
        raise ValueError("S_tilde must be symmetric")
    S_tilde = 0.5 * (S_tilde + S_tilde.T)

    def clip_psd(A):
        w, Q = np.linalg.eigh(0.5 * (A + A.T))
        return (Q * np.maximum(w, 0.0)) @ Q.T

    def objective(S):
        return float(np.abs(S - S_tilde).max())

    best = clip_psd(S_tilde)
    best_obj = objective(best)
    if best_obj == 0.0:
        return best

    S = best
    Z = S_tilde.copy()
    U = np.zeros_like(S_tilde)
    prev_obj = np.inf
    stall = 0
    for _ in range(max_iter):
        S = clip_psd(Z - U)
        obj = objective(S)
        if obj < best_obj:
            best, best_obj = S, obj
        P = S + U - S_tilde
        D = P - _project_l1_ball(P.ravel(), 1.0 / rho).reshape(p, p)
        Z_prev = Z
        Z = S_tilde + D
        U = U + S - Z
        # a single flat step can be a plateau (the first iterate replays the
        # eigenvalue-clipped seed); require the stall to persist
        stall = stall + 1 if abs(prev_obj - obj) < tol else 0
        if stall >= 25:
            return best
        prev_obj = obj
        # residual balancing keeps the two subproblems progressing in step
        primal = np.abs(S - Z).max()
        dual = rho * np.abs(Z - Z_prev).max()
        if primal > 10.0 * dual:
            rho *= 2.0
            U /= 2.0
        elif dual > 10.0 * primal:
            rho /= 2.0
            U *= 2.0
    raise NumericError(f"PSD projection did not converge within {max_iter} iterations")


@dataclass(frozen=True)
class CocoInputs:
    """Corrected cross-products for the measurement-error lasso."""

    sigma_u_sq: float
    sigma_tilde: np.ndarray
    W: np.ndarray
    rho: np.ndarray
    y_tilde: np.ndarray


def coco_inputs(data: RegressionData, sigma_u_sq, project_tol=1e-6) -> CocoInputs:
    """Correct the Gram matrix for additive predictor noise and project it
    onto the PSD cone; factor W with n^{-1} W'W equal to the projection."""
    if sigma_u_sq < 0:
        raise ValueError("sigma_u_sq must be nonnegative")
    n, p = data.X.shape
    S_tilde = data.X.T @ data.X / n - sigma_u_sq * np.eye(p)
    sigma = coco_project(S_tilde, tol=project_tol)
    w, Q = np.linalg.eigh(sigma)
    w = np.maximum(w, 0.0)
    cut = w > 1e-12 * max(w.max(), 1.0)
    if not cut.any():
        raise ValueError("corrected covariance matrix is identically zero")
    root = np.sqrt(n * w[cut])
    W = (Q[:, cut] * root) @ Q[:, cut].T
    W_pinv = (Q[:, cut] / root) @ Q[:, cut].T
    rho_raw = data.X.T @ data.Y / n
    y_tilde = W_pinv @ (data.X.T @ data.Y)
    return CocoInputs(sigma_u_sq=float(sigma_u_sq), sigma_tilde=sigma, W=W,
                      rho=rho_raw, y_tilde=y_tilde)


def _coco_path(inputs: CocoInputs, n, lambdas, config, columns=None):
    """Warm-started path for the corrected penalized least squares problem,
    n^{-1}||y_tilde - W beta||_F^2 + lam |beta|_1."""
    K = backend.kernels()
    W, Yt = inputs.W, inputs.y_tilde
    if columns is not None:
        Yt = Yt[:, columns]
    G = np.ascontiguousarray(W.T @ W)
    C = np.ascontiguousarray(W.T @ Yt)
    Syy = np.ascontiguousarray(Yt.T @ Yt)
    q = Yt.shape[1]
    eye = np.eye(q)
    nf = float(n)
    loss_fn = lambda b: K.loss_fixed_gram(Syy, C, G, b, eye, nf)
    grad_fn = lambda b: K.grad_fixed_gram(Syy, C, G, b, eye, nf)
    t0 = max(2.0 * float(np.linalg.eigvalsh(G)[-1]) / nf, 1e-12)

    fits = []
    init = np.zeros((W.shape[1], q))
    for lam in lambdas:
        lam = float(lam)
        prox_step = lambda Mx, inv_t: K.prox_l1(Mx, inv_t * lam)
        pen_fn = lambda b: lam * float(np.abs(b).sum())
        beta, trace, converged, iters = minimize_penalized(
            loss_fn, grad_fn, prox_step, pen_fn, config, init, t0
        )
        fits.append((beta, trace, converged, iters))
        init = beta
    return fits


def _coco_lambda_max(inputs: CocoInputs, n):
    # gradient of the corrected quadratic at zero is -2 n^{-1} W' y_tilde
    return (2.0 / n) * np.abs(inputs.W.T @ inputs.y_tilde)


def _coco_cv_error(beta, sigma_te, rho_te, column=None):
    # held-out value of the corrected quadratic objective (beta-free constant
    # dropped); column selects the per-response variant
    if column is None:
        return float(np.sum(beta * (sigma_te @ beta)) - 2.0 * np.sum(beta * rho_te))
    b = beta[:, 0]
    r = rho_te[:, column]
    return float(b @ sigma_te @ b - 2.0 * b @ r)


def coco_fit(data: RegressionData, sigma_u_sq, mode="shared_lambda", cv_folds=5,
             M=10, delta=0.1, seed=0, config=LS_CONFIG, project_tol=1e-6) -> FittedModel:
    """Corrected lasso with known predictor-noise variance.

    Cross-validation scores each candidate on the held-out fold's corrected
    quadratic objective (the held-out Gram matrix is corrected by the same
    sigma_u_sq and projected).
    """
    if data.mask is not None:
        raise ValueError("coco_fit does not support missing responses")
    if mode not in ("shared_lambda", "per_response"):
        raise ValueError(f"unknown mode {mode!r}")
    n = data.n
    folds = fold_indices(n, cv_folds, seed)

    full = coco_inputs(data, sigma_u_sq, project_tol)
    lmax = _coco_lambda_max(full, n)

    fold_parts = []
    for te in folds:
        train, Xte, Yte = _center_fold(data, te)
        tr_inputs = coco_inputs(train, sigma_u_sq, project_tol)
        S_te = Xte.T @ Xte / len(te) - sigma_u_sq * np.eye(data.p)
        sigma_te = coco_project(S_te, tol=project_tol)
        rho_te = Xte.T @ Yte / len(te)
        fold_parts.append((train.n, tr_inputs, sigma_te, rho_te))

    if mode == "shared_lambda":
        lams = geometric_lambdas(float(lmax.max()), M, delta)
        errs = np.zeros(M)
        for n_tr, tr_inputs, sigma_te, rho_te in fold_parts:
            for li, (beta, *_rest) in enumerate(_coco_path(tr_inputs, n_tr, lams, config)):
                errs[li] += _coco_cv_error(beta, sigma_te, rho_te)
        li = int(np.argmin(errs))
        fits = _coco_path(full, n, lams[: li + 1], config)
        beta, trace, converged, iters = fits[-1]
    else:
        cols = []
        trace = converged = iters = None
        for j in range(data.q):
            lams = geometric_lambdas(float(lmax[:, j].max()), M, delta)
            errs = np.zeros(M)
            for n_tr, tr_inputs, sigma_te, rho_te in fold_parts:
                path = _coco_path(tr_inputs, n_tr, lams, config, columns=[j])
                for li, (bj, *_rest) in enumerate(path):
                    errs[li] += _coco_cv_error(bj, sigma_te, rho_te, column=j)
            li = int(np.argmin(errs))
            fits = _coco_path(full, n, lams[: li + 1], config, columns=[j])
            bj, trace, converged, iters = fits[-1]
            cols.append(bj[:, 0])
        beta = np.column_stack(cols)

    return FittedModel(
        beta_hat=beta,
        mu_hat=recover_intercept(beta, data),
        tau=float("inf"),
        lam=float("nan"),
        objective_trace=np.asarray(trace),
        converged=bool(converged),
        iterations=int(iters),
    )
