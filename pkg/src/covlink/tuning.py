# Candidate-grid construction, warm-started solution paths, and V-fold
# cross-validation over (tau, lambda).

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .adjustments import missing_counts, project_out_covariates, recover_eta
from .data import FitConfig, PenaltySpec, RegressionData, center_data, recover_intercept
from .solver import solve


def lambda_max(data: RegressionData, penalty: PenaltySpec = None) -> float:
    """Smallest lambda at which the zero matrix solves the penalized problem.

    Derived from the first-order condition at beta = 0; the tau factors
    cancel, so one value serves every tau.  Returns 0.0 when X'Y is zero
    (degenerate grid; build_grid rejects it).
    """
    if penalty is None:
        penalty = PenaltySpec.l1()
    n = data.n
    C = (2.0 / n) * (data.X.T @ data.Y)
    kind = penalty.kind
    if kind == "l1":
        return float(np.abs(C).max())
    if kind == "weighted_l1":
        return float((np.abs(C).max(axis=0) / penalty.column_weights).max())
    if kind == "group_rows":
        return float(np.sqrt(np.sum(C * C, axis=1)).max())
    if kind == "nuclear":
        return float(np.linalg.svd(C, compute_uv=False)[0])
    if kind == "sparse_group":
        return _sparse_group_lambda_max(C, penalty.gamma1, penalty.gamma2)
    raise ValueError(f"unknown penalty kind {kind!r}")


def _sparse_group_lambda_max(C, g1, g2):
    # zero is optimal iff every row of C, soft-thresholded at lam*g1, has
    # norm <= lam*g2; the condition is monotone in lam, so bisect.
    if g1 == 0 and g2 == 0:
        raise ValueError("sparse_group penalty with both weights zero")
    if g2 == 0:
        return float(np.abs(C).max() / g1)
    if g1 == 0:
        return float(np.sqrt(np.sum(C * C, axis=1)).max() / g2)

    def zero_is_optimal(lam):
        S = np.sign(C) * np.maximum(np.abs(C) - lam * g1, 0.0)
        return bool((np.sqrt(np.sum(S * S, axis=1)) <= lam * g2 + 1e-15).all())

    hi = float(np.sqrt(np.sum(C * C, axis=1)).max() / g2)
    if hi == 0.0:
        return 0.0
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if zero_is_optimal(mid):
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-14 * hi:
            break
    return hi


@dataclass(frozen=True)
class TuningGrid:
    """Descending tau candidates, each with a descending geometric lambda grid."""

    taus: np.ndarray
    lambdas_per_tau: tuple
    M: int
    delta: float

    def lambdas(self, tau_index):
        return self.lambdas_per_tau[tau_index]


def geometric_lambdas(lam_max, M, delta):
    """lambda_m = lam_max^{(M-m)/(M-1)} * lam_min^{(m-1)/(M-1)}, m = 1..M."""
    if M < 2:
        raise ValueError("M must be at least 2")
    if not (0 < delta < 1):
        raise ValueError("delta must be in (0, 1)")
    if lam_max <= 0:
        raise ValueError("degenerate lambda grid: lambda_max is zero")
    lam_min = delta * lam_max
    m = np.arange(1, M + 1)
    return lam_max ** ((M - m) / (M - 1)) * lam_min ** ((m - 1) / (M - 1))


DEFAULT_TAUS = 10.0 ** np.arange(4, -5, -1)


def build_grid(data, M=10, delta=0.1, taus=None, penalty=None) -> TuningGrid:
    """Default taus 10^4 .. 10^-4; lambdas geometric from lambda_max down to
    delta * lambda_max."""
    if taus is None:
        taus = DEFAULT_TAUS.copy()
    taus = np.sort(np.asarray(taus, dtype=np.float64))[::-1]
    if (taus <= 0).any():
        raise ValueError("taus must be positive")
    lams = geometric_lambdas(lambda_max(data, penalty), M, delta)
    return TuningGrid(
        taus=taus,
        lambdas_per_tau=tuple(lams.copy() for _ in taus),
        M=int(M),
        delta=float(delta),
    )


def solution_path(data, penalty, tau, lambdas, config: FitConfig, loss_kind=None):
    """Fit the descending lambda sequence with warm starts.

    The first fit starts from the zero matrix; each subsequent fit starts
    from the previous solution.
    """
    lambdas = np.asarray(lambdas, dtype=np.float64)
    if lambdas.ndim != 1 or len(lambdas) == 0:
        raise ValueError("lambdas must be a nonempty vector")
    if len(lambdas) > 1 and (np.diff(lambdas) >= 0).any():
        raise ValueError("lambdas must be strictly decreasing")
    if loss_kind is None:
        loss_kind = "observed" if data.mask is not None else "full"
    fits = []
    init = np.zeros((data.p, data.q))
    for lam in lambdas:
        model = solve(data, penalty, config.with_params(tau=float(tau), lam=float(lam)),
                      init=init, loss_kind=loss_kind)
        fits.append(model)
        init = model.beta_hat
    return fits


def fold_indices(n, V, seed):
    """Deterministic fold assignment: a seeded permutation split into V
    nearly-equal consecutive blocks (sizes differ by at most one)."""
    if V < 2:
        raise ValueError("V must be at least 2")
    if n < V:
        raise ValueError("more folds than rows")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, V)]


def _fold_penalty(penalty, train_mask):
    # weighted-l1 weights track the training fold's observed counts
    if penalty.kind == "weighted_l1" and train_mask is not None:
        _, w = missing_counts(train_mask)
        return PenaltySpec.weighted_l1(w)
    return penalty


def _fold_errors(data, penalty, grid, config, test_idx):
    n = data.n
    train_idx = np.setdiff1d(np.arange(n), test_idx)
    tr_mask = None if data.mask is None else data.mask[train_idx]
    train = center_data(
        data.X[train_idx], data.Y[train_idx],
        raw_V=None if data.V is None else data.V[train_idx],
        mask=tr_mask,
    )
    Xte = data.X[test_idx] - train.x_bar
    Yte = data.Y[test_idx] - train.y_bar
    te_mask = None if data.mask is None else data.mask[test_idx]
    Vte = None
    if data.V is not None:
        Vte = data.V[test_idx] - train.v_bar

    pen = _fold_penalty(penalty, tr_mask)
    if train.V is not None:
        fit_data, _ = project_out_covariates(train)
    else:
        fit_data = train

    errors = np.zeros((len(grid.taus), grid.M))
    for ti, tau in enumerate(grid.taus):
        fits = solution_path(fit_data, pen, tau, grid.lambdas(ti), config)
        for li, model in enumerate(fits):
            pred = Xte @ model.beta_hat
            if train.V is not None:
                eta = recover_eta(model.beta_hat, train)
                pred = pred + Vte @ eta
            resid = Yte - pred
            if te_mask is not None:
                resid = resid * te_mask
            errors[ti, li] = float(np.sum(resid * resid))
    return errors


@dataclass(frozen=True)
class CVResult:
    """Cross-validation error surface and the selected (tau, lambda) pair."""

    error_surface: np.ndarray
    per_fold_errors: np.ndarray
    best_tau: float
    best_lambda: float
    best_index: tuple
    grid: TuningGrid


def _select_best(error_surface, grid):
    # row-major argmin over (descending tau, descending lambda) grids breaks
    # ties toward larger tau, then larger lambda
    ti, li = np.unravel_index(int(np.argmin(error_surface)), error_surface.shape)
    return float(grid.taus[ti]), float(grid.lambdas(ti)[li]), (int(ti), int(li))


def cross_validate(data, penalty, grid, V=5, seed=0, config=None, jobs=1,
                   trace=None) -> CVResult:
    """Sum out-of-fold squared prediction error over a seeded V-fold split.

    Held-out folds are centered by the training-fold means.  With missing
    responses the error sums over observed test entries only.  ``trace``,
    if given, receives one (fold, tau, lambda, error) tuple per CV cell.
    """
    if config is None:
        config = FitConfig(tau=1.0, lam=1.0)
    folds = fold_indices(data.n, V, seed)
    args = [(data, penalty, grid, config, te) for te in folds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_fold = list(pool.map(_fold_errors_star, args))
    else:
        per_fold = [_fold_errors(*a) for a in args]
    per_fold = np.asarray(per_fold)
    if trace is not None:
        for v in range(V):
            for ti, tau in enumerate(grid.taus):
                for li, lam in enumerate(grid.lambdas(ti)):
                    trace.append((v, float(tau), float(lam), float(per_fold[v, ti, li])))
    surface = per_fold.sum(axis=0)
    best_tau, best_lambda, idx = _select_best(surface, grid)
    return CVResult(
        error_surface=surface,
        per_fold_errors=per_fold,
        best_tau=best_tau,
        best_lambda=best_lambda,
        best_index=idx,
        grid=grid,
    )


def _fold_errors_star(args):
    return _fold_errors(*args)


def fit_cv(data, penalty, grid=None, V=5, seed=0, config=None, refine=False,
           M=10, delta=0.1, taus=None, jobs=1):
    """Cross-validate (tau, lambda), then fit the full data at the winner.

    The final fit warm-starts down the winning tau's lambda path, mirroring
    how the CV fits were produced.  Returns (FittedModel, CVResult); with
    ``refine`` the CVResult is from the refined second pass.
    """
    if config is None:
        config = FitConfig(tau=1.0, lam=1.0)
    if grid is None:
        grid = build_grid(data, M=M, delta=delta, taus=taus, penalty=penalty)
    cv = cross_validate(data, penalty, grid, V=V, seed=seed, config=config, jobs=jobs)
    if refine:
        grid = refine_grid(cv)
        cv = cross_validate(data, penalty, grid, V=V, seed=seed, config=config, jobs=jobs)

    ti, li = cv.best_index
    pen = _fold_penalty(penalty, data.mask)
    if data.V is not None:
        fit_data, _ = project_out_covariates(data)
    else:
        fit_data = data
    path = solution_path(fit_data, pen, cv.best_tau, cv.grid.lambdas(ti)[: li + 1], config)
    model = path[-1]
    if data.V is not None:
        eta = recover_eta(model.beta_hat, data)
        model = replace(model, eta_hat=eta,
                        mu_hat=recover_intercept(model.beta_hat, data, eta))
    return model, cv


def refine_grid(cv: CVResult, grid: TuningGrid = None) -> TuningGrid:
    """Five log-spaced taus spanning one decade either side of the CV winner;
    the lambda grid is carried over (lambda_max does not depend on tau)."""
    if grid is None:
        grid = cv.grid
    center = np.log10(cv.best_tau)
    taus = np.logspace(center + 1.0, center - 1.0, 5)
    lams = grid.lambdas(0)
    return TuningGrid(
        taus=taus,
        lambdas_per_tau=tuple(lams.copy() for _ in taus),
        M=grid.M,
        delta=grid.delta,
    )
