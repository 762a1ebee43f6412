# Synthetic data generators, estimation-quality metrics, and the Monte Carlo
# benchmark harness comparing the covariance-linked estimator against the
# baseline methods.

import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .competitors import ca_fit, coco_fit, lasso_fit
from .data import FitConfig, PenaltySpec, center_data
from .tuning import fit_cv

DEFAULT_SIGMA_U_GRID = (0.0, 0.25, 0.5, 1.0)
BENCHMARK_METHODS = ("mc", "ca", "lasso-1", "lasso-q", "coco-1", "coco-q")


@dataclass(frozen=True)
class SimConfig:
    """Dimensions and noise levels for one synthetic setting.

    Model 1 draws predictors exactly as observed with response noise
    covariance sigma_u_sq * beta'beta + gamma_sq I; Model 2 draws latent
    predictors and corrupts them with isotropic noise of variance
    sigma_u_sq, which induces the same conditional response law.
    """

    n: int
    p: int
    q: int
    sigma_u_sq: float = 0.0
    gamma_sq: float = 3.0
    model: int = 2
    ar_rho: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.n < 2 or self.p < 1 or self.q < 1:
            raise ValueError("dimensions must be positive (n >= 2)")
        if self.sigma_u_sq < 0 or self.gamma_sq <= 0:
            raise ValueError("sigma_u_sq >= 0 and gamma_sq > 0 required")
        if self.model not in (1, 2):
            raise ValueError("model must be 1 or 2")
        if self.ar_rho is None:
            object.__setattr__(self, "ar_rho", 0.7 if self.model == 1 else 0.5)
        if not (-1.0 < self.ar_rho < 1.0):
            raise ValueError("ar_rho must lie in (-1, 1)")


@dataclass(frozen=True)
class SimTruth:
    """Ground truth for one replication: coefficients, support, covariances."""

    beta_star: np.ndarray
    support: np.ndarray
    sigma_x: np.ndarray
    sigma_z: Optional[np.ndarray] = None


def ar_covariance(rho, p):
    """AR(1)-style covariance with (j,k) entry rho^|j-k|."""
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def matrix_sqrt_psd(S):
    """Symmetric PSD square root via eigendecomposition."""
    w, Q = np.linalg.eigh(np.asarray(S, dtype=np.float64))
    w = np.maximum(w, 0.0)
    return (Q * np.sqrt(w)) @ Q.T


def gen_beta_star(p, q, seed):
    """Sparse coefficient matrix with six nonzeros per column.

    Three disjoint index triples are drawn once; each column picks one
    triple uniformly and sets those entries to +-2 (signs equiprobable),
    then sets three further positions, drawn outside the chosen triple,
    to +-1.
    """
    if p < 12:
        raise ValueError("p must be at least 12 to host three disjoint triples")
    if q < 1:
        raise ValueError("q must be positive")
    rng = np.random.default_rng(seed)
    pool = rng.choice(p, size=9, replace=False)
    triples = [pool[0:3], pool[3:6], pool[6:9]]
    beta = np.zeros((p, q))
    for l in range(q):
        k = rng.integers(0, 3)
        trip = triples[k]
        beta[trip, l] = rng.choice([-2.0, 2.0], size=3)
        others = np.setdiff1d(np.arange(p), trip)
        extra = rng.choice(others, size=3, replace=False)
        beta[extra, l] = rng.choice([-1.0, 1.0], size=3)
    return beta, beta != 0.0


def make_truth(config: SimConfig, seed=None) -> SimTruth:
    beta, support = gen_beta_star(config.p, config.q, config.seed if seed is None else seed)
    base = ar_covariance(config.ar_rho, config.p)
    if config.model == 1:
        return SimTruth(beta_star=beta, support=support, sigma_x=base)
    sigma_x = base + config.sigma_u_sq * np.eye(config.p)
    return SimTruth(beta_star=beta, support=support, sigma_x=sigma_x, sigma_z=base)


def gen_model1(config: SimConfig, truth: SimTruth, rng=None, n=None):
    """Observed-predictor model: X ~ N(0, Sigma_X), Y = X beta + E with
    E ~ N(0, sigma_u_sq beta'beta + gamma_sq I)."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    n = config.n if n is None else n
    sx_half = matrix_sqrt_psd(truth.sigma_x)
    X = rng.standard_normal((n, config.p)) @ sx_half
    beta = truth.beta_star
    cov_e = config.sigma_u_sq * (beta.T @ beta) + config.gamma_sq * np.eye(config.q)
    E = rng.standard_normal((n, config.q)) @ matrix_sqrt_psd(cov_e)
    return X, X @ beta + E


def gen_model2(config: SimConfig, truth: SimTruth, rng=None, n=None):
    """Corrupted-predictor model: Z ~ N(0, Sigma_Z), X = Z + U with
    U ~ N(0, sigma_u_sq I), Y = Z beta + eps with eps ~ N(0, gamma_sq I).
    Returns (X, Y, Z)."""
    if truth.sigma_z is None:
        raise ValueError("truth has no latent covariance; generate with model=2")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    n = config.n if n is None else n
    Z = rng.standard_normal((n, config.p)) @ matrix_sqrt_psd(truth.sigma_z)
    U = np.sqrt(config.sigma_u_sq) * rng.standard_normal((n, config.p))
    eps = np.sqrt(config.gamma_sq) * rng.standard_normal((n, config.q))
    return Z + U, Z @ truth.beta_star + eps, Z


def _weighted_sq_error(beta_hat, beta_star, sigma):
    D = beta_hat - beta_star
    return float(np.sum(D * (sigma @ D)))


def model_error_observed(beta_hat, truth: SimTruth):
    """||Sigma_X^{1/2}(beta_hat - beta_star)||_F^2."""
    return _weighted_sq_error(beta_hat, truth.beta_star, truth.sigma_x)


def model_error_latent(beta_hat, truth: SimTruth):
    """||Sigma_Z^{1/2}(beta_hat - beta_star)||_F^2; defined for Model 2 only."""
    if truth.sigma_z is None:
        raise ValueError("latent model error is undefined without a latent covariance")
    return _weighted_sq_error(beta_hat, truth.beta_star, truth.sigma_z)


def frobenius_error(beta_hat, truth: SimTruth):
    D = beta_hat - truth.beta_star
    return float(np.sum(D * D))


def prediction_error(beta_hat, mu_hat, test_X, test_Y):
    """Mean squared prediction error over the test set, ||Y - Yhat||_F^2/(q n)."""
    n_t, q = test_Y.shape
    resid = test_Y - (mu_hat + test_X @ beta_hat)
    return float(np.sum(resid * resid) / (q * n_t))


def tpr_fpr(beta_hat, truth: SimTruth, zero_tol=1e-8):
    """True/false positive rates of nonzero-entry identification."""
    found = np.abs(beta_hat) > zero_tol
    pos = truth.support
    n_pos = int(pos.sum())
    n_neg = pos.size - n_pos
    tpr = float((found & pos).sum() / n_pos) if n_pos else 0.0
    fpr = float((found & ~pos).sum() / n_neg) if n_neg else 0.0
    return tpr, fpr


@dataclass(frozen=True)
class BenchmarkResult:
    """Flat per-replication metric records plus any per-method failures."""

    records: tuple
    failures: tuple

    def values(self, method, metric, sigma_u_sq=None):
        out = [
            r["value"]
            for r in self.records
            if r["method"] == method
            and r["metric"] == metric
            and (sigma_u_sq is None or r["sigma_u_sq"] == sigma_u_sq)
        ]
        return np.asarray(out)

    def summary_rows(self, quantiles=(0.25, 0.5, 0.75)):
        keys = sorted({(r["method"], r["sigma_u_sq"], r["metric"]) for r in self.records})
        rows = []
        for method, su, metric in keys:
            vals = self.values(method, metric, su)
            rows.append({
                "method": method,
                "sigma_u_sq": su,
                "metric": metric,
                **{f"q{int(100 * q)}": float(np.quantile(vals, q)) for q in quantiles},
            })
        return rows


def _fit_method(name, train, sigma_u_sq, seed, opts):
    cv_folds = opts.get("cv_folds", 5)
    M = opts.get("M", 10)
    delta = opts.get("delta", 0.1)
    if name == "mc":
        config = opts.get("mc_config", FitConfig(tau=1.0, lam=1.0))
        model, _ = fit_cv(train, PenaltySpec.l1(), V=cv_folds, seed=seed,
                          config=config, M=M, delta=delta, taus=opts.get("taus"))
        return model
    if name == "ca":
        return ca_fit(train, cv_folds=cv_folds, M=M, delta=delta, seed=seed,
                      taus=opts.get("taus"))
    if name == "lasso-1":
        return lasso_fit(train, mode="shared_lambda", cv_folds=cv_folds, M=M,
                         delta=delta, seed=seed)
    if name == "lasso-q":
        return lasso_fit(train, mode="per_response", cv_folds=cv_folds, M=M,
                         delta=delta, seed=seed)
    if name == "coco-1":
        return coco_fit(train, sigma_u_sq, mode="shared_lambda", cv_folds=cv_folds,
                        M=M, delta=delta, seed=seed)
    if name == "coco-q":
        return coco_fit(train, sigma_u_sq, mode="per_response", cv_folds=cv_folds,
                        M=M, delta=delta, seed=seed)
    raise ValueError(f"unknown method {name!r}")


def _run_one_task(base: SimConfig, sigma_u_sq, rep, methods, seed, n_test, opts):
    config = SimConfig(n=base.n, p=base.p, q=base.q, sigma_u_sq=float(sigma_u_sq),
                       gamma_sq=base.gamma_sq, model=base.model, ar_rho=base.ar_rho,
                       seed=base.seed)
    ss = np.random.SeedSequence([seed, int(round(1000 * sigma_u_sq)), rep])
    rng = np.random.default_rng(ss)
    truth = make_truth(config, seed=int(ss.generate_state(1)[0]))
    if config.model == 1:
        X, Y = gen_model1(config, truth, rng=rng)
        X_T, Y_T = gen_model1(config, truth, rng=rng, n=n_test)
    else:
        X, Y, _ = gen_model2(config, truth, rng=rng)
        X_T, Y_T, _ = gen_model2(config, truth, rng=rng, n=n_test)
    train = center_data(X, Y)

    method_seed = int(ss.generate_state(2)[1])
    records, failures = [], []
    for name in methods:
        try:
            model = _fit_method(name, train, sigma_u_sq, method_seed, opts)
        except Exception as exc:  # noqa: BLE001 - recorded, not fatal
            failures.append({
                "replication": rep, "model": config.model, "sigma_u_sq": sigma_u_sq,
                "method": name, "error": f"{type(exc).__name__}: {exc}",
            })
            continue
        metrics = {
            "me_o": model_error_observed(model.beta_hat, truth),
            "fne": frobenius_error(model.beta_hat, truth),
            "pe": prediction_error(model.beta_hat, model.mu_hat, X_T, Y_T),
        }
        if truth.sigma_z is not None:
            metrics["me_l"] = model_error_latent(model.beta_hat, truth)
        metrics["tpr"], metrics["fpr"] = tpr_fpr(model.beta_hat, truth)
        for metric, value in metrics.items():
            records.append({
                "replication": rep, "model": config.model, "sigma_u_sq": sigma_u_sq,
                "method": name, "metric": metric, "value": value,
            })
    return records, failures


def _run_one_task_star(args):
    return _run_one_task(*args)


def run_benchmark(config: SimConfig, methods=BENCHMARK_METHODS, replications=20,
                  seed=0, sigma_u_grid=DEFAULT_SIGMA_U_GRID, n_test=1000,
                  jobs=1, **opts) -> BenchmarkResult:
    """Fit every method on fresh draws for each (sigma_u_sq, replication) cell.

    Deterministic for a fixed seed: every cell derives its own seed sequence,
    so results do not depend on scheduling or on which methods run.
    Per-method failures are recorded and skipped, never fatal.
    """
    for name in methods:
        if name not in BENCHMARK_METHODS:
            raise ValueError(f"unknown method {name!r}; choose from {BENCHMARK_METHODS}")
    tasks = [
        (config, float(su), rep, tuple(methods), seed, n_test, opts)
        for su in sigma_u_grid
        for rep in range(replications)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_one_task_star, tasks))
    else:
        outcomes = [_run_one_task(*t) for t in tasks]
    records, failures = [], []
    for recs, fails in outcomes:
        records.extend(recs)
        failures.extend(fails)
    return BenchmarkResult(records=tuple(records), failures=tuple(failures))
