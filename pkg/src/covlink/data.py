# Shared domain types: centered data containers, penalty/solver configuration,
# fitted models, and prediction.

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

CENTER_TOL = 1e-10

PENALTY_KINDS = ("l1", "group_rows", "sparse_group", "nuclear", "weighted_l1")


def _as_float_matrix(a, name):
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be a 2-d array, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


@dataclass(frozen=True)
class RegressionData:
    """Column-centered predictors and responses, plus the centering means.

    Unobserved response cells (where ``mask`` is False) hold 0.0 in ``Y``;
    all loss code consults ``mask``, never the stored zeros.  ``V`` holds
    optional centered error-free covariates.  Instances are immutable and
    safe to share across workers.
    """

    X: np.ndarray
    Y: np.ndarray
    x_bar: np.ndarray
    y_bar: np.ndarray
    mask: Optional[np.ndarray] = None
    V: Optional[np.ndarray] = None
    v_bar: Optional[np.ndarray] = None

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def q(self):
        return self.Y.shape[1]

    @property
    def k(self):
        return 0 if self.V is None else self.V.shape[1]

    def validate(self):
        n, p = self.X.shape
        if n < 2 or p < 1 or self.Y.shape[1] < 1:
            raise ValueError("need n >= 2, p >= 1, q >= 1")
        if self.Y.shape[0] != n:
            raise ValueError("X and Y row counts differ")
        if np.abs(self.X.sum(axis=0)).max() > CENTER_TOL * max(1.0, np.abs(self.X).max()) * n:
            raise ValueError("X columns are not centered")
        if self.mask is None:
            ysum = np.abs(self.Y.sum(axis=0)).max()
        else:
            if self.mask.shape != self.Y.shape:
                raise ValueError("mask shape does not match Y")
            if (self.mask.sum(axis=0) < 1).any():
                raise ValueError("every response column needs at least one observed entry")
            ysum = np.abs((self.Y * self.mask).sum(axis=0)).max()
        if ysum > CENTER_TOL * max(1.0, np.abs(self.Y).max()) * n:
            raise ValueError("Y columns are not centered")
        if self.V is not None:
            k = self.V.shape[1]
            if self.V.shape[0] != n or k >= n:
                raise ValueError("V must have n rows and fewer than n columns")
            if np.linalg.matrix_rank(self.V) < k:
                raise ValueError("V is rank deficient")
        return self


def center_data(raw_X, raw_Y, raw_V=None, mask=None):
    """Column-center predictors, responses, and optional covariates.

    Response means use observed entries only when ``mask`` is given
    (True = observed); unobserved cells are stored as 0 after centering.
    Returns a validated :class:`RegressionData` carrying the means so the
    intercept can be recovered later.
    """
    X = _as_float_matrix(raw_X, "X")
    Y = np.ascontiguousarray(raw_Y, dtype=np.float64)
    if Y.ndim != 2:
        raise ValueError("Y must be a 2-d array")
    if Y.shape[0] != X.shape[0]:
        raise ValueError("X and Y row counts differ")

    x_bar = X.mean(axis=0)
    Xc = X - x_bar

    if mask is not None:
        mask = np.ascontiguousarray(mask, dtype=bool)
        if mask.shape != Y.shape:
            raise ValueError("mask shape does not match Y")
        counts = mask.sum(axis=0)
        if (counts < 1).any():
            raise ValueError("response column with no observed entries")
        Yobs = np.where(mask, Y, 0.0)
        if not np.all(np.isfinite(Yobs)):
            raise ValueError("Y contains non-finite observed entries")
        y_bar = Yobs.sum(axis=0) / counts
        Yc = np.where(mask, Y - y_bar, 0.0)
    else:
        if not np.all(np.isfinite(Y)):
            raise ValueError("Y contains non-finite entries")
        y_bar = Y.mean(axis=0)
        Yc = Y - y_bar

    V = v_bar = None
    if raw_V is not None:
        V = _as_float_matrix(raw_V, "V")
        if V.shape[0] != X.shape[0]:
            raise ValueError("V row count does not match X")
        v_bar = V.mean(axis=0)
        V = np.ascontiguousarray(V - v_bar)
        if np.linalg.matrix_rank(V) < V.shape[1]:
            raise ValueError("V is rank deficient after centering")

    data = RegressionData(
        X=np.ascontiguousarray(Xc),
        Y=np.ascontiguousarray(Yc),
        x_bar=x_bar,
        y_bar=y_bar,
        mask=mask,
        V=V,
        v_bar=v_bar,
    )
    return data.validate()


@dataclass(frozen=True)
class PenaltySpec:
    """Which penalty to apply, with its hyperparameters.

    ``kind`` is one of {"l1", "group_rows", "sparse_group", "nuclear",
    "weighted_l1"}.  ``gamma1``/``gamma2`` weight the elementwise and
    row-group parts of the sparse-group penalty; ``column_weights`` holds
    the per-response weights of the weighted L1 penalty (n / n_k when
    derived from a missingness mask).
    """

    kind: str
    gamma1: float = 0.0
    gamma2: float = 0.0
    column_weights: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in PENALTY_KINDS:
            raise ValueError(f"unknown penalty kind {self.kind!r}")
        if self.kind == "sparse_group" and (self.gamma1 < 0 or self.gamma2 < 0):
            raise ValueError("sparse_group hyperparameters must be nonnegative")
        if self.kind == "weighted_l1":
            if self.column_weights is None:
                raise ValueError("weighted_l1 requires column_weights")
            w = np.asarray(self.column_weights, dtype=np.float64)
            if w.ndim != 1 or (w <= 0).any():
                raise ValueError("column_weights must be a positive vector")
            object.__setattr__(self, "column_weights", w)

    @classmethod
    def l1(cls):
        return cls("l1")

    @classmethod
    def group_rows(cls):
        return cls("group_rows")

    @classmethod
    def sparse_group(cls, gamma1, gamma2):
        return cls("sparse_group", gamma1=float(gamma1), gamma2=float(gamma2))

    @classmethod
    def nuclear(cls):
        return cls("nuclear")

    @classmethod
    def weighted_l1(cls, column_weights):
        return cls("weighted_l1", column_weights=column_weights)


@dataclass(frozen=True)
class FitConfig:
    """Tuning values and solver controls for one fit.

    ``t0`` is the initial inverse step size; None means it is chosen
    automatically from the curvature of the smooth loss (recommended --
    the loss scales like 1/tau, so no fixed value suits every tau).
    ``step_growth`` is the backtracking growth factor, > 1.
    """

    tau: float
    lam: float
    t0: Optional[float] = None
    step_growth: float = 2.0
    max_iter: int = 1000
    tol: float = 1e-8

    def __post_init__(self):
        if not (self.tau > 0):
            raise ValueError("tau must be positive")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.t0 is not None and not (self.t0 > 0):
            raise ValueError("t0 must be positive")
        if not (self.step_growth > 1):
            raise ValueError("step_growth must exceed 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if not (self.tol > 0):
            raise ValueError("tol must be positive")

    def with_params(self, **kw):
        return replace(self, **kw)


@dataclass(frozen=True)
class FittedModel:
    """A fitted coefficient matrix with its intercept and solver trace."""

    beta_hat: np.ndarray
    mu_hat: np.ndarray
    tau: float
    lam: float
    objective_trace: np.ndarray
    converged: bool
    iterations: int
    eta_hat: Optional[np.ndarray] = None

    @property
    def p(self):
        return self.beta_hat.shape[0]

    @property
    def q(self):
        return self.beta_hat.shape[1]


def recover_intercept(beta_hat, data, eta_hat=None):
    """mu = y_bar - beta' x_bar (- eta' v_bar when covariates are present)."""
    mu = data.y_bar - beta_hat.T @ data.x_bar
    if eta_hat is not None:
        if data.v_bar is None:
            raise ValueError("model has covariate coefficients but data has no V")
        mu = mu - eta_hat.T @ data.v_bar
    return mu


def predict(model, new_X, new_V=None):
    """Predict responses for new (uncentered) predictor rows.

    Row i of the result is ``mu_hat + beta_hat' x_i`` plus ``eta_hat' v_i``
    when the model carries covariate coefficients.
    """
    new_X = _as_float_matrix(new_X, "new_X")
    if new_X.shape[1] != model.p:
        raise ValueError("new_X column count does not match the model")
    out = model.mu_hat + new_X @ model.beta_hat
    if model.eta_hat is not None:
        if new_V is None:
            raise ValueError("model was fit with covariates; new_V is required")
        new_V = _as_float_matrix(new_V, "new_V")
        if new_V.shape != (new_X.shape[0], model.eta_hat.shape[0]):
            raise ValueError("new_V shape does not match the model")
        out = out + new_V @ model.eta_hat
    elif new_V is not None:
        raise ValueError("model has no covariate coefficients; drop new_V")
    return out
