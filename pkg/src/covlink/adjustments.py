# Generalizations: projecting out error-free covariates (with closed-form
# recovery of their coefficients) and missing-response bookkeeping.

from dataclasses import dataclass, replace

import numpy as np

from .data import RegressionData


@dataclass(frozen=True)
class CovariateProjection:
    """Factors of V needed to undo the projection: V = Q R (thin QR)."""

    Q: np.ndarray
    R: np.ndarray


def project_out_covariates(data: RegressionData):
    """Replace Y and X by their projections onto the orthocomplement of V.

    Returns (projected data, projection info for recover_eta).  Uses a thin
    QR of V rather than (V'V)^{-1} for numerical stability.
    """
    if data.V is None:
        raise ValueError("data has no covariate matrix V")
    if data.mask is not None:
        raise ValueError("covariate projection with missing responses is not supported")
    Q, R = np.linalg.qr(data.V)
    if np.abs(np.diag(R)).min() < 1e-12 * max(1.0, np.abs(R).max()):
        raise ValueError("V'V is rank deficient")
    Yp = data.Y - Q @ (Q.T @ data.Y)
    Xp = data.X - Q @ (Q.T @ data.X)
    projected = replace(data, X=np.ascontiguousarray(Xp), Y=np.ascontiguousarray(Yp))
    return projected, CovariateProjection(Q=Q, R=R)


def recover_eta(beta_hat, data: RegressionData, projection: CovariateProjection = None):
    """Closed-form covariate coefficients eta = (V'V)^{-1} V'(Y - X beta).

    ``data`` must be the original (unprojected) centered data carrying V.
    """
    if data.V is None:
        raise ValueError("data has no covariate matrix V")
    if beta_hat.shape != (data.p, data.q):
        raise ValueError("beta_hat shape does not match data")
    if projection is None:
        Q, R = np.linalg.qr(data.V)
    else:
        Q, R = projection.Q, projection.R
    resid = data.Y - data.X @ beta_hat
    # V = QR  =>  (V'V)^{-1}V' = R^{-1}Q'
    return np.linalg.solve(R, Q.T @ resid)


def missing_counts(mask):
    """Per-column observed counts n_k and the penalty weights n / n_k."""
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise ValueError("mask must be a 2-d boolean matrix")
    n_k = mask.sum(axis=0)
    if (n_k < 1).any():
        raise ValueError("response column with no observed entries")
    return n_k, mask.shape[0] / n_k
