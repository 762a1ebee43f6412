# Proximal operators for the supported penalties, plus the penalty values
# themselves (needed by the solver's monotone acceptance check).

import numpy as np

from . import backend
from .data import PenaltySpec


def _check(M, t):
    M = np.ascontiguousarray(M, dtype=np.float64)
    if t < 0:
        raise ValueError("threshold must be nonnegative")
    return M, float(t)


def prox_l1(M, t):
    """Entrywise soft-thresholding at level t."""
    M, t = _check(M, t)
    return backend.kernels().prox_l1(M, t)


def prox_group_rows(M, t):
    """Row-wise group soft-thresholding: scale each row by max(1 - t/||row||, 0)."""
    M, t = _check(M, t)
    return backend.kernels().prox_group_rows(M, t)


def prox_sparse_group(M, t_l1, t_group):
    """Soft-threshold entries at t_l1, then group-threshold the rows at t_group."""
    M, t_l1 = _check(M, t_l1)
    if t_group < 0:
        raise ValueError("threshold must be nonnegative")
    return backend.kernels().prox_sparse_group(M, t_l1, float(t_group))


def prox_nuclear(M, t):
    """Singular-value soft-thresholding via thin SVD."""
    M, t = _check(M, t)
    if not np.all(np.isfinite(M)):
        raise ValueError("non-finite input to prox_nuclear")
    return backend.kernels().prox_nuclear(M, t)


def prox_weighted_l1(M, t, weights):
    """Column k soft-thresholded at t * weights[k]."""
    M, t = _check(M, t)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    if weights.ndim != 1 or weights.shape[0] != M.shape[1]:
        raise ValueError("weights must be a length-q vector")
    if (weights <= 0).any():
        raise ValueError("weights must be positive")
    return backend.kernels().prox_weighted_l1(M, t, weights)


def penalty_value(beta, spec: PenaltySpec):
    """Pen(beta) for the given spec (unscaled by lambda/tau)."""
    if spec.kind == "l1":
        return float(np.abs(beta).sum())
    if spec.kind == "group_rows":
        return float(np.sqrt(np.sum(beta * beta, axis=1)).sum())
    if spec.kind == "sparse_group":
        return float(
            spec.gamma1 * np.abs(beta).sum()
            + spec.gamma2 * np.sqrt(np.sum(beta * beta, axis=1)).sum()
        )
    if spec.kind == "nuclear":
        return float(np.linalg.svd(beta, compute_uv=False).sum())
    if spec.kind == "weighted_l1":
        return float((np.abs(beta).sum(axis=0) * spec.column_weights).sum())
    raise ValueError(f"unknown penalty kind {spec.kind!r}")


def prox_for_spec(spec: PenaltySpec):
    """A closure prox(M, s) computing Prox_{s * Pen}(M) for this spec."""
    kind = spec.kind
    if kind == "l1":
        return lambda M, s: prox_l1(M, s)
    if kind == "group_rows":
        return lambda M, s: prox_group_rows(M, s)
    if kind == "sparse_group":
        g1, g2 = spec.gamma1, spec.gamma2
        return lambda M, s: prox_sparse_group(M, s * g1, s * g2)
    if kind == "nuclear":
        return lambda M, s: prox_nuclear(M, s)
    if kind == "weighted_l1":
        w = spec.column_weights
        return lambda M, s: prox_weighted_l1(M, s, w)
    raise ValueError(f"unknown penalty kind {kind!r}")
