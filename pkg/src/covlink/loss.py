# The weighted residual-sum-of-squares criterion, its observed-data variant,
# and their exact gradients.  Thin validation wrappers over the backend
# kernels; the solver builds closures over the same kernels directly.

from dataclasses import dataclass

import numpy as np

from . import backend


def _check_beta_tau(beta, tau):
    beta = np.ascontiguousarray(beta, dtype=np.float64)
    if beta.ndim != 2:
        raise ValueError("beta must be a p x q matrix")
    if not np.all(np.isfinite(beta)):
        raise ValueError("beta contains non-finite entries")
    if not tau > 0:
        raise ValueError("tau must be positive")
    return beta, float(tau)


@dataclass(frozen=True)
class WeightInverse:
    """(beta'beta + tau I)^{-1}, the q x q weight matrix of the criterion."""

    omega_inv: np.ndarray
    tau: float


def weight_inverse(beta, tau):
    """Invert beta'beta + tau I, via the p x p Woodbury form when p < q."""
    beta, tau = _check_beta_tau(beta, tau)
    W = backend.kernels().omega_inv(beta, tau)
    return WeightInverse(omega_inv=W, tau=tau)


def _mask_float(data):
    return np.ascontiguousarray(data.mask, dtype=np.float64)


def loss_full(beta, tau, data):
    """Trace criterion tr{(Y - X beta)'(Y - X beta)(beta'beta + tau I)^-1}/n."""
    beta, tau = _check_beta_tau(beta, tau)
    if data.mask is not None:
        raise ValueError("data has missing responses; use loss_observed")
    return backend.kernels().loss_full(data.X, data.Y, beta, tau)


def grad_full(beta, tau, data):
    """Exact gradient of loss_full at beta."""
    beta, tau = _check_beta_tau(beta, tau)
    if data.mask is not None:
        raise ValueError("data has missing responses; use grad_observed")
    return backend.kernels().grad_full(data.X, data.Y, beta, tau)


def loss_observed(beta, tau, data):
    """Observed-data criterion: the weighted quadratic form restricted, per
    subject, to the observed response coordinates.  Equals loss_full under a
    complete mask."""
    beta, tau = _check_beta_tau(beta, tau)
    if data.mask is None:
        raise ValueError("data has no mask; use loss_full")
    return backend.kernels().loss_observed(data.X, data.Y, _mask_float(data), beta, tau)


def grad_observed(beta, tau, data):
    """Exact gradient of loss_observed at beta."""
    beta, tau = _check_beta_tau(beta, tau)
    if data.mask is None:
        raise ValueError("data has no mask; use grad_full")
    return backend.kernels().grad_observed(data.X, data.Y, _mask_float(data), beta, tau)
