# Accelerated proximal gradient descent with Armijo backtracking and a
# monotone acceptance guard, generic over a smooth (loss, gradient) pair and
# a penalty.  Each iteration extrapolates with Nesterov momentum, backtracks
# the step size until the quadratic majorization holds, and keeps the previous
# iterate whenever the accelerated candidate fails to decrease the penalized
# objective.

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import backend
from .data import FitConfig, FittedModel, PenaltySpec, RegressionData, recover_intercept
from .prox import penalty_value, prox_for_spec

MAX_BACKTRACK = 100


class NumericError(RuntimeError):
    """Raised when the objective turns non-finite or backtracking blows up."""


@dataclass(frozen=True)
class IterationRecord:
    """Per-iteration trace record emitted to an optional callback sink."""

    iteration: int
    objective: float
    t: float
    accepted: bool


def backtrack(gamma_point, f_gamma, grad_gamma, loss_fn, prox_step, t_start, growth):
    """Find the first prox-gradient candidate satisfying sufficient decrease.

    Doubles the inverse step size ``t`` by ``growth`` until
    ``f(cand) <= f(gamma) + <grad, cand - gamma> + t/2 ||cand - gamma||^2``.
    The comparison carries a tiny relative slack: at t equal to the exact
    Lipschitz constant the two sides tie in exact arithmetic.

    Returns (candidate, f_candidate, t_final).
    """
    t = t_start
    slack = 1e-12 * max(1.0, abs(f_gamma))
    for _ in range(MAX_BACKTRACK + 1):
        cand = prox_step(gamma_point - grad_gamma / t, 1.0 / t)
        f_cand = loss_fn(cand)
        diff = cand - gamma_point
        bound = f_gamma + float(np.sum(grad_gamma * diff)) + 0.5 * t * float(np.sum(diff * diff))
        if math.isfinite(f_cand) and f_cand <= bound + slack:
            return cand, f_cand, t
        t *= growth
    raise NumericError(
        f"backtracking exceeded {MAX_BACKTRACK} step-size increases; "
        "the problem is pathologically scaled"
    )


def minimize_penalized(loss_fn, grad_fn, prox_step, pen_fn, config, init, t0,
                       callback=None, accelerate=True):
    """Core loop shared by every loss kind.

    ``prox_step(M, inv_t)`` must return Prox_{inv_t * scaled_pen}(M) and
    ``pen_fn(beta)`` the matching scaled penalty value.  The objective trace
    is exactly non-increasing: a candidate that does not improve the
    penalized objective is discarded and the stored objective is carried
    over unchanged.  Convergence is tested only on accepted steps (after a
    rejection the next iteration takes a plain prox step, so a flat trace
    entry does not mean stationarity).
    """
    beta = np.ascontiguousarray(init, dtype=np.float64)
    if not np.all(np.isfinite(beta)):
        raise ValueError("init contains non-finite entries")
    beta_prev = beta
    alpha = 1.0
    alpha_prev = 1.0

    f_beta = loss_fn(beta)
    obj = f_beta + pen_fn(beta)
    if not math.isfinite(obj):
        raise NumericError("objective is non-finite at the initial point")
    trace = [obj]
    converged = False
    iterations = 0

    for k in range(config.max_iter):
        iterations = k + 1
        w = (alpha_prev - 1.0) / alpha if accelerate else 0.0
        gamma_pt = beta + w * (beta - beta_prev)

        f_gamma = loss_fn(gamma_pt) if w != 0.0 else f_beta
        if not math.isfinite(f_gamma):
            # extrapolation overshot the loss into non-finite territory; take
            # a plain prox step from the current iterate instead
            gamma_pt = beta
            f_gamma = f_beta
        grad_gamma = grad_fn(gamma_pt)

        cand, f_cand, t_used = backtrack(
            gamma_pt, f_gamma, grad_gamma, loss_fn, prox_step, t0, config.step_growth
        )
        obj_cand = f_cand + pen_fn(cand)

        accepted = math.isfinite(obj_cand) and obj_cand <= obj
        beta_prev = beta
        if accepted:
            beta = cand
            f_beta = f_cand
            new_obj = obj_cand
        else:
            new_obj = obj

        alpha_prev, alpha = alpha, 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * alpha * alpha))
        trace.append(new_obj)
        if callback is not None:
            callback(IterationRecord(iteration=k, objective=new_obj, t=t_used, accepted=accepted))

        if accepted and abs(obj - new_obj) / max(1.0, abs(obj)) < config.tol:
            obj = new_obj
            converged = True
            break
        obj = new_obj

    return beta, np.asarray(trace), converged, iterations


def _curvature_t0(G, n, winv_norm):
    # 2/n * sigma_max(X'X) * sigma_max(W^-1) is the Lipschitz constant of the
    # quadratic part; backtracking grows it if the nonconvex terms need more.
    sigma = float(np.linalg.eigvalsh(G)[-1])
    return max(2.0 * sigma * winv_norm / n, 1e-12)


def _gram(data):
    X, Y = data.X, data.Y
    return Y.T @ Y, X.T @ Y, X.T @ X


def solve(data: RegressionData, penalty: PenaltySpec, config: FitConfig,
          init=None, loss_kind="full", winv=None, callback=None,
          accelerate=True) -> FittedModel:
    """Fit the penalized criterion on centered data.

    ``loss_kind`` selects the smooth part: "full" (trace criterion,
    complete responses), "observed" (missing-response criterion, requires a
    mask), or "fixed_weight" (trace criterion with the supplied constant
    q x q weight matrix ``winv``, e.g. for two-step convex approximations).
    The penalized objective is loss + (lambda/tau) * Pen.
    """
    K = backend.kernels()
    n, p, q = data.n, data.p, data.q
    if init is None:
        init = np.zeros((p, q))
    init = np.ascontiguousarray(init, dtype=np.float64)
    if init.shape != (p, q):
        raise ValueError(f"init must have shape ({p}, {q})")

    tau, lam = config.tau, config.lam
    scale = lam / tau
    base_prox = prox_for_spec(penalty)

    def prox_step(M, inv_t):
        return base_prox(M, inv_t * scale)

    def pen_fn(b):
        return scale * penalty_value(b, penalty) if scale != 0.0 else 0.0

    if loss_kind == "full":
        if data.mask is not None:
            raise ValueError("data has missing responses; use loss_kind='observed'")
        Syy, C, G = _gram(data)
        loss_fn = lambda b: K.loss_full_gram(Syy, C, G, b, tau, n)
        grad_fn = lambda b: K.grad_full_gram(Syy, C, G, b, tau, n)
        t0 = config.t0 if config.t0 is not None else _curvature_t0(G, n, 1.0 / tau)
    elif loss_kind == "observed":
        if data.mask is None:
            raise ValueError("loss_kind='observed' requires a mask")
        M = np.ascontiguousarray(data.mask, dtype=np.float64)
        X, Y = data.X, data.Y
        loss_fn = lambda b: K.loss_observed(X, Y, M, b, tau)
        grad_fn = lambda b: K.grad_observed(X, Y, M, b, tau)
        t0 = config.t0 if config.t0 is not None else _curvature_t0(X.T @ X, n, 1.0 / tau)
    elif loss_kind == "fixed_weight":
        if winv is None:
            raise ValueError("loss_kind='fixed_weight' requires winv")
        winv = np.ascontiguousarray(winv, dtype=np.float64)
        if winv.shape != (q, q):
            raise ValueError("winv must be q x q")
        Syy, C, G = _gram(data)
        loss_fn = lambda b: K.loss_fixed_gram(Syy, C, G, b, winv, n)
        grad_fn = lambda b: K.grad_fixed_gram(Syy, C, G, b, winv, n)
        if config.t0 is not None:
            t0 = config.t0
        else:
            t0 = _curvature_t0(G, n, float(np.linalg.eigvalsh(winv)[-1]))
    else:
        raise ValueError(f"unknown loss_kind {loss_kind!r}")

    beta, trace, converged, iterations = minimize_penalized(
        loss_fn, grad_fn, prox_step, pen_fn, config, init, t0,
        callback=callback, accelerate=accelerate
    )
    return FittedModel(
        beta_hat=beta,
        mu_hat=recover_intercept(beta, data),
        tau=tau,
        lam=lam,
        objective_trace=trace,
        converged=converged,
        iterations=iterations,
    )
