"""Multivariate response linear regression with the error covariance linked
to the coefficient matrix, fit by accelerated proximal gradient descent.

Quick start::

    from covlink import center_data, FitConfig, PenaltySpec, solve

    data = center_data(X_raw, Y_raw)
    model = solve(data, PenaltySpec.l1(), FitConfig(tau=1.0, lam=0.1))
"""

from .adjustments import missing_counts, project_out_covariates, recover_eta
from .backend import active_backend, available_backends, set_backend
from .competitors import CocoInputs, ca_fit, coco_fit, coco_inputs, coco_project, lasso_fit
from .data import (
    FitConfig,
    FittedModel,
    PenaltySpec,
    RegressionData,
    center_data,
    predict,
    recover_intercept,
)
from .loss import WeightInverse, grad_full, grad_observed, loss_full, loss_observed, weight_inverse
from .prox import (
    penalty_value,
    prox_group_rows,
    prox_l1,
    prox_nuclear,
    prox_sparse_group,
    prox_weighted_l1,
)
from .simulation import (
    BenchmarkResult,
    SimConfig,
    SimTruth,
    ar_covariance,
    frobenius_error,
    gen_beta_star,
    gen_model1,
    gen_model2,
    make_truth,
    model_error_latent,
    model_error_observed,
    prediction_error,
    run_benchmark,
    tpr_fpr,
)
from .solver import NumericError, solve
from .tuning import (
    CVResult,
    TuningGrid,
    build_grid,
    cross_validate,
    fit_cv,
    lambda_max,
    refine_grid,
    solution_path,
)

__version__ = "0.1.0"
