# Command-line front end: fit, cross-validate, predict, simulate, benchmark.
# CSV in/out (first row header, NA marks a missing response entry), JSON run
# manifests recording every setting including defaults.  Exit codes: 0 ok,
# 2 usage/input error, 3 numeric failure.

import argparse
import csv
import json
import os
import sys

import numpy as np

from .adjustments import missing_counts, project_out_covariates, recover_eta
from .competitors import ca_fit, coco_fit, lasso_fit
from .data import FitConfig, PenaltySpec, center_data, predict, recover_intercept
from .simulation import (
    BENCHMARK_METHODS,
    SimConfig,
    gen_model1,
    gen_model2,
    make_truth,
    run_benchmark,
)
from .solver import NumericError, solve
from .tuning import build_grid, cross_validate, fit_cv, lambda_max, refine_grid
from . import backend

SCHEMA_VERSION = "1"
FLOAT_FMT = "%.17g"

PENALTY_FLAGS = {"l1": "l1", "group": "group_rows", "sparse-group": "sparse_group",
                 "nuclear": "nuclear"}


class InputError(Exception):
    """Bad file contents or inconsistent flags (exit code 2)."""


def read_matrix(path, allow_na=False):
    """Read a header-row CSV into (array, header, mask-or-None).

    The literal token NA marks a missing entry; only allowed when
    ``allow_na`` (response files)."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if len(rows) < 2:
        raise InputError(f"{path}: need a header row plus at least one data row")
    header = [h.strip() for h in rows[0]]
    ncol = len(header)
    body = np.empty((len(rows) - 1, ncol))
    mask = np.ones_like(body, dtype=bool)
    for i, row in enumerate(rows[1:]):
        if len(row) != ncol:
            raise InputError(f"{path}: row {i + 2} has {len(row)} fields, expected {ncol}")
        for j, cell in enumerate(row):
            cell = cell.strip()
            if cell == "NA":
                if not allow_na:
                    raise InputError(f"{path}: NA not allowed in this file")
                body[i, j] = 0.0
                mask[i, j] = False
            else:
                try:
                    body[i, j] = float(cell)
                except ValueError as exc:
                    raise InputError(f"{path}: bad number {cell!r} at row {i + 2}") from exc
    return body, header, (None if mask.all() else mask)


def write_matrix(path, array, header):
    array = np.atleast_2d(np.asarray(array, dtype=np.float64))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in array:
            w.writerow([FLOAT_FMT % v for v in row])


def write_manifest(path, payload):
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _penalty_from_args(args, mask):
    kind = PENALTY_FLAGS.get(args.penalty)
    if kind is None:
        raise InputError(f"unknown penalty {args.penalty!r}")
    if kind == "sparse_group":
        return PenaltySpec.sparse_group(args.gamma1, args.gamma2)
    if kind == "l1" and mask is not None:
        # missing responses: weight each column by n / n_k
        _, w = missing_counts(mask)
        return PenaltySpec.weighted_l1(w)
    return PenaltySpec(kind)


def _config_from_args(args, tau, lam):
    return FitConfig(tau=tau, lam=lam, t0=args.t0, step_growth=args.step_growth,
                     max_iter=args.max_iter, tol=args.tol)


def _load_inputs(args):
    X, x_names, xmask = read_matrix(args.x)
    if xmask is not None:
        raise InputError("predictor file must not contain NA")
    Y, y_names, mask = read_matrix(args.y, allow_na=True)
    if args.mask:
        if mask is not None:
            raise InputError("give missing entries as NA tokens or --mask, not both")
        M, _, _ = read_matrix(args.mask)
        mask = M != 0.0
        if mask.all():
            mask = None
    V = v_names = None
    if args.v:
        V, v_names, vmask = read_matrix(args.v)
        if vmask is not None:
            raise InputError("covariate file must not contain NA")
    data = center_data(X, Y, raw_V=V, mask=mask)
    return data, x_names, y_names, v_names


def _standardize(data):
    if data.mask is None:
        sd = data.Y.std(axis=0)
    else:
        counts = data.mask.sum(axis=0)
        sd = np.sqrt((data.Y * data.Y).sum(axis=0) / counts)
    if (sd <= 0).any():
        raise InputError("cannot standardize a constant response column")
    from dataclasses import replace

    scaled = replace(data, Y=np.ascontiguousarray(data.Y / sd))
    return scaled, sd


def cmd_fit(args):
    data, x_names, y_names, v_names = _load_inputs(args)
    penalty = _penalty_from_args(args, data.mask)
    fit_data, sd = (_standardize(data) if args.standardize else (data, None))

    if args.cv:
        config = _config_from_args(args, tau=1.0, lam=1.0)
        model, cv = fit_cv(fit_data, penalty, V=args.cv_folds, seed=args.seed,
                           config=config, refine=args.refine, M=args.grid_size,
                           delta=args.delta, jobs=args.jobs)
        tau, lam = model.tau, model.lam
    else:
        if args.tau is None or getattr(args, "lambda") is None:
            raise InputError("give --tau and --lambda, or use --cv")
        tau, lam = args.tau, getattr(args, "lambda")
        config = _config_from_args(args, tau=tau, lam=lam)
        if fit_data.V is not None:
            projected, _ = project_out_covariates(fit_data)
            model = solve(projected, penalty, config,
                          loss_kind="observed" if fit_data.mask is not None else "full")
            from dataclasses import replace

            eta = recover_eta(model.beta_hat, fit_data)
            model = replace(model, eta_hat=eta,
                            mu_hat=recover_intercept(model.beta_hat, fit_data, eta))
        else:
            model = solve(fit_data, penalty, config,
                          loss_kind="observed" if fit_data.mask is not None else "full")
        cv = None

    beta, eta, mu = model.beta_hat, model.eta_hat, model.mu_hat
    if sd is not None:
        # undo response standardization: rescale coefficient columns
        beta = beta * sd[None, :]
        if eta is not None:
            eta = eta * sd[None, :]
        mu = recover_intercept(beta, data, eta)

    os.makedirs(args.out_dir, exist_ok=True)
    write_matrix(os.path.join(args.out_dir, "beta.csv"), beta, y_names)
    write_matrix(os.path.join(args.out_dir, "mu.csv"), mu.reshape(1, -1), y_names)
    if eta is not None:
        write_matrix(os.path.join(args.out_dir, "eta.csv"), eta, y_names)

    lmax = lambda_max(fit_data, penalty)
    manifest = {
        "command": "fit",
        "inputs": {"x": args.x, "y": args.y, "v": args.v, "mask": args.mask},
        "x_names": x_names, "y_names": y_names, "v_names": v_names,
        "penalty": {"kind": penalty.kind, "gamma1": penalty.gamma1,
                    "gamma2": penalty.gamma2,
                    "column_weights": None if penalty.column_weights is None
                    else list(penalty.column_weights)},
        "tau": tau, "lambda": lam,
        "solver": {"t0": args.t0 if args.t0 is not None else "auto",
                   "step_growth": args.step_growth, "max_iter": args.max_iter,
                   "tol": args.tol},
        "cv": None if cv is None else {
            "folds": args.cv_folds, "grid_size": args.grid_size, "delta": args.delta,
            "refine": args.refine, "best_tau": cv.best_tau, "best_lambda": cv.best_lambda,
        },
        "standardize": args.standardize,
        "seed": args.seed,
        "lambda_max": lmax,
        "at_boundary": bool(lam >= lmax),
        "iterations": model.iterations,
        "converged": model.converged,
        "final_objective": float(model.objective_trace[-1]),
        "files": {"beta": "beta.csv", "mu": "mu.csv",
                  "eta": "eta.csv" if eta is not None else None},
    }
    write_manifest(os.path.join(args.out_dir, "manifest.json"), manifest)
    return 0


def cmd_cv(args):
    data, x_names, y_names, v_names = _load_inputs(args)
    penalty = _penalty_from_args(args, data.mask)
    if args.standardize:
        data, _ = _standardize(data)
    config = _config_from_args(args, tau=1.0, lam=1.0)
    grid = build_grid(data, M=args.grid_size, delta=args.delta, penalty=penalty)

    os.makedirs(args.out_dir, exist_ok=True)
    passes = []
    trace = []
    cv = cross_validate(data, penalty, grid, V=args.cv_folds, seed=args.seed,
                        config=config, jobs=args.jobs, trace=trace)
    passes.append(("coarse", cv))
    if args.refine:
        grid2 = refine_grid(cv)
        cv = cross_validate(data, penalty, grid2, V=args.cv_folds, seed=args.seed,
                            config=config, jobs=args.jobs, trace=trace)
        passes.append(("refined", cv))

    with open(os.path.join(args.out_dir, "cv_surface.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pass", "tau", "lambda", "error"])
        for label, res in passes:
            for ti, tau in enumerate(res.grid.taus):
                for li, lam in enumerate(res.grid.lambdas(ti)):
                    w.writerow([label, FLOAT_FMT % tau, FLOAT_FMT % lam,
                                FLOAT_FMT % res.error_surface[ti, li]])
    with open(os.path.join(args.out_dir, "cv_trace.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["fold", "tau", "lambda", "error"])
        for fold, tau, lam, err in trace:
            w.writerow([fold, FLOAT_FMT % tau, FLOAT_FMT % lam, FLOAT_FMT % err])

    manifest = {
        "command": "cv",
        "inputs": {"x": args.x, "y": args.y, "v": args.v, "mask": args.mask},
        "penalty": {"kind": penalty.kind, "gamma1": penalty.gamma1, "gamma2": penalty.gamma2},
        "cv_folds": args.cv_folds, "grid_size": args.grid_size, "delta": args.delta,
        "refine": args.refine, "seed": args.seed, "standardize": args.standardize,
        "solver": {"t0": args.t0 if args.t0 is not None else "auto",
                   "step_growth": args.step_growth, "max_iter": args.max_iter,
                   "tol": args.tol},
        "best_tau": cv.best_tau, "best_lambda": cv.best_lambda,
        "files": {"surface": "cv_surface.csv", "trace": "cv_trace.csv"},
    }
    write_manifest(os.path.join(args.out_dir, "manifest.json"), manifest)
    return 0


def cmd_predict(args):
    try:
        with open(os.path.join(args.model_dir, "manifest.json")) as fh:
            manifest = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read model manifest: {exc}") from exc
    beta, _, _ = read_matrix(os.path.join(args.model_dir, "beta.csv"))
    mu, _, _ = read_matrix(os.path.join(args.model_dir, "mu.csv"))
    mu = mu[0]
    eta = None
    if manifest.get("files", {}).get("eta"):
        eta, _, _ = read_matrix(os.path.join(args.model_dir, "eta.csv"))

    X, _, xmask = read_matrix(args.x)
    if xmask is not None:
        raise InputError("predictor file must not contain NA")
    if X.shape[1] != beta.shape[0]:
        raise InputError(f"new X has {X.shape[1]} columns; model expects {beta.shape[0]}")
    pred = mu + X @ beta
    if eta is not None:
        if not args.v:
            raise InputError("model uses covariates; --v is required")
        V, _, _ = read_matrix(args.v)
        if V.shape != (X.shape[0], eta.shape[0]):
            raise InputError("covariate file shape does not match the model")
        pred = pred + V @ eta
    elif args.v:
        raise InputError("model has no covariate coefficients; drop --v")

    os.makedirs(args.out_dir, exist_ok=True)
    write_matrix(os.path.join(args.out_dir, "predictions.csv"), pred,
                 manifest.get("y_names") or [f"y{j + 1}" for j in range(pred.shape[1])])
    return 0


def cmd_simulate(args):
    config = SimConfig(n=args.n, p=args.p, q=args.q, sigma_u_sq=args.sigma_u_sq,
                       gamma_sq=args.gamma_sq, model=args.model, seed=args.seed)
    truth = make_truth(config)
    rng = np.random.default_rng(config.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    x_names = [f"x{j + 1}" for j in range(args.p)]
    y_names = [f"y{j + 1}" for j in range(args.q)]
    if config.model == 1:
        X, Y = gen_model1(config, truth, rng=rng)
    else:
        X, Y, Z = gen_model2(config, truth, rng=rng)
        write_matrix(os.path.join(args.out_dir, "Z.csv"), Z, x_names)
    write_matrix(os.path.join(args.out_dir, "X.csv"), X, x_names)
    write_matrix(os.path.join(args.out_dir, "Y.csv"), Y, y_names)
    write_matrix(os.path.join(args.out_dir, "beta_star.csv"), truth.beta_star, y_names)
    write_manifest(os.path.join(args.out_dir, "truth.json"), {
        "command": "simulate",
        "model": config.model, "n": config.n, "p": config.p, "q": config.q,
        "sigma_u_sq": config.sigma_u_sq, "gamma_sq": config.gamma_sq,
        "ar_rho": config.ar_rho, "seed": config.seed,
        "nonzeros_per_column": 6,
        "files": {"X": "X.csv", "Y": "Y.csv", "beta_star": "beta_star.csv",
                  "Z": "Z.csv" if config.model == 2 else None},
    })
    return 0


def cmd_benchmark(args):
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    sigma_grid = [float(s) for s in args.sigma_u.split(",")]
    config = SimConfig(n=args.n, p=args.p, q=args.q, gamma_sq=args.gamma_sq,
                       model=args.model, seed=args.seed)
    result = run_benchmark(config, methods=methods, replications=args.reps,
                           seed=args.seed, sigma_u_grid=sigma_grid,
                           n_test=args.n_test, jobs=args.jobs,
                           cv_folds=args.cv_folds, M=args.grid_size, delta=args.delta)

    os.makedirs(args.out_dir, exist_ok=True)
    with open(os.path.join(args.out_dir, "metrics.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replication", "model", "sigma_u_sq", "method", "metric", "value"])
        for r in result.records:
            w.writerow([r["replication"], r["model"], FLOAT_FMT % r["sigma_u_sq"],
                        r["method"], r["metric"], FLOAT_FMT % r["value"]])
    with open(os.path.join(args.out_dir, "summary.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "sigma_u_sq", "metric", "q25", "q50", "q75"])
        for row in result.summary_rows():
            w.writerow([row["method"], FLOAT_FMT % row["sigma_u_sq"], row["metric"],
                        FLOAT_FMT % row["q25"], FLOAT_FMT % row["q50"],
                        FLOAT_FMT % row["q75"]])
    if result.failures:
        with open(os.path.join(args.out_dir, "failures.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["replication", "model", "sigma_u_sq", "method", "error"])
            for r in result.failures:
                w.writerow([r["replication"], r["model"], FLOAT_FMT % r["sigma_u_sq"],
                            r["method"], r["error"]])
    if args.plot_data:
        _write_plot_data(args.out_dir, result)

    write_manifest(os.path.join(args.out_dir, "manifest.json"), {
        "command": "benchmark",
        "model": args.model, "n": args.n, "p": args.p, "q": args.q,
        "gamma_sq": args.gamma_sq, "replications": args.reps,
        "sigma_u_grid": sigma_grid, "methods": methods, "seed": args.seed,
        "n_test": args.n_test, "cv_folds": args.cv_folds,
        "grid_size": args.grid_size, "delta": args.delta, "jobs": args.jobs,
        "backend": backend.active_backend(),
        "failures": len(result.failures),
        "files": {"metrics": "metrics.csv", "summary": "summary.csv"},
    })
    return 0


def _write_plot_data(out_dir, result):
    # one gnuplot-ready file per metric: sigma_u, method, quartiles
    rows = result.summary_rows()
    metrics = sorted({r["metric"] for r in rows})
    for metric in metrics:
        path = os.path.join(out_dir, f"plot_{metric}.dat")
        with open(path, "w") as fh:
            fh.write("# sigma_u_sq method q25 q50 q75\n")
            for r in rows:
                if r["metric"] != metric:
                    continue
                fh.write(f"{r['sigma_u_sq']:g} {r['method']} "
                         f"{r['q25']:.10g} {r['q50']:.10g} {r['q75']:.10g}\n")


def _add_common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--config", default=None, help="JSON file of flag defaults")


def _add_data_flags(p):
    p.add_argument("--x", required=True, help="predictor CSV")
    p.add_argument("--y", required=True, help="response CSV (NA marks missing)")
    p.add_argument("--v", default=None, help="error-free covariate CSV")
    p.add_argument("--mask", default=None, help="0/1 observation-mask CSV for Y")
    p.add_argument("--standardize", action="store_true",
                   help="standardize responses for fitting, rescale coefficients after")


def _add_penalty_flags(p):
    p.add_argument("--penalty", default="l1", choices=sorted(PENALTY_FLAGS))
    p.add_argument("--gamma1", type=float, default=1.0)
    p.add_argument("--gamma2", type=float, default=1.0)


def _add_solver_flags(p):
    p.add_argument("--t0", type=float, default=None)
    p.add_argument("--step-growth", type=float, default=2.0)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-8)


def _add_grid_flags(p):
    p.add_argument("--cv-folds", type=int, default=5)
    p.add_argument("--grid-size", type=int, default=10, help="lambda grid size M")
    p.add_argument("--delta", type=float, default=0.1, help="lambda_min / lambda_max")
    p.add_argument("--refine", action="store_true", help="second CV pass on a refined tau grid")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="covlink",
        description="Multivariate regression with covariance linked to the coefficients",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("fit", help="fit a model")
    _add_data_flags(p)
    _add_penalty_flags(p)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--lambda", type=float, default=None)
    p.add_argument("--cv", action="store_true", help="select (tau, lambda) by cross-validation")
    _add_solver_flags(p)
    _add_grid_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("cv", help="cross-validation error surface")
    _add_data_flags(p)
    _add_penalty_flags(p)
    _add_solver_flags(p)
    _add_grid_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("predict", help="predict from a saved fit")
    p.add_argument("--model-dir", required=True, help="directory with manifest.json and beta.csv")
    p.add_argument("--x", required=True)
    p.add_argument("--v", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("simulate", help="write one synthetic dataset")
    p.add_argument("--model", type=int, default=2, choices=(1, 2))
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--p", type=int, default=50)
    p.add_argument("--q", type=int, default=10)
    p.add_argument("--sigma-u-sq", type=float, default=0.5)
    p.add_argument("--gamma-sq", type=float, default=3.0)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("benchmark", help="Monte Carlo method comparison")
    p.add_argument("--model", type=int, default=2, choices=(1, 2))
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--p", type=int, default=50)
    p.add_argument("--q", type=int, default=10)
    p.add_argument("--gamma-sq", type=float, default=3.0)
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--sigma-u", default="0,0.25,0.5,1.0", help="comma-separated sigma_u^2 values")
    p.add_argument("--methods", default=",".join(BENCHMARK_METHODS))
    p.add_argument("--n-test", type=int, default=1000)
    p.add_argument("--cv-folds", type=int, default=5)
    p.add_argument("--grid-size", type=int, default=10)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--plot-data", action="store_true", help="write gnuplot .dat files")
    _add_common(p)
    p.set_defaults(func=cmd_benchmark)

    return parser


def _apply_config_file(parser, argv):
    # config-file values become parser defaults, so explicit flags still win
    if "--config" not in argv:
        return
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        return
    path = argv[idx + 1]
    try:
        with open(path) as fh:
            loaded = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot load config {path}: {exc}") from exc
    if not isinstance(loaded, dict):
        raise InputError(f"config {path} must hold a JSON object")
    defaults = {k.replace("-", "_"): v for k, v in loaded.items()}
    for sp in parser._subparsers._group_actions[0].choices.values():  # noqa: SLF001
        known = {a.dest for a in sp._actions}  # noqa: SLF001
        sp.set_defaults(**{k: v for k, v in defaults.items() if k in known})


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
