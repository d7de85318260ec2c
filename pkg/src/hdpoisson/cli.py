"""Command-line surface: fit, infer-linear, infer-group, mediation, simulate.

Exit codes: 0 success, 2 input error, 3 numerical failure, 4 internal error.
"""

import argparse
import json
import sys
import time

import numpy as np

from .errors import (AllUnbounded, CsvError, DegenerateTreatment,
                     DimensionMismatch, HdpError, InvalidLoading,
                     NoConvergence, OverflowDomain, Unbounded)
from .group import GroupConfig, GroupSpec, test_group
from .lasso import LassoConfig, fit_lasso_cv
from .linear import InferenceConfig, infer_linear
from .mediation import MediationData, indirect_effect_test, interaction_test
from .model import Dataset
from .simulation import KINDS, SimScenario, run_scenario
from . import tabular

_INPUT_ERRORS = (CsvError, DimensionMismatch, InvalidLoading,
                 DegenerateTreatment, ValueError, OSError)
_NUMERIC_ERRORS = (NoConvergence, Unbounded, AllUnbounded, OverflowDomain,
                   np.linalg.LinAlgError)


def _add_common(parser):
    parser.add_argument("--seed", type=int, default=None,
                        help="rng seed (falls back to config file, then PDB_SEED)")
    parser.add_argument("--config", default=None, help="key=value config file")
    parser.add_argument("--out", default=None, help="output JSON path")
    parser.add_argument("--threads", type=int, default=1)


def _add_lasso_opts(parser):
    parser.add_argument("--folds", type=int, default=None, help="CV folds")
    parser.add_argument("--n-lambda", type=int, default=None, help="penalty grid size")
    parser.add_argument("--lambda", dest="lam", type=float, default=None,
                        help="skip CV and fit at this penalty")


def _resolved(args):
    file_vals = tabular.read_config_file(args.config) if args.config else {}
    seed = tabular.resolve_seed(args.seed, file_vals)
    merged = dict(file_vals)
    for key, val in vars(args).items():
        if key in ("func", "config") or val is None:
            continue
        merged[key.replace("_", "-")] = val
    merged["seed"] = seed
    return seed, merged


def _lasso_config(args, seed, file_vals):
    cfg = LassoConfig(rng_seed=seed)
    folds = args.folds if args.folds is not None else file_vals.get("folds")
    if folds is not None:
        cfg.cv_folds = int(folds)
    n_lam = args.n_lambda if args.n_lambda is not None else file_vals.get("n-lambda")
    if n_lam is not None:
        cfg.n_lambda = int(n_lam)
    return cfg


def _load_design(path, response, add_intercept=False):
    header, mat = tabular.read_table(path)
    if response not in header:
        raise CsvError(f"{path}: response column {response!r} not in header {header}")
    ridx = header.index(response)
    y = mat[:, ridx]
    X = np.delete(mat, ridx, axis=1)
    names = [h for h in header if h != response]
    if add_intercept:
        X = np.hstack([np.ones((X.shape[0], 1)), X])
        names = ["(intercept)"] + names
    return Dataset(X, y, columns=names)


def cmd_fit(args):
    started = time.time()
    seed, merged = _resolved(args)
    file_vals = tabular.read_config_file(args.config) if args.config else {}
    data = _load_design(args.csv, args.response, add_intercept=args.intercept)
    cfg = _lasso_config(args, seed, file_vals)
    if args.intercept:
        cfg.unpenalized_cols = (0,)
    if args.lam is not None:
        from .lasso import fit_lasso
        fit = fit_lasso(data, args.lam, cfg)
        cv_table = []
    else:
        fit, table = fit_lasso_cv(data, cfg)
        cv_table = [dict(penalty=row[0], mean_deviance=row[1], sd=row[2])
                    for row in table]
    if not fit.converged and args.lam is not None:
        print("warning: solver hit the iteration cap; returning best iterate",
              file=sys.stderr)
    payload = dict(
        beta={name: val for name, val in zip(data.columns, fit.beta_hat)},
        penalty=fit.lam,
        active_set=[data.columns[j] for j in fit.active_set],
        objective=fit.objective, converged=fit.converged, cv_table=cv_table)
    tabular.write_artifact(args.out, payload, merged, seed, started)
    print(f"fit: n={data.n} p={data.p} penalty={fit.lam:.6g} "
          f"active={len(fit.active_set)} objective={fit.objective:.6g}")
    for j in fit.active_set[:20]:
        print(f"  {data.columns[j]:>16s}  {fit.beta_hat[j]: .6g}")
    if len(fit.active_set) > 20:
        print(f"  ... {len(fit.active_set) - 20} more")
    return 0


def _result_payload(res):
    return dict(estimate=res.estimate, se=res.se, ci_low=res.ci_low,
                ci_high=res.ci_high, alpha=res.alpha, statistic=res.statistic,
                p_value=res.p_value, reject=res.reject,
                degenerate_variance=res.degenerate_variance)


def cmd_infer_linear(args):
    started = time.time()
    seed, merged = _resolved(args)
    file_vals = tabular.read_config_file(args.config) if args.config else {}
    data = _load_design(args.csv, args.response)
    if (args.loading is None) == (args.coef is None):
        raise CsvError("provide exactly one of --loading or --coef")
    if args.coef is not None:
        if not 0 <= args.coef < data.p:
            raise CsvError(f"--coef {args.coef} out of range for p={data.p}")
        x_star = np.zeros(data.p)
        x_star[args.coef] = 1.0
    else:
        x_star = tabular.read_vector(args.loading)
        if x_star.shape[0] != data.p:
            raise DimensionMismatch(
                f"loading has {x_star.shape[0]} entries, design has {data.p} columns")
    cfg = InferenceConfig(lasso=_lasso_config(args, seed, file_vals))
    res = infer_linear(data, x_star, alpha=args.alpha, config=cfg)
    tabular.write_artifact(args.out, _result_payload(res), merged, seed, started)
    print(f"estimate={res.estimate:.6g} se={res.se:.6g} "
          f"ci=[{res.ci_low:.6g}, {res.ci_high:.6g}] p={res.p_value:.4g} "
          f"reject={res.reject}")
    return 0


def _parse_group(text, p):
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, _, hi = part.partition("-")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    idx = sorted(set(out))
    if not idx or idx[0] < 0 or idx[-1] >= p:
        raise CsvError(f"group indices must lie in [0, {p - 1}]")
    return np.asarray(idx, dtype=np.intp)


def cmd_infer_group(args):
    started = time.time()
    seed, merged = _resolved(args)
    file_vals = tabular.read_config_file(args.config) if args.config else {}
    data = _load_design(args.csv, args.response)
    G = _parse_group(args.group, data.p)
    if args.weighting == "identity":
        weighting = np.eye(len(G))
    elif args.weighting == "sigma":
        weighting = "sigma"
    elif args.weighting.startswith("known:"):
        _, A = tabular.read_table(args.weighting[len("known:"):])
        A = np.asarray(A)
        eigs = np.linalg.eigvalsh((A + A.T) / 2.0) if A.shape[0] == A.shape[1] else None
        if eigs is None or eigs[0] <= 1e-10 or not np.allclose(A, A.T, atol=1e-10):
            report = "non-square" if eigs is None else f"min eigenvalue {eigs[0]:.3g}"
            raise CsvError(f"known weighting matrix is not symmetric positive "
                           f"definite ({report})")
        weighting = A
    else:
        raise CsvError("--weighting must be identity, sigma, or known:<path>")
    spec = GroupSpec(indices=G, weighting=weighting, tau=args.tau, split=args.split)
    cfg = GroupConfig(lasso=_lasso_config(args, seed, file_vals), split_seed=seed)
    res = test_group(data, spec, alpha=args.alpha, config=cfg)
    payload = dict(q_hat=res.q_hat, variance=res.variance, ci_low=res.ci_low,
                   ci_high=res.ci_high, alpha=res.alpha, reject=res.reject,
                   zero_loading=res.zero_loading,
                   negative_estimate=res.negative_estimate)
    tabular.write_artifact(args.out, payload, merged, seed, started)
    print(f"q_hat={res.q_hat:.6g} sd={np.sqrt(res.variance):.6g} "
          f"ci=[{res.ci_low:.6g}, {res.ci_high:.6g}] reject={res.reject}")
    return 0


def cmd_mediation(args):
    started = time.time()
    seed, merged = _resolved(args)
    file_vals = tabular.read_config_file(args.config) if args.config else {}
    header, mat = tabular.read_table(args.csv)
    for col in (args.response, args.treatment):
        if col not in header:
            raise CsvError(f"{args.csv}: column {col!r} not in header")
    if args.mediators:
        med_cols = [c.strip() for c in args.mediators.split(",")]
        missing = [c for c in med_cols if c not in header]
        if missing:
            raise CsvError(f"{args.csv}: mediator columns not found: {missing}")
    else:
        med_cols = [c for c in header if c not in (args.response, args.treatment)]
    if not med_cols:
        raise CsvError("no mediator columns remain")
    md = MediationData(
        T=mat[:, header.index(args.treatment)],
        M=mat[:, [header.index(c) for c in med_cols]],
        y=mat[:, header.index(args.response)])
    lasso = _lasso_config(args, seed, file_vals)
    if args.test == "interaction":
        res = interaction_test(md, tau=args.tau, alpha=args.alpha,
                               config=GroupConfig(lasso=lasso, split_seed=seed))
        payload = dict(q_hat=res.q_hat, variance=res.variance, ci_low=res.ci_low,
                       ci_high=res.ci_high, alpha=res.alpha, reject=res.reject)
        print(f"interaction: q_hat={res.q_hat:.6g} "
              f"ci=[{res.ci_low:.6g}, {res.ci_high:.6g}] reject={res.reject}")
    else:
        res = indirect_effect_test(md, alpha=args.alpha,
                                   config=InferenceConfig(lasso=lasso))
        payload = _result_payload(res)
        print(f"indirect effect: estimate={res.estimate:.6g} se={res.se:.6g} "
              f"ci=[{res.ci_low:.6g}, {res.ci_high:.6g}] reject={res.reject}")
    tabular.write_artifact(args.out, payload, merged, seed, started)
    return 0


def cmd_simulate(args):
    started = time.time()
    if args.list:
        for kind in KINDS:
            print(kind)
        return 0
    if args.scenario is None:
        raise CsvError("--scenario is required (or use --list)")
    seed, merged = _resolved(args)
    kwargs = dict(kind=args.scenario, rng_seed=seed, alpha=args.alpha,
                  tau=args.tau, n_reps=args.reps)
    if args.n is not None:
        kwargs["n"] = args.n
    if args.p is not None:
        kwargs["p"] = args.p
    if args.r is not None:
        kwargs["r"] = args.r
    sc = SimScenario(**kwargs)
    report = run_scenario(sc, threads=args.threads)
    tabular.write_artifact(args.out, report.to_dict(), merged, seed, started)
    header, rows = report.table()
    if args.out:
        csv_path = args.out.rsplit(".", 1)[0] + ".csv"
        tabular.write_table(csv_path, header, rows)
    print(",".join(header))
    for row in rows:
        print(",".join(f"{v:.4g}" if isinstance(v, float) else str(v) for v in row))
    if report.n_failures:
        print(f"warning: {report.n_failures} replication(s) failed", file=sys.stderr)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hdpoisson",
        description="Bias-corrected inference for high-dimensional Poisson regression")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="L1-penalized Poisson fit with CV")
    p_fit.add_argument("csv")
    p_fit.add_argument("--response", required=True)
    p_fit.add_argument("--intercept", action="store_true",
                       help="prepend an unpenalized ones column")
    _add_lasso_opts(p_fit)
    _add_common(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_lin = sub.add_parser("infer-linear", help="CI and test for x*'beta")
    p_lin.add_argument("csv")
    p_lin.add_argument("--response", required=True)
    p_lin.add_argument("--loading", default=None, help="one-column CSV for x*")
    p_lin.add_argument("--coef", type=int, default=None,
                       help="0-based column index for x* = e_j")
    p_lin.add_argument("--alpha", type=float, default=0.05)
    _add_lasso_opts(p_lin)
    _add_common(p_lin)
    p_lin.set_defaults(func=cmd_infer_linear)

    p_grp = sub.add_parser("infer-group", help="quadratic group functional test")
    p_grp.add_argument("csv")
    p_grp.add_argument("--response", required=True)
    p_grp.add_argument("--group", required=True,
                       help="0-based indices, e.g. '0,3,7' or '15-200'")
    p_grp.add_argument("--weighting", default="sigma",
                       help="identity | sigma | known:<csv path>")
    p_grp.add_argument("--tau", type=float, default=0.5)
    p_grp.add_argument("--alpha", type=float, default=0.05)
    p_grp.add_argument("--split", action="store_true",
                       help="fit and correct on disjoint seeded halves")
    _add_lasso_opts(p_grp)
    _add_common(p_grp)
    p_grp.set_defaults(func=cmd_infer_group)

    p_med = sub.add_parser("mediation", help="interaction / indirect-effect tests")
    p_med.add_argument("csv")
    p_med.add_argument("--response", required=True)
    p_med.add_argument("--treatment", required=True)
    p_med.add_argument("--mediators", default=None,
                       help="comma-separated columns (default: all others)")
    p_med.add_argument("--test", choices=("interaction", "indirect"), required=True)
    p_med.add_argument("--tau", type=float, default=0.5)
    p_med.add_argument("--alpha", type=float, default=0.05)
    _add_lasso_opts(p_med)
    _add_common(p_med)
    p_med.set_defaults(func=cmd_mediation)

    p_sim = sub.add_parser("simulate", help="replication benchmark harness")
    p_sim.add_argument("--scenario", choices=KINDS, default=None)
    p_sim.add_argument("--list", action="store_true", help="list scenario names")
    p_sim.add_argument("--n", type=int, default=None)
    p_sim.add_argument("--p", type=int, default=None)
    p_sim.add_argument("--r", type=float, default=None)
    p_sim.add_argument("--reps", type=int, default=200)
    p_sim.add_argument("--tau", type=float, default=1.0)
    p_sim.add_argument("--alpha", type=float, default=0.05)
    _add_common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _INPUT_ERRORS as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except _NUMERIC_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except HdpError as exc:
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4
    except Exception as exc:  # invariant breach
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
