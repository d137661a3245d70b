"""Command-line entry point: ``lcsm fit``, ``lcsm simulate``, ``lcsm basis``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric error
(non-convergence or a linearly dependent basis). Every failure prints one
line to stderr of the form ``lcsm: error[<kind>]: <reason>``.
"""

import argparse
import csv
import json
import math
import sys

import numpy as np

from lcsm.basis import build_basis, check_linear_independence
from lcsm.errors import (
    DegenerateDataError,
    DependencyError,
    InvalidInputError,
    LCSMError,
    NonConvergenceError,
)
from lcsm.path import fit_lcsm, lambda_max
from lcsm.simulate import SimConfig, run_replications, write_csv
from lcsm.solver import build_stats, build_stats_from_observations, predict_sigma
from lcsm.symcore import min_eigenvalue
from lcsm.theory import TheoryInputs, theory_report

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
REPORT_FORMAT = "lcsm-fit-report"
REPORT_VERSION = 1


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- serialization ---------------------------------------------------------


def fmt_float(x):
    """17 significant digits: enough to reproduce every double exactly."""
    x = float(x)
    if not math.isfinite(x):
        return "null"
    return format(x, ".17g")


def dumps(obj, indent=1, _level=0):
    """JSON text with fixed key order and fixed float formatting.

    Dict keys keep insertion order; floats use :func:`fmt_float`; numpy
    scalars and arrays are converted. Identical inputs give identical bytes.
    """
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_str(k)}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj)
    if isinstance(obj, str):
        return _str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _str(s):
    return json.dumps(str(s))


def write_matrix_csv(path, M):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in np.asarray(M, dtype=float):
            w.writerow([fmt_float(v) for v in row])


# -- input -----------------------------------------------------------------


def read_csv_matrix(path, what="data"):
    """Headerless numeric CSV as a 2-D float array; errors name the line."""
    rows = []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"{what} file {path}: {exc.strerror}") from None
    with fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not f.strip() for f in row):
                continue
            vals = []
            for col, field in enumerate(row, start=1):
                try:
                    v = float(field)
                except ValueError:
                    raise DataError(f"{what} file {path} line {lineno} column {col}: not a number: {field.strip()!r}") from None
                if not math.isfinite(v):
                    raise DataError(f"{what} file {path} line {lineno} column {col}: non-finite value")
                vals.append(v)
            if rows and len(vals) != len(rows[0][1]):
                raise DataError(
                    f"{what} file {path} line {lineno}: expected {len(rows[0][1])} fields, found {len(vals)}"
                )
            rows.append((lineno, vals))
    if not rows:
        raise DataError(f"{what} file {path} is empty")
    return np.array([v for _, v in rows], dtype=float)


def load_fit_inputs(args):
    """Read data and adjacency files and build the basis.

    Returns ``(stats, bs, info)`` where ``info`` holds metadata for the report.
    """
    X = read_csv_matrix(args.data, "data")
    d = X.shape[1]
    if args.matrix_obs:
        if X.shape[0] % d:
            raise DataError(f"matrix observations need a multiple of d={d} rows, found {X.shape[0]}")
        Z = X.reshape(-1, d, d)
        for i, Zi in enumerate(Z):
            if not np.allclose(Zi, Zi.T, rtol=0, atol=1e-10 * max(1.0, np.max(np.abs(Zi)))):
                raise DataError(f"matrix observation {i + 1} (data lines {i * d + 1}-{(i + 1) * d}) is not symmetric")
        Z = 0.5 * (Z + np.swapaxes(Z, 1, 2))
        if args.center:
            raise UsageError("--center applies to vector observations, not --matrix-obs")
    else:
        Y = X - X.mean(axis=0) if args.center else X
    A = None
    if args.adjacency:
        A = read_csv_matrix(args.adjacency, "adjacency")
        if A.shape != (d, d):
            raise DataError(f"adjacency is {A.shape[0]}x{A.shape[1]} but the data have d={d} variables")
        if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.max(np.abs(A)))):
            raise DataError("adjacency matrix is not symmetric")
        A = 0.5 * (A + A.T)
    order = args.order if args.order is not None else (1 if A is not None else 0)
    if order > 0 and A is None:
        raise UsageError("--order > 0 needs --adjacency")
    try:
        bs = build_basis(d=d, adjacency=A, s=order, q=args.q, penalize=args.penalize, normalize=args.normalize)
    except InvalidInputError as exc:
        raise UsageError(str(exc)) from None
    stats = build_stats(Z, bs) if args.matrix_obs else build_stats_from_observations(Y, bs)
    info = {
        "d": d,
        "n": int(stats.n),
        "s": bs.s,
        "q": bs.q,
        "p": bs.p,
        "input": "matrices" if args.matrix_obs else "observations",
        "center": bool(args.center),
        "normalize": bool(args.normalize),
        "penalize": args.penalize,
    }
    return stats, bs, info


def _q_arg(text):
    if text == "full":
        return "full"
    try:
        q = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'full' or an integer, got {text!r}") from None
    if q < 0:
        raise argparse.ArgumentTypeError("q must be non-negative")
    return q


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid value {text!r}") from None
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v

    return conv


def _lambdas_arg(text):
    try:
        vals = sorted(float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid lambda list {text!r}") from None
    if any(v < 0 or not math.isfinite(v) for v in vals) or len(set(vals)) != len(vals):
        raise argparse.ArgumentTypeError("lambdas must be distinct, finite and non-negative")
    return vals


# -- commands --------------------------------------------------------------


def build_fit_report(stats, bs, info, path, args):
    k = bs.s + 1
    coef = path.coef
    theta_sel = coef.copy()
    sigma_pre = predict_sigma(theta_sel, bs)
    t_given = theta_sel.copy()
    t_given[k:] = 0.0
    sigma_A = predict_sigma(t_given, bs)
    sigma_R = sigma_pre - sigma_A
    meta = dict(info)
    meta.update(
        nlambda=int(path.lambdas.size),
        delta=args.delta,
        tol=args.tol,
        pd_epsilon=args.pd_epsilon,
        lambda_source="user" if args.lam else "grid",
        scales=None if bs.scales is None else list(bs.scales),
    )
    report = {
        "format": REPORT_FORMAT,
        "version": REPORT_VERSION,
        "metadata": meta,
        "lambda_max": lambda_max(stats, bs.penalized) if bs.penalized.any() else 0.0,
        "path": {
            "lambda": path.lambdas,
            "risk": path.risks,
            "objective": path.objectives,
            "aic": path.aics,
            "active_size": path.active_sizes,
            "n_iter": path.n_iters,
            "kkt_worst": path.kkt_worst,
            "active": [np.flatnonzero(c).tolist() for c in path.coefs],
            "coef": path.coefs,
        },
        "selected": {
            "index": path.selected,
            "lambda": path.lambda_opt,
            "risk": float(path.risks[path.selected]),
            "aic": float(path.aics[path.selected]),
            "active": np.flatnonzero(coef).tolist(),
        },
        "coef": {
            "theta": coef,
            "intercept": float(coef[0]),
            "alpha": coef[1:k],
            "beta": coef[k:],
        },
        "pd_correction": {
            "applied": path.pd_corrected,
            "omega": path.omega,
            "epsilon": args.pd_epsilon,
            "min_eigenvalue_before": min_eigenvalue(sigma_pre),
        },
        "sigma_hat": path.sigma_hat,
    }
    if args.split:
        report["sigma_A"] = sigma_A
        report["sigma_R"] = sigma_R
    if args.nu is not None:
        inp = TheoryInputs(
            n=info["n"],
            d=info["d"],
            nu=args.nu,
            u_p=bs.u_p,
            M1=float(np.sqrt(np.max(bs.sq_norms))),
            sigma_Wn=args.sigma_w,
            sigma_eps_n=args.sigma_eps,
            b=args.subexp_b,
            theta_l1=float(np.sum(np.abs(coef))),
            p=bs.p,
        )
        block = theory_report(inp)
        block["inputs"] = {
            "nu": inp.nu, "u_p": inp.u_p, "M1": inp.M1, "sigma_Wn": inp.sigma_Wn,
            "sigma_eps_n": inp.sigma_eps_n, "b": inp.b, "theta_l1_plugin": inp.theta_l1,
        }
        report["theory"] = block
    return report, sigma_A, sigma_R


def cmd_fit(args, out):
    stats, bs, info = load_fit_inputs(args)
    lambdas = np.array(args.lam) if args.lam else None
    path = fit_lcsm(
        stats, bs, delta=args.delta, m=args.nlambda, lambdas=lambdas, tol=args.tol,
        max_iter=args.max_iter, pd_eps=args.pd_epsilon,
    )
    report, sigma_A, sigma_R = build_fit_report(stats, bs, info, path, args)
    text = dumps(report) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        out.write(text)
    if args.matrix_prefix:
        write_matrix_csv(f"{args.matrix_prefix}sigma_hat.csv", path.sigma_hat)
        write_matrix_csv(f"{args.matrix_prefix}sigma_A.csv", sigma_A)
        write_matrix_csv(f"{args.matrix_prefix}sigma_R.csv", sigma_R)
    return EXIT_OK


def format_summary(result, timing=True):
    cfg = result.config
    s = result.summary()
    lines = [
        f"type={cfg.adj_type} d={cfg.d} s={cfg.s} n={cfg.n} reps={cfg.reps} seed={cfg.seed}",
        f"{'metric':<10} {'LCSM':>22} {'LCM':>22}",
    ]
    for metric in ("fe", "mse"):
        a, b = s[f"{metric}_lcsm"], s[f"{metric}_lcm"]
        lines.append(f"{metric.upper():<10} {a[0]:>12.4f} ({a[1]:.4f}) {b[0]:>12.4f} ({b[1]:.4f})")
    if timing:
        t = s["runtime_s"]
        lines.append(f"{'time (s)':<10} {t[0]:>12.4f} ({t[1]:.4f})")
    lines.append(
        f"ok={s['n_ok']} failed={s['n_failed']} pd_corrected={s['n_pd_corrected']} nonpd_truth={s['n_nonpd_truth']}"
    )
    for rep, msg in result.failures:
        lines.append(f"failed rep {rep}: {msg}")
    return "\n".join(lines) + "\n"


def cmd_simulate(args, out):
    hubs = None
    if args.hubs:
        parts = [int(h) for h in args.hubs.split(",")]
        hubs = parts[0] if args.type == 1 else tuple(parts)
        if args.type == 2 and len(parts) != 2:
            raise UsageError("--hubs for type 2 needs two comma-separated counts")
    try:
        cfg = SimConfig(
            adj_type=args.type, d=args.d, n=args.n, s=args.s, hubs=hubs, reps=args.reps, seed=args.seed,
            sigma_e2=args.sigma_e2, delta=args.delta, m=args.nlambda, tol=args.tol, penalize=args.penalize,
            pd_eps=args.pd_epsilon, fixed_adjacency=args.fixed_adjacency,
        )
    except InvalidInputError as exc:
        raise UsageError(str(exc)) from None
    result = run_replications(cfg, threads=args.threads)
    text = write_csv(result, timing=not args.no_timing)
    summary = format_summary(result, timing=not args.no_timing)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
        out.write(summary)
    else:
        out.write(text)
        sys.stderr.write(summary)
    if not result.reps:
        raise NonConvergenceError(f"all {cfg.reps} replications failed; first: {result.failures[0][1]}")
    return EXIT_OK


def cmd_basis(args, out):
    A = None
    d = args.d
    if args.adjacency:
        A = read_csv_matrix(args.adjacency, "adjacency")
        if A.shape[0] != A.shape[1]:
            raise DataError(f"adjacency must be square, found {A.shape[0]}x{A.shape[1]}")
        if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.max(np.abs(A)))):
            raise DataError("adjacency matrix is not symmetric")
        if d is not None and d != A.shape[0]:
            raise UsageError(f"--d {d} disagrees with the {A.shape[0]}x{A.shape[0]} adjacency")
        d = A.shape[0]
    if d is None:
        raise UsageError("give --d or --adjacency")
    order = args.order if args.order is not None else (1 if A is not None else 0)
    if order > 0 and A is None:
        raise UsageError("--order > 0 needs --adjacency")
    given = [np.eye(d)] + ([np.linalg.matrix_power(A, j) for j in range(1, order + 1)] if order else [])
    indep = check_linear_independence(given)
    if not indep:
        raise DependencyError(
            f"given basis is linearly dependent: A^{indep.index} lies in the span of the lower powers "
            f"and I (min Gram eigenvalue {indep.min_eig:.3e})",
            index=indep.index,
        )
    try:
        bs = build_basis(d=d, adjacency=A, s=order, q=args.q, normalize=args.normalize)
    except InvalidInputError as exc:
        raise UsageError(str(exc)) from None
    res = bs.orthogonality_residuals()
    report = {
        "d": d,
        "s": bs.s,
        "q": bs.q,
        "p": bs.p,
        "u_p": bs.u_p,
        "normalize": bool(args.normalize),
        "independence": {"ok": bool(indep.ok), "min_gram_eigenvalue": indep.min_eig, "max_gram_eigenvalue": indep.max_eig},
        "residuals": {"orthonormality": res["orthonormality"], "cross": res["cross"]},
        "sq_norms": bs.sq_norms,
    }
    text = dumps(report) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        out.write(text)
    return EXIT_OK


# -- parser ----------------------------------------------------------------


def _add_solver_flags(p):
    p.add_argument("--nlambda", type=_positive(int), default=100, help="grid size (default 100)")
    p.add_argument("--delta", type=_positive(float), default=1e-4, help="smallest lambda as a fraction of lambda_max")
    p.add_argument("--tol", type=_positive(float), default=1e-6, help="coordinate-descent step tolerance")
    p.add_argument("--pd-epsilon", type=_positive(float), default=1e-6, help="eigenvalue floor of the PD correction")
    pen = p.add_mutually_exclusive_group()
    pen.add_argument("--penalize", choices=["default", "remainder-only", "all"], default="default")
    pen.add_argument("--penalize-all", dest="penalize", action="store_const", const="all", help="same as --penalize all")


def make_parser():
    parser = _Parser(prog="lcsm", description="Penalized covariance regression on a network basis.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", help="fit the penalized path and select by AIC")
    f.add_argument("--data", required=True, help="headerless CSV, rows are observations")
    f.add_argument("--adjacency", help="d x d CSV adjacency (weights allowed)")
    f.add_argument("--order", type=int, help="number of adjacency powers s (default 1 with --adjacency)")
    f.add_argument("--q", type=_q_arg, default="full", help="remainder size or 'full'")
    f.add_argument("--matrix-obs", action="store_true", help="data holds n stacked d x d matrices")
    f.add_argument("--center", action="store_true", help="subtract column means first")
    f.add_argument("--normalize", action="store_true", help="scale every basis matrix to unit Frobenius norm")
    f.add_argument("--lambda", dest="lam", type=_lambdas_arg, help="comma-separated lambdas instead of the grid")
    f.add_argument("--max-iter", type=_positive(int), default=10_000)
    f.add_argument("--out", help="report path (default stdout)")
    f.add_argument("--matrix-prefix", help="also write <prefix>sigma_hat.csv, sigma_A.csv, sigma_R.csv")
    f.add_argument("--split", action="store_true", help="include the given and remainder parts in the report")
    f.add_argument("--nu", type=float, help="add the theory block at confidence 1 - nu")
    f.add_argument("--sigma-w", type=float, default=0.0, help="sub-Gaussian noise scale for the theory block")
    f.add_argument("--sigma-eps", type=float, default=0.0, help="sub-exponential noise scale for the theory block")
    f.add_argument("--subexp-b", type=float, default=0.0, help="Bernstein parameter for the theory block")
    _add_solver_flags(f)
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("simulate", help="Monte-Carlo comparison against the adjacency-only fit")
    s.add_argument("--type", type=int, choices=[1, 2, 3], required=True)
    s.add_argument("--d", type=_positive(int), required=True)
    s.add_argument("--s", type=_positive(int), default=2)
    s.add_argument("--n", type=_positive(int), default=50)
    s.add_argument("--reps", type=_positive(int), default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--threads", type=_positive(int), default=1)
    s.add_argument("--hubs", help="hub count (type 1) or 'h1,h2' (type 2)")
    s.add_argument("--sigma-e2", type=_positive(float), default=1.0)
    s.add_argument("--fixed-adjacency", action="store_true", help="draw one adjacency for all replications")
    s.add_argument("--no-timing", action="store_true", help="leave runtime_s empty so output is reproducible")
    s.add_argument("--out", help="CSV path (default stdout, summary then goes to stderr)")
    _add_solver_flags(s)
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("basis", help="build the basis and report diagnostics")
    b.add_argument("--d", type=_positive(int))
    b.add_argument("--adjacency")
    b.add_argument("--order", type=int)
    b.add_argument("--q", type=_q_arg, default="full")
    b.add_argument("--normalize", action="store_true")
    b.add_argument("--out")
    b.set_defaults(func=cmd_basis)
    return parser


def _fail(kind, code, msg, err):
    msg = " ".join(str(msg).split())
    err.write(f"lcsm: error[{kind}]: {msg}\n")
    return code


def main(argv=None, out=None, err=None):
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        args = make_parser().parse_args(argv)
        if getattr(args, "order", None) is not None and args.order < 0:
            raise UsageError("--order must be non-negative")
        return args.func(args, out)
    except UsageError as exc:
        return _fail("usage", EXIT_USAGE, exc, err)
    except (DataError, DegenerateDataError) as exc:
        return _fail("data", EXIT_DATA, exc, err)
    except (DependencyError, NonConvergenceError) as exc:
        return _fail("numeric", EXIT_NUMERIC, f"{type(exc).__name__}: {exc}", err)
    except InvalidInputError as exc:
        return _fail("data", EXIT_DATA, exc, err)
    except LCSMError as exc:
        return _fail("numeric", EXIT_NUMERIC, exc, err)
    except OSError as exc:
        return _fail("data", EXIT_DATA, exc, err)


if __name__ == "__main__":
    sys.exit(main())
