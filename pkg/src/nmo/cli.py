"""Command-line entry point: ``nmo <subcommand> [options]``.

Exit codes: 0 success, 2 usage error, 3 numerical non-convergence,
4 input/output failure (unreadable or malformed files included).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

import numpy as np

from .data import DataFormatError, read_dataset, write_csv, write_dataset
from .dependence import kendall_tau, spearman_rho, tail_dependence
from .errors import ConvergenceError, DomainError, IllConditionedError, NmoError
from .estimation import FitConfig, FitResult, bias_mse_study, fit_mle, resolve_workers
from .gof import MIN_BOOTSTRAP, descriptive_stats, gof_joint_bootstrap, marginal_report
from .model import BOUNDARY_TOL, BnmoParams, DepSign
from .multivariate import load_params
from .sampler import make_rng, sample_dataset, sample_mnmo
from .stress import stress_strength_index, untruncated_limit

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NONCONVERGENCE = 3
EXIT_IO = 4

MIN_FIT_ROWS = 3
RECOMMENDED_REPS = 100


class UsageError(Exception):
    pass


# -- argument types ---------------------------------------------------------

def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number")
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"{text!r} must be positive and finite")
    return v


def _nonneg_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number")
    if not (v >= 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"{text!r} must be non-negative and finite")
    return v


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer")
    if v < 1:
        raise argparse.ArgumentTypeError(f"{text!r} must be >= 1")
    return v


def _sign(text):
    try:
        return DepSign.parse(text)
    except (DomainError, ValueError):
        raise argparse.ArgumentTypeError(f"{text!r} is not a sign (use -1 or +1)")


def _int_list(text):
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a comma-separated integer list")
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("sizes must be a non-empty list of positive integers")
    return vals


def _float_list(text):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a comma-separated number list")
    return vals


def parse_grid(text: str) -> np.ndarray:
    """``start:stop:count`` (inclusive, evenly spaced) or an explicit comma list.

    Every node must lie strictly inside (0, 1).
    """
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"grid {text!r} must be start:stop:count")
        try:
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise argparse.ArgumentTypeError(f"grid {text!r} must be start:stop:count")
        if n < 1:
            raise argparse.ArgumentTypeError("grid count must be >= 1")
        nodes = np.linspace(lo, hi, n)
    else:
        nodes = np.array(_float_list(text))
    if nodes.size == 0:
        raise argparse.ArgumentTypeError("grid is empty")
    if np.any(~np.isfinite(nodes)) or np.any(nodes <= 0) or np.any(nodes >= 1):
        raise argparse.ArgumentTypeError("grid nodes must lie strictly inside (0, 1)")
    return nodes


def _columns(text):
    cols = [c.strip() for c in text.split(",")]
    if len(cols) != 2 or not all(cols):
        raise argparse.ArgumentTypeError("--columns takes two names, e.g. mercury,calcium")
    return cols


def _workers_default():
    try:
        return resolve_workers(None)
    except ValueError:
        return 1


# -- parser -------------------------------------------------------------------

def _add_theta(p, required=True):
    for name in ("theta1", "theta2", "theta12"):
        p.add_argument(f"--{name}", type=_positive_float, required=required)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nmo", description="Negatively dependent shock models.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a sample and write it as CSV")
    _add_theta(p, required=False)
    p.add_argument("--params", help="JSON parameter file for an n-dimensional model")
    p.add_argument("--sign", type=_sign, default=DepSign.NEGATIVE)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--swap-uniform", action="store_true",
                   help="give the first component the Q(1-U) quantile")
    p.add_argument("--shared-uniform", action="store_true",
                   help="experimental: one uniform for every pair (n-dimensional only)")

    p = sub.add_parser("fit", help="maximum-likelihood fit of a bivariate CSV")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", help="write the JSON result here (default: stdout)")
    p.add_argument("--columns", type=_columns)
    p.add_argument("--tol-singular", type=_nonneg_float, default=None,
                   help="boundary tolerance for unflagged rows (default 1e-9, 0 for real data)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--starts", type=_positive_int, default=3)
    p.add_argument("--form", choices=("complete", "printed"), default="complete")
    p.add_argument("--ignore-flags", action="store_true")

    for name, helptext in (("measures", "tau, rho, rho/tau and tail levels on an (alpha, beta) grid"),
                           ("stress", "P(R < S) on an (alpha, beta) grid")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--grid", type=parse_grid, help="alpha grid (start:stop:count or list)")
        p.add_argument("--grid-beta", type=parse_grid, help="beta grid (default: same as --grid)")
        p.add_argument("--fit", dest="fit_path", help="FitResult JSON; evaluates its (alpha, beta)")
        _add_theta(p, required=False)
        p.add_argument("--out", required=True)
        if name == "measures":
            p.add_argument("--tail-levels", type=_float_list, default=[0.1, 0.01, 0.001])
            p.add_argument("--tau-method", choices=("quadrature", "monte_carlo"),
                           default="quadrature")
            p.add_argument("--draws", type=_positive_int, default=10 ** 6)
            p.add_argument("--seed", type=int, default=0)
            p.add_argument("--workers", type=_positive_int, default=_workers_default())

    p = sub.add_parser("gof", help="descriptive, marginal and joint goodness-of-fit report")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--fit", dest="fit_path", help="FitResult JSON (fitted here when omitted)")
    p.add_argument("--columns", type=_columns)
    p.add_argument("--bootstrap", type=int, default=MIN_BOOTSTRAP)
    p.add_argument("--no-refit", action="store_true", help="skip refitting in the bootstrap")
    p.add_argument("--tol-singular", type=_nonneg_float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=_positive_int, default=_workers_default())
    p.add_argument("--out", help="write the JSON report here (default: stdout)")

    p = sub.add_parser("bench", help="bias/MSE table of the estimator")
    _add_theta(p, required=True)
    p.add_argument("--sign", type=_sign, default=DepSign.NEGATIVE)
    p.add_argument("--sizes", type=_int_list, default=[50, 100, 200])
    p.add_argument("--reps", type=_positive_int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=_positive_int, default=_workers_default())
    p.add_argument("--out", required=True)
    return parser


# -- helpers ------------------------------------------------------------------

def _theta_from_args(args, required=True) -> BnmoParams | None:
    vals = (args.theta1, args.theta2, args.theta12)
    if all(v is None for v in vals):
        if required:
            raise UsageError("--theta1, --theta2 and --theta12 are required")
        return None
    if any(v is None for v in vals):
        raise UsageError("give all of --theta1, --theta2 and --theta12")
    return BnmoParams(*vals)


def _read(path, columns):
    return read_dataset(path, columns)


def _emit_json(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=False) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fit_config(args, data) -> FitConfig:
    tol = args.tol_singular
    if tol is None:
        tol = BOUNDARY_TOL
    return FitConfig(n_starts=getattr(args, "starts", 3), tol=tol, seed=args.seed,
                     form=getattr(args, "form", "complete"),
                     use_flags=not getattr(args, "ignore_flags", False))


def _load_fit(path) -> FitResult:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path}: not valid JSON ({exc})")
    if "fit" in obj and isinstance(obj["fit"], dict):
        obj = obj["fit"]
    try:
        return FitResult.from_dict(obj)
    except (KeyError, TypeError) as exc:
        raise DataFormatError(f"{path}: not a fit result ({exc})")


def fit_summary(res: FitResult, names=("r", "s")) -> str:
    lines = [f"{'parameter':<10} {'estimate':>14}"]
    th = res.theta_hat
    if th is not None:
        for k, v in zip(("theta1", "theta2", "theta12"), th.as_tuple()):
            lines.append(f"{k:<10} {v:>14.6g}")
    lines += [
        f"log-likelihood ({res.form}): {res.log_likelihood:.6f}",
        f"rows: continuous m1={res.m1}, singular m2={res.m2}",
        f"theta12 upper bound: {res.theta12_upper_bound:.6g}"
        + (" (estimate on the bound)" if res.at_upper_bound else ""),
        f"converged: {res.converged}",
    ]
    if res.message:
        lines.append(f"note: {res.message}")
    return "\n".join(lines)


def _grid_nodes(args):
    if args.fit_path:
        th = _load_fit(args.fit_path).theta_hat
        return [(th.alpha, th.beta)], th.theta12
    p = _theta_from_args(args, required=False)
    if args.grid is None:
        if p is None:
            raise UsageError("give --grid, --fit, or all three rates")
        return [(p.alpha, p.beta)], p.theta12
    betas = args.grid if args.grid_beta is None else args.grid_beta
    return [(float(a), float(b)) for a in args.grid for b in betas], (p.theta12 if p else 1.0)


# -- subcommands --------------------------------------------------------------

def cmd_simulate(args) -> int:
    if args.m < 1:
        raise UsageError("--m must be >= 1")
    rng = make_rng(args.seed, 0)
    if args.params:
        if any(v is not None for v in (args.theta1, args.theta2, args.theta12)):
            raise UsageError("--params cannot be combined with --theta options")
        mp = load_params(args.params)
        data = sample_mnmo(mp, rng, args.m, shared_uniform=args.shared_uniform)
    else:
        if args.shared_uniform:
            raise UsageError("--shared-uniform applies to --params models only")
        p = _theta_from_args(args)
        data = sample_dataset(p, args.sign, args.m, rng, swap_uniform=args.swap_uniform)
    write_dataset(args.out, data)
    return EXIT_OK


def cmd_fit(args) -> int:
    data = _read(args.in_path, args.columns)
    if data.m < MIN_FIT_ROWS:
        raise UsageError(f"need at least {MIN_FIT_ROWS} rows to fit, found {data.m}")
    res = fit_mle(data, _fit_config(args, data))
    out = res.to_dict()
    out["columns"] = list(data.names)
    _emit_json(out, args.out)
    summary = fit_summary(res, data.names)
    print(summary, file=sys.stdout if args.out else sys.stderr)
    if not res.converged:
        print(f"fit did not converge: {res.message}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def cmd_measures(args) -> int:
    nodes, theta12 = _grid_nodes(args)
    levels = list(args.tail_levels)
    if not levels or any(not 0 < t < 1 for t in levels):
        raise UsageError("--tail-levels must lie strictly inside (0, 1)")
    header = ["alpha", "beta", "tau", "rho", "rho_over_tau"]
    header += [f"lambda_lower_t{t:g}" for t in levels]
    header += [f"lambda_upper_t{1 - t:g}" for t in levels]
    cols = [[] for _ in header]
    for a, b in nodes:
        p = BnmoParams.from_alpha_beta(a, b, theta12)
        rho = spearman_rho(p).value
        est = kendall_tau(p, DepSign.NEGATIVE, method=args.tau_method, n_draws=args.draws,
                          seed=args.seed, workers=args.workers)
        tau = est.value
        # same guard as rho_tau_ratio: a tau within noise of zero gives no ratio
        resolved = abs(tau) > 1e-10 + 3.0 * est.standard_error
        ratio = rho / tau if resolved else math.nan
        lower = [tail_dependence(p, t)[0] for t in levels]
        upper = [tail_dependence(p, 1 - t)[1] for t in levels]
        for c, v in zip(cols, [a, b, tau, rho, ratio] + lower + upper):
            c.append(v)
    write_csv(args.out, [np.array(c) for c in cols], header)
    return EXIT_OK


def cmd_stress(args) -> int:
    nodes, theta12 = _grid_nodes(args)
    a = np.array([n[0] for n in nodes])
    b = np.array([n[1] for n in nodes])
    idx, lim = [], []
    for x, y in nodes:
        p = BnmoParams.from_alpha_beta(x, y, theta12)
        idx.append(stress_strength_index(p))
        lim.append(untruncated_limit(p))
    write_csv(args.out, [a, b, np.array(idx), np.array(lim)],
              ["alpha", "beta", "p_r_less_s", "untruncated_limit"])
    return EXIT_OK


def gof_report(data, fitted: FitResult, bootstrap: int, seed: int, refit: bool,
               workers: int) -> dict:
    joint = gof_joint_bootstrap(data, fitted, bootstrap, seed, refit=refit, workers=workers)
    return {
        "descriptive": descriptive_stats(data),
        "marginal": marginal_report(data, fitted),
        "fit": fitted.to_dict(),
        "joint": {
            "statistic": joint.statistic,
            "p_value": None if math.isnan(joint.p_value) else joint.p_value,
            "n_bootstrap": joint.n_bootstrap,
            "n_failed": joint.n_failed,
            "refit": joint.refit,
        },
    }


def cmd_gof(args) -> int:
    if args.bootstrap < MIN_BOOTSTRAP:
        raise UsageError(f"--bootstrap must be at least {MIN_BOOTSTRAP}")
    data = _read(args.in_path, args.columns)
    if data.m < MIN_FIT_ROWS:
        raise UsageError(f"need at least {MIN_FIT_ROWS} rows, found {data.m}")
    if args.fit_path:
        fitted = _load_fit(args.fit_path)
    else:
        args.starts, args.form, args.ignore_flags = 3, "complete", False
        fitted = fit_mle(data, _fit_config(args, data))
        if fitted.theta_hat is None:
            raise ConvergenceError(fitted.message or "fit failed")
    report = gof_report(data, fitted, args.bootstrap, args.seed, not args.no_refit, args.workers)
    _emit_json(report, args.out)
    if report["joint"]["p_value"] is None:
        print("more than 20% of bootstrap refits failed; joint p-value not reported",
              file=sys.stderr)
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def cmd_bench(args) -> int:
    p = _theta_from_args(args)
    if args.reps < RECOMMENDED_REPS:
        print(f"warning: {args.reps} replications; bias/MSE need >= {RECOMMENDED_REPS} "
              "to be meaningful", file=sys.stderr)
    rows = bias_mse_study(p, args.sign, args.sizes, args.reps, seed=args.seed,
                          workers=args.workers)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["parameter", "m", "bias", "mse", "n_ok", "n_failed"])
        for r in rows:
            w.writerow([r.parameter, r.m, repr(r.bias), repr(r.mse), r.n_ok, r.n_failed])
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "measures": cmd_measures,
    "stress": cmd_stress,
    "gof": cmd_gof,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"nmo {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataFormatError as exc:
        print(f"nmo {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        where = f" ({exc.filename})" if exc.filename else ""
        print(f"nmo {args.command}: {exc.strerror or exc}{where}", file=sys.stderr)
        return EXIT_IO
    except DomainError as exc:
        print(f"nmo {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, IllConditionedError) as exc:
        print(f"nmo {args.command}: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except NmoError as exc:
        print(f"nmo {args.command}: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
