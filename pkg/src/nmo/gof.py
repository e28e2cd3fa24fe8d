"""Goodness of fit and descriptive summaries for a fitted bivariate model.

The marginal test is the one-sample Kolmogorov-Smirnov test against an
exponential law, with the asymptotic Kolmogorov p-value
``Q(sqrt(m) D) = 2 sum_k (-1)^(k-1) exp(-2 k^2 m D^2)``, or a parametric
bootstrap when the rate was estimated from the same column.

The joint test uses ``sup_i |F_m(r_i, s_i) - F(r_i, s_i)|`` over the
observed points, where ``F_m`` is the empirical joint CDF. With a singular
component there is no distribution-free reference law, so the p-value
comes from a parametric bootstrap: resample from the fit, refit, recompute.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import special

from .data import Dataset
from .dependence import empirical_measures
from .errors import DomainError
from .estimation import FitConfig, FitResult, fit_mle, resolve_workers
from .model import BnmoParams, DepSign, joint_cdf
from .sampler import make_rng, sample_dataset

MIN_BOOTSTRAP = 200
MAX_FAILED_FRACTION = 0.2


@dataclass
class KsResult:
    statistic: float
    p_value: float
    method: str  # "asymptotic" | "bootstrap"


def ks_statistic_exponential(x: np.ndarray, rate: float) -> float:
    x = np.sort(np.asarray(x, float))
    m = x.size
    cdf = -np.expm1(-rate * x)
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - cdf), np.max(cdf - (i - 1) / m)))


def ks_marginal(x, rate: float, bootstrap: int = 0, seed: int = 0) -> KsResult:
    """One-sample KS test of ``x`` against Exp(``rate``).

    ``bootstrap > 0`` treats ``rate`` as estimated from ``x`` by 1/mean and
    calibrates the statistic by re-estimating on each simulated sample.
    """
    x = np.asarray(x, float).ravel()
    if not rate > 0 or not math.isfinite(rate):
        raise DomainError("rate must be positive and finite")
    if x.size < 5:
        raise DomainError("the KS test needs at least 5 observations")
    d = ks_statistic_exponential(x, rate)
    if bootstrap <= 0:
        return KsResult(d, float(special.kolmogorov(math.sqrt(x.size) * d)), "asymptotic")
    rng = make_rng(seed, 0)
    sims = rng.exponential(1.0 / rate, (bootstrap, x.size))
    exceed = 0
    for row in sims:
        exceed += ks_statistic_exponential(row, 1.0 / row.mean()) >= d
    return KsResult(d, (exceed + 1) / (bootstrap + 1), "bootstrap")


def joint_ks_statistic(data: Dataset, p: BnmoParams, sign=DepSign.NEGATIVE) -> float:
    r, s = data.r, data.s
    ecdf = ((r[None, :] <= r[:, None]) & (s[None, :] <= s[:, None])).mean(axis=1)
    model = joint_cdf(p, sign, r, s)
    return float(np.max(np.abs(ecdf - model)))


@dataclass
class JointGofResult:
    statistic: float
    p_value: float
    n_bootstrap: int
    n_failed: int
    refit: bool


def _bootstrap_replicate(args):
    p, m, flagged, seed, stream, refit, cfg = args
    sim = sample_dataset(p, DepSign.NEGATIVE, m, make_rng(seed, stream))
    if not flagged:
        sim = sim.without_flags()
    q = p
    if refit:
        try:
            res = fit_mle(sim, cfg)
        except Exception:  # a failed refit is counted, not fatal
            return None
        if res.theta_hat is None or not math.isfinite(res.log_likelihood):
            return None
        q = res.theta_hat
    return joint_ks_statistic(sim, q)


def gof_joint_bootstrap(data: Dataset, fitted: FitResult, B: int = MIN_BOOTSTRAP, seed: int = 0,
                        refit: bool = True, config: FitConfig | None = None,
                        workers: int | None = None) -> JointGofResult:
    """Parametric-bootstrap KS-type test of the joint fit.

    The p-value is NaN when more than 20% of the bootstrap refits fail.
    """
    if B < MIN_BOOTSTRAP:
        raise DomainError(f"B must be at least {MIN_BOOTSTRAP}, got {B}")
    if fitted.theta_hat is None:
        raise DomainError("the fit has no parameter estimate")
    p = fitted.theta_hat
    d = joint_ks_statistic(data, p)
    cfg = config or FitConfig(n_starts=1, grid_size=8, form=fitted.form)
    # stream 0 is left to the caller's own fit
    jobs = [(p, data.m, data.has_flags, seed, b + 1, refit, cfg) for b in range(B)]
    workers = resolve_workers(workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            stats = list(ex.map(_bootstrap_replicate, jobs, chunksize=4))
    else:
        stats = [_bootstrap_replicate(j) for j in jobs]
    ok = np.array([x for x in stats if x is not None])
    n_failed = B - ok.size
    if n_failed > MAX_FAILED_FRACTION * B:
        pval = math.nan
    else:
        pval = float((np.sum(ok >= d) + 1) / (ok.size + 1))
    return JointGofResult(d, pval, B, n_failed, refit)


def describe_column(x) -> dict:
    """Summary matching a classic descriptive table (quartiles by linear interpolation)."""
    x = np.asarray(x, float)
    q1, med, q3 = np.percentile(x, [25, 50, 75])
    return {
        "min": float(x.min()),
        "q1": float(q1),
        "median": float(med),
        "mean": float(x.mean()),
        "q3": float(q3),
        "max": float(x.max()),
        "sd": float(x.std(ddof=1)) if x.size > 1 else math.nan,
    }


def descriptive_stats(data: Dataset) -> dict:
    tau, rho = empirical_measures(data)
    return {
        data.names[0]: describe_column(data.r),
        data.names[1]: describe_column(data.s),
        "spearman_rho": rho,
        "kendall_tau": tau,
        "rho_tau_ratio": rho / tau if tau != 0 else math.nan,
    }


def exponential_fit(x) -> dict:
    """Exponential MLE for one column with its log-likelihood and KS p-value."""
    x = np.asarray(x, float)
    rate = 1.0 / x.mean()
    ll = x.size * math.log(rate) - rate * x.sum()
    ks = ks_marginal(x, rate)
    return {"rate": rate, "log_likelihood": ll, "ks_statistic": ks.statistic,
            "ks_p_value": ks.p_value}


def marginal_report(data: Dataset, fitted: FitResult | None = None) -> dict:
    """Per-column exponential fits and, given a joint fit, KS tests against
    its implied marginal rates ``theta1 + theta12`` and ``theta2 + theta12``."""
    out = {}
    for name, col, which in ((data.names[0], data.r, 0), (data.names[1], data.s, 1)):
        entry = {"separate_fit": exponential_fit(col)}
        if fitted is not None and fitted.theta_hat is not None:
            rate = fitted.theta_hat.rate_r if which == 0 else fitted.theta_hat.rate_s
            ks = ks_marginal(col, rate)
            entry["joint_implied"] = {"rate": rate, "ks_statistic": ks.statistic,
                                      "ks_p_value": ks.p_value}
        out[name] = entry
    return out
