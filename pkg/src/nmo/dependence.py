"""Dependence measures: Kendall's tau, Spearman's rho, tail dependence, RCSD.

Population values for the negative sign are computed on the survival copula

    C(u, v) = u^(1-a) v^(1-b) max(u^a + v^b - 1, 0),  a = alpha, b = beta,

whose absolutely continuous part lives on ``v >= (1 - u^a)^(1/b)``. Both
integrals below are taken over that region only, where the integrand is
smooth:

* rho = 12 * int C - 3.
* tau = 4 E[C(U, V)] - 1. The survival function vanishes on the singular
  curve, so the expectation only sees the continuous part:
  tau = 4 * int C c - 1 with c the copula density.

Monte Carlo routes (sampler + closed-form survival) are independent checks
of the same quantities and the only route for the positive sign.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .data import Dataset
from .errors import DomainError, IllConditionedError
from .model import (BnmoParams, DepSign, joint_survival, log_mixed_derivative,
                    marginal_survival, support_excess)
from .numerics import QuadratureConfig, integrate_2d
from .sampler import make_rng, sample_arrays

DEFAULT_DRAWS = 1_000_000
CHUNK = 100_000


@dataclass(frozen=True)
class MeasureEstimate:
    value: float
    standard_error: float
    method: str  # "quadrature" | "monte_carlo" | "empirical"

    def __float__(self):
        return self.value


def _curve_lower(alpha, beta):
    def v0(u):
        if u <= 0.0:
            return 1.0
        w = -math.expm1(alpha * math.log(u))
        return w ** (1.0 / beta) if w > 0 else 0.0
    return v0


def _copula(alpha, beta):
    def c(u, v):
        return u ** (1 - alpha) * v ** (1 - beta) * (u ** alpha + v ** beta - 1.0)
    return c


def _copula_density(alpha, beta):
    def d(u, v):
        ua, vb = u ** -alpha, v ** -beta
        return (1 - beta) * vb + (1 - alpha) * ua - (1 - alpha) * (1 - beta) * ua * vb
    return d


def _mc_mean(statistic, p: BnmoParams, sign, n_draws, seed, workers):
    """Mean and standard error of ``statistic(r, s)`` over ``n_draws`` samples.

    Draws are split into fixed chunks, chunk ``k`` using stream ``k``, so the
    result does not depend on ``workers``.
    """
    if n_draws < 2:
        raise DomainError("n_draws must be >= 2")
    sizes = [CHUNK] * (n_draws // CHUNK)
    if n_draws % CHUNK:
        sizes.append(n_draws % CHUNK)

    def run(k):
        r, s, _ = sample_arrays(p, sign, sizes[k], make_rng(seed, k))
        x = statistic(r, s)
        return float(np.sum(x)), float(np.sum(x * x))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(run, range(len(sizes))))
    else:
        parts = [run(k) for k in range(len(sizes))]
    total = math.fsum(a for a, _ in parts)
    total_sq = math.fsum(b for _, b in parts)
    mean = total / n_draws
    var = max(total_sq / n_draws - mean * mean, 0.0) * n_draws / (n_draws - 1)
    return mean, math.sqrt(var / n_draws)


def spearman_rho(p: BnmoParams, cfg: QuadratureConfig | None = None, method: str = "quadrature",
                 n_draws: int = DEFAULT_DRAWS, seed: int = 0, workers: int = 1,
                 sign=DepSign.NEGATIVE) -> MeasureEstimate:
    sign = DepSign.parse(sign)
    if method == "quadrature":
        if sign is not DepSign.NEGATIVE:
            raise DomainError("quadrature route is implemented for the negative sign only")
        cfg = cfg or QuadratureConfig(abs_tol=1e-11, rel_tol=1e-9)
        a, b = p.alpha, p.beta
        integral = integrate_2d(_copula(a, b), cfg, v_lo=_curve_lower(a, b))
        return MeasureEstimate(12.0 * integral - 3.0, 0.0, "quadrature")
    if method == "monte_carlo":
        def stat(r, s):
            return marginal_survival(p, "first", r) * marginal_survival(p, "second", s)
        mean, se = _mc_mean(stat, p, sign, n_draws, seed, workers)
        return MeasureEstimate(12.0 * mean - 3.0, 12.0 * se, "monte_carlo")
    raise DomainError(f"unknown method {method!r}")


def kendall_tau(p: BnmoParams, sign=DepSign.NEGATIVE, cfg: QuadratureConfig | None = None,
                method: str = "monte_carlo", n_draws: int = DEFAULT_DRAWS, seed: int = 0,
                workers: int = 1) -> MeasureEstimate:
    """Kendall's tau as ``4 E[F(R, S)] - 1`` with F the joint survival."""
    sign = DepSign.parse(sign)
    if method == "monte_carlo":
        mean, se = _mc_mean(lambda r, s: joint_survival(p, sign, r, s), p, sign,
                            n_draws, seed, workers)
        return MeasureEstimate(4.0 * mean - 1.0, 4.0 * se, "monte_carlo")
    if method == "quadrature":
        if sign is not DepSign.NEGATIVE:
            raise DomainError("quadrature route is implemented for the negative sign only")
        cfg = cfg or QuadratureConfig(abs_tol=1e-11, rel_tol=1e-9)
        a, b = p.alpha, p.beta
        c, dens = _copula(a, b), _copula_density(a, b)
        integral = integrate_2d(lambda u, v: c(u, v) * dens(u, v), cfg, v_lo=_curve_lower(a, b))
        return MeasureEstimate(4.0 * integral - 1.0, 0.0, "quadrature")
    raise DomainError(f"unknown method {method!r}")


def rho_tau_ratio(p: BnmoParams, cfg: QuadratureConfig | None = None,
                  tau_method: str = "quadrature", n_draws: int = DEFAULT_DRAWS,
                  seed: int = 0, workers: int = 1) -> MeasureEstimate:
    """Spearman's rho over Kendall's tau.

    Near independence tau is of order ``alpha * beta``; a Monte Carlo tau
    cannot resolve it there, hence the quadrature default.
    """
    rho = spearman_rho(p, cfg)
    tau = kendall_tau(p, DepSign.NEGATIVE, cfg, method=tau_method, n_draws=n_draws,
                      seed=seed, workers=workers)
    if abs(tau.value) <= 1e-10 + 3.0 * tau.standard_error:
        raise IllConditionedError(
            f"tau = {tau.value:.3g} (se {tau.standard_error:.2g}) is indistinguishable from 0")
    ratio = rho.value / tau.value
    se = abs(ratio) * math.hypot(rho.standard_error / rho.value if rho.value else 0.0,
                                 tau.standard_error / tau.value)
    method = "quadrature" if tau.method == "quadrature" else "monte_carlo"
    return MeasureEstimate(ratio, se, method)


def tail_dependence(p: BnmoParams, t: float) -> tuple[float, float]:
    """Finite-level lower and upper tail dependence at probability level ``t``.

    lower(t) = P(R <= F_R^-1(t) | S <= F_S^-1(t)),
    upper(t) = P(R > F_R^-1(t) | S > F_S^-1(t)); both tend to 0.
    """
    if not 0 < t < 1:
        raise DomainError("t must lie in (0, 1)")
    a, b = p.alpha, p.beta
    ly = math.log1p(-t)  # log y, y = 1 - t
    y = 1.0 - t
    active = math.exp(a * ly) + math.exp(b * ly) > 1.0
    if active:
        # 1 - 2y + y^(2-a-b) (y^a + y^b - 1), grouped to cancel the O(t) terms
        num = (y * math.expm1((1 - b) * ly) + y * math.expm1((1 - a) * ly)
               - math.expm1((2 - a - b) * ly))
        upper = math.exp((1 - a - b) * ly) * (math.exp(a * ly) + math.exp(b * ly) - 1.0)
    else:
        num = 1.0 - 2.0 * y
        upper = 0.0
    return num / t, upper


def empirical_measures(data: Dataset) -> tuple[float, float]:
    """Sample Kendall tau-b and Spearman rho (midranks for ties)."""
    if data.m < 2:
        raise DomainError("need at least two rows")
    if np.ptp(data.r) == 0 or np.ptp(data.s) == 0:
        raise DomainError("a column is constant; rank correlation is undefined")
    tau = stats.kendalltau(data.r, data.s).statistic
    rho = stats.spearmanr(data.r, data.s).statistic
    return float(tau), float(rho)


@dataclass
class RcsdVerdict:
    holds: bool
    max_value: float
    values: np.ndarray
    n_excluded: int


def rcsd_diagnostic(p: BnmoParams, grid, tol: float = 1e-9) -> RcsdVerdict:
    """Mixed log-derivative of the joint survival on the interior grid points.

    Right-corner-set-decreasing dependence holds where every value is <= 0.
    Points on or outside the singular curve are skipped and counted.
    """
    pts = np.asarray(list(grid), float).reshape(-1, 2)
    ex = support_excess(p.theta12, pts[:, 0], pts[:, 1])
    keep = ex > tol
    vals = np.atleast_1d(log_mixed_derivative(p.theta12, pts[keep, 0], pts[keep, 1]))
    mx = float(vals.max()) if vals.size else math.nan
    return RcsdVerdict(bool(np.all(vals <= 0)), mx, vals, int((~keep).sum()))
