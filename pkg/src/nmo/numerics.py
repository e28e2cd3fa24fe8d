"""Numerical kernels: log-beta, adaptive quadrature, bracketed roots and a
Nelder-Mead simplex minimizer.

Quadrature and root finding delegate to QUADPACK / Brent via scipy; the
wrappers add the error contract the rest of the package relies on (a
``ConvergenceError`` carrying the best estimate instead of a warning).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import ConvergenceError, DomainError, EvaluationError

__all__ = [
    "QuadratureConfig",
    "SimplexConfig",
    "SimplexResult",
    "log_beta",
    "integrate_1d",
    "integrate_2d",
    "root_decreasing",
    "minimize_simplex",
]


@dataclass(frozen=True)
class QuadratureConfig:
    abs_tol: float = 1e-9
    rel_tol: float = 1e-7
    max_subdivisions: int = 2000

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError("quadrature tolerances must be strictly positive")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be >= 1")


@dataclass(frozen=True)
class SimplexConfig:
    max_iterations: int = 4000
    x_tol: float = 1e-10
    f_tol: float = 1e-12
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    initial_step: float = 0.1

    def __post_init__(self):
        if self.max_iterations < 1:
            raise DomainError("max_iterations must be >= 1")
        if not (self.x_tol > 0 and self.f_tol > 0):
            raise DomainError("simplex tolerances must be strictly positive")
        if not self.reflection > 0:
            raise DomainError("reflection coefficient must be > 0")
        if not self.expansion > 1 or not self.expansion > self.reflection:
            raise DomainError("expansion coefficient must exceed 1 and the reflection coefficient")
        if not 0 < self.contraction < 1:
            raise DomainError("contraction coefficient must lie in (0, 1)")
        if not 0 < self.shrink < 1:
            raise DomainError("shrink coefficient must lie in (0, 1)")
        if not self.initial_step > 0:
            raise DomainError("initial_step must be > 0")


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    converged: bool
    n_iter: int
    n_eval: int

    def __iter__(self):
        # unpacks as (point, value, converged)
        return iter((self.x, self.fun, self.converged))


def log_beta(a: float, b: float) -> float:
    """Natural log of the complete beta function B(a, b)."""
    if not (a > 0 and b > 0) or not (math.isfinite(a) and math.isfinite(b)):
        raise DomainError(f"log_beta requires positive finite arguments, got ({a}, {b})")
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def integrate_1d(f: Callable[[float], float], lo: float, hi: float,
                 cfg: QuadratureConfig | None = None) -> float:
    """Adaptive Gauss-Kronrod integral of ``f`` over ``[lo, hi]``.

    ``hi`` may be ``+inf``; QUADPACK then maps the half line onto (0, 1]
    before subdividing.
    """
    cfg = cfg or QuadratureConfig()
    if not lo < hi:
        raise DomainError(f"integrate_1d requires lo < hi, got [{lo}, {hi}]")
    if not math.isfinite(lo):
        raise DomainError("lower limit must be finite")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, err, _info, *warning = integrate.quad(
            f, lo, hi, epsabs=cfg.abs_tol, epsrel=cfg.rel_tol,
            limit=cfg.max_subdivisions, full_output=1,
        )
    if not np.isfinite(value):
        raise ConvergenceError("integrand produced a non-finite estimate", estimate=value)
    # QUADPACK appends a message only when ier > 0; roundoff-limited results
    # whose error estimate still meets the request are accepted.
    if warning and err > max(cfg.abs_tol, cfg.rel_tol * abs(value)):
        raise ConvergenceError(
            f"quadrature did not converge (error estimate {err:.3g})", estimate=value)
    return float(value)


def integrate_2d(f: Callable[[float, float], float],
                 cfg: QuadratureConfig | None = None,
                 v_lo: Callable[[float], float] | None = None,
                 v_hi: Callable[[float], float] | None = None) -> float:
    """Integral of ``f(u, v)`` over the unit square by nested adaptive quadrature.

    ``v_lo`` / ``v_hi`` optionally restrict the inner range to
    ``[v_lo(u), v_hi(u)]`` so that integrands with a kink along a curve
    can be integrated piecewise-smoothly.
    """
    cfg = cfg or QuadratureConfig()

    def inner(u):
        lo = 0.0 if v_lo is None else float(v_lo(u))
        hi = 1.0 if v_hi is None else float(v_hi(u))
        if hi <= lo:
            return 0.0
        return integrate_1d(lambda v: f(u, v), lo, hi, cfg)

    return integrate_1d(inner, 0.0, 1.0, cfg)


def root_decreasing(f: Callable[[float], float], lo: float, hi: float,
                    tol: float = 1e-12) -> float:
    """Root of a strictly decreasing function bracketed by ``f(lo) > 0 > f(hi)``."""
    flo, fhi = f(lo), f(hi)
    if not (flo > 0 > fhi):
        raise DomainError(
            f"root_decreasing needs f(lo) > 0 > f(hi); got f({lo})={flo}, f({hi})={fhi}")
    return float(optimize.brentq(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps,
                                 maxiter=500))


def minimize_simplex(f: Callable[[np.ndarray], float], start: Sequence[float],
                     cfg: SimplexConfig | None = None) -> SimplexResult:
    """Nelder-Mead downhill simplex.

    ``+inf`` at trial points is allowed and simply loses every comparison,
    which lets callers encode hard constraints. NaN anywhere, or a
    non-finite value at ``start``, raises ``EvaluationError``.
    """
    cfg = cfg or SimplexConfig()
    x0 = np.atleast_1d(np.asarray(start, dtype=float)).copy()
    k = x0.size
    n_eval = 0

    def call(x):
        nonlocal n_eval
        n_eval += 1
        val = float(f(x))
        if math.isnan(val):
            raise EvaluationError(f"objective is NaN at {x.tolist()}", point=x.copy())
        return val

    f0 = call(x0)
    if not math.isfinite(f0):
        raise EvaluationError(f"objective is not finite at the start point {x0.tolist()}",
                              point=x0.copy())

    simplex = np.empty((k + 1, k))
    simplex[0] = x0
    for i in range(k):
        y = x0.copy()
        y[i] = y[i] + cfg.initial_step * (abs(y[i]) if y[i] != 0 else 1.0)
        simplex[i + 1] = y
    fvals = np.array([f0] + [call(simplex[i + 1]) for i in range(k)])

    rho, chi, gamma, sigma = cfg.reflection, cfg.expansion, cfg.contraction, cfg.shrink
    converged = False
    it = 0
    while it < cfg.max_iterations:
        order = np.argsort(fvals, kind="stable")
        simplex, fvals = simplex[order], fvals[order]
        if (np.max(np.abs(simplex[1:] - simplex[0])) <= cfg.x_tol
                and np.max(np.abs(fvals[1:] - fvals[0])) <= cfg.f_tol):
            converged = True
            break
        it += 1
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + rho * (centroid - worst)
        fr = call(xr)
        if fr < fvals[0]:
            xe = centroid + rho * chi * (centroid - worst)
            fe = call(xe)
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-1]:
            xc = centroid + gamma * (xr - centroid)
            fc = call(xc)
            if fc <= fr:
                simplex[-1], fvals[-1] = xc, fc
                continue
        else:
            xc = centroid - gamma * (centroid - worst)
            fc = call(xc)
            if fc < fvals[-1]:
                simplex[-1], fvals[-1] = xc, fc
                continue
        for i in range(1, k + 1):
            simplex[i] = simplex[0] + sigma * (simplex[i] - simplex[0])
            fvals[i] = call(simplex[i])

    best = int(np.argmin(fvals))
    return SimplexResult(x=simplex[best].copy(), fun=float(fvals[best]),
                         converged=converged, n_iter=it, n_eval=n_eval)
