"""Bivariate shock model with an antithetic common shock.

Lifetimes are ``R = min(T1, Q(U))`` and ``S = min(T2, Q(1 - U))`` where
``T1 ~ Exp(theta1)``, ``T2 ~ Exp(theta2)`` and ``Q`` is the quantile function
of ``Exp(theta12)`` (negative dependence, ``DepSign.NEGATIVE``). With
``DepSign.POSITIVE`` both components share ``Q(U)`` and the classical
Marshall-Olkin model is recovered.

The negative-sign law is a mixture: an absolutely continuous part on the
region ``exp(-theta12 r) + exp(-theta12 s) > 1`` and a singular part on the
curve where the sum equals one. Outside the support the joint survival is
exactly zero (the event ``{T12 quantiles exceed both r and s}`` is empty).

Swapping ``U`` and ``1 - U`` gives the mirrored construction; it has the same
law because ``U`` and ``1 - U`` are equal in distribution, so only one is
implemented (see ``sampler.sample_dataset(swap_uniform=True)``).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DomainError
from .numerics import log_beta

BOUNDARY_TOL = 1e-9


class DepSign(enum.IntEnum):
    NEGATIVE = -1
    POSITIVE = 1

    @classmethod
    def parse(cls, value) -> "DepSign":
        if isinstance(value, DepSign):
            return value
        if isinstance(value, str):
            key = value.strip().lower()
            if key in ("-1", "neg", "negative", "-"):
                return cls.NEGATIVE
            if key in ("1", "+1", "pos", "positive", "+"):
                return cls.POSITIVE
        elif value in (-1, 1):
            return cls(int(value))
        raise DomainError(f"dependence sign must be +1 or -1, got {value!r}")


@dataclass(frozen=True)
class BnmoParams:
    """Rates of the two individual shocks and of the common shock."""

    theta1: float
    theta2: float
    theta12: float

    def __post_init__(self):
        for name in ("theta1", "theta2", "theta12"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float, np.floating, np.integer))
                    and math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be a positive finite rate, got {v!r}")
            object.__setattr__(self, name, float(v))

    @property
    def alpha(self) -> float:
        return self.theta12 / (self.theta1 + self.theta12)

    @property
    def beta(self) -> float:
        return self.theta12 / (self.theta2 + self.theta12)

    @property
    def rate_r(self) -> float:
        """Rate of the exponential marginal of R."""
        return self.theta1 + self.theta12

    @property
    def rate_s(self) -> float:
        return self.theta2 + self.theta12

    @classmethod
    def from_alpha_beta(cls, alpha: float, beta: float, theta12: float = 1.0) -> "BnmoParams":
        if not (0 < alpha < 1 and 0 < beta < 1):
            raise DomainError(f"alpha and beta must lie in (0, 1), got ({alpha}, {beta})")
        return cls(theta12 * (1 - alpha) / alpha, theta12 * (1 - beta) / beta, theta12)

    def swapped(self) -> "BnmoParams":
        """Parameters of (S, R)."""
        return BnmoParams(self.theta2, self.theta1, self.theta12)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.theta1, self.theta2, self.theta12)


@dataclass(frozen=True)
class SupportVerdict:
    region: str  # "interior" | "boundary" | "exterior"
    sum_value: float


def _nonneg(name, x):
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)):
        raise DomainError(f"{name} contains NaN")
    if np.any(x < 0):
        raise DomainError(f"{name} must be non-negative")
    return x


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def support_excess(theta12: float, r, s):
    """``exp(-theta12 r) + exp(-theta12 s) - 1`` computed without cancellation."""
    return np.exp(-theta12 * np.asarray(s, float)) + np.expm1(-theta12 * np.asarray(r, float))


def classify_support(p: BnmoParams, r: float, s: float, tol: float = BOUNDARY_TOL) -> SupportVerdict:
    if r < 0 or s < 0:
        raise DomainError(f"coordinates must be non-negative, got ({r}, {s})")
    if not tol > 0:
        raise DomainError("tol must be > 0")
    excess = float(support_excess(p.theta12, r, s))
    v = 1.0 + excess
    if abs(excess) <= tol:
        region = "boundary"
    elif excess > tol:
        region = "interior"
    else:
        region = "exterior"
    return SupportVerdict(region, v)


def log_joint_survival(p: BnmoParams, sign, r, s):
    """Log of P(R > r, S > s); ``-inf`` outside the support."""
    sign = DepSign.parse(sign)
    r = _nonneg("r", r)
    s = _nonneg("s", s)
    base = -p.theta1 * r - p.theta2 * s
    if sign is DepSign.POSITIVE:
        return _scalar_or_array(base - p.theta12 * np.maximum(r, s))
    excess = support_excess(p.theta12, r, s)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(excess > 0, base + np.log(np.where(excess > 0, excess, 1.0)), -np.inf)
    return _scalar_or_array(out)


def joint_survival(p: BnmoParams, sign, r, s):
    """P(R > r, S > s). Exactly zero on the exterior of the support."""
    return _scalar_or_array(np.exp(log_joint_survival(p, sign, r, s)))


def marginal_survival(p: BnmoParams, which: str, t):
    t = _nonneg("t", t)
    if which in ("first", "r", 1):
        rate = p.rate_r
    elif which in ("second", "s", 2):
        rate = p.rate_s
    else:
        raise DomainError(f"which must be 'first' or 'second', got {which!r}")
    return _scalar_or_array(np.exp(-rate * t))


def joint_cdf(p: BnmoParams, sign, r, s):
    """P(R <= r, S <= s) by inclusion-exclusion."""
    out = (1.0 - marginal_survival(p, "first", r) - marginal_survival(p, "second", s)
           + joint_survival(p, sign, r, s))
    return _scalar_or_array(np.clip(out, 0.0, 1.0))


def log_density_terms(p: BnmoParams, r, s):
    """Log of the absolutely continuous density, without support checks.

    Returns ``-inf`` where the bracketed factor is not positive.
    """
    t1, t2, t12 = p.as_tuple()
    r = np.asarray(r, float)
    s = np.asarray(s, float)
    delta = (t2 * (t1 + t12) * np.exp(-t12 * r) + t1 * (t2 + t12) * np.exp(-t12 * s)
             - t1 * t2)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(delta > 0, -t1 * r - t2 * s + np.log(np.where(delta > 0, delta, 1.0)),
                        -np.inf)


def density_continuous(p: BnmoParams, r, s, tol: float = BOUNDARY_TOL):
    """Density of the absolutely continuous part at interior points.

    Raises ``DomainError`` naming the region if any point is on the
    singular curve or outside the support.
    """
    r = _nonneg("r", r)
    s = _nonneg("s", s)
    excess = support_excess(p.theta12, r, s)
    if np.any(excess <= tol):
        region = "boundary" if np.any(np.abs(excess) <= tol) else "exterior"
        raise DomainError(f"density_continuous is only defined on the interior; point lies on the {region}")
    return _scalar_or_array(np.exp(log_density_terms(p, r, s)))


def singular_curve(p: BnmoParams, r):
    """s-coordinate of the singular curve above ``r``."""
    r = np.asarray(r, float)
    if np.any(r <= 0):
        raise DomainError("singular_curve requires r > 0 (the curve diverges at 0)")
    return _scalar_or_array(-np.log(-np.expm1(-p.theta12 * r)) / p.theta12)


def singular_jump(p: BnmoParams, r):
    """Conditional probability that S sits on the singular curve given R = r.

    Equals ``alpha * (1 - exp(-theta12 r)) ** (theta2 / theta12)``. The
    exponent ``theta2 / theta12`` is the one for which integrating the jump
    against the density of R reproduces the beta-function singular mass.
    """
    r = np.asarray(r, float)
    if np.any(r <= 0):
        raise DomainError("singular_jump requires r > 0")
    return _scalar_or_array(
        p.alpha * np.exp((p.theta2 / p.theta12) * np.log(-np.expm1(-p.theta12 * r))))


def singular_mass(p: BnmoParams) -> float:
    """P(exp(-theta12 R) + exp(-theta12 S) = 1) = B(1/alpha, 1/beta)."""
    return math.exp(log_beta(1.0 / p.alpha, 1.0 / p.beta))


def log_mixed_derivative(theta12: float, r, s):
    """d^2/dr ds of log joint survival on the interior (depends on theta12 only)."""
    r = np.asarray(r, float)
    s = np.asarray(s, float)
    excess = support_excess(theta12, r, s)
    return _scalar_or_array(-theta12 ** 2 * np.exp(-theta12 * (r + s)) / excess ** 2)


@dataclass
class UoVerdict:
    dominant: str  # "A", "B" or "equal"
    violations: list
    max_gap: float


def uo_compare(pA: BnmoParams, pB: BnmoParams, grid: Iterable[tuple[float, float]],
               atol: float = 1e-15) -> UoVerdict:
    """Check the upper-orthant ordering implied by the common-shock rates.

    The model with the smaller ``theta12`` must have the larger joint
    survival everywhere. Any grid point contradicting that is reported.
    """
    if pA.theta1 != pB.theta1 or pA.theta2 != pB.theta2:
        raise DomainError("uo_compare requires identical theta1 and theta2")
    pts = np.asarray(list(grid), dtype=float).reshape(-1, 2)
    if pts.shape[0] == 0:
        raise DomainError("grid must be non-empty")
    fa = joint_survival(pA, DepSign.NEGATIVE, pts[:, 0], pts[:, 1])
    fb = joint_survival(pB, DepSign.NEGATIVE, pts[:, 0], pts[:, 1])
    if pA.theta12 == pB.theta12:
        dominant, hi, lo = "equal", fa, fb
        bad = np.abs(fa - fb) > atol
    elif pA.theta12 < pB.theta12:
        dominant, hi, lo = "A", fa, fb
        bad = hi < lo - atol
    else:
        dominant, hi, lo = "B", fb, fa
        bad = hi < lo - atol
    violations = [tuple(x) for x in pts[bad]]
    return UoVerdict(dominant, violations, float(np.max(np.abs(fa - fb))))
