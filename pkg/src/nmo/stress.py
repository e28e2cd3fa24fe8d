"""Competing-risks view of T = min(R, S) and the stress-strength index P(R < S).

Because ``exp(-theta12 R) + exp(-theta12 S) >= 1`` almost surely, the
diagonal leaves the support at ``t* = ln 2 / theta12`` and ``min(R, S)`` never
exceeds ``t*``. The sub-densities are therefore zero past ``t*`` and the
sub-distribution functions are constant there. The index is the value at
``t*``, not the ``t -> inf`` limit of the sub-distribution expression taken
without the cutoff; the two agree only when ``theta1 == theta2``.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError
from .model import BnmoParams


def diagonal_cutoff(p: BnmoParams) -> float:
    return math.log(2.0) / p.theta12


def _cause_rates(p: BnmoParams, cause: int):
    if cause == 1:
        return p.theta1, p.theta2
    if cause == 2:
        return p.theta2, p.theta1
    raise DomainError(f"cause must be 1 or 2, got {cause!r}")


def sub_density(p: BnmoParams, cause: int, t):
    """Density of {T in dt, C = cause}; C = 1 means R < S."""
    own, other = _cause_rates(p, cause)
    t = np.asarray(t, float)
    if np.any(t < 0) or np.any(np.isnan(t)):
        raise DomainError("t must be non-negative")
    th = p.theta12
    total = own + other + th
    val = (2 * own + th) * np.exp(-total * t) - own * np.exp(-(own + other) * t)
    out = np.where(t <= diagonal_cutoff(p), val, 0.0)
    return float(out) if out.ndim == 0 else out


def _sub_distribution_closed(own, other, th, t):
    total = own + other + th
    return (-(2 * own + th) / total * np.expm1(-total * t)
            + own / (own + other) * np.expm1(-(own + other) * t))


def sub_distribution(p: BnmoParams, cause: int, t):
    """P(T <= t, C = cause), constant for t beyond the diagonal cutoff."""
    own, other = _cause_rates(p, cause)
    t = np.asarray(t, float)
    if np.any(t < 0) or np.any(np.isnan(t)):
        raise DomainError("t must be non-negative")
    tt = np.minimum(t, diagonal_cutoff(p))
    out = _sub_distribution_closed(own, other, p.theta12, tt)
    return float(out) if out.ndim == 0 else out


def stress_strength_index(p: BnmoParams) -> float:
    """P(R < S)."""
    if p.theta1 == p.theta2:
        # exchangeable pair and P(R = S) = 0
        return 0.5
    return float(sub_distribution(p, 1, diagonal_cutoff(p)))


def stress_strength_index_ab(alpha: float, beta: float) -> float:
    """P(R < S) written in terms of alpha and beta only.

    With ``E = 2^(2 - 1/alpha - 1/beta)`` (the value of
    ``exp(-(theta1 + theta2) t*)``):

        P = A (1 - E/2) - B (1 - E),
        A = (2b - ab) / (a + b - ab),  B = (b - ab) / (a + b - 2ab).
    """
    if not (0 < alpha < 1 and 0 < beta < 1):
        raise DomainError("alpha and beta must lie in (0, 1)")
    a, b = alpha, beta
    if a == b:
        return 0.5
    A = (2 * b - a * b) / (a + b - a * b)
    B = (b - a * b) / (a + b - 2 * a * b)
    E = 2.0 ** (2.0 - 1.0 / a - 1.0 / b)
    return A * (1 - E / 2) - B * (1 - E)


def untruncated_limit(p: BnmoParams) -> float:
    """``(2 theta1 + theta12) / (theta1 + theta2 + theta12) - theta1 / (theta1 + theta2)``.

    The limit of the closed-form sub-distribution if the cutoff at ``t*``
    is ignored. Kept for comparison; it equals the index only when
    ``theta1 == theta2``.
    """
    t1, t2, t12 = p.as_tuple()
    return (2 * t1 + t12) / (t1 + t2 + t12) - t1 / (t1 + t2)


def untruncated_limit_ab(alpha: float, beta: float) -> float:
    a, b = alpha, beta
    return (2 * b - a * b) / (b + a - a * b) - (b - a * b) / (b + a - 2 * a * b)


def stress_surface(alphas, betas, theta12: float = 1.0) -> np.ndarray:
    """Index on the grid ``alphas x betas`` (rows follow ``alphas``)."""
    return np.array([[stress_strength_index(BnmoParams.from_alpha_beta(a, b, theta12))
                      for b in betas] for a in alphas])
