"""n-dimensional shock model with a sign per pair of components.

Component ``j`` fails at the first of its own shock ``T_jj`` and of the
pair shocks it shares with every other component. For a negative pair the
two members receive antithetic quantiles of the pair shock, for a positive
pair they receive the same one. Pairs use independent uniforms, which makes
the joint survival a product of pairwise factors.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import jsonschema
import numpy as np

from .errors import DomainError
from .model import support_excess

PARAMS_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["n", "theta_diag", "theta_pair", "signs"],
    "properties": {
        "n": {"type": "integer", "minimum": 2},
        "theta_diag": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "theta_pair": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "signs": {"type": "array", "items": {"enum": [-1, 1]}},
    },
}


def _pairs(n):
    return list(itertools.combinations(range(n), 2))


@dataclass(frozen=True, eq=False)
class MnmoParams:
    """Own-shock rates, symmetric pair rates and symmetric pair signs.

    Pair lists are in lexicographic order ``(0,1), (0,2), ..., (n-2,n-1)``.
    """

    theta_diag: np.ndarray
    theta_pair: np.ndarray
    signs: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.theta_diag, float).ravel()
        tp = np.asarray(self.theta_pair, float)
        sg = np.asarray(self.signs, int)
        n = d.size
        if n < 2:
            raise DomainError("dimension must be at least 2")
        if tp.shape != (n, n) or sg.shape != (n, n):
            raise DomainError("theta_pair and signs must be n x n matrices")
        if not np.all(np.isfinite(d)) or np.any(d <= 0):
            raise DomainError("own-shock rates must be positive and finite")
        iu = np.triu_indices(n, 1)
        if not np.allclose(tp, tp.T, rtol=0, atol=0) or not np.array_equal(sg, sg.T):
            raise DomainError("pair rates and signs must be symmetric")
        if not np.all(np.isfinite(tp[iu])) or np.any(tp[iu] <= 0):
            raise DomainError("pair rates must be positive and finite")
        if not np.all(np.isin(sg[iu], (-1, 1))):
            raise DomainError("pair signs must be +1 or -1")
        tp = tp.copy()
        np.fill_diagonal(tp, 0.0)
        object.__setattr__(self, "theta_diag", d)
        object.__setattr__(self, "theta_pair", tp)
        object.__setattr__(self, "signs", sg.copy())

    @property
    def n(self) -> int:
        return int(self.theta_diag.size)

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return _pairs(self.n)

    @property
    def row_rates(self) -> np.ndarray:
        """Rate of each exponential marginal: own rate plus every pair rate."""
        return self.theta_diag + self.theta_pair.sum(axis=1)

    @classmethod
    def from_lists(cls, theta_diag, theta_pair, signs=None) -> "MnmoParams":
        d = np.asarray(theta_diag, float).ravel()
        n = d.size
        prs = _pairs(n)
        theta_pair = list(theta_pair)
        signs = [-1] * len(prs) if signs is None else list(signs)
        if len(theta_pair) != len(prs) or len(signs) != len(prs):
            raise DomainError(f"n={n} needs {len(prs)} pair rates and signs")
        tp = np.zeros((n, n))
        sg = np.ones((n, n), int)
        for (i, j), t, a in zip(prs, theta_pair, signs):
            tp[i, j] = tp[j, i] = t
            sg[i, j] = sg[j, i] = a
        return cls(d, tp, sg)

    @classmethod
    def bivariate(cls, theta1, theta2, theta12, sign=-1) -> "MnmoParams":
        return cls.from_lists([theta1, theta2], [theta12], [int(sign)])

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "theta_diag": self.theta_diag.tolist(),
            "theta_pair": [float(self.theta_pair[i, j]) for i, j in self.pairs],
            "signs": [int(self.signs[i, j]) for i, j in self.pairs],
        }

    @classmethod
    def from_json_dict(cls, obj) -> "MnmoParams":
        try:
            jsonschema.validate(obj, PARAMS_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise DomainError(f"invalid parameter file: {exc.message}") from None
        n = obj["n"]
        if len(obj["theta_diag"]) != n:
            raise DomainError(f"theta_diag must have n={n} entries")
        return cls.from_lists(obj["theta_diag"], obj["theta_pair"], obj["signs"])


def load_params(path) -> MnmoParams:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DomainError(f"{path}: not valid JSON ({exc})") from None
    return MnmoParams.from_json_dict(obj)


def save_params(path, mp: MnmoParams) -> None:
    with open(path, "w") as fh:
        json.dump(mp.to_json_dict(), fh, indent=2)
        fh.write("\n")


def _rows(x, n):
    x = np.asarray(x, float)
    if x.shape[-1] != n:
        raise DomainError(f"expected vectors of length {n}")
    if np.any(np.isnan(x)) or np.any(x < 0):
        raise DomainError("coordinates must be non-negative")
    return x


def mnmo_survival(mp: MnmoParams, x):
    """P(X_1 > x_1, ..., X_n > x_n); accepts one vector or a stack of them."""
    x = _rows(x, mp.n)
    log_out = -(x * mp.theta_diag).sum(axis=-1)
    zero = np.zeros(x.shape[:-1], dtype=bool)
    for i, j in mp.pairs:
        t = mp.theta_pair[i, j]
        xi, xj = x[..., i], x[..., j]
        if mp.signs[i, j] > 0:
            log_out = log_out - t * np.maximum(xi, xj)
        else:
            ex = support_excess(t, xi, xj)
            zero |= ex <= 0
            with np.errstate(divide="ignore", invalid="ignore"):
                log_out = log_out + np.log(np.where(ex > 0, ex, 1.0))
    out = np.where(zero, 0.0, np.exp(log_out))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class CopulaGammas:
    """Exponents of the survival copula.

    ``gamma[j, j]`` is the exponent of ``u_j`` in its own factor and
    ``gamma[i, j]`` (``i != j``) the exponent of ``u_i`` inside the factor of
    pair ``{i, j}``. Each row sums to one.
    """

    gamma: np.ndarray
    signs: np.ndarray

    @property
    def n(self) -> int:
        return int(self.gamma.shape[0])


def gammas_from_params(mp: MnmoParams) -> CopulaGammas:
    rows = mp.row_rates
    g = mp.theta_pair / rows[:, None]
    g[np.diag_indices(mp.n)] = mp.theta_diag / rows
    return CopulaGammas(g, mp.signs.copy())


def survival_copula(g: CopulaGammas, u):
    """Survival copula evaluated at ``u`` (one vector or a stack).

    Negative pairs contribute ``max(u_i^a + u_j^b - 1, 0)``; positive pairs
    ``min(u_i^a, u_j^b)``.
    """
    u = np.asarray(u, float)
    n = g.n
    if u.shape[-1] != n:
        raise DomainError(f"expected vectors of length {n}")
    if np.any(np.isnan(u)) or np.any(u < 0) or np.any(u > 1):
        raise DomainError("copula arguments must lie in [0, 1]")
    with np.errstate(divide="ignore"):
        logu = np.log(u)
    out = np.exp((logu * np.diag(g.gamma)).sum(axis=-1))
    for i, j in _pairs(n):
        a = np.exp(g.gamma[i, j] * logu[..., i])
        b = np.exp(g.gamma[j, i] * logu[..., j])
        if g.signs[i, j] > 0:
            out = out * np.minimum(a, b)
        else:
            out = out * np.maximum(a + b - 1.0, 0.0)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class RtdsVerdict:
    holds: bool
    max_value: float
    values: np.ndarray
    n_excluded: int


def pair_log_mixed_derivative(theta: float, xi, xj):
    """d^2/dxi dxj of the log pair factor ``exp(-theta xi) + exp(-theta xj) - 1``."""
    xi = np.asarray(xi, float)
    xj = np.asarray(xj, float)
    return -theta ** 2 * np.exp(-theta * (xi + xj)) / support_excess(theta, xi, xj) ** 2


def rtds_diagnostic(mp: MnmoParams, pair: tuple[int, int], grid,
                    tol: float = 1e-9) -> RtdsVerdict:
    """Evaluate the log mixed derivative of one pair factor on a grid.

    Non-positive values everywhere (reverse-regular of order two in the
    pair) are what the sequential right-tail-decreasing property rests on.
    Grid points on or outside the pair's support are dropped.
    """
    iu = np.triu_indices(mp.n, 1)
    if np.any(mp.signs[iu] > 0):
        raise DomainError("rtds_diagnostic requires every pair sign to be -1")
    i, j = sorted(pair)
    if i == j or not (0 <= i < mp.n and 0 <= j < mp.n):
        raise DomainError(f"invalid pair {pair}")
    pts = np.asarray(list(grid), float).reshape(-1, 2)
    theta = mp.theta_pair[i, j]
    ex = support_excess(theta, pts[:, 0], pts[:, 1])
    keep = ex > tol
    vals = pair_log_mixed_derivative(theta, pts[keep, 0], pts[keep, 1])
    mx = float(vals.max()) if vals.size else math.nan
    return RtdsVerdict(bool(np.all(vals <= 0)), mx, vals, int((~keep).sum()))
