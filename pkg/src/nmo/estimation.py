"""Maximum-likelihood fitting for the negative-dependence bivariate model.

Observations are split into a continuous block (strictly inside the support)
and a singular block (on the curve ``exp(-theta12 r) + exp(-theta12 s) = 1``).
Two log-likelihood forms are available:

``"printed"``
    continuous log-densities, plus for each singular row the log of the
    conditional jump ``alpha (1 - exp(-theta12 r))^(theta2/theta12)``.
``"complete"``
    the printed form plus, for each singular row, the log-density of R
    itself, ``log(theta1 + theta12) - (theta1 + theta12) r``. This is the
    full likelihood of the mixed law; leaving the R-density out biases
    ``theta1`` upwards (about +0.1 at theta = (1, 3, 0.8), m = 2000), so
    fitting uses this form by default.

Every observation must lie in the closed support, which caps ``theta12`` at
``theta12_feasible_max(data)``. When singular rows are present that cap is
attained at the true common-shock rate and the profile likelihood is
maximized on it.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import DomainError
from .model import BOUNDARY_TOL, BnmoParams, DepSign, support_excess, singular_mass
from .numerics import SimplexConfig, minimize_simplex, root_decreasing
from .sampler import make_rng, sample_dataset

FORMS = ("printed", "complete")
# continuous rows may sit this far outside the support before being rejected
_CONT_SLACK = 1e-12


def support_roots(r, s) -> np.ndarray:
    """Per-row root theta of ``exp(-theta r) + exp(-theta s) = 1``.

    Rows with ``min(r, s) == 0`` never leave the support; their root is inf.
    The root is bracketed by ``[ln2 / max(r, s), ln2 / min(r, s)]``; bisection
    runs in log space and a few Newton steps finish it.
    """
    r = np.atleast_1d(np.asarray(r, float))
    s = np.atleast_1d(np.asarray(s, float))
    lo_c = np.minimum(r, s)
    hi_c = np.maximum(r, s)
    out = np.full(r.shape, np.inf)
    ok = lo_c > 0
    if not np.any(ok):
        return out
    rr, ss = r[ok], s[ok]
    lo = np.log(math.log(2.0) / hi_c[ok])
    hi = np.log(math.log(2.0) / lo_c[ok])
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        pos = support_excess(np.exp(mid), rr, ss) > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    th = np.exp(0.5 * (lo + hi))
    for _ in range(3):
        f = support_excess(th, rr, ss)
        df = -rr * np.exp(-th * rr) - ss * np.exp(-th * ss)
        step = f / df
        cand = th - step
        th = np.where(np.isfinite(cand) & (cand > 0), cand, th)
    out[ok] = th
    return out


def theta12_feasible_max(data: Dataset) -> float:
    """Largest common-shock rate keeping every observation in the closed support."""
    roots = support_roots(data.r, data.s)
    return float(np.min(roots))


def row_root(r: float, s: float) -> float:
    """Scalar support root via the generic bracketed solver (reference path)."""
    if min(r, s) <= 0:
        return math.inf
    f = lambda th: math.exp(-th * r) + math.exp(-th * s) - 1.0  # noqa: E731
    lo = math.log(2.0) / max(r, s) * (1 - 1e-12)
    hi = math.log(2.0) / min(r, s) * (1 + 1e-12)
    if f(lo) <= 0:
        return lo
    if f(hi) >= 0:
        return hi
    return root_decreasing(f, lo, hi, tol=1e-15)


@dataclass
class Partition:
    """Continuous / singular split of a dataset."""

    data: Dataset
    singular: np.ndarray
    tol: float
    theta12: float | None = None
    from_flags: bool = False

    @property
    def m(self) -> int:
        return self.data.m

    @property
    def m2(self) -> int:
        return int(self.singular.sum())

    @property
    def m1(self) -> int:
        return self.m - self.m2

    @property
    def continuous_rows(self):
        c = ~self.singular
        return self.data.r[c], self.data.s[c]

    @property
    def singular_rows(self):
        return self.data.r[self.singular], self.data.s[self.singular]


def classify(data: Dataset, theta12: float, tol: float = BOUNDARY_TOL,
             use_flags: bool = True) -> Partition:
    """Rows within ``tol`` of the singular curve are singular.

    Known flags on the dataset take precedence. ``tol = 0`` disables
    detection, so unflagged data then has no singular rows.
    """
    if tol < 0:
        raise DomainError("tol must be >= 0")
    if use_flags and data.has_flags:
        return Partition(data, data.is_singular.copy(), tol, theta12, from_flags=True)
    if tol == 0:
        return Partition(data, np.zeros(data.m, bool), tol, theta12)
    ex = support_excess(theta12, data.r, data.s)
    return Partition(data, np.abs(ex) <= tol, tol, theta12)


def _check_form(form):
    if form not in FORMS:
        raise DomainError(f"likelihood form must be one of {FORMS}, got {form!r}")


def _loglik_arrays(t1, t2, t12, rc, sc, rs, form):
    if rc.size:
        if np.any(support_excess(t12, rc, sc) < -_CONT_SLACK):
            return -math.inf
        a = np.exp(-t12 * rc)
        b = np.exp(-t12 * sc)
        delta = t2 * (t1 + t12) * a + t1 * (t2 + t12) * b - t1 * t2
        if np.any(delta <= 0):
            return -math.inf
        cont = -t1 * rc.sum() - t2 * sc.sum() + np.log(delta).sum()
    else:
        cont = 0.0
    m2 = rs.size
    if m2:
        if np.any(rs <= 0):
            return -math.inf
        sing = m2 * math.log(t12 / (t1 + t12)) + (t2 / t12) * np.log(-np.expm1(-t12 * rs)).sum()
        if form == "complete":
            sing += m2 * math.log(t1 + t12) - (t1 + t12) * rs.sum()
    else:
        sing = 0.0
    val = float(cont + sing)
    return val if math.isfinite(val) else -math.inf


def log_likelihood(p: BnmoParams, part: Partition, form: str = "printed") -> float:
    """Log-likelihood of ``p`` for a partitioned sample; ``-inf`` if infeasible."""
    _check_form(form)
    rc, sc = part.continuous_rows
    rs, _ = part.singular_rows
    return _loglik_arrays(p.theta1, p.theta2, p.theta12, rc, sc, rs, form)


def score(p: BnmoParams, part: Partition, form: str = "printed") -> np.ndarray:
    """Gradient of ``log_likelihood`` in (theta1, theta2, theta12)."""
    _check_form(form)
    if not math.isfinite(log_likelihood(p, part, form)):
        raise DomainError("score requested at an infeasible parameter point")
    t1, t2, t12 = p.as_tuple()
    rc, sc = part.continuous_rows
    rs, _ = part.singular_rows
    g = np.zeros(3)
    if rc.size:
        a = np.exp(-t12 * rc)
        b = np.exp(-t12 * sc)
        delta = t2 * (t1 + t12) * a + t1 * (t2 + t12) * b - t1 * t2
        d1 = t2 * a + (t2 + t12) * b - t2
        d2 = (t1 + t12) * a + t1 * b - t1
        d12 = t2 * a * (1 - (t1 + t12) * rc) + t1 * b * (1 - (t2 + t12) * sc)
        g[0] += -rc.sum() + (d1 / delta).sum()
        g[1] += -sc.sum() + (d2 / delta).sum()
        g[2] += (d12 / delta).sum()
    m2 = rs.size
    if m2:
        logs = np.log(-np.expm1(-t12 * rs)).sum()
        g[0] += -m2 / (t1 + t12)
        g[1] += logs / t12
        g[2] += (m2 / t12 - m2 / (t1 + t12) - t2 / t12 ** 2 * logs
                 + t2 / t12 * (rs / np.expm1(t12 * rs)).sum())
        if form == "complete":
            extra = m2 / (t1 + t12) - rs.sum()
            g[0] += extra
            g[2] += extra
    return g


@dataclass
class FitConfig:
    n_starts: int = 3
    grid_size: int = 12
    tol: float = BOUNDARY_TOL
    seed: int = 0
    form: str = "complete"
    use_flags: bool = True
    inner: SimplexConfig = field(default_factory=lambda: SimplexConfig(x_tol=1e-7, f_tol=1e-9))
    polish: SimplexConfig = field(default_factory=lambda: SimplexConfig(x_tol=1e-11, f_tol=1e-12))

    def __post_init__(self):
        _check_form(self.form)
        if self.n_starts < 1 or self.grid_size < 1:
            raise DomainError("n_starts and grid_size must be >= 1")
        if self.tol < 0:
            raise DomainError("tol must be >= 0")


@dataclass
class FitResult:
    theta_hat: BnmoParams | None
    log_likelihood: float
    m1: int
    m2: int
    n_starts: int
    converged: bool
    best_start: tuple
    theta12_upper_bound: float
    form: str = "complete"
    score: tuple | None = None
    score_norm: float | None = None
    stage1_best: float = -math.inf
    n_evaluations: int = 0
    message: str = ""
    at_upper_bound: bool = False
    singular: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        th = self.theta_hat
        return {
            "theta1": th.theta1 if th else None,
            "theta2": th.theta2 if th else None,
            "theta12": th.theta12 if th else None,
            "log_likelihood": _json_float(self.log_likelihood),
            "m1": self.m1,
            "m2": self.m2,
            "n_starts": self.n_starts,
            "converged": bool(self.converged),
            "best_start": [float(x) for x in self.best_start],
            "theta12_upper_bound": _json_float(self.theta12_upper_bound),
            "likelihood_form": self.form,
            "score": None if self.score is None else [float(x) for x in self.score],
            "score_norm": self.score_norm,
            "stage1_best_log_likelihood": _json_float(self.stage1_best),
            "n_evaluations": self.n_evaluations,
            "message": self.message,
            "at_upper_bound": bool(self.at_upper_bound),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitResult":
        th = BnmoParams(d["theta1"], d["theta2"], d["theta12"])
        ub = d.get("theta12_upper_bound")
        return cls(th, float(d.get("log_likelihood") or -math.inf), int(d.get("m1", 0)),
                   int(d.get("m2", 0)), int(d.get("n_starts", 1)), bool(d.get("converged", True)),
                   tuple(d.get("best_start") or ()), math.inf if ub is None else float(ub),
                   d.get("likelihood_form", "complete"), message=d.get("message", ""))


def _json_float(x):
    return None if x is None or not math.isfinite(x) else float(x)


def _moment_rates(data: Dataset):
    mr = float(np.mean(data.r))
    ms = float(np.mean(data.s))
    return (1.0 / mr if mr > 0 else 1.0), (1.0 / ms if ms > 0 else 1.0)


def _mass_matched_theta12(data: Dataset, upper: float):
    """theta12 at which the singular mass matches the flagged fraction."""
    if not data.has_flags:
        return None
    frac = float(np.mean(data.is_singular))
    if frac <= 0 or frac >= 1:
        return None
    lr, ls = _moment_rates(data)
    cap = min(lr, ls, upper)

    def gap(th):
        return frac - singular_mass(BnmoParams(max(lr - th, 1e-12), max(ls - th, 1e-12), th))

    lo, hi = cap * 1e-6, cap * (1 - 1e-9)
    try:
        return root_decreasing(gap, lo, hi, tol=1e-10 * cap)
    except DomainError:
        return None


def fit_mle(data: Dataset, config: FitConfig | None = None) -> FitResult:
    """Two-stage profile search for the maximum-likelihood estimate.

    Stage 1 walks a log-spaced grid of theta12 values ending at the
    feasibility cap; at each node the rows are classified and
    (theta1, theta2) maximized from moment-based and jittered starts.
    Stage 2 freezes the best partition and polishes all three rates
    jointly with theta12 held at or below the cap.
    """
    cfg = config or FitConfig()
    form = cfg.form
    cap = theta12_feasible_max(data)
    lr, ls = _moment_rates(data)
    search_cap = cap if math.isfinite(cap) else 10.0 * max(lr, ls)
    grid = list(np.geomspace(search_cap * 1e-3, search_cap, cfg.grid_size))
    grid[-1] = search_cap
    extra = _mass_matched_theta12(data, search_cap) if cfg.use_flags else None
    if extra is not None:
        grid.append(extra)
    rng = make_rng(cfg.seed, 0)
    jitter = rng.normal(0.0, 0.5, size=(len(grid), max(cfg.n_starts - 1, 0), 2))
    n_eval = 0

    best = None  # (ll, theta tuple, partition, start)
    for gi, t12 in enumerate(grid):
        part = classify(data, t12, cfg.tol, cfg.use_flags)
        rc, sc = part.continuous_rows
        rs, _ = part.singular_rows
        base = np.log([max(lr - t12, 0.05 * lr), max(ls - t12, 0.05 * ls)])
        starts = [base] + [base + jitter[gi, k] for k in range(cfg.n_starts - 1)]

        def obj(x, t12=t12, rc=rc, sc=sc, rs=rs):
            return -_loglik_arrays(math.exp(x[0]), math.exp(x[1]), t12, rc, sc, rs, form)

        for st in starts:
            if not math.isfinite(obj(st)):
                continue
            res = minimize_simplex(obj, st, cfg.inner)
            n_eval += res.n_eval
            ll = -res.fun
            if best is None or ll > best[0]:
                best = (ll, (math.exp(res.x[0]), math.exp(res.x[1]), t12), part,
                        (math.exp(st[0]), math.exp(st[1]), t12))

    if best is None:
        return FitResult(None, -math.inf, data.m, 0, cfg.n_starts, False, (), cap, form,
                         n_evaluations=n_eval,
                         message="no feasible starting point on the theta12 grid")

    stage1_ll, theta, part, start = best
    rc, sc = part.continuous_rows
    rs, _ = part.singular_rows
    log_cap = math.log(search_cap) if math.isfinite(cap) else math.inf

    def obj3(x):
        if x[2] > log_cap + 1e-12:
            return math.inf
        # clamp so a round-off step past the cap evaluates on it
        t12 = min(math.exp(x[2]), search_cap)
        return -_loglik_arrays(math.exp(x[0]), math.exp(x[1]), t12, rc, sc, rs, form)

    candidates = [(stage1_ll, theta, True)]
    res = minimize_simplex(obj3, np.log(theta), cfg.polish)
    n_eval += res.n_eval
    candidates.append((-res.fun, tuple(np.exp(res.x)), res.converged))
    if math.isfinite(cap) and np.exp(res.x[2]) >= cap * (1 - 1e-6):
        # the optimum sits on the cap: re-optimize the two free rates there
        def obj2(x):
            return obj3(np.array([x[0], x[1], log_cap]))
        res2 = minimize_simplex(obj2, res.x[:2], cfg.polish)
        n_eval += res2.n_eval
        candidates.append((-res2.fun, (math.exp(res2.x[0]), math.exp(res2.x[1]), cap),
                           res2.converged))
    ll, theta, conv = max(candidates, key=lambda c: c[0])
    if math.isfinite(cap):
        theta = (theta[0], theta[1], min(theta[2], cap))
    p_hat = BnmoParams(*theta)
    ll = log_likelihood(p_hat, part, form)
    sc_vec = None
    sc_norm = None
    at_cap = math.isfinite(cap) and theta[2] >= cap * (1 - 1e-9)
    if math.isfinite(ll):
        g = score(p_hat, part, form)
        sc_vec = tuple(float(v) for v in g)
        # theta12 pinned on the cap is not a stationary point; report the free rates only
        free = slice(0, 2) if at_cap else slice(0, 3)
        sc_norm = float(np.linalg.norm((g * np.array(theta))[free]) / data.m)
    converged = bool(conv and math.isfinite(ll))
    return FitResult(p_hat, ll, part.m1, part.m2, cfg.n_starts, converged, start, cap, form,
                     sc_vec, sc_norm, stage1_ll, n_eval,
                     "" if converged else "simplex polish did not meet its tolerance",
                     at_cap, part.singular.copy())


def _one_replication(args):
    true_p, sign, m, seed, stream, cfg = args
    data = sample_dataset(true_p, sign, m, make_rng(seed, stream))
    try:
        res = fit_mle(data, cfg)
    except Exception:  # counted as an exclusion by the caller
        return None
    if res.theta_hat is None or not math.isfinite(res.log_likelihood):
        return None
    return res.theta_hat.as_tuple()


@dataclass
class BiasMseRow:
    parameter: str
    m: int
    bias: float
    mse: float
    n_ok: int
    n_failed: int


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get("NMO_WORKERS", "1") or 1)
    return max(1, int(workers))


def bias_mse_study(true_p: BnmoParams, sign, sample_sizes, replications: int, seed: int = 0,
                   workers: int | None = None, config: FitConfig | None = None) -> list[BiasMseRow]:
    """Bias and mean squared error of the estimator over simulated samples.

    Replication ``k`` at size index ``i`` uses stream ``i * replications + k``,
    so the table is identical for any worker count.
    """
    sign = DepSign.parse(sign)
    if replications < 1:
        raise DomainError("replications must be >= 1")
    sizes = [int(m) for m in sample_sizes]
    if not sizes or min(sizes) < 1:
        raise DomainError("sample sizes must be positive")
    cfg = config or FitConfig(n_starts=2, grid_size=10)
    jobs = [(true_p, sign, m, seed, i * replications + k, cfg)
            for i, m in enumerate(sizes) for k in range(replications)]
    workers = resolve_workers(workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_one_replication, jobs, chunksize=8))
    else:
        results = [_one_replication(j) for j in jobs]
    rows = []
    truth = np.array(true_p.as_tuple())
    for i, m in enumerate(sizes):
        chunk = results[i * replications:(i + 1) * replications]
        est = np.array([c for c in chunk if c is not None]).reshape(-1, 3)
        n_failed = replications - est.shape[0]
        for k, name in enumerate(("theta1", "theta2", "theta12")):
            if est.shape[0]:
                err = est[:, k] - truth[k]
                rows.append(BiasMseRow(name, m, float(err.mean()), float(np.mean(err ** 2)),
                                       est.shape[0], n_failed))
            else:
                rows.append(BiasMseRow(name, m, math.nan, math.nan, 0, n_failed))
    return rows
