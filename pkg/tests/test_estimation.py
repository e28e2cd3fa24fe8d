import math

import numpy as np
import pytest

from nmo.data import Dataset
from nmo.errors import DomainError
from nmo.estimation import (FitConfig, FitResult, bias_mse_study, classify, fit_mle,
                            log_likelihood, resolve_workers, row_root, score, support_roots,
                            theta12_feasible_max)
from nmo.model import BnmoParams, density_continuous
from nmo.sampler import make_rng, sample_dataset

LN2 = math.log(2)


def _fd_score(p, part, form, rel=1e-6):
    out = []
    for k in range(3):
        th = np.array(p.as_tuple())
        h = rel * th[k]
        up, dn = th.copy(), th.copy()
        up[k] += h
        dn[k] -= h
        out.append((log_likelihood(BnmoParams(*up), part, form)
                    - log_likelihood(BnmoParams(*dn), part, form)) / (2 * h))
    return np.array(out)


def test_feasible_bound_values():
    assert theta12_feasible_max(Dataset([1.0], [1.0])) == pytest.approx(LN2, rel=1e-14)
    assert theta12_feasible_max(Dataset([1.0, 2.0], [1.0, 2.0])) == pytest.approx(LN2 / 2, rel=1e-14)
    assert theta12_feasible_max(Dataset([0.0, 1.0], [5.0, 0.0])) == math.inf


def test_support_roots_match_reference_solver():
    rng = make_rng(40)
    r = rng.exponential(1.0, 200)
    s = rng.exponential(0.3, 200)
    fast = support_roots(r, s)
    ref = np.array([row_root(a, b) for a, b in zip(r, s)])
    np.testing.assert_allclose(fast, ref, rtol=1e-12)


def test_true_theta12_is_always_feasible():
    d = sample_dataset(BnmoParams(1, 1, 1), -1, 1000, make_rng(41))
    assert theta12_feasible_max(d) >= 1 - 1e-12


def test_classify_flags_win():
    d = sample_dataset(BnmoParams(1, 3, 0.8), -1, 500, make_rng(42))
    for t12 in (0.7, 0.8, 0.85):
        part = classify(d, t12)
        np.testing.assert_array_equal(part.singular, d.is_singular)
        assert part.from_flags


def test_classify_unflagged_recovers_singular_fraction():
    n = 20000
    d = sample_dataset(BnmoParams(1, 1, 1), -1, n, make_rng(43)).without_flags()
    part = classify(d, 1.0, tol=1e-9)
    assert abs(part.m2 / n - 1 / 6) < 3 * math.sqrt((1 / 6) * (5 / 6) / n)
    assert classify(d, 1.0, tol=0.0).m2 == 0


def test_log_likelihood_single_rows():
    p = BnmoParams(1, 1, 1)
    cont = Dataset([0.3], [0.2])
    part = classify(cont, 1.0)
    assert log_likelihood(p, part) == pytest.approx(math.log(density_continuous(p, 0.3, 0.2)))
    sing = Dataset([LN2], [LN2], [True])
    part = classify(sing, 1.0)
    assert log_likelihood(p, part, "printed") == pytest.approx(-2 * LN2, abs=1e-14)
    # complete form: log of f_R(r) * h(r) = log(2 * 1/4 * 1/4)
    assert log_likelihood(p, part, "complete") == pytest.approx(-3 * LN2, abs=1e-14)
    with pytest.raises(DomainError):
        log_likelihood(p, part, "other")


def test_log_likelihood_outside_support_is_minus_inf():
    d = Dataset([2.0], [2.0])
    part = classify(d, 0.1)
    assert log_likelihood(BnmoParams(1, 1, 1), part) == -math.inf


def test_score_additivity_without_singular_rows():
    rng = make_rng(44)
    p = BnmoParams(0.8, 1.4, 0.6)
    d = sample_dataset(p, -1, 40, rng)
    d = Dataset(d.r[~d.is_singular], d.s[~d.is_singular], np.zeros((~d.is_singular).sum(), bool))
    total = score(p, classify(d, p.theta12))
    per_row = sum(score(p, classify(Dataset([a], [b], [False]), p.theta12))
                  for a, b in zip(d.r, d.s))
    np.testing.assert_allclose(total, per_row, rtol=1e-12)
    np.testing.assert_allclose(total, _fd_score(p, classify(d, p.theta12), "printed"), rtol=1e-5)


@pytest.mark.parametrize("form", ["printed", "complete"])
def test_score_matches_finite_differences(form):
    rng = make_rng(45)
    for k in range(10):
        p = BnmoParams(*rng.uniform(0.3, 3.0, 3))
        d = sample_dataset(p, -1, int(rng.integers(20, 200)), make_rng(46, k))
        part = classify(d, p.theta12)
        np.testing.assert_allclose(score(p, part, form), _fd_score(p, part, form),
                                   rtol=1e-5, atol=1e-6 * d.m)


def test_score_swap_symmetry():
    p = BnmoParams(1.3, 1.3, 0.7)
    d = sample_dataset(p, -1, 100, make_rng(47)).without_flags()
    g = score(p, classify(d, p.theta12, tol=0.0))
    g_sw = score(p, classify(d.swapped(), p.theta12, tol=0.0))
    assert g[0] == pytest.approx(g_sw[1], rel=1e-12)
    assert g[1] == pytest.approx(g_sw[0], rel=1e-12)


def test_fit_recovers_parameters_at_large_m():
    truth = np.array([1, 3, 0.8])
    for seed in (0, 1):
        d = sample_dataset(BnmoParams(*truth), -1, 2000, make_rng(seed))
        res = fit_mle(d)
        assert res.converged
        assert np.all(np.abs(np.array(res.theta_hat.as_tuple()) - truth) < 0.15)
        assert res.m1 + res.m2 == 2000 and res.m2 == d.is_singular.sum()
        assert res.log_likelihood >= res.stage1_best - 1e-9


def test_fit_without_singular_rows():
    d = sample_dataset(BnmoParams(1, 3, 0.8), -1, 12, make_rng(3))
    assert d.is_singular.sum() == 0
    res = fit_mle(d)
    assert res.theta_hat is not None and res.m2 == 0
    assert math.isfinite(res.log_likelihood)


def test_fit_on_unflagged_data_with_zero_tolerance():
    d = sample_dataset(BnmoParams(1, 3, 0.8), -1, 300, make_rng(4)).without_flags()
    res = fit_mle(d, FitConfig(tol=0.0))
    assert res.m2 == 0 and res.theta_hat.theta12 <= res.theta12_upper_bound


def test_refit_from_estimate_is_self_consistent():
    d = sample_dataset(BnmoParams(1, 3, 0.8), -1, 2000, make_rng(5))
    first = fit_mle(d).theta_hat
    again = fit_mle(sample_dataset(first, -1, 2000, make_rng(6))).theta_hat
    np.testing.assert_allclose(again.as_tuple(), first.as_tuple(), atol=0.2)


def test_fit_result_dict_round_trip():
    d = sample_dataset(BnmoParams(1, 3, 0.8), -1, 200, make_rng(7))
    res = fit_mle(d)
    back = FitResult.from_dict(res.to_dict())
    assert back.theta_hat == res.theta_hat
    assert back.log_likelihood == res.log_likelihood
    assert (back.m1, back.m2) == (res.m1, res.m2)


def test_bias_mse_single_replication_and_determinism():
    p = BnmoParams(1, 3, 0.8)
    rows = bias_mse_study(p, -1, [30], 1, seed=2, workers=1)
    assert len(rows) == 3 and all(r.n_ok + r.n_failed == 1 for r in rows)
    a = bias_mse_study(p, -1, [30, 60], 4, seed=3, workers=1)
    b = bias_mse_study(p, -1, [30, 60], 4, seed=3, workers=2)
    assert a == b
    with pytest.raises(DomainError):
        bias_mse_study(p, -1, [30], 0)


def test_resolve_workers(monkeypatch):
    monkeypatch.setenv("NMO_WORKERS", "3")
    assert resolve_workers(None) == 3
    assert resolve_workers(2) == 2
    monkeypatch.delenv("NMO_WORKERS")
    assert resolve_workers(None) == 1
