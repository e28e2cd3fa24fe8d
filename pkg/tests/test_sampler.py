import math

import numpy as np
import pytest
from scipy import stats

from nmo.errors import DomainError
from nmo.model import BnmoParams, singular_mass, support_excess
from nmo.multivariate import MnmoParams, mnmo_survival
from nmo.sampler import make_rng, sample_arrays, sample_bnmo, sample_dataset, sample_mnmo


def _band(p, n):
    return 3 * math.sqrt(p * (1 - p) / n)


def test_streams_are_reproducible_and_distinct():
    a = make_rng(5, 0).random(4)
    np.testing.assert_array_equal(a, make_rng(5, 0).random(4))
    assert not np.array_equal(a, make_rng(5, 1).random(4))
    assert not np.array_equal(a, make_rng(6, 0).random(4))
    with pytest.raises(DomainError):
        make_rng(-1)


def test_independence_limit():
    r, s, _ = sample_arrays(BnmoParams(1, 1, 1e-8), -1, 10**5, make_rng(1))
    assert abs(np.corrcoef(r, s)[0, 1]) < 0.02


def test_singular_flag_frequency_symmetric():
    n = 10**6
    _, _, f = sample_arrays(BnmoParams(1, 1, 1), -1, n, make_rng(2))
    assert abs(f.mean() - 1 / 6) < _band(1 / 6, n)


def test_flagged_rows_lie_on_the_curve():
    p = BnmoParams(0.5, 2, 1.5)
    r, s, f = sample_arrays(p, -1, 10**4, make_rng(3))
    ex = support_excess(p.theta12, r, s)
    assert np.all(np.abs(ex[f]) < 1e-12)
    assert np.all(ex[~f] > 0)


def test_strong_common_shock_is_strongly_negative():
    r, s, _ = sample_arrays(BnmoParams(1, 1, 7), -1, 5000, make_rng(4))
    assert stats.kendalltau(r, s).statistic < -0.5
    assert np.median(r + s) < 0.3


def test_single_draw():
    d = sample_dataset(BnmoParams(1, 1, 1), -1, 1, make_rng(0))
    assert d.m == 1
    one = sample_bnmo(BnmoParams(1, 1, 1), -1, make_rng(0))
    assert one.r == d.r[0] and one.s == d.s[0] and one.is_singular == d.is_singular[0]
    with pytest.raises(DomainError):
        sample_dataset(BnmoParams(1, 1, 1), -1, 0, make_rng(0))


def test_marginals_and_mass():
    p = BnmoParams(1, 3, 0.8)
    n = 10**5
    d = sample_dataset(p, -1, n, make_rng(7))
    assert abs(d.r.mean() - 1 / 1.8) < 3 * (1 / 1.8) / math.sqrt(n)
    assert abs(d.s.mean() - 1 / 3.8) < 3 * (1 / 3.8) / math.sqrt(n)
    mass = singular_mass(p)
    assert abs(d.is_singular.mean() - mass) < _band(mass, n)


def test_swap_uniform_leaves_the_law_unchanged():
    # U and 1 - U are equal in law, so the mirrored construction is the same model
    p = BnmoParams(0.5, 2, 1)
    n = 20000
    a = sample_dataset(p, -1, n, make_rng(8), swap_uniform=True)
    b = sample_dataset(p, -1, n, make_rng(9))
    assert stats.ks_2samp(a.r, b.r).pvalue > 0.001
    assert stats.ks_2samp(a.s, b.s).pvalue > 0.001
    assert stats.ks_2samp(a.r + a.s, b.r + b.s).pvalue > 0.001
    mass = singular_mass(p)
    assert abs(a.is_singular.mean() - mass) < _band(mass, n)
    assert np.all(np.abs(support_excess(p.theta12, a.r, a.s)[a.is_singular]) < 1e-12)


def test_positive_sign_ties_on_diagonal():
    p = BnmoParams(1, 1, 1)
    r, s, f = sample_arrays(p, +1, 10**5, make_rng(10))
    assert np.all(r[f] == s[f])
    # classical mass of the diagonal is theta12 / (theta1 + theta2 + theta12)
    assert abs(f.mean() - 1 / 3) < _band(1 / 3, 10**5)


def test_mnmo_n2_matches_bivariate():
    mp = MnmoParams.bivariate(1, 3, 0.8)
    x = sample_mnmo(mp, make_rng(20), 10**5).x
    d = sample_dataset(BnmoParams(1, 3, 0.8), -1, 10**5, make_rng(21))
    crit = 1.628 * math.sqrt(2 / 10**5)  # 1% two-sample KS critical value
    assert stats.ks_2samp(x[:, 0], d.r).statistic < crit
    assert stats.ks_2samp(x[:, 1], d.s).statistic < crit


def test_mnmo_n3_marginals_and_pairs():
    mp = MnmoParams.from_lists([1, 1, 1], [1, 1, 1])
    n = 10**5
    out = sample_mnmo(mp, make_rng(22), n)
    x = out.x
    for j in range(3):
        assert abs(x[:, j].mean() - 1 / 3) < 3 * (1 / 3) / math.sqrt(n)
    freq = np.mean((x[:, 0] > 0.1) & (x[:, 1] > 0.2))
    exact = mnmo_survival(mp, [0.1, 0.2, 0.0])
    assert abs(freq - exact) < _band(exact, n)
    assert out.pair_flags.shape == (n, 3)
    assert out.pairs == [(0, 1), (0, 2), (1, 2)]


def test_mnmo_shared_uniform_breaks_product_form():
    mp = MnmoParams.from_lists([1, 1, 1], [2, 2, 2])
    n = 2 * 10**5
    probe = [0.05, 0.05, 0.05]
    per_pair = sample_mnmo(mp, make_rng(23), n).x
    shared = sample_mnmo(mp, make_rng(23), n, shared_uniform=True).x
    exact = mnmo_survival(mp, probe)
    f_pair = np.mean(np.all(per_pair > probe, axis=1))
    f_shared = np.mean(np.all(shared > probe, axis=1))
    assert abs(f_pair - exact) < _band(exact, n)
    assert abs(f_shared - exact) > 5 * _band(exact, n)
