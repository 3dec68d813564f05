import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from netepi.core import DEFAULT_PARAMS, PARAM_NAMES, ModelParams
from netepi.estimators import (
    GammaDist,
    NoRoot,
    PriorSet,
    confidence_intervals,
    mle_closed,
    mle_open_labeled,
    mle_open_numeric,
    poisson_rate_interval,
    posterior_params,
)
from netepi.likelihood import SufficientStats, loglik_open, loglik_sir, sufficient_stats

from conftest import er_run
from oracles import mp_loglik_terms

EPIDEMIC = DEFAULT_PARAMS.with_(beta=0.1, gamma=0.15)


@pytest.fixture(scope="module")
def rich_stats():
    g0, trace = er_run(2, n=60, p=0.1, t_max=40.0, params=EPIDEMIC)
    s = sufficient_stats(g0, trace, 40.0)
    assert s.n_e > 5 and all(x > 0 for x in s.c) and all(x > 0 for x in s.d)
    return s


def test_mle_is_count_over_exposure(rich_stats):
    res = mle_closed(rich_stats)
    for name, (k, e) in rich_stats.counts_and_exposures().items():
        assert res[name] == k / e
    assert res.non_identifiable == ()


def test_mle_is_numerical_argmax(rich_stats):
    """Coordinate-wise root of a 50-digit numerical score, bracketed around the MLE."""
    res = mle_closed(rich_stats)
    base = {n: mp.mpf(res[n]) for n in PARAM_NAMES}
    with mp.workdps(50):
        for name in PARAM_NAMES:
            def score(x):
                return mp.diff(lambda y: mp_loglik_terms(rich_stats, {**base, name: y}), x)

            x = base[name]
            root = mp.findroot(score, (x / 2, x * 2), solver="illinois", tol=mp.mpf(10) ** -60)
            assert abs(float(root) - res[name]) < 1e-8 * max(1.0, res[name])
            assert abs(float(root) / res[name] - 1) < 1e-8


def test_gradient_vanishes_at_mle(rich_stats):
    res = mle_closed(rich_stats).params()
    base = res.as_dict()
    for name in PARAM_NAMES:
        h = 1e-6 * base[name]
        up = loglik_sir(rich_stats, ModelParams.from_mapping({**base, name: base[name] + h}))
        dn = loglik_sir(rich_stats, ModelParams.from_mapping({**base, name: base[name] - h}))
        # scale-free derivative d loglik / d log(theta)
        assert abs((up - dn) / (2 * h) * base[name]) < 1e-6


def test_zero_exposure_is_flagged():
    s = SufficientStats(n_e=0, n_r=1, exp_i=2.0, c=(0, 0, 0), d=(0, 0, 1))
    res = mle_closed(s)
    assert res["gamma"] == 0.5 and res["beta"] == 0.0
    assert res.non_identifiable == ("omega_ii",)
    with pytest.raises(ValueError):
        res.params()


def test_poisson_interval_by_hand():
    # zero events: upper limit -log(0.025)/E
    lo, hi = poisson_rate_interval(0, 10.0)
    assert lo == 0.0 and hi == pytest.approx(-math.log(0.025) / 10.0)
    lo, hi = poisson_rate_interval(5, 2.0)
    assert lo == pytest.approx(stats.chi2.ppf(0.025, 10) / 4)
    assert hi == pytest.approx(stats.chi2.ppf(0.975, 12) / 4)


def test_confidence_intervals_contain_mle(rich_stats):
    res = mle_closed(rich_stats)
    for name, (lo, hi) in confidence_intervals(rich_stats).items():
        assert lo <= res[name] <= hi


@given(st.floats(0.5, 20), st.floats(0.1, 50), st.integers(0, 100), st.floats(0.01, 500))
def test_gamma_update_is_conjugate(shape, rate, k, exposure):
    """Posterior density is proportional to prior x Poisson-process likelihood."""
    post = GammaDist(shape, rate).update(k, exposure)
    xs = np.array([0.3, 1.1, 2.7]) * (shape + k) / (rate + exposure)
    log_target = stats.gamma.logpdf(xs, shape, scale=1 / rate) + k * np.log(xs) - exposure * xs
    log_post = stats.gamma.logpdf(xs, post.shape, scale=1 / post.rate)
    diffs = log_target - log_post
    assert np.ptp(diffs) < 1e-9 * max(1.0, np.abs(diffs).max())


def test_posterior_uses_counts_and_exposures(rich_stats):
    pri = PriorSet.default()
    post = posterior_params(rich_stats, pri)
    k, e = rich_stats.counts_and_exposures()["alpha_si"]
    assert post["alpha_si"].shape == pri.alpha_si.shape + k
    assert post["alpha_si"].rate == pri.alpha_si.rate + e


def test_prior_mapping():
    pri = PriorSet.from_mapping({"beta": (2.0, 10.0)})
    assert pri.beta.mean == 0.2 and pri.xi is None
    assert PriorSet.from_mapping({"xi": (1.0, 100.0)}).xi.mean == 0.01
    with pytest.raises(ValueError):
        PriorSet.from_mapping({"delta": (1.0, 1.0)})
    with pytest.raises(ValueError):
        GammaDist(0.0, 1.0)


@pytest.fixture(scope="module")
def open_stats():
    params = DEFAULT_PARAMS.with_(beta=0.05, xi=0.003)
    g0, trace = er_run(8, n=100, p=0.1, t_max=60.0, params=params)
    return sufficient_stats(g0, trace, 60.0), params


def test_open_numeric_solver_is_stationary(open_stats):
    s, _ = open_stats
    est = mle_open_numeric(s)
    rest = {k: mp.mpf(v) for k, v in DEFAULT_PARAMS.as_dict().items()}
    with mp.workdps(50):
        beta, kappa = mp.mpf(est["beta"]), mp.mpf(est["kappa"])

        def ll(b, kap):
            return mp_loglik_terms(s, {**rest, "beta": b, "xi": kap * b})

        d_beta = mp.diff(lambda b: ll(b, kappa), beta)
        d_kappa = mp.diff(lambda k: ll(beta, k), kappa)
    assert abs(d_beta) < 1e-8 and abs(d_kappa) < 1e-8
    assert est["xi"] == pytest.approx(est["kappa"] * est["beta"])
    # the float log-likelihood agrees with the reference terms up to a constant
    p = DEFAULT_PARAMS.with_(beta=est["beta"], xi=est["xi"])
    q = DEFAULT_PARAMS.with_(beta=2 * est["beta"], xi=est["xi"] / 3)
    ref = ll(mp.mpf(q.beta), mp.mpf(q.xi) / q.beta) - ll(beta, kappa)
    assert loglik_open(s, q) - loglik_open(s, p) == pytest.approx(float(ref), rel=1e-9)


def test_open_labeled_vs_numeric_close(open_stats):
    s, params = open_stats
    lab, num = mle_open_labeled(s), mle_open_numeric(s)
    assert abs(lab["beta"] - num["beta"]) / lab["beta"] < 0.25


def test_open_numeric_no_root():
    # every infected person had no infectious neighbor: the score never turns negative
    s = SufficientStats(n_e=2, exp_si=1.0, exp_s=5.0, nbr_counts=(0, 0))
    with pytest.raises(NoRoot):
        mle_open_numeric(s)


def test_labeled_requires_labels(rich_stats):
    with pytest.raises(ValueError):
        mle_open_labeled(rich_stats)
