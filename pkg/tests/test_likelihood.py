import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from netepi.core import DEFAULT_PARAMS, ProcessState
from netepi.likelihood import (
    InvalidTrace,
    SpellData,
    epidemic_windows,
    infection_exposure,
    loglik_open,
    loglik_sir,
    loglik_sis,
    sufficient_stats,
)

from conftest import INF, REC, er_run, ev
from oracles import naive_loglik, naive_stats

EPIDEMIC = DEFAULT_PARAMS.with_(beta=0.25, gamma=0.2)


def test_tiny_trace_by_hand(tiny):
    # Worked out by hand, segment by segment, for the fixture trace.
    g0, trace, t_max = tiny
    s = sufficient_stats(g0, trace, t_max)
    assert (s.n_e, s.n_r, s.c, s.d) == (2, 2, (0, 1, 0), (0, 0, 1))
    assert s.exp_si == pytest.approx(6.5)
    assert s.exp_i == pytest.approx(9.0)
    assert s.exp_s == pytest.approx(11.0)
    assert s.exp_m == pytest.approx((8.0, 7.5, 2.0))
    assert s.exp_md == pytest.approx((4.0, 13.5, 1.0))
    assert s.log_nbr == pytest.approx(0.0)
    assert s.log_class == pytest.approx(math.log(3))


def _compare(s, ref):
    assert (s.n_e, s.n_r) == (ref["n_e"], ref["n_r"])
    assert list(s.c) == ref["c"] and list(s.d) == ref["d"]
    for key in ("exp_si", "exp_i", "exp_s"):
        assert getattr(s, key) == pytest.approx(ref[key], rel=1e-12, abs=1e-9)
    assert np.allclose(s.exp_m, ref["exp_m"], rtol=1e-12, atol=1e-9)
    assert np.allclose(s.exp_md, ref["exp_md"], rtol=1e-12, atol=1e-9)


@given(st.integers(0, 10_000))
def test_replay_statistics_match_bruteforce(seed):
    g0, trace = er_run(seed, n=12, p=0.25, t_max=12.0, params=EPIDEMIC)
    s = sufficient_stats(g0, trace, 12.0)
    ref = naive_stats(g0, trace, 12.0)
    _compare(s, ref)
    assert s.log_nbr == pytest.approx(ref["log_nbr"], abs=1e-12)
    assert s.log_class == pytest.approx(ref["log_class"], abs=1e-9)
    assert loglik_sir(s, EPIDEMIC) == pytest.approx(naive_loglik(g0, trace, 12.0, EPIDEMIC), rel=1e-12)


@given(st.integers(0, 10_000))
def test_spell_route_matches_replay(seed):
    g0, trace = er_run(seed, n=15, p=0.2, t_max=15.0, params=EPIDEMIC)
    events = list(trace)
    inf, rec = epidemic_windows(g0, events)
    n_e = sum(e.kind is INF for e in events)
    fast = SpellData.from_events(g0, events, 15.0).stats(inf, rec, n_e)
    _compare(fast, naive_stats(g0, trace, 15.0))


@given(st.integers(0, 10_000))
def test_sis_equals_relabeled_sir(seed):
    g0, trace = er_run(seed, n=12, p=0.25, t_max=15.0, params=EPIDEMIC, variant="sis")
    s = sufficient_stats(g0, trace, 15.0, variant="sis")
    ref = naive_loglik(g0, trace, 15.0, EPIDEMIC, sis=True)
    assert abs(loglik_sis(s, EPIDEMIC) - ref) <= 1e-12 * max(1.0, abs(ref))


def test_sis_without_recoveries_equals_sir():
    g0, trace = er_run(3, n=12, p=0.25, t_max=15.0, params=EPIDEMIC.with_(gamma=0.0))
    a = sufficient_stats(g0, trace, 15.0)
    b = sufficient_stats(g0, trace, 15.0, variant="sis")
    assert loglik_sis(b, EPIDEMIC) == loglik_sir(a, EPIDEMIC)
    with pytest.raises(ValueError):
        loglik_sis(a, EPIDEMIC)


def test_open_loglik_reduces_to_closed_when_xi_vanishes():
    g0, trace = er_run(4, n=12, p=0.25, t_max=15.0, params=EPIDEMIC)
    s = sufficient_stats(g0, trace, 15.0, open_population=True)
    assert loglik_open(s, EPIDEMIC.with_(xi=0.0)) == pytest.approx(loglik_sir(s, EPIDEMIC), rel=1e-12)


def test_open_loglik_by_hand():
    # Person 1 infected externally at t=1 with no ill neighbor, person 2 via link at t=2.
    g0 = ProcessState.initial(3, [], [(1, 2)])
    trace = [ev(1.0, INF, 1), ev(2.0, INF, 2)]
    s = sufficient_stats(g0, trace, 3.0, open_population=True)
    p = DEFAULT_PARAMS.with_(beta=0.5, xi=0.1)
    # infection densities xi and beta+xi; S exposure 3+1+2 = 6; SI exposure 1
    expected = math.log(0.1) + math.log(0.6) - 0.1 * 6 - 0.5 * 1
    rest = s.__class__(**{**s.__dict__, "n_e": 0, "log_nbr": 0.0, "exp_si": 0.0, "exp_s": 0.0, "nbr_counts": ()})
    assert loglik_open(s, p) == pytest.approx(expected + loglik_sir(rest, p), rel=1e-12)


def test_closed_replay_rejects_unsupported_infection():
    g0 = ProcessState.initial(3, [0], [])
    with pytest.raises(InvalidTrace):
        sufficient_stats(g0, [ev(1.0, INF, 2)], 2.0)
    with pytest.raises(InvalidTrace):
        sufficient_stats(g0, [ev(2.0, REC, 0), ev(1.0, REC, 0)], 3.0)


def test_stats_pool_additively(tiny):
    g0, trace, t_max = tiny
    s = sufficient_stats(g0, trace, t_max)
    two = s + s
    assert two.n_e == 4 and two.exp_si == pytest.approx(13.0)
    assert loglik_sir(two, EPIDEMIC) == pytest.approx(2 * loglik_sir(s, EPIDEMIC))


def test_infection_exposure_static_and_mixing_by_hand():
    # 0 ill from the start, pair (0,1) linked at 0 then dropped at 1; 1 infected at 2 (open).
    g0 = ProcessState.initial(3, [0], [(0, 1)])
    trace = [ev(1.0, INF, 2), ev(2.0, INF, 1)]
    k, e = infection_exposure(g0, trace, 3.0, "static")
    # static: link (0,1) is S-I until 1 is infected at 2
    assert (k, e) == (2, pytest.approx(2.0))
    k, e = infection_exposure(g0, trace, 3.0, "mixing")
    # S*I: 2*1 on (0,1], 1*2 on (1,2], 0 afterwards
    assert (k, e) == (2, pytest.approx(4.0))
    with pytest.raises(ValueError):
        infection_exposure(g0, trace, 3.0, "other")
