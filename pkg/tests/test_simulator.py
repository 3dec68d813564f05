import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from netepi.core import DEFAULT_PARAMS, EventKind, ModelParams, ProcessState, validate_trace
from netepi.simulator import (
    SimConfig,
    erdos_renyi_edges,
    hubnet_edges,
    make_rng,
    report_schedule,
    simulate,
    status_reports,
    synthesize_missingness,
)

from conftest import er_run


def test_same_seed_same_trace_and_different_seed_differs():
    a = er_run(11)
    b = er_run(11)
    c = er_run(12)
    assert a[0] == b[0] and a[1] == b[1]
    assert a[1] != c[1]


@given(st.integers(0, 5000), st.sampled_from(["closed", "open", "sis"]))
def test_traces_are_valid_and_inside_horizon(seed, kind):
    params = DEFAULT_PARAMS.with_(beta=0.2)
    variant = "sis" if kind == "sis" else "sir"
    if kind == "open":
        params = params.with_(xi=0.02)
    g0, trace = er_run(seed, n=20, p=0.15, t_max=20.0, params=params, variant=variant)
    times = [e.time for e in trace]
    assert all(0 < t <= 20.0 for t in times)
    assert validate_trace(g0, trace, t_max=20.0, open_population=kind == "open", variant=variant)
    if kind == "open":
        assert trace.external is not None
    else:
        assert trace.external is None


def test_zero_rates_give_empty_trace():
    g0, trace = er_run(0, params=ModelParams())
    assert len(trace) == 0
    assert sum(s == 1 for s in g0.statuses) == 1


def test_static_network_has_no_link_events():
    params = DEFAULT_PARAMS.with_(alpha_ss=0, alpha_si=0, alpha_ii=0, omega_ss=0, omega_si=0, omega_ii=0)
    for seed in range(10):
        g0, trace = er_run(seed, params=params.with_(beta=0.2))
        assert not any(e.kind.is_network for e in trace)


def test_i0_places_requested_seeds():
    g0 = ProcessState.initial(10, [], [])
    g, _ = simulate(SimConfig(g0, ModelParams(), 1.0, 3, i0=4))
    assert sum(s == 1 for s in g.statuses) == 4
    g, _ = simulate(SimConfig(g0, ModelParams(), 1.0, 3, i0=[2, 7]))
    assert [p for p, s in enumerate(g.statuses) if s == 1] == [2, 7]
    with pytest.raises(ValueError):
        SimConfig(g0, ModelParams(), 1.0, 0, i0=11)
    with pytest.raises(ValueError):
        SimConfig(g0, ModelParams(), 0.0, 0)


def test_graph_generators():
    rng = make_rng(0)
    e = erdos_renyi_edges(200, 0.1, rng)
    assert all(a < b for a, b in e)
    # 19900 pairs, so the edge count is within a few SD of 1990
    assert abs(len(e) - 1990) < 4 * np.sqrt(19900 * 0.09)
    h = hubnet_edges(6, 0.0, rng)
    assert h == [(0, q) for q in range(1, 6)]


def _rate_by_hand(g0: ProcessState, p: ModelParams) -> tuple[float, float]:
    """(total rate, infection rate) counted pair by pair."""
    ill = [s == 1 for s in g0.statuses]
    sus = [s == 0 for s in g0.statuses]
    n = g0.n
    total = infection = 0.0
    for a in range(n):
        total += p.gamma * ill[a]
        for b in range(a + 1, n):
            k = ill[a] + ill[b]
            if (a, b) in g0.edges:
                total += p.omega[k]
                if (ill[a] and sus[b]) or (ill[b] and sus[a]):
                    infection += p.beta
            else:
                total += p.alpha[k]
    return total + infection, infection


def test_first_event_time_and_kind_follow_the_competing_rates():
    """First event time ~ Exp(total); P(infection first) = infection rate / total."""
    n = 8
    g = ProcessState.initial(n, [0, 3], [(0, 1), (0, 2), (1, 2), (3, 4), (5, 6)])
    params = DEFAULT_PARAMS.with_(beta=0.4, alpha_ss=0.05, alpha_si=0.02, alpha_ii=0.1)
    total, infection = _rate_by_hand(g, params)
    firsts, kinds = [], []
    for seed in range(3000):
        _, trace = simulate(SimConfig(g, params, 50.0, seed))
        firsts.append(trace[0].time)
        kinds.append(trace[0].kind is EventKind.INFECTION)
    assert stats.kstest(firsts, "expon", args=(0, 1 / total)).pvalue > 0.001
    assert stats.binomtest(sum(kinds), len(kinds), infection / total).pvalue > 0.001


def test_two_person_race():
    """Infect before recovery with probability beta / (beta + gamma)."""
    g = ProcessState.initial(2, [0], [(0, 1)])
    params = ModelParams(beta=0.3, gamma=0.2)
    wins = 0
    for seed in range(4000):
        _, trace = simulate(SimConfig(g, params, 1e6, seed))
        wins += trace[0].kind is EventKind.INFECTION
    assert stats.binomtest(wins, 4000, 0.6).pvalue > 0.001


def test_report_schedule_ends_at_horizon():
    assert report_schedule(20.0, 7.0).tolist() == [0.0, 7.0, 14.0, 20.0]
    assert report_schedule(14.0, 7.0).tolist() == [0.0, 7.0, 14.0]


def test_missingness_removes_rounded_share_of_recoveries():
    g0, trace = er_run(5, n=60, p=0.1, t_max=40.0, params=DEFAULT_PARAMS.with_(beta=0.1))
    n_rec = trace.count(EventKind.RECOVERY)
    assert n_rec >= 4
    for eta in (0.0, 0.5, 1.0):
        pd = synthesize_missingness(g0, trace, 40.0, eta, 7.0, make_rng(1))
        assert pd.events.count(EventKind.RECOVERY) == n_rec - round(eta * n_rec)
        assert len(pd.truth) == round(eta * n_rec)
        removed = {(e.p1, e.time) for e in trace if e.kind is EventKind.RECOVERY} - {
            (e.p1, e.time) for e in pd.events if e.kind is EventKind.RECOVERY
        }
        assert removed == set(pd.truth.items())
        assert np.array_equal(pd.reports, status_reports(g0, trace, pd.report_times))
    with pytest.raises(ValueError):
        synthesize_missingness(g0, trace, 40.0, 1.5, 7.0, make_rng(1))
