import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from netepi.core import Event, EventKind, validate_trace
from netepi.ingest import (
    MINUTE,
    ContactPing,
    IliCases,
    MissingOnset,
    SurveyRow,
    _episode_weeks,
    contact_spells,
    filter_pings,
    ili_cases,
    ingest_period,
    label_infections,
    merge_contacts,
    synthetic_study,
)
from netepi.simulator import make_rng

ON, OFF = EventKind.LINK_ON, EventKind.LINK_OFF


def ping(minutes, a=0, b=1, rssi=-60):
    return ContactPing(minutes * MINUTE, a, b, rssi)


def test_rssi_filter_is_strict():
    kept = filter_pings([ping(0, rssi=-90), ping(1, rssi=-89), ping(2, rssi=-95)])
    assert [p.rssi for p in kept] == [-89]


def test_spells_split_only_on_gaps_longer_than_threshold():
    pings = [ping(m) for m in (0, 5, 12.5, 30, 35)] + [ping(3, 1, 2)]
    spells = contact_spells(pings, gap=7.5)
    got = [(round(s / MINUTE, 6), round(e / MINUTE, 6)) for s, e in spells[(0, 1)]]
    assert got == [(0, 12.5), (30, 35)]
    assert len(spells[(1, 2)]) == 1


def test_link_off_falls_in_jitter_window():
    pings = [ping(m) for m in (0, 5, 100, 105)]
    ev = merge_contacts(pings, make_rng(0))
    assert [e.kind for e in ev] == [ON, OFF, ON, OFF]
    assert 6 <= ev[1].time / MINUTE <= 11
    assert 106 <= ev[3].time / MINUTE <= 111


def test_off_time_redrawn_before_next_contact():
    # next contact starts 8 minutes after the last ping: jitter up to 6 is fine,
    # but with a (7, 20) minute jitter every off time must be redrawn
    pings = [ping(0), ping(8 + 7.6)]
    for seed in range(50):
        ev = merge_contacts(pings, make_rng(seed), jitter=(7.0, 20.0))
        assert [e.kind for e in ev] == [ON, OFF, ON, OFF]
        assert 0 < ev[1].time < ev[2].time


@given(st.lists(st.tuples(st.floats(0, 3000), st.integers(0, 3)), min_size=1, max_size=60), st.integers(0, 99))
def test_merged_links_alternate_per_pair(raw, seed):
    pings = [ContactPing(m * MINUTE, 0, 1 + k, -50) for m, k in raw]
    ev = merge_contacts(pings, make_rng(seed))
    assert [e.time for e in ev] == sorted(e.time for e in ev)
    state = {}
    for e in ev:
        assert state.get(e.pair, False) == (e.kind is OFF)
        state[e.pair] = e.kind is ON
    assert not any(state.values())


def test_ili_definition():
    assert SurveyRow(0, 0, True, frozenset({"cough", "fever"}), 1.0).ili
    assert not SurveyRow(0, 0, True, frozenset({"cough"}), 1.0).ili
    assert not SurveyRow(0, 0, False, frozenset({"cough", "chills"}), 1.0).ili
    assert not SurveyRow(0, 0, True, frozenset({"fever", "chills"}), 1.0).ili
    with pytest.raises(ValueError):
        SurveyRow(0, 0, True, frozenset(), 1.0)


def test_episode_bridges_one_healthy_week():
    assert _episode_weeks([1, 2, 4]) == [1, 2, 4]
    assert _episode_weeks([1, 4, 5]) == [1]


def test_reports_from_one_case_by_hand():
    rows = [SurveyRow(2, w, True, frozenset({"cough", "fever"}), 8.0) for w in (1, 2)]
    rows.append(SurveyRow(1, 0, True, frozenset({"cough"}), 1.0))
    c = ili_cases(rows, 3, 28.0, make_rng(0))
    assert c.report_times.tolist() == [0, 7, 14, 21, 28]
    assert 5.0 <= c.infection[2] <= 8.0 and c.onset[2] == 8.0
    assert c.ill_until[2] == 21.0
    assert c.reports[:, 2].tolist() == [False, c.infection[2] < 7.0, True, False, False]
    assert not c.reports[:, [0, 1]].any()


def test_case_lasting_to_period_end_and_initial_case():
    ill = frozenset({"cough", "chills"})
    rows = [SurveyRow(0, w, True, ill, 22.0) for w in (3,)] + [SurveyRow(1, 0, True, ill, -1.0)]
    c = ili_cases(rows, 2, 28.0, make_rng(0))
    assert c.reports[:, 0].tolist() == [False, False, False, False, True]
    assert c.initially_ill == [1] and c.reports[0, 1]


def test_missing_onset_is_an_error():
    with pytest.raises(MissingOnset):
        ili_cases([SurveyRow(0, 0, True, frozenset({"cough", "fever"}))], 1, 7.0, make_rng(0))


def _cases(**kw):
    return IliCases(
        infection=kw["infection"], onset=kw["onset"], ill_until=kw["ill_until"],
        report_times=np.array([0.0]), reports=np.zeros((1, 3), bool),
    )


def test_internal_needs_contact_with_an_ill_person_shortly_before_onset():
    cases = _cases(infection={0: 2.0, 1: 9.0}, onset={0: 3.0, 1: 10.0}, ill_until={0: 14.0, 1: 21.0})
    near = [Event(8.0, ON, 0, 1), Event(8.5, OFF, 0, 1)]
    early = [Event(1.0, ON, 0, 1), Event(1.5, OFF, 0, 1)]
    assert label_infections(near, cases) == {0: True, 1: False}
    assert label_infections(early, cases) == {0: True, 1: True}
    assert label_infections([], cases, window=3.0)[1] is True


@pytest.fixture(scope="module")
def study():
    return synthetic_study(seed=0)


def test_synthetic_study_shape(study):
    assert [p.t_max for p in study] == [31.0, 28.0]
    for p in study:
        assert {r.person for r in p.surveys} == set(range(103))
        assert all(0 <= q.time <= p.t_max and q.p1 < q.p2 for q in p.pings)
        assert any(q.rssi <= -90 for q in p.pings)


def test_ingested_period_is_valid_open_population_data(study):
    p = study[0]
    res = ingest_period(p.pings, p.surveys, 103, p.t_max, seed=4)
    pd = res.partial
    assert pd.open_population
    assert validate_trace(pd.g0, pd.events, t_max=pd.t_max, open_population=True)
    prov = res.provenance
    assert prov["pings_kept"] < prov["pings_in"]
    assert prov["internal"] + prov["external"] == pd.events.count(EventKind.INFECTION)
    assert prov["cases"] == prov["internal"] + prov["external"] + prov["initially_ill"]
    again = ingest_period(p.pings, p.surveys, 103, p.t_max, seed=4).partial
    assert again.events == pd.events
    other = ingest_period(p.pings, p.surveys, 103, p.t_max, seed=5).partial
    assert other.events != pd.events


def test_equal_times_are_separated():
    pings = [ping(0, 0, 1), ping(0, 0, 2), ping(0, 1, 2)]
    res = ingest_period(pings, [], 3, 1.0, seed=0)
    times = [e.time for e in res.partial.events]
    assert len(set(times)) == len(times) and res.provenance["tie_jitters"] == 2
