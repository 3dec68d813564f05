"""Turn proximity pings and weekly symptom surveys into traces and reports.

Times are in days from the start of an observation period. Ping gaps and
termination jitter are given in minutes.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import Event, EventKind, EventTrace, ModelParams, ProcessState
from .simulator import PartialData, SimConfig, make_rng, simulate

MINUTE = 1.0 / 1440.0
TIE_STEP = 1e-9
ILI_COMPANIONS = frozenset({"fever", "feverishness", "chills", "body_aches"})


class MissingOnset(ValueError):
    pass


@dataclass(frozen=True, order=True)
class ContactPing:
    time: float
    p1: int
    p2: int
    rssi: int

    def __post_init__(self):
        if not self.p1 < self.p2:
            raise ValueError(f"ping pair must satisfy p1 < p2, got ({self.p1}, {self.p2})")


@dataclass(frozen=True)
class SurveyRow:
    person: int
    week: int
    felt_ill: bool
    symptoms: frozenset[str] = frozenset()
    onset: float | None = None

    def __post_init__(self):
        if self.onset is not None and not self.symptoms:
            raise ValueError(f"person {self.person} week {self.week}: onset without symptoms")

    @property
    def ili(self) -> bool:
        return self.felt_ill and "cough" in self.symptoms and bool(self.symptoms & ILI_COMPANIONS)


def filter_pings(pings: Iterable[ContactPing], rssi_min: int = -90) -> list[ContactPing]:
    """Keep pings strictly stronger than ``rssi_min``."""
    return [p for p in pings if p.rssi > rssi_min]


def _by_pair(pings: Iterable[ContactPing]) -> dict[tuple[int, int], list[float]]:
    pairs: dict[tuple[int, int], list[float]] = defaultdict(list)
    for p in pings:
        pairs[(p.p1, p.p2)].append(p.time)
    for times in pairs.values():
        times.sort()
    return pairs


def contact_spells(
    pings: Iterable[ContactPing], gap: float = 7.5
) -> dict[tuple[int, int], list[tuple[float, float]]]:
    """Per pair, the (first ping, last ping) of each run of pings at most ``gap`` minutes apart."""
    out = {}
    for pair, times in _by_pair(pings).items():
        spells = []
        start = prev = times[0]
        for t in times[1:]:
            if t - prev > gap * MINUTE:
                spells.append((start, prev))
                start = t
            prev = t
        spells.append((start, prev))
        out[pair] = spells
    return out


def merge_contacts(
    pings: Iterable[ContactPing],
    rng: np.random.Generator,
    gap: float = 7.5,
    jitter: tuple[float, float] = (1.0, 6.0),
) -> list[Event]:
    """Link events from pings: on at a contact's first ping, off a random
    ``jitter`` minutes after its last.

    An off time that would reach the pair's next contact is redrawn
    uniformly between the last ping and that contact's start.
    """
    lo, hi = jitter[0] * MINUTE, jitter[1] * MINUTE
    events = []
    for (a, b), spells in sorted(contact_spells(pings, gap).items()):
        for k, (start, last) in enumerate(spells):
            off = last + rng.uniform(lo, hi)
            if k + 1 < len(spells) and off >= spells[k + 1][0]:
                nxt = spells[k + 1][0]
                off = last + (nxt - last) * rng.uniform(0.0, 1.0)
                if not last < off < nxt:
                    off = 0.5 * (last + nxt)
            events.append(Event(start, EventKind.LINK_ON, a, b))
            events.append(Event(off, EventKind.LINK_OFF, a, b))
    events.sort(key=lambda e: (e.time, e.p1, e.p2 or -1))
    return events


@dataclass
class IliCases:
    """Infection times, onsets and weekly reports derived from surveys.

    ``ill_until[p]`` is the end of the last reported ill week of ``p``'s
    episode; persons with ``infection <= 0`` were already ill at the start.
    """

    infection: dict[int, float]
    onset: dict[int, float]
    ill_until: dict[int, float]
    report_times: np.ndarray
    reports: np.ndarray

    @property
    def initially_ill(self) -> list[int]:
        return sorted(p for p, t in self.infection.items() if t <= 0)


def _episode_weeks(ill_weeks: Sequence[int]) -> list[int]:
    """Weeks of the first episode; one healthy week between ill weeks is bridged."""
    weeks = [ill_weeks[0]]
    for w in ill_weeks[1:]:
        if w - weeks[-1] > 2:
            break
        weeks.append(w)
    return weeks


def ili_cases(
    surveys: Iterable[SurveyRow],
    n: int,
    t_max: float,
    rng: np.random.Generator,
    delay: tuple[float, float] = (0.0, 3.0),
    week_len: float = 7.0,
) -> IliCases:
    """Apply the ILI case definition and build weekly ill/healthy reports.

    Only a person's first episode in the period counts. The infection time is
    the onset minus a uniform ``delay`` in days. A person is reported ill at
    report time ``t`` when infected before ``t`` and ``t`` is no later than
    the start of the episode's last ill week, or when the episode lasts to
    the end of the period.

    Raises:
        MissingOnset: for an ILI-positive row without an onset date.
    """
    rows = sorted(surveys, key=lambda r: (r.person, r.week))
    ill_weeks: dict[int, list[int]] = defaultdict(list)
    onsets: dict[int, dict[int, float]] = defaultdict(dict)
    for r in rows:
        if not r.ili:
            continue
        if r.onset is None:
            raise MissingOnset(f"person {r.person} week {r.week}: ILI without onset date")
        ill_weeks[r.person].append(r.week)
        onsets[r.person][r.week] = r.onset
    n_weeks = math.ceil(t_max / week_len)
    times = np.append(np.arange(0.0, t_max, week_len), t_max)
    times = np.unique(times)
    reports = np.zeros((len(times), n), dtype=bool)
    infection, onset, ill_until = {}, {}, {}
    for p in sorted(ill_weeks):
        weeks = _episode_weeks(ill_weeks[p])
        first = weeks[0]
        onset[p] = onsets[p][first]
        infection[p] = onset[p] - rng.uniform(*delay)
        last = weeks[-1]
        to_end = last >= n_weeks - 1
        ill_until[p] = t_max if to_end else min((last + 1) * week_len, t_max)
        cutoff = t_max if to_end else last * week_len
        start = infection[p]
        ill = (times > start) & (times <= cutoff)
        if start <= 0:
            ill[0] = True
        reports[:, p] = ill
    return IliCases(infection, onset, ill_until, times, reports)


def link_spells(events: Iterable[Event]) -> dict[tuple[int, int], list[tuple[float, float]]]:
    open_at: dict[tuple[int, int], float] = {}
    out: dict[tuple[int, int], list[tuple[float, float]]] = defaultdict(list)
    for e in events:
        if e.kind is EventKind.LINK_ON:
            open_at[e.pair] = e.time
        elif e.kind is EventKind.LINK_OFF:
            out[e.pair].append((open_at.pop(e.pair, -math.inf), e.time))
    for pair, t in open_at.items():
        out[pair].append((t, math.inf))
    return out


def label_infections(
    link_events: Iterable[Event], cases: IliCases, window: float = 3.0
) -> dict[int, bool]:
    """``True`` (external) unless the person was linked to someone ill within
    ``window`` days before their own onset."""
    spells = link_spells(link_events)
    neighbors: dict[int, list[tuple[int, float, float]]] = defaultdict(list)
    for (a, b), ss in spells.items():
        for s, e in ss:
            neighbors[a].append((b, s, e))
            neighbors[b].append((a, s, e))
    external = {}
    for p, inf in cases.infection.items():
        if inf <= 0:
            continue
        hi = cases.onset[p]
        lo = hi - window
        internal = False
        for x, s, e in neighbors[p]:
            if x not in cases.infection or x == p:
                continue
            start = max(lo, s, cases.infection[x])
            end = min(hi, e, cases.ill_until[x])
            if start < end:
                internal = True
                break
        external[p] = not internal
    return external


@dataclass
class IngestResult:
    partial: PartialData
    provenance: dict = field(default_factory=dict)


def _break_ties(events: list[Event]) -> tuple[list[Event], int]:
    out, moved, prev = [], 0, -math.inf
    for e in events:
        t = e.time
        if t <= prev:
            t = prev + TIE_STEP
            moved += 1
        out.append(Event(t, e.kind, e.p1, e.p2))
        prev = t
    return out, moved


def ingest_period(
    pings: Iterable[ContactPing],
    surveys: Iterable[SurveyRow],
    n: int,
    t_max: float,
    seed: int,
    rssi_min: int = -90,
    gap: float = 7.5,
    jitter: tuple[float, float] = (1.0, 6.0),
    delay: tuple[float, float] = (0.0, 3.0),
    window: float = 3.0,
) -> IngestResult:
    """Full preprocessing of one observation period into open-population partial data."""
    rng = make_rng(seed)
    pings = list(pings)
    kept = filter_pings(pings, rssi_min)
    links = merge_contacts(kept, rng, gap=gap, jitter=jitter)
    cases = ili_cases(surveys, n, t_max, rng, delay=delay)
    labels = label_infections(links, cases, window)
    infections = [
        Event(t, EventKind.INFECTION, p) for p, t in cases.infection.items() if t > 0
    ]
    merged = sorted(links + infections, key=lambda e: (e.time, e.kind.value, e.p1, e.p2 or -1))
    merged, moved = _break_ties(merged)
    merged = [e for e in merged if 0 < e.time <= t_max]
    ext = tuple(labels[e.p1] for e in merged if e.kind is EventKind.INFECTION)
    g0 = ProcessState.initial(n, cases.initially_ill, ())
    partial = PartialData(
        g0=g0,
        events=EventTrace(tuple(merged), ext),
        report_times=cases.report_times,
        reports=cases.reports,
        t_max=float(t_max),
        open_population=True,
    )
    provenance = {
        "seed": seed,
        "pings_in": len(pings),
        "pings_kept": len(kept),
        "contacts": sum(e.kind is EventKind.LINK_ON for e in links),
        "cases": len(cases.infection),
        "initially_ill": len(cases.initially_ill),
        "internal": sum(not x for x in ext),
        "external": sum(ext),
        "tie_jitters": moved,
    }
    return IngestResult(partial, provenance)


STUDY_PARAMS = ModelParams(
    beta=0.07,
    gamma=0.29,
    alpha_ss=0.05,
    alpha_si=0.13,
    alpha_ii=0.13,
    omega_ss=38.0,
    omega_si=53.0,
    omega_ii=53.0,
    xi=0.0033,
)
SYMPTOMS = ("cough", "fever", "chills", "body_aches", "sore_throat", "runny_nose")


@dataclass
class SyntheticPeriod:
    pings: list[ContactPing]
    surveys: list[SurveyRow]
    t_max: float
    truth_trace: EventTrace


def synthetic_study(
    n: int = 103,
    periods: Sequence[float] = (31.0, 28.0),
    initially_ill: Sequence[int] = (2, 1),
    params: ModelParams = STUDY_PARAMS,
    seed: int = 0,
    ping_every: float = 5.0,
    noise_rows: float = 0.02,
) -> list[SyntheticPeriod]:
    """Raw ping logs and survey tables generated from simulated open-population epidemics.

    Each link spell yields pings on a five-minute grid with a per-pair phase;
    spurious weak pings are mixed in. Each infection yields ILI survey rows
    for the weeks its symptomatic period overlaps, with the onset a uniform
    0 to 3 days after infection. A few non-ILI rows are added as noise.
    """
    out = []
    for k, t_max in enumerate(periods):
        rng = make_rng(seed * 1000 + k)
        g0 = ProcessState.initial(n, [], ())
        i0 = initially_ill[k] if k < len(initially_ill) else 0
        g, trace = simulate(SimConfig(g0, params, t_max, seed * 1000 + k, i0=i0))
        pings = _pings_from_trace(trace, t_max, rng, ping_every)
        surveys = _surveys_from_trace(g, trace, n, t_max, rng, noise_rows)
        out.append(SyntheticPeriod(pings, surveys, t_max, trace))
    return out


def _pings_from_trace(trace, t_max, rng, every) -> list[ContactPing]:
    step = every * MINUTE
    phase: dict[tuple[int, int], float] = {}
    pings = []
    for (a, b), spells in link_spells(trace).items():
        ph = phase.setdefault((a, b), rng.uniform(0, step))
        for s, e in spells:
            e = min(e, t_max)
            first = ph + math.ceil((s - ph) / step) * step
            for t in np.arange(first, e, step):
                pings.append(ContactPing(float(t), a, b, int(rng.integers(-89, 7))))
    n_noise = len(pings) // 20
    n = max((max(p.p2 for p in pings) + 1) if pings else 2, 2)
    for _ in range(n_noise):
        a, b = sorted(rng.choice(n, 2, replace=False).tolist())
        pings.append(ContactPing(float(rng.uniform(0, t_max)), a, b, int(rng.integers(-109, -89))))
    pings.sort()
    return pings


def _surveys_from_trace(g0, trace, n, t_max, rng, noise_rows) -> list[SurveyRow]:
    inf = {p: -rng.uniform(0.0, 2.0) for p in g0.infectious()}
    rec: dict[int, float] = {}
    for e in trace:
        if e.kind is EventKind.INFECTION:
            inf[e.p1] = e.time
        elif e.kind is EventKind.RECOVERY:
            rec[e.p1] = e.time
    n_weeks = math.ceil(t_max / 7.0)
    rows = []
    for p in range(n):
        ill_weeks: set[int] = set()
        onset = None
        if p in inf:
            onset = inf[p] + (rng.uniform(0.0, 3.0) if inf[p] > 0 else 0.0)
            end = max(rec.get(p, math.inf), onset)
            if onset < t_max:
                first = max(int(math.floor(onset / 7.0)), 0)
                last = min(int(math.floor(min(end, t_max - 1e-9) / 7.0)), n_weeks - 1)
                ill_weeks = set(range(first, last + 1))
        for w in range(n_weeks):
            if w in ill_weeks:
                extra = rng.choice(["fever", "chills", "body_aches"], size=int(rng.integers(1, 3)), replace=False)
                syms = frozenset({"cough", *extra.tolist()})
                rows.append(SurveyRow(p, w, True, syms, onset))
            elif rng.random() < noise_rows:
                # cough-only illness or symptoms without feeling ill: not ILI
                if rng.random() < 0.5:
                    rows.append(SurveyRow(p, w, True, frozenset({"cough"}), 7.0 * w))
                else:
                    rows.append(SurveyRow(p, w, False, frozenset({"cough", "fever"}), 7.0 * w))
            else:
                rows.append(SurveyRow(p, w, False))
    return rows
