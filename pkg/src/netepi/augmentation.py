"""Imputation of missing recovery times.

Missing recoveries are grouped into disjoint report gaps ``(u, v]``. Given
the recovery rate, the state at ``u`` and the observed events inside the
gap, the recovery times in different gaps are independent, so each gap is
imputed on its own.

Three samplers share one target, independent truncated exponentials
restricted to configurations that leave every infected person with at least
one infectious neighbor at infection time:

* :func:`darci` builds lower bounds from contact information and draws once;
* :func:`reject_impute` proposes unconstrained draws until one is compatible;
* :func:`mh_impute` makes a single proposal and keeps the current state on
  rejection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import DiseaseStatus, Event, EventKind, EventTrace, ProcessState
from .simulator import PartialData


class InconsistentReports(ValueError):
    pass


class NoPossibleInfector(ValueError):
    pass


class DegenerateInterval(ValueError):
    pass


class MaxAttemptsExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class IntervalInfection:
    """An infection inside an imputation interval.

    ``candidates`` are members of the interval's unknown-recovery set who were
    linked to ``person`` and already infectious at ``time``. ``known_source``
    is set when some linked person is known to be infectious at ``time``,
    in which case the infection puts no constraint on the unknown recoveries.
    """

    person: int
    time: float
    candidates: tuple[int, ...] = ()
    known_source: bool = False
    external: bool = False
    known_count: int = 0

    @property
    def constraining(self) -> bool:
        return not (self.known_source or self.external)


@dataclass(frozen=True)
class ImputationInterval:
    u: float
    v: float
    q_set: tuple[int, ...]
    lower: tuple[float, ...]
    infections: tuple[IntervalInfection, ...] = ()
    z_u: ProcessState | None = None
    open_population: bool = False
    local: "LocalTerms | None" = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.u < self.v:
            raise DegenerateInterval(f"interval ({self.u}, {self.v}] is empty")
        if len(self.lower) != len(self.q_set):
            raise ValueError("one lower bound per unknown recovery")
        times = [inf.time for inf in self.infections]
        if times != sorted(times):
            raise ValueError("infections must be in ascending time order")

    @property
    def r_count(self) -> int:
        return len(self.q_set)

    def index(self) -> dict[int, int]:
        return {q: k for k, q in enumerate(self.q_set)}

    def constraints(self) -> list[tuple[float, list[int]]]:
        """``(time, candidate positions)`` for each constraining infection.

        In a closed population an infection with no possible source raises
        :class:`NoPossibleInfector`; in an open population it is treated as
        external.
        """
        pos = self.index()
        out = []
        for inf in self.infections:
            if not inf.constraining:
                continue
            if not inf.candidates:
                if self.open_population:
                    continue
                raise NoPossibleInfector(
                    f"person {inf.person} infected at {inf.time} has no possible infector"
                )
            out.append((inf.time, [pos[q] for q in inf.candidates]))
        return out


def sample_texp(gamma: float, s, t, rng: np.random.Generator, size=None):
    """Exponential(``gamma``) conditioned to ``(s, t)`` by inverse CDF."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s >= t):
        raise DegenerateInterval("truncation interval must satisfy s < t")
    if size is None:
        size = np.broadcast(s, t).shape
    u = rng.random(size)
    width = t - s
    if gamma <= 0:
        x = s + u * width
    else:
        x = s - np.log1p(u * np.expm1(-gamma * width)) / gamma
    # Guard the open support against rounding at the endpoints.
    x = np.clip(x, np.nextafter(s, t), np.nextafter(t, s))
    return x if np.ndim(x) else float(x)


def texp_mean(gamma: float, s: float, t: float) -> float:
    w = t - s
    if gamma <= 0:
        return s + w / 2
    return s + 1 / gamma - w / math.expm1(gamma * w)


def _as_array(interval: ImputationInterval, imputed) -> np.ndarray:
    if isinstance(imputed, dict):
        return np.array([imputed[q] for q in interval.q_set], dtype=float)
    return np.asarray(imputed, dtype=float)


def compatible(interval: ImputationInterval, imputed) -> bool:
    """True when imputed times respect all bounds and infection constraints."""
    try:
        r = _as_array(interval, imputed)
    except KeyError:
        return False
    if r.shape != (interval.r_count,):
        return False
    lower = np.asarray(interval.lower, dtype=float)
    if np.any(r <= lower) or np.any(r > interval.v):
        return False
    try:
        cons = interval.constraints()
    except NoPossibleInfector:
        return False
    return all(np.any(r[idx] > t) for t, idx in cons)


def darci(interval: ImputationInterval, gamma: float, rng: np.random.Generator) -> dict[int, float]:
    """Draw unknown recovery times with contact-derived lower bounds.

    Infections are visited in time order; when every possible source is an
    unknown-recovery person, one of them is picked uniformly and its lower
    bound raised to the infection time. Recovery times are then independent
    truncated exponentials above the lower bounds.
    """
    lb = np.array(interval.lower, dtype=float)
    for t, idx in interval.constraints():
        k = idx[int(rng.random() * len(idx))] if len(idx) > 1 else idx[0]
        if t > lb[k]:
            lb[k] = t
    if not len(lb):
        return {}
    r = sample_texp(gamma, lb, np.full(len(lb), interval.v), rng)
    return dict(zip(interval.q_set, np.atleast_1d(r).tolist()))


def _propose(interval: ImputationInterval, gamma: float, rng: np.random.Generator) -> np.ndarray:
    n = interval.r_count
    return np.atleast_1d(sample_texp(gamma, np.full(n, interval.u), np.full(n, interval.v), rng))


def reject_impute(
    interval: ImputationInterval,
    gamma: float,
    rng: np.random.Generator,
    max_attempts: int = 1_000_000,
    batch: int = 1,
) -> dict[int, float]:
    """Propose iid truncated exponentials on ``(u, v)`` until compatible.

    With ``batch > 1`` proposals are drawn in blocks (doubling up to 4096)
    and the first compatible row is kept, which gives the same law.
    """
    if not interval.r_count:
        return {}
    lower = np.asarray(interval.lower, dtype=float)
    cons = interval.constraints()
    if batch <= 1:
        for _ in range(max_attempts):
            r = _propose(interval, gamma, rng)
            if np.all(r > lower) and all(np.any(r[idx] > t) for t, idx in cons):
                return dict(zip(interval.q_set, r.tolist()))
    else:
        shape_r = interval.r_count
        done = 0
        while done < max_attempts:
            b = min(batch, max_attempts - done)
            r = sample_texp(gamma, np.full((b, shape_r), interval.u), np.full((b, shape_r), interval.v), rng)
            ok = np.all(r > lower, axis=1)
            for t, idx in cons:
                ok &= np.any(r[:, idx] > t, axis=1)
            hit = np.flatnonzero(ok)
            if hit.size:
                return dict(zip(interval.q_set, r[hit[0]].tolist()))
            done += b
            batch = min(2 * batch, 4096)
    raise MaxAttemptsExceeded(
        f"no compatible proposal in {max_attempts} attempts on ({interval.u}, {interval.v}]"
    )


def mh_impute(
    interval: ImputationInterval,
    gamma: float,
    current: dict[int, float],
    rng: np.random.Generator,
) -> dict[int, float]:
    """One independence-proposal step; the acceptance ratio is the compatibility indicator."""
    if not interval.r_count:
        return {}
    r = _propose(interval, gamma, rng)
    if compatible(interval, r):
        return dict(zip(interval.q_set, r.tolist()))
    return current


class LocalTerms:
    """Likelihood terms of one interval that depend on its unknown recovery times.

    Covers the infection hazard over S-I links, link exposures and link event
    classes for links touching the unknown-recovery set, the all-pairs link
    capacity through the infectious count, and the number of infectious
    neighbors at each infection. Terms that do not depend on the recovery
    times are left out, so only differences are meaningful. The recovery
    rate part is excluded as well; it is the truncated exponential factor.
    """

    def __init__(self, u, v, n, i_base, step_t, step_d, q_start, spells, links, infections):
        self.u, self.v, self.n = u, v, n
        self.i_base = i_base
        self.step_t = np.asarray(step_t, dtype=float)
        self.step_d = np.asarray(step_d, dtype=float)
        self.q_start = np.asarray(q_start, dtype=float)
        # column arrays: start, end, then (inf, fixed end, position in q_set) per endpoint
        self.spells = spells
        # column arrays: time, is-activation, then endpoints as for spells
        self.links = links
        # (time, known infectious neighbors, candidate positions) per infection
        self.infections = infections

    @classmethod
    def build(cls, u, v, k, q_set, active, gap_events, infections, hist) -> "LocalTerms":
        pos = {q: i for i, q in enumerate(q_set)}
        n = len(hist.inf)

        def rec_eff(x):
            g = hist.miss_gap[x]
            if g >= 0:
                return u if g < k else math.inf
            return hist.known_rec[x]

        def endpoint(x):
            return (hist.inf[x], math.nan if x in pos else rec_eff(x), pos.get(x, -1))

        in_q = set(q_set)
        i_base = sum(
            1 for x in range(n) if x not in in_q and hist.inf[x] <= u < rec_eff(x)
        )
        step_t, step_d = [], []
        opened = {pair: u for pair in active}
        spells, links = [], []
        for e in gap_events:
            if e.kind is EventKind.INFECTION and e.p1 not in in_q:
                step_t.append(e.time)
                step_d.append(1.0)
            elif e.kind is EventKind.RECOVERY:
                step_t.append(e.time)
                step_d.append(-1.0)
            elif e.kind.is_network and (e.p1 in in_q or e.p2 in in_q):
                links.append((e.time, e.kind is EventKind.LINK_ON, *endpoint(e.p1), *endpoint(e.p2)))
                if e.kind is EventKind.LINK_ON:
                    opened[e.pair] = e.time
                else:
                    spells.append((opened.pop(e.pair), e.time, *endpoint(e.p1), *endpoint(e.p2)))
        for (a, b), t in opened.items():
            spells.append((t, v, *endpoint(a), *endpoint(b)))
        q_start = [max(u, hist.inf[q]) for q in q_set]
        infs = [
            (x.time, x.known_count, np.array([pos[c] for c in x.candidates], dtype=np.int64))
            for x in infections
        ]
        return cls(
            u, v, n, i_base, step_t, step_d, q_start, _columns(spells, 8), _columns(links, 8), infs
        )

    def loglik(self, r: np.ndarray, params) -> float:
        r = np.asarray(r, dtype=float)
        u, v = self.u, self.v
        # infectious count I(t) on (u, v] and the all-pairs link capacity
        times = np.concatenate([self.step_t, self.q_start, r])
        steps = np.concatenate([self.step_d, np.ones(len(r)), -np.ones(len(r))])
        order = np.argsort(times, kind="stable")
        edges = np.concatenate([[u], times[order], [v]])
        i_seg = self.i_base + np.concatenate([[0.0], np.cumsum(steps[order])])
        dur = np.diff(edges)
        h_seg = self.n - i_seg
        mmax = np.array([
            np.sum(h_seg * (h_seg - 1) / 2 * dur),
            np.sum(h_seg * i_seg * dur),
            np.sum(i_seg * (i_seg - 1) / 2 * dur),
        ])
        alpha, omega = params.alpha, params.omega
        ll = -float(alpha @ mmax)

        sp = self.spells
        if len(sp[0]):
            s0, s1 = sp[0], sp[1]
            ia, ra = sp[2], np.where(sp[4] >= 0, r[np.maximum(sp[4], 0).astype(np.int64)], sp[3])
            ib, rb = sp[5], np.where(sp[7] >= 0, r[np.maximum(sp[7], 0).astype(np.int64)], sp[6])
            len_a = _ov(np.maximum(s0, ia), np.minimum(s1, ra))
            len_b = _ov(np.maximum(s0, ib), np.minimum(s1, rb))
            both = _ov(np.maximum(s0, np.maximum(ia, ib)), np.minimum(s1, np.minimum(ra, rb)))
            si = _ov(np.maximum(s0, ia), np.minimum(s1, np.minimum(ra, ib))) + _ov(
                np.maximum(s0, ib), np.minimum(s1, np.minimum(rb, ia))
            )
            m_ii = both.sum()
            m_hi = (len_a + len_b).sum() - 2 * m_ii
            m_hh = (s1 - s0).sum() - m_hi - m_ii
            m = np.array([m_hh, m_hi, m_ii])
            ll += float((alpha - omega) @ m) - params.beta * float(si.sum())

        ev = self.links
        if len(ev[0]):
            t = ev[0]
            on = ev[1].astype(bool)
            ra = np.where(ev[4] >= 0, r[np.maximum(ev[4], 0).astype(np.int64)], ev[3])
            rb = np.where(ev[7] >= 0, r[np.maximum(ev[7], 0).astype(np.int64)], ev[6])
            cls = ((ev[2] < t) & (t < ra)).astype(np.int64) + ((ev[5] < t) & (t < rb))
            ll += float(np.sum(np.log(alpha[cls[on]])) + np.sum(np.log(omega[cls[~on]])))

        for t, known, cand in self.infections:
            count = known + np.count_nonzero(r[cand] > t)
            if count == 0:
                return -math.inf
            ll += math.log(count)
        return ll


def _ov(lo, hi):
    return np.clip(hi - lo, 0.0, None)


def _columns(rows, width: int) -> list[np.ndarray]:
    if not rows:
        return [np.zeros(0) for _ in range(width)]
    return [np.array(col, dtype=float) for col in zip(*rows)]


@dataclass
class _PersonHistory:
    inf: np.ndarray
    known_rec: np.ndarray
    miss_gap: np.ndarray


def _gap_index(times: np.ndarray, t: float) -> int:
    """Index ``k`` with ``t`` in ``(times[k], times[k+1]]``."""
    return int(np.searchsorted(times, t, side="left")) - 1


def extract_intervals(partial: PartialData) -> list[ImputationInterval]:
    """Group the missing recoveries of ``partial`` into report-gap intervals.

    Raises:
        InconsistentReports: if reports contradict the observed events.
    """
    g0, times, reports = partial.g0, partial.report_times, partial.reports
    n = g0.n
    if times[0] > g0.time or times[-1] < partial.t_max:
        raise InconsistentReports("status reports must cover the observation horizon")
    events = list(partial.events)
    labels = partial.events.infection_labels()

    inf = np.full(n, np.inf)
    known_rec = np.full(n, np.inf)
    for p, s in enumerate(g0.statuses):
        if s is DiseaseStatus.I:
            inf[p] = g0.time
        elif s is DiseaseStatus.R:
            inf[p] = known_rec[p] = g0.time - 1.0
    n_gaps = len(times) - 1
    inf_gap = np.full(n, -2, dtype=np.int64)
    rec_gap = np.full(n, -2, dtype=np.int64)
    for e in events:
        if e.kind is EventKind.INFECTION:
            if np.isfinite(inf[e.p1]):
                raise InconsistentReports(f"person {e.p1} infected twice")
            inf[e.p1] = e.time
            inf_gap[e.p1] = _gap_index(times, e.time)
        elif e.kind is EventKind.RECOVERY:
            known_rec[e.p1] = e.time
            rec_gap[e.p1] = _gap_index(times, e.time)

    miss_gap = np.full(n, -1, dtype=np.int64)
    for k in range(n_gaps):
        ill_u, ill_v = reports[k], reports[k + 1]
        inf_in = inf_gap == k
        rec_in = rec_gap == k
        start_ill = ill_u | inf_in
        bad = (ill_u & inf_in) | (rec_in & ~start_ill) | (ill_v & ~start_ill) | (ill_v & rec_in)
        if np.any(bad):
            p = int(np.flatnonzero(bad)[0])
            raise InconsistentReports(
                f"person {p}: reports at {times[k]} and {times[k + 1]} contradict observed events"
            )
        miss = start_ill & ~ill_v & ~rec_in
        miss_gap[miss] = k
    hist = _PersonHistory(inf, known_rec, miss_gap)

    gaps = sorted(set(int(k) for k in miss_gap if k >= 0))
    if not gaps:
        return []

    adj: list[set[int]] = [set() for _ in range(n)]
    for a, b in g0.edges:
        adj[a].add(b)
        adj[b].add(a)
    out = []
    j = 0
    for k in gaps:
        u, v = float(times[k]), float(times[k + 1])
        while j < len(events) and events[j].time <= u:
            _apply_link(adj, events[j])
            j += 1
        z_u = _state_at(u, hist, reports[k], adj)
        q_set = tuple(int(p) for p in np.flatnonzero(miss_gap == k))
        in_q = set(q_set)
        lower = tuple(float(max(u, inf[q])) for q in q_set)
        active = {(min(q, x), max(q, x)) for q in q_set for x in adj[q]}
        infs = []
        gap_events = []
        while j < len(events) and events[j].time <= v:
            e = events[j]
            if e.kind is EventKind.INFECTION:
                infs.append(_classify_infection(e.p1, e.time, k, adj, in_q, hist, labels))
            gap_events.append(e)
            _apply_link(adj, e)
            j += 1
        local = None
        if not partial.open_population:
            local = LocalTerms.build(u, v, k, q_set, active, gap_events, infs, hist)
        out.append(
            ImputationInterval(
                u=u,
                v=v,
                q_set=q_set,
                lower=lower,
                infections=tuple(infs),
                z_u=z_u,
                open_population=partial.open_population,
                local=local,
            )
        )
    return out


def _apply_link(adj: list[set[int]], e) -> None:
    if e.kind is EventKind.LINK_ON:
        adj[e.p1].add(e.p2)
        adj[e.p2].add(e.p1)
    elif e.kind is EventKind.LINK_OFF:
        adj[e.p1].discard(e.p2)
        adj[e.p2].discard(e.p1)


def _state_at(u: float, hist: _PersonHistory, ill: np.ndarray, adj) -> ProcessState:
    statuses = []
    for p in range(len(ill)):
        if ill[p]:
            statuses.append(DiseaseStatus.I)
        elif hist.inf[p] < u:
            statuses.append(DiseaseStatus.R)
        else:
            statuses.append(DiseaseStatus.S)
    edges = frozenset((a, b) for a in range(len(adj)) for b in adj[a] if a < b)
    return ProcessState(u, tuple(statuses), edges)


def _classify_infection(p, t, k, adj, in_q, hist: _PersonHistory, labels) -> IntervalInfection:
    candidates = []
    known = 0
    for x in sorted(adj[p]):
        if not hist.inf[x] < t:
            continue
        if x in in_q:
            candidates.append(x)
        elif hist.miss_gap[x] >= 0:
            known += hist.miss_gap[x] > k
        elif hist.known_rec[x] > t:
            known += 1
    return IntervalInfection(
        person=p,
        time=t,
        candidates=tuple(candidates),
        known_source=known > 0,
        external=bool(labels.get((p, t), False)),
        known_count=known,
    )


def fill_recoveries(partial: PartialData, imputed: dict[int, float]) -> EventTrace:
    """The observed trace with imputed recovery events merged in time order."""
    rec = [Event(float(t), EventKind.RECOVERY, int(q)) for q, t in imputed.items()]
    events = sorted([*partial.events, *rec], key=lambda e: e.time)
    return EventTrace(tuple(events), partial.events.external)
