"""Sufficient statistics and complete-data log-likelihoods.

Two independent routes compute the statistics:

* :func:`sufficient_stats` replays the trace event by event and accumulates
  piecewise-constant exposures on the left-limit state. It handles SIR and
  SIS and also produces the parameter-free log terms.
* :class:`SpellData` computes counts and exposures for SIR data from per-edge
  existence spells and per-person infectious windows with numpy. It is what
  the Gibbs sampler calls once per iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.special import xlogy

from .core import (
    DiseaseStatus,
    Event,
    EventKind,
    EventTrace,
    IncompatibleEvent,
    ModelParams,
    ProcessState,
    StateTracker,
    max_links,
)


class InvalidTrace(ValueError):
    pass


@dataclass(frozen=True)
class SufficientStats:
    """Event counts and exposure integrals.

    ``n_e`` counts infection *events*; initially infectious persons are part
    of the initial condition and do not contribute. ``log_nbr`` and
    ``log_class`` are the parameter-free log terms (``nan`` when computed by
    the spell route, which does not need them).
    """

    n_e: int = 0
    n_r: int = 0
    c: tuple[int, int, int] = (0, 0, 0)
    d: tuple[int, int, int] = (0, 0, 0)
    exp_si: float = 0.0
    exp_i: float = 0.0
    exp_s: float = 0.0
    exp_md: tuple[float, float, float] = (0.0, 0.0, 0.0)
    exp_m: tuple[float, float, float] = (0.0, 0.0, 0.0)
    log_nbr: float = 0.0
    log_class: float = 0.0
    nbr_counts: tuple[int, ...] = ()
    n_e_int: int | None = None
    n_e_ext: int | None = None
    t_max: float = 0.0
    variant: str = "sir"

    def __add__(self, other: "SufficientStats") -> "SufficientStats":
        if self.variant != other.variant:
            raise ValueError("cannot pool statistics of different variants")

        def lab(a, b):
            return None if a is None or b is None else a + b

        return SufficientStats(
            n_e=self.n_e + other.n_e,
            n_r=self.n_r + other.n_r,
            c=tuple(a + b for a, b in zip(self.c, other.c)),
            d=tuple(a + b for a, b in zip(self.d, other.d)),
            exp_si=self.exp_si + other.exp_si,
            exp_i=self.exp_i + other.exp_i,
            exp_s=self.exp_s + other.exp_s,
            exp_md=tuple(a + b for a, b in zip(self.exp_md, other.exp_md)),
            exp_m=tuple(a + b for a, b in zip(self.exp_m, other.exp_m)),
            log_nbr=self.log_nbr + other.log_nbr,
            log_class=self.log_class + other.log_class,
            nbr_counts=self.nbr_counts + other.nbr_counts,
            n_e_int=lab(self.n_e_int, other.n_e_int),
            n_e_ext=lab(self.n_e_ext, other.n_e_ext),
            t_max=self.t_max + other.t_max,
            variant=self.variant,
        )

    def counts_and_exposures(self) -> dict[str, tuple[float, float]]:
        """``{param: (event count, exposure)}`` for the eight rate parameters."""
        return {
            "beta": (self.n_e, self.exp_si),
            "gamma": (self.n_r, self.exp_i),
            "alpha_ss": (self.c[0], self.exp_md[0]),
            "alpha_si": (self.c[1], self.exp_md[1]),
            "alpha_ii": (self.c[2], self.exp_md[2]),
            "omega_ss": (self.d[0], self.exp_m[0]),
            "omega_si": (self.d[1], self.exp_m[1]),
            "omega_ii": (self.d[2], self.exp_m[2]),
        }


def sufficient_stats(
    g0: ProcessState,
    trace: EventTrace | Sequence[Event],
    t_max: float,
    *,
    variant: str = "sir",
    open_population: bool | None = None,
) -> SufficientStats:
    """Accumulate statistics by replaying ``trace`` from ``g0`` up to ``t_max``.

    Raises:
        InvalidTrace: on out-of-order events or an event that cannot be applied.
    """
    external = trace.external if isinstance(trace, EventTrace) else None
    if open_population is None:
        open_population = external is not None
    tr = StateTracker.from_state(g0, variant=variant)
    n_r = 0
    c = [0, 0, 0]
    d = [0, 0, 0]
    exp_si = exp_i = exp_s = 0.0
    exp_md = [0.0, 0.0, 0.0]
    exp_m = [0.0, 0.0, 0.0]
    log_nbr = 0.0
    log_class = 0.0
    nbr_counts: list[int] = []
    last = g0.time

    def accumulate(dt: float) -> None:
        nonlocal exp_si, exp_i, exp_s
        exp_si += tr.si * dt
        exp_i += tr.i * dt
        exp_s += tr.s * dt
        mm = max_links(tr.n - tr.i, tr.i)
        for k in range(3):
            exp_m[k] += tr.m[k] * dt
            exp_md[k] += (mm[k] - tr.m[k]) * dt

    for j, e in enumerate(trace):
        if not e.time > last:
            raise InvalidTrace(f"event {j} at time {e.time!r} does not follow {last!r}")
        if e.time > t_max:
            raise InvalidTrace(f"event {j} at time {e.time!r} after horizon {t_max!r}")
        accumulate(e.time - last)
        last = e.time
        kind = e.kind
        if kind is EventKind.INFECTION:
            k = tr.infectious_neighbors(e.p1)
            nbr_counts.append(k)
            log_nbr += math.log(k) if k > 0 else -math.inf
        elif kind is EventKind.RECOVERY:
            n_r += 1
        else:
            k = tr.link_class(e.p1, e.p2)
            if kind is EventKind.LINK_ON:
                c[k] += 1
                avail = tr.m_d()[k]
            else:
                d[k] += 1
                avail = tr.m[k]
            log_class += math.log(avail) if avail > 0 else -math.inf
        try:
            tr.apply(e, open_population=open_population)
        except IncompatibleEvent as exc:
            raise InvalidTrace(f"event {j}: {exc}") from exc
    accumulate(t_max - last)

    n_e = len(nbr_counts)
    n_int = n_ext = None
    if external is not None:
        n_ext = sum(external)
        n_int = n_e - n_ext
    return SufficientStats(
        n_e=n_e,
        n_r=n_r,
        c=tuple(c),
        d=tuple(d),
        exp_si=exp_si,
        exp_i=exp_i,
        exp_s=exp_s,
        exp_md=tuple(exp_md),
        exp_m=tuple(exp_m),
        log_nbr=log_nbr,
        log_class=log_class,
        nbr_counts=tuple(nbr_counts),
        n_e_int=n_int,
        n_e_ext=n_ext,
        t_max=float(t_max - g0.time),
        variant=variant,
    )


def infection_exposure(
    g0: ProcessState, trace: Iterable[Event], t_max: float, network: str = "dynamic"
) -> tuple[int, float]:
    """Infection count and S-I exposure under a network assumption.

    ``network`` is ``"dynamic"`` (observed links), ``"static"`` (links frozen
    at ``g0``) or ``"mixing"`` (complete graph, S-I pairs = S * I).
    """
    if network == "dynamic":
        st = sufficient_stats(g0, list(trace), t_max, open_population=True)
        return st.n_e, st.exp_si
    if network not in ("static", "mixing"):
        raise ValueError(f"unknown network assumption {network!r}")
    status = [int(s) for s in g0.statuses]
    adj: list[set[int]] = [set() for _ in range(g0.n)]
    for a, b in g0.edges:
        adj[a].add(b)
        adj[b].add(a)
    s = sum(x == 0 for x in status)
    i = sum(x == 1 for x in status)
    si = sum(1 for a, b in g0.edges if {status[a], status[b]} == {0, 1})
    last, exposure, n_e = g0.time, 0.0, 0

    def si_delta(p: int, sign: int) -> int:
        sp = status[p]
        return sign * sum(1 for q in adj[p] if {sp, status[q]} == {0, 1})

    for e in trace:
        if e.kind.is_network:
            continue
        exposure += (si if network == "static" else s * i) * (e.time - last)
        last = e.time
        p = e.p1
        si += si_delta(p, -1)
        if e.kind is EventKind.INFECTION:
            n_e += 1
            status[p] = 1
            s, i = s - 1, i + 1
        else:
            status[p] = int(DiseaseStatus.R)
            i -= 1
        si += si_delta(p, +1)
    exposure += (si if network == "static" else s * i) * (t_max - last)
    return n_e, exposure


def loglik_sir(
    stats: SufficientStats, params: ModelParams, *, include_class_term: bool = True
) -> float:
    """Complete-data log-likelihood of the closed-population coupled model."""
    a, w = params.alpha, params.omega
    ll = (
        xlogy(stats.n_r, params.gamma)
        + xlogy(stats.n_e, params.beta)
        + float(np.sum(xlogy(np.asarray(stats.c), a)))
        + float(np.sum(xlogy(np.asarray(stats.d), w)))
        + stats.log_nbr
    )
    if include_class_term:
        ll += stats.log_class
    ll -= (
        params.beta * stats.exp_si
        + params.gamma * stats.exp_i
        + float(a @ np.asarray(stats.exp_md))
        + float(w @ np.asarray(stats.exp_m))
    )
    return float(ll)


def loglik_sis(
    stats: SufficientStats, params: ModelParams, *, include_class_term: bool = True
) -> float:
    """SIS log-likelihood; ``stats`` must be accumulated with ``variant="sis"``."""
    if stats.variant != "sis":
        raise ValueError("SIS likelihood needs statistics accumulated with variant='sis'")
    return loglik_sir(stats, params, include_class_term=include_class_term)


def loglik_open(
    stats: SufficientStats, params: ModelParams, *, include_class_term: bool = True
) -> float:
    """Open-population log-likelihood with external infection rate ``xi``."""
    if params.xi is None:
        raise ValueError("open-population likelihood needs xi")
    xi = params.xi
    nbr = np.asarray(stats.nbr_counts, dtype=float)
    with np.errstate(divide="ignore"):
        inf_term = float(np.sum(np.log(params.beta * nbr + xi)))
    rest = replace(stats, n_e=0, log_nbr=0.0)
    return inf_term + loglik_sir(rest, params, include_class_term=include_class_term) - xi * stats.exp_s


def _overlap(lo, hi):
    return np.clip(hi - lo, 0.0, None)


@dataclass
class SpellData:
    """Network spells and event arrays for fast SIR statistics.

    The network process does not depend on disease timing, so everything here
    is computed once; :meth:`stats` then only needs per-person infection and
    recovery times.
    """

    n: int
    t_max: float
    spell_a: np.ndarray
    spell_b: np.ndarray
    spell_start: np.ndarray
    spell_end: np.ndarray
    net_t: np.ndarray
    net_a: np.ndarray
    net_b: np.ndarray
    net_on: np.ndarray

    @classmethod
    def from_events(cls, g0: ProcessState, events: Iterable[Event], t_max: float) -> "SpellData":
        open_at: dict[tuple[int, int], float] = {pair: g0.time for pair in g0.edges}
        sa, sb, ss, se = [], [], [], []
        nt, na, nb, non = [], [], [], []
        for e in events:
            if not e.kind.is_network:
                continue
            nt.append(e.time)
            na.append(e.p1)
            nb.append(e.p2)
            if e.kind is EventKind.LINK_ON:
                non.append(True)
                open_at[e.pair] = e.time
            else:
                non.append(False)
                start = open_at.pop(e.pair)
                sa.append(e.p1)
                sb.append(e.p2)
                ss.append(start)
                se.append(e.time)
        for (a, b), start in open_at.items():
            sa.append(a)
            sb.append(b)
            ss.append(start)
            se.append(t_max)
        return cls(
            n=g0.n,
            t_max=float(t_max),
            spell_a=np.array(sa, dtype=np.int64),
            spell_b=np.array(sb, dtype=np.int64),
            spell_start=np.array(ss, dtype=float),
            spell_end=np.array(se, dtype=float),
            net_t=np.array(nt, dtype=float),
            net_a=np.array(na, dtype=np.int64),
            net_b=np.array(nb, dtype=np.int64),
            net_on=np.array(non, dtype=bool),
        )

    def stats(
        self,
        inf: np.ndarray,
        rec: np.ndarray,
        n_e: int,
        n_e_int: int | None = None,
        n_e_ext: int | None = None,
    ) -> SufficientStats:
        """Counts and exposures given infectious windows ``[inf[p], rec[p])``.

        Initially infectious persons have ``inf = 0``; never-infected persons
        ``inf = inf``; unrecovered persons ``rec = inf``; persons recovered at
        time 0 have ``inf = rec = -1``.
        """
        T = self.t_max
        a, b = self.spell_a, self.spell_b
        s0, s1 = self.spell_start, self.spell_end
        ia, ib, ra, rb = inf[a], inf[b], rec[a], rec[b]
        len_a = _overlap(np.maximum(s0, ia), np.minimum(s1, ra))
        len_b = _overlap(np.maximum(s0, ib), np.minimum(s1, rb))
        both = _overlap(np.maximum(s0, np.maximum(ia, ib)), np.minimum(s1, np.minimum(ra, rb)))
        si = _overlap(np.maximum(s0, ia), np.minimum(s1, np.minimum(ra, ib))) + _overlap(
            np.maximum(s0, ib), np.minimum(s1, np.minimum(rb, ia))
        )
        m_ii = float(both.sum())
        m_hi = float((len_a + len_b).sum()) - 2.0 * m_ii
        m_hh = float((s1 - s0).sum()) - m_hi - m_ii

        inf_c = np.clip(inf, 0.0, T)
        rec_c = np.clip(rec, 0.0, T)
        exp_i = float(_overlap(inf_c, rec_c).sum())
        exp_s = float(np.clip(np.minimum(inf, T), 0.0, None).sum())

        # Step function I(t) from epidemic times inside (0, T].
        i0 = int(np.sum((inf <= 0) & (rec > 0)))
        up = inf[(inf > 0) & (inf <= T)]
        down = rec[(rec > 0) & (rec <= T)]
        times = np.concatenate([up, down])
        steps = np.concatenate([np.ones(len(up)), -np.ones(len(down))])
        order = np.argsort(times, kind="stable")
        times, steps = times[order], steps[order]
        edges_t = np.concatenate([[0.0], times, [T]])
        i_seg = i0 + np.concatenate([[0.0], np.cumsum(steps)])
        dur = np.diff(edges_t)
        h_seg = self.n - i_seg
        mmax = (
            float(np.sum(h_seg * (h_seg - 1) / 2 * dur)),
            float(np.sum(h_seg * i_seg * dur)),
            float(np.sum(i_seg * (i_seg - 1) / 2 * dur)),
        )

        t = self.net_t
        ga = (inf[self.net_a] < t) & (t < rec[self.net_a])
        gb = (inf[self.net_b] < t) & (t < rec[self.net_b])
        cls = ga.astype(np.int64) + gb.astype(np.int64)
        c = np.bincount(cls[self.net_on], minlength=3)
        d = np.bincount(cls[~self.net_on], minlength=3)
        n_r = int(np.sum((rec > 0) & (rec <= T)))
        m = (m_hh, m_hi, m_ii)
        return SufficientStats(
            n_e=n_e,
            n_r=n_r,
            c=tuple(int(x) for x in c),
            d=tuple(int(x) for x in d),
            exp_si=float(si.sum()),
            exp_i=exp_i,
            exp_s=exp_s,
            exp_md=tuple(mx - mm for mx, mm in zip(mmax, m)),
            exp_m=m,
            log_nbr=math.nan,
            log_class=math.nan,
            n_e_int=n_e_int,
            n_e_ext=n_e_ext,
            t_max=T,
        )


def epidemic_windows(
    g0: ProcessState, events: Iterable[Event]
) -> tuple[np.ndarray, np.ndarray]:
    """Per-person infection and recovery times of an SIR trace."""
    inf = np.full(g0.n, np.inf)
    rec = np.full(g0.n, np.inf)
    for p, s in enumerate(g0.statuses):
        if s is DiseaseStatus.I:
            inf[p] = g0.time
        elif s is DiseaseStatus.R:
            inf[p] = rec[p] = g0.time - 1.0
    for e in events:
        if e.kind is EventKind.INFECTION:
            if np.isfinite(inf[e.p1]):
                raise InvalidTrace(f"person {e.p1} infected twice; spell route is SIR-only")
            inf[e.p1] = e.time
        elif e.kind is EventKind.RECOVERY:
            rec[e.p1] = e.time
    return inf, rec
