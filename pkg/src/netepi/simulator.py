"""Exact forward simulation of the coupled epidemic-network Markov chain."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import (
    HH,
    HI,
    II,
    DiseaseStatus,
    Event,
    EventKind,
    EventTrace,
    ModelParams,
    ProcessState,
    StateCounts,
    StateTracker,
)


class Extinct(Exception):
    """The total event rate is zero: the chain is absorbed."""


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator, one independent stream per seed."""
    return np.random.Generator(np.random.Philox(int(seed)))


def erdos_renyi_edges(n: int, p: float, rng: np.random.Generator) -> list[tuple[int, int]]:
    iu = np.triu_indices(n, k=1)
    keep = rng.random(len(iu[0])) < p
    return [(int(a), int(b)) for a, b in zip(iu[0][keep], iu[1][keep])]


def hubnet_edges(n: int, p: float, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Person 0 linked to everyone; the others form an ER(n-1, p) graph."""
    rest = erdos_renyi_edges(n - 1, p, rng)
    return [(0, q) for q in range(1, n)] + [(a + 1, b + 1) for a, b in rest]


def total_rate(counts: StateCounts, params: ModelParams) -> float:
    m_d = counts.m_d
    lam = (
        params.beta * counts.si
        + params.gamma * counts.i
        + params.alpha_ss * m_d[HH]
        + params.alpha_si * m_d[HI]
        + params.alpha_ii * m_d[II]
        + params.omega_ss * counts.m[HH]
        + params.omega_si * counts.m[HI]
        + params.omega_ii * counts.m[II]
    )
    if params.xi is not None:
        lam += params.xi * counts.s
    return lam


def _class_rates(params: ModelParams, tracker: StateTracker) -> tuple[list[float], list[float]]:
    m_d = tracker.m_d()
    m = tracker.m
    on = [params.alpha_ss * m_d[0], params.alpha_si * m_d[1], params.alpha_ii * m_d[2]]
    off = [params.omega_ss * m[0], params.omega_si * m[1], params.omega_ii * m[2]]
    return on, off


def _pick_class(weights: list[float], u: float) -> int:
    acc = 0.0
    target = u * sum(weights)
    for k, w in enumerate(weights):
        acc += w
        if target < acc:
            return k
    return max(k for k, w in enumerate(weights) if w > 0)


def _draw_disconnected(tracker: StateTracker, k: int, rng: np.random.Generator) -> tuple[int, int]:
    """Uniform disconnected pair of link class ``k`` by rejection."""
    healthy, infectious, adj = tracker.healthy, tracker.infectious, tracker.adj
    while True:
        u = rng.random(2)
        if k == HH:
            a = healthy.pick(u[0])
            b = healthy.pick(u[1])
        elif k == HI:
            a = healthy.pick(u[0])
            b = infectious.pick(u[1])
        else:
            a = infectious.pick(u[0])
            b = infectious.pick(u[1])
        if a != b and b not in adj[a]:
            return (a, b) if a < b else (b, a)


class _Stepper:
    """Draws successive events from a tracker with pools."""

    def __init__(self, tracker: StateTracker, params: ModelParams, rng: np.random.Generator):
        self.tracker = tracker
        self.params = params
        self.rng = rng

    def step(self) -> tuple[float, Event, bool]:
        """Return ``(dt, event, external)`` without applying the event."""
        t, p, rng = self.tracker, self.params, self.rng
        on, off = _class_rates(p, t)
        rates = [p.beta * t.si, p.gamma * t.i, sum(on), sum(off)]
        if p.xi is not None:
            rates.append(p.xi * t.s)
        lam = sum(rates)
        if not lam > 0:
            raise Extinct()
        dt = rng.exponential(1.0 / lam)
        z = _pick_class(rates, rng.random())
        time = t.time + dt
        u = rng.random()
        if z == 0:
            a, b = t.si_links.pick(u)
            target = a if t.status[a] == 0 else b
            return dt, Event(time, EventKind.INFECTION, target), False
        if z == 1:
            return dt, Event(time, EventKind.RECOVERY, t.infectious.pick(u)), False
        if z == 2:
            k = _pick_class(on, u)
            a, b = _draw_disconnected(t, k, rng)
            return dt, Event(time, EventKind.LINK_ON, a, b), False
        if z == 3:
            k = _pick_class(off, u)
            a, b = t.links[k].pick(rng.random())
            return dt, Event(time, EventKind.LINK_OFF, a, b), False
        return dt, Event(time, EventKind.INFECTION, t.susceptible.pick(u)), True


def next_event(
    state: ProcessState, params: ModelParams, rng: np.random.Generator, variant: str = "sir"
) -> tuple[float, Event]:
    """Sample the waiting time and the next event from ``state``."""
    tracker = StateTracker.from_state(state, variant=variant, pools=True)
    dt, event, _ = _Stepper(tracker, params, rng).step()
    return dt, event


@dataclass(frozen=True)
class SimConfig:
    g0: ProcessState
    params: ModelParams
    t_max: float
    seed: int
    i0: int | Sequence[int] | None = None
    variant: str = "sir"

    def __post_init__(self):
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if isinstance(self.i0, int) and not 0 <= self.i0 <= self.g0.n:
            raise ValueError(f"i0={self.i0} outside [0, {self.g0.n}]")


def seed_initial(config: SimConfig, rng: np.random.Generator) -> ProcessState:
    """Initial state with ``i0`` infectious persons placed per the config."""
    g0 = config.g0
    if config.i0 is None:
        return g0
    if isinstance(config.i0, int):
        chosen = rng.choice(g0.n, size=config.i0, replace=False).tolist()
    else:
        chosen = list(config.i0)
    return ProcessState.initial(g0.n, chosen, g0.edges)


def simulate(config: SimConfig) -> tuple[ProcessState, EventTrace]:
    """Simulate all events in ``(0, t_max]``.

    Returns the realised initial state (with the infectious seeds placed) and
    the trace. Infection labels are attached when ``xi`` is set.
    """
    rng = make_rng(config.seed)
    g0 = seed_initial(config, rng)
    tracker = StateTracker.from_state(g0, variant=config.variant, pools=True)
    stepper = _Stepper(tracker, config.params, rng)
    events: list[Event] = []
    labels: list[bool] = []
    while True:
        try:
            dt, e, external = stepper.step()
        except Extinct:
            break
        if e.time > config.t_max:
            break
        tracker.apply(e, open_population=True)
        events.append(e)
        if e.kind is EventKind.INFECTION:
            labels.append(external)
    ext = tuple(labels) if config.params.xi is not None else None
    return g0, EventTrace(tuple(events), ext)


@dataclass(frozen=True)
class PartialData:
    """A trace with some recovery times removed, plus periodic status reports.

    ``reports[k, p]`` is ``True`` when person ``p`` is ill at ``report_times[k]``.
    ``truth`` keeps the deleted recovery times for evaluation only.
    """

    g0: ProcessState
    events: EventTrace
    report_times: np.ndarray
    reports: np.ndarray
    t_max: float
    truth: dict = field(default_factory=dict)
    open_population: bool = False

    @property
    def n(self) -> int:
        return self.g0.n


def report_schedule(t_max: float, period: float) -> np.ndarray:
    times = list(np.arange(0.0, t_max, period))
    if not times or times[-1] < t_max:
        times.append(float(t_max))
    return np.array(times, dtype=float)


def status_reports(
    g0: ProcessState, trace: Iterable[Event], times: np.ndarray, variant: str = "sir"
) -> np.ndarray:
    """Ill indicators of every person at each report time."""
    tracker = StateTracker.from_state(g0, variant=variant)
    out = np.zeros((len(times), g0.n), dtype=bool)
    events = list(trace)
    j = 0
    for k, t in enumerate(times):
        while j < len(events) and events[j].time <= t:
            tracker.apply(events[j], open_population=True)
            j += 1
        out[k] = np.array(tracker.status) == int(DiseaseStatus.I)
    return out


def synthesize_missingness(
    g0: ProcessState,
    trace: EventTrace,
    t_max: float,
    eta: float,
    report_period: float,
    rng: np.random.Generator,
) -> PartialData:
    """Delete ``round(eta * n_R)`` recovery times at random and add reports."""
    if not 0 <= eta <= 1:
        raise ValueError("eta must lie in [0, 1]")
    if not report_period > 0:
        raise ValueError("report_period must be positive")
    times = report_schedule(t_max, report_period)
    reports = status_reports(g0, trace, times)
    rec_idx = [j for j, e in enumerate(trace) if e.kind is EventKind.RECOVERY]
    n_drop = int(round(eta * len(rec_idx)))
    drop = set(rng.choice(rec_idx, size=n_drop, replace=False).tolist()) if n_drop else set()
    kept = tuple(e for j, e in enumerate(trace) if j not in drop)
    truth = {trace[j].p1: trace[j].time for j in sorted(drop)}
    return PartialData(
        g0=g0,
        events=EventTrace(kept, trace.external),
        report_times=times,
        reports=reports,
        t_max=float(t_max),
        truth=truth,
        open_population=trace.external is not None,
    )
