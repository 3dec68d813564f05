"""Domain types, state bookkeeping and trace replay.

Person ids are dense integers ``0..N-1``. Undirected links are stored under the
canonical ``(min, max)`` pair. Time is continuous and measured in days.

Link classes are indexed by the number of infectious endpoints:
``0 = H-H``, ``1 = H-I``, ``2 = I-I`` where ``H`` (healthy) is S or R.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Iterator, Sequence

import numpy as np

HH, HI, II = 0, 1, 2
LINK_CLASSES = ("HH", "HI", "II")

PARAM_NAMES = (
    "beta",
    "gamma",
    "alpha_ss",
    "alpha_si",
    "alpha_ii",
    "omega_ss",
    "omega_si",
    "omega_ii",
)


class DiseaseStatus(enum.IntEnum):
    S = 0
    I = 1  # noqa: E741
    R = 2

    @property
    def healthy(self) -> bool:
        return self is not DiseaseStatus.I


class EventKind(enum.Enum):
    INFECTION = "INF"
    RECOVERY = "REC"
    LINK_ON = "ON"
    LINK_OFF = "OFF"

    @property
    def is_network(self) -> bool:
        return self in (EventKind.LINK_ON, EventKind.LINK_OFF)


class IncompatibleEvent(ValueError):
    """Raised when an event cannot be applied to a state."""

    def __init__(self, message: str, event: "Event | None" = None):
        super().__init__(message)
        self.event = event


def canonical(a: int, b: int) -> tuple[int, int]:
    if a == b:
        raise ValueError(f"self-loop on person {a}")
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class ModelParams:
    """Rate vector of the coupled process.

    ``xi`` is the external infection rate per susceptible; ``None`` means a
    closed population.
    """

    beta: float = 0.0
    gamma: float = 0.0
    alpha_ss: float = 0.0
    alpha_si: float = 0.0
    alpha_ii: float = 0.0
    omega_ss: float = 0.0
    omega_si: float = 0.0
    omega_ii: float = 0.0
    xi: float | None = None

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{f.name} must be finite and >= 0, got {value!r}")

    @property
    def alpha(self) -> np.ndarray:
        return np.array([self.alpha_ss, self.alpha_si, self.alpha_ii])

    @property
    def omega(self) -> np.ndarray:
        return np.array([self.omega_ss, self.omega_si, self.omega_ii])

    @property
    def open_population(self) -> bool:
        return self.xi is not None

    def as_dict(self) -> dict[str, float]:
        out = {name: getattr(self, name) for name in PARAM_NAMES}
        if self.xi is not None:
            out["xi"] = self.xi
        return out

    @classmethod
    def from_mapping(cls, values: dict) -> "ModelParams":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown parameter(s): {sorted(unknown)}")
        return cls(**{k: (None if v is None else float(v)) for k, v in values.items()})

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


# Parameter values used throughout the simulation experiments.
DEFAULT_PARAMS = ModelParams(
    beta=0.03,
    gamma=0.12,
    alpha_ss=0.005,
    alpha_si=0.001,
    alpha_ii=0.005,
    omega_ss=0.05,
    omega_si=0.1,
    omega_ii=0.05,
)


@dataclass(frozen=True)
class Event:
    time: float
    kind: EventKind
    p1: int
    p2: int | None = None

    def __post_init__(self):
        if self.kind.is_network:
            if self.p2 is None:
                raise ValueError(f"{self.kind.value} event needs two persons")
            if not self.p1 < self.p2:
                raise ValueError(f"network event pair must satisfy p1 < p2, got ({self.p1}, {self.p2})")
        elif self.p2 is not None:
            raise ValueError(f"{self.kind.value} event carries a single person")

    @property
    def pair(self) -> tuple[int, int]:
        return (self.p1, self.p2)  # type: ignore[return-value]


@dataclass(frozen=True)
class EventTrace:
    """Time-ordered events.

    ``external`` optionally labels each infection event (in trace order):
    ``True`` for an external source, ``False`` for transmission over a link.
    """

    events: tuple[Event, ...] = ()
    external: tuple[bool, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        if self.external is not None:
            object.__setattr__(self, "external", tuple(bool(x) for x in self.external))
            n_inf = sum(e.kind is EventKind.INFECTION for e in self.events)
            if len(self.external) != n_inf:
                raise ValueError(
                    f"{len(self.external)} infection labels for {n_inf} infection events"
                )

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def __getitem__(self, i):
        return self.events[i]

    def count(self, kind: EventKind) -> int:
        return sum(e.kind is kind for e in self.events)

    def infection_labels(self) -> dict[tuple[int, float], bool]:
        """Map ``(person, time)`` of each infection to its external flag."""
        if self.external is None:
            return {}
        infections = [e for e in self.events if e.kind is EventKind.INFECTION]
        return {(e.p1, e.time): lab for e, lab in zip(infections, self.external)}


@dataclass(frozen=True)
class ProcessState:
    time: float
    statuses: tuple[DiseaseStatus, ...]
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "statuses", tuple(DiseaseStatus(s) for s in self.statuses))
        n = len(self.statuses)
        edges = frozenset(canonical(a, b) for a, b in self.edges)
        for a, b in edges:
            if not (0 <= a < n and 0 <= b < n):
                raise ValueError(f"edge ({a}, {b}) outside population of size {n}")
        object.__setattr__(self, "edges", edges)

    @property
    def n(self) -> int:
        return len(self.statuses)

    @classmethod
    def initial(
        cls, n: int, infectious: Iterable[int] = (), edges: Iterable[tuple[int, int]] = ()
    ) -> "ProcessState":
        statuses = [DiseaseStatus.S] * n
        for p in infectious:
            statuses[p] = DiseaseStatus.I
        return cls(0.0, tuple(statuses), frozenset(edges))

    def neighbors(self, p: int) -> set[int]:
        out = set()
        for a, b in self.edges:
            if a == p:
                out.add(b)
            elif b == p:
                out.add(a)
        return out

    def infectious(self) -> list[int]:
        return [p for p, s in enumerate(self.statuses) if s is DiseaseStatus.I]


@dataclass(frozen=True)
class StateCounts:
    s: int
    i: int
    r: int
    h: int
    si: int
    m: tuple[int, int, int]
    m_max: tuple[int, int, int]

    @property
    def m_d(self) -> tuple[int, int, int]:
        return tuple(a - b for a, b in zip(self.m_max, self.m))  # type: ignore[return-value]


def max_links(h: int, i: int) -> tuple[int, int, int]:
    return (h * (h - 1) // 2, h * i, i * (i - 1) // 2)


def state_counts(state: ProcessState) -> StateCounts:
    st = state.statuses
    s = sum(x is DiseaseStatus.S for x in st)
    i = sum(x is DiseaseStatus.I for x in st)
    r = len(st) - s - i
    m = [0, 0, 0]
    si = 0
    for a, b in state.edges:
        ia, ib = st[a] is DiseaseStatus.I, st[b] is DiseaseStatus.I
        m[ia + ib] += 1
        if (ia and st[b] is DiseaseStatus.S) or (ib and st[a] is DiseaseStatus.S):
            si += 1
    h = len(st) - i
    return StateCounts(s=s, i=i, r=r, h=h, si=si, m=tuple(m), m_max=max_links(h, i))


def apply_event(
    state: ProcessState, e: Event, *, open_population: bool = False, variant: str = "sir"
) -> ProcessState:
    """Return the state after ``e``; ``state`` is left untouched."""
    st = list(state.statuses)
    edges = state.edges
    if e.kind is EventKind.INFECTION:
        if st[e.p1] is not DiseaseStatus.S:
            raise IncompatibleEvent(f"infection of person {e.p1} who is {st[e.p1].name}", e)
        if not open_population and not any(
            st[q] is DiseaseStatus.I for q in state.neighbors(e.p1)
        ):
            raise IncompatibleEvent(f"infection of person {e.p1} with no infectious neighbor", e)
        st[e.p1] = DiseaseStatus.I
    elif e.kind is EventKind.RECOVERY:
        if st[e.p1] is not DiseaseStatus.I:
            raise IncompatibleEvent(f"recovery of person {e.p1} who is {st[e.p1].name}", e)
        st[e.p1] = DiseaseStatus.S if variant == "sis" else DiseaseStatus.R
    elif e.kind is EventKind.LINK_ON:
        if e.pair in edges:
            raise IncompatibleEvent(f"link-on of already connected pair {e.pair}", e)
        edges = edges | {e.pair}
    else:
        if e.pair not in edges:
            raise IncompatibleEvent(f"link-off of disconnected pair {e.pair}", e)
        edges = edges - {e.pair}
    return ProcessState(e.time, tuple(st), edges)


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    index: int | None = None
    message: str = ""

    def __bool__(self) -> bool:
        return self.valid


def validate_trace(
    g0: ProcessState,
    trace: EventTrace | Sequence[Event],
    *,
    t_max: float | None = None,
    open_population: bool = False,
    variant: str = "sir",
) -> ValidationReport:
    """Replay ``trace`` from ``g0`` and report the first violation, if any."""
    tracker = StateTracker.from_state(g0, variant=variant)
    last = g0.time
    for j, e in enumerate(trace):
        if not e.time > last:
            return ValidationReport(False, j, f"event time {e.time!r} does not exceed {last!r}")
        if t_max is not None and e.time > t_max:
            return ValidationReport(False, j, f"event time {e.time!r} after horizon {t_max!r}")
        try:
            tracker.apply(e, open_population=open_population)
        except IncompatibleEvent as exc:
            return ValidationReport(False, j, str(exc))
        last = e.time
    return ValidationReport(True)


class IndexedSet:
    """Set with O(1) insert, delete and uniform selection."""

    __slots__ = ("items", "pos")

    def __init__(self, items: Iterable = ()):
        self.items: list = []
        self.pos: dict = {}
        for x in items:
            self.add(x)

    def __len__(self) -> int:
        return len(self.items)

    def __contains__(self, x) -> bool:
        return x in self.pos

    def __iter__(self):
        return iter(self.items)

    def add(self, x) -> None:
        if x not in self.pos:
            self.pos[x] = len(self.items)
            self.items.append(x)

    def remove(self, x) -> None:
        i = self.pos.pop(x)
        last = self.items.pop()
        if i < len(self.items):
            self.items[i] = last
            self.pos[last] = i

    def pick(self, u: float):
        """Element at uniform position ``u`` in [0, 1)."""
        return self.items[min(int(u * len(self.items)), len(self.items) - 1)]


class StateTracker:
    """Mutable replay state with incrementally maintained counters.

    With ``pools=True`` it also keeps per-class indexed pools so a simulator
    can draw uniform targets in O(1).
    """

    def __init__(self, n: int, variant: str = "sir", pools: bool = False):
        if variant not in ("sir", "sis"):
            raise ValueError(f"unknown variant {variant!r}")
        self.n = n
        self.variant = variant
        self.time = 0.0
        self.status = [0] * n
        self.adj: list[set[int]] = [set() for _ in range(n)]
        self.s, self.i, self.r = n, 0, 0
        self.si = 0
        self.m = [0, 0, 0]
        self.pools = pools
        if pools:
            self.susceptible = IndexedSet(range(n))
            self.healthy = IndexedSet(range(n))
            self.infectious = IndexedSet()
            self.si_links = IndexedSet()
            self.links = [IndexedSet(), IndexedSet(), IndexedSet()]

    @classmethod
    def from_state(cls, state: ProcessState, variant: str = "sir", pools: bool = False):
        t = cls(state.n, variant=variant, pools=pools)
        for p, s in enumerate(state.statuses):
            if s is DiseaseStatus.I:
                t.infect(p)
            elif s is DiseaseStatus.R:
                t.infect(p)
                t.recover(p, to=DiseaseStatus.R)
        for a, b in sorted(state.edges):
            t.link_on(a, b)
        t.time = state.time
        return t

    def to_state(self) -> ProcessState:
        edges = frozenset((a, b) for a in range(self.n) for b in self.adj[a] if a < b)
        return ProcessState(self.time, tuple(DiseaseStatus(s) for s in self.status), edges)

    @property
    def h(self) -> int:
        return self.n - self.i

    def m_max(self) -> tuple[int, int, int]:
        return max_links(self.n - self.i, self.i)

    def m_d(self) -> tuple[int, int, int]:
        mm = self.m_max()
        return (mm[0] - self.m[0], mm[1] - self.m[1], mm[2] - self.m[2])

    def counts(self) -> StateCounts:
        return StateCounts(self.s, self.i, self.r, self.h, self.si, tuple(self.m), self.m_max())

    def link_class(self, a: int, b: int) -> int:
        return (self.status[a] == 1) + (self.status[b] == 1)

    def infectious_neighbors(self, p: int) -> int:
        st = self.status
        return sum(1 for q in self.adj[p] if st[q] == 1)

    def _move_links(self, p: int, old_p_inf: int, new_p_inf: int) -> None:
        st = self.status
        m = self.m
        for q in self.adj[p]:
            qi = st[q] == 1
            m[old_p_inf + qi] -= 1
            m[new_p_inf + qi] += 1
            if self.pools:
                e = (p, q) if p < q else (q, p)
                self.links[old_p_inf + qi].remove(e)
                self.links[new_p_inf + qi].add(e)

    def _si_touch(self, p: int, add: bool) -> None:
        """Adjust S-I bookkeeping for links of ``p`` with the current statuses."""
        st = self.status
        sp = st[p]
        for q in self.adj[p]:
            sq = st[q]
            if (sp == 0 and sq == 1) or (sp == 1 and sq == 0):
                if add:
                    self.si += 1
                    if self.pools:
                        self.si_links.add((p, q) if p < q else (q, p))
                else:
                    self.si -= 1
                    if self.pools:
                        self.si_links.remove((p, q) if p < q else (q, p))

    def infect(self, p: int) -> None:
        self._si_touch(p, add=False)
        self._move_links(p, 0, 1)
        self.status[p] = 1
        self.s -= 1
        self.i += 1
        if self.pools:
            self.susceptible.remove(p)
            self.healthy.remove(p)
            self.infectious.add(p)
        self._si_touch(p, add=True)

    def recover(self, p: int, to: DiseaseStatus | None = None) -> None:
        if to is None:
            to = DiseaseStatus.S if self.variant == "sis" else DiseaseStatus.R
        self._si_touch(p, add=False)
        self._move_links(p, 1, 0)
        self.status[p] = int(to)
        self.i -= 1
        if to is DiseaseStatus.S:
            self.s += 1
        else:
            self.r += 1
        if self.pools:
            self.infectious.remove(p)
            self.healthy.add(p)
            if to is DiseaseStatus.S:
                self.susceptible.add(p)
        self._si_touch(p, add=True)

    def link_on(self, a: int, b: int) -> None:
        self.adj[a].add(b)
        self.adj[b].add(a)
        st = self.status
        k = (st[a] == 1) + (st[b] == 1)
        self.m[k] += 1
        si = (st[a] == 0 and st[b] == 1) or (st[a] == 1 and st[b] == 0)
        if si:
            self.si += 1
        if self.pools:
            e = (a, b) if a < b else (b, a)
            self.links[k].add(e)
            if si:
                self.si_links.add(e)

    def link_off(self, a: int, b: int) -> None:
        self.adj[a].discard(b)
        self.adj[b].discard(a)
        st = self.status
        k = (st[a] == 1) + (st[b] == 1)
        self.m[k] -= 1
        si = (st[a] == 0 and st[b] == 1) or (st[a] == 1 and st[b] == 0)
        if si:
            self.si -= 1
        if self.pools:
            e = (a, b) if a < b else (b, a)
            self.links[k].remove(e)
            if si:
                self.si_links.remove(e)

    def apply(self, e: Event, open_population: bool = False) -> None:
        """Apply ``e`` after checking its preconditions."""
        kind = e.kind
        if kind is EventKind.INFECTION:
            if self.status[e.p1] != 0:
                raise IncompatibleEvent(
                    f"infection of person {e.p1} who is {DiseaseStatus(self.status[e.p1]).name}", e
                )
            if not open_population and self.infectious_neighbors(e.p1) == 0:
                raise IncompatibleEvent(f"infection of person {e.p1} with no infectious neighbor", e)
            self.infect(e.p1)
        elif kind is EventKind.RECOVERY:
            if self.status[e.p1] != 1:
                raise IncompatibleEvent(
                    f"recovery of person {e.p1} who is {DiseaseStatus(self.status[e.p1]).name}", e
                )
            self.recover(e.p1)
        elif kind is EventKind.LINK_ON:
            if e.p2 in self.adj[e.p1]:
                raise IncompatibleEvent(f"link-on of already connected pair {e.pair}", e)
            self.link_on(e.p1, e.p2)
        else:
            if e.p2 not in self.adj[e.p1]:
                raise IncompatibleEvent(f"link-off of disconnected pair {e.pair}", e)
            self.link_off(e.p1, e.p2)
        self.time = e.time
