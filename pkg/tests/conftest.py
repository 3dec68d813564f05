import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from netepi.core import DEFAULT_PARAMS, Event, EventKind, EventTrace, ProcessState
from netepi.simulator import SimConfig, erdos_renyi_edges, make_rng, simulate

settings.register_profile(
    "netepi", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("netepi")

INF, REC, ON, OFF = EventKind.INFECTION, EventKind.RECOVERY, EventKind.LINK_ON, EventKind.LINK_OFF


def ev(t, kind, a, b=None):
    return Event(t, kind, a, b)


@pytest.fixture
def tiny():
    """Four persons on a path 0-1-2-3 with person 0 ill; hand-checkable trace."""
    g0 = ProcessState.initial(4, [0], [(0, 1), (1, 2), (2, 3)])
    trace = EventTrace(
        (
            ev(1.0, INF, 1),
            ev(2.0, OFF, 0, 1),
            ev(2.5, ON, 0, 3),
            ev(3.0, REC, 0),
            ev(4.0, INF, 2),
            ev(5.0, REC, 1),
        )
    )
    return g0, trace, 6.0


def er_run(seed, n=40, p=0.1, t_max=30.0, params=DEFAULT_PARAMS, i0=1, variant="sir"):
    g0 = ProcessState.initial(n, [], erdos_renyi_edges(n, p, make_rng(seed)))
    return simulate(SimConfig(g0, params, t_max, seed, i0=i0, variant=variant))
