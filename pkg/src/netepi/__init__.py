"""SIR epidemics on adaptive contact networks: simulation, likelihood and inference."""

from .core import DEFAULT_PARAMS, PARAM_NAMES, Event, EventKind, EventTrace, ModelParams, ProcessState
from .estimators import PriorSet, mle_closed, posterior_params
from .likelihood import loglik_sir, sufficient_stats
from .mcmc import Chain, gibbs_run
from .simulator import PartialData, SimConfig, simulate, synthesize_missingness

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_PARAMS",
    "PARAM_NAMES",
    "Chain",
    "Event",
    "EventKind",
    "EventTrace",
    "ModelParams",
    "PartialData",
    "PriorSet",
    "ProcessState",
    "SimConfig",
    "gibbs_run",
    "loglik_sir",
    "mle_closed",
    "posterior_params",
    "simulate",
    "sufficient_stats",
    "synthesize_missingness",
]
