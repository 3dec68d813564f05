"""Closed-form MLEs, conjugate Gamma posteriors and open-population estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Iterable, Sequence

import numpy as np
from scipy import stats as sps

from .core import PARAM_NAMES, Event, ModelParams, ProcessState
from .likelihood import SufficientStats, infection_exposure


class NoRoot(RuntimeError):
    def __init__(self, message: str, bracket: tuple[float, float]):
        super().__init__(message)
        self.bracket = bracket


@dataclass(frozen=True)
class GammaDist:
    """Gamma law with ``shape`` and ``rate`` (mean ``shape / rate``)."""

    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ValueError(f"Gamma shape and rate must be positive, got {self.shape}, {self.rate}")

    @property
    def mean(self) -> float:
        return self.shape / self.rate

    @property
    def var(self) -> float:
        return self.shape / self.rate**2

    def sample(self, rng: np.random.Generator, size=None):
        return rng.gamma(self.shape, 1.0 / self.rate, size=size)

    def ppf(self, q):
        return sps.gamma.ppf(q, self.shape, scale=1.0 / self.rate)

    def cdf(self, x):
        return sps.gamma.cdf(x, self.shape, scale=1.0 / self.rate)

    def update(self, count: float, exposure: float) -> "GammaDist":
        return GammaDist(self.shape + count, self.rate + exposure)


@dataclass(frozen=True)
class PriorSet:
    beta: GammaDist
    gamma: GammaDist
    alpha_ss: GammaDist
    alpha_si: GammaDist
    alpha_ii: GammaDist
    omega_ss: GammaDist
    omega_si: GammaDist
    omega_ii: GammaDist
    xi: GammaDist | None = None

    @classmethod
    def default(cls, open_population: bool = False) -> "PriorSet":
        """Weakly informative priors with means away from the simulation truth."""
        a = GammaDist(1.0, 1 / 0.004)
        w = GammaDist(1.0, 1 / 0.06)
        return cls(
            beta=GammaDist(1.0, 1 / 0.02),
            gamma=GammaDist(1.0, 1 / 0.1),
            alpha_ss=a,
            alpha_si=a,
            alpha_ii=a,
            omega_ss=w,
            omega_si=w,
            omega_ii=w,
            xi=GammaDist(1.0, 1 / 0.005) if open_population else None,
        )

    @classmethod
    def flat(cls, eps: float, open_population: bool = False) -> "PriorSet":
        g = GammaDist(eps, eps)
        return cls(g, g, g, g, g, g, g, g, g if open_population else None)

    def as_dict(self) -> dict[str, GammaDist]:
        out = {name: getattr(self, name) for name in PARAM_NAMES}
        if self.xi is not None:
            out["xi"] = self.xi
        return out

    @classmethod
    def from_mapping(cls, values: dict) -> "PriorSet":
        """Build from ``{name: (shape, rate)}``; missing names take defaults."""
        base = cls.default(open_population="xi" in values).as_dict()
        for k, v in values.items():
            if k not in base and k != "xi":
                raise ValueError(f"unknown prior {k!r}")
            base[k] = v if isinstance(v, GammaDist) else GammaDist(*map(float, v))
        return cls(**base)


@dataclass(frozen=True)
class MLEResult:
    values: dict[str, float]
    non_identifiable: tuple[str, ...] = ()

    def params(self) -> ModelParams:
        if self.non_identifiable:
            raise ValueError(f"non-identifiable parameters: {self.non_identifiable}")
        return ModelParams.from_mapping(self.values)

    def __getitem__(self, name: str) -> float:
        return self.values[name]


def _ratio(count: float, exposure: float) -> float:
    if count == 0:
        return 0.0
    if exposure <= 0:
        return math.inf
    return count / exposure


def mle_closed(stats: SufficientStats) -> MLEResult:
    """Closed-form MLE of each rate: event count over matching exposure."""
    values = {}
    bad = []
    for name, (k, e) in stats.counts_and_exposures().items():
        values[name] = _ratio(k, e)
        if math.isinf(values[name]):
            bad.append(name)
    return MLEResult(values, tuple(bad))


def mle_static_and_mixing(
    g0: ProcessState, trace: Sequence[Event], t_max: float
) -> dict[str, float]:
    """Infection-rate MLE under dynamic, static (frozen ``g0``) and random-mixing links."""
    out = {}
    for network in ("dynamic", "static", "mixing"):
        n_e, exposure = infection_exposure(g0, trace, t_max, network)
        out[network] = _ratio(n_e, exposure)
    return out


def posterior_params(stats: SufficientStats, priors: PriorSet) -> dict[str, GammaDist]:
    """Conjugate update: shape += count, rate += exposure."""
    pri = priors.as_dict()
    post = {
        name: pri[name].update(k, e) for name, (k, e) in stats.counts_and_exposures().items()
    }
    if priors.xi is not None:
        if stats.n_e_int is None:
            raise ValueError("posterior for xi needs internal/external infection labels")
        post["beta"] = priors.beta.update(stats.n_e_int, stats.exp_si)
        post["xi"] = priors.xi.update(stats.n_e_ext, stats.exp_s)
    return post


def mle_open_labeled(stats: SufficientStats) -> dict[str, float]:
    """``beta`` and ``xi`` MLEs when every infection is labeled internal/external."""
    if stats.n_e_int is None or stats.n_e_ext is None:
        raise ValueError("labeled estimator needs internal/external infection labels")
    return {"beta": _ratio(stats.n_e_int, stats.exp_si), "xi": _ratio(stats.n_e_ext, stats.exp_s)}


def _kappa_score(kappa: float, nbr: np.ndarray, n_e: int, exp_si: float, exp_s: float) -> float:
    """d loglik / d kappa with beta profiled out at its conditional optimum."""
    beta = n_e / (exp_si + kappa * exp_s)
    return float(np.sum(1.0 / (nbr + kappa))) - beta * exp_s


def mle_open_numeric(stats: SufficientStats, tol: float = 1e-10) -> dict[str, float]:
    """Unlabeled open-population MLE of ``beta`` and ``xi``.

    Uses ``xi = kappa * beta``: ``beta`` has a closed form given ``kappa`` and
    ``kappa`` is found by bisection on the profiled score, which is
    decreasing in ``kappa``.

    Raises:
        NoRoot: if the score stays positive as ``kappa`` grows without bound.
    """
    nbr = np.asarray(stats.nbr_counts, dtype=float)
    n_e = len(nbr)
    if n_e == 0:
        raise ValueError("needs at least one infection event")
    args = (nbr, n_e, stats.exp_si, stats.exp_s)
    if np.all(nbr > 0) and _kappa_score(0.0, *args) <= 0:
        kappa = 0.0
    else:
        lo, hi = 0.0, 1.0
        while _kappa_score(hi, *args) > 0:
            lo, hi = hi, hi * 2
            if hi > 1e15:
                raise NoRoot("score positive for all kappa: all infections look external", (lo, hi))
        kappa = 0.5 * (lo + hi)
        for _ in range(2000):
            g = _kappa_score(kappa, *args)
            if abs(g) < tol:
                break
            if g > 0:
                lo = kappa
            else:
                hi = kappa
            mid = 0.5 * (lo + hi)
            if mid == kappa or mid <= lo or mid >= hi:
                break
            kappa = mid
    beta = n_e / (stats.exp_si + kappa * stats.exp_s)
    return {"beta": beta, "xi": kappa * beta, "kappa": kappa}


def confidence_intervals(
    stats: SufficientStats, level: float = 0.95
) -> dict[str, tuple[float, float]]:
    """Exact Poisson-rate intervals from Gamma quantiles for each rate."""
    lo_q, hi_q = (1 - level) / 2, 1 - (1 - level) / 2
    out = {}
    for name, (k, e) in stats.counts_and_exposures().items():
        out[name] = poisson_rate_interval(k, e, lo_q, hi_q)
    return out


def poisson_rate_interval(k: float, exposure: float, lo_q=0.025, hi_q=0.975) -> tuple[float, float]:
    if exposure <= 0:
        return (0.0, math.inf)
    lower = 0.0 if k == 0 else float(sps.gamma.ppf(lo_q, k, scale=1.0 / exposure))
    upper = float(sps.gamma.ppf(hi_q, k + 1, scale=1.0 / exposure))
    return (lower, upper)
