"""Data-augmented Gibbs sampling and chain diagnostics."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize
from scipy import stats as sps

from .augmentation import (
    ImputationInterval,
    darci,
    extract_intervals,
    mh_impute,
    reject_impute,
)
from .core import PARAM_NAMES, EventKind, ModelParams
from .estimators import PriorSet, posterior_params
from .likelihood import SpellData, epidemic_windows
from .simulator import PartialData, make_rng

METHODS = ("darci", "reject", "mh", "exact")


class DegenerateChain(ValueError):
    pass


class ImputationError(RuntimeError):
    def __init__(self, message: str, iteration: int):
        super().__init__(message)
        self.iteration = iteration


@dataclass
class Chain:
    names: tuple[str, ...]
    draws: np.ndarray
    burnin: int
    thin: int
    seed: int
    method: str
    acceptance: float | None = None
    # conditional Gamma (shape, rate) behind each retained draw
    shapes: np.ndarray | None = None
    rates: np.ndarray | None = None

    def __post_init__(self):
        self.draws = np.asarray(self.draws, dtype=float)
        if self.draws.ndim != 2 or self.draws.shape[1] != len(self.names):
            raise ValueError("draws must be (iterations, parameters)")
        if not np.all(np.isfinite(self.draws)) or np.any(self.draws < 0):
            raise ValueError("chain draws must be finite and non-negative")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.draws[:, self.names.index(name)]

    def __len__(self) -> int:
        return len(self.draws)

    def summary(self, level: float = 0.95, rao_blackwell: bool = False) -> dict[str, dict[str, float]]:
        """Posterior mean and equal-tailed interval per parameter.

        With ``rao_blackwell`` the mean and quantiles are those of the mixture
        of conditional Gamma posteriors, which are much less noisy than
        empirical ones.
        """
        lo, hi = (1 - level) / 2, 1 - (1 - level) / 2
        if rao_blackwell and self.shapes is None:
            raise ValueError("chain carries no conditional posteriors")
        out = {}
        for k, name in enumerate(self.names):
            x = self.draws[:, k]
            if rao_blackwell:
                a, b = self.shapes[:, k], self.rates[:, k]
                out[name] = {
                    "mean": float(np.mean(a / b)),
                    "lower": gamma_mixture_ppf(lo, a, b),
                    "upper": gamma_mixture_ppf(hi, a, b),
                }
            else:
                out[name] = {
                    "mean": float(x.mean()),
                    "lower": float(np.quantile(x, lo)),
                    "upper": float(np.quantile(x, hi)),
                }
        return out


def gamma_mixture_ppf(q: float, shapes: np.ndarray, rates: np.ndarray) -> float:
    """Quantile of an equal-weight mixture of Gamma(shape, rate) laws."""
    shapes, rates = np.asarray(shapes, float), np.asarray(rates, float)

    def excess(x: float) -> float:
        return float(np.mean(sps.gamma.cdf(x, shapes, scale=1.0 / rates))) - q

    comp = sps.gamma.ppf(q, shapes, scale=1.0 / rates)
    lo, hi = float(comp.min()), float(comp.max())
    if hi <= lo:
        return lo
    return float(optimize.brentq(excess, lo, hi, xtol=1e-14, rtol=1e-12))


@dataclass
class _Period:
    intervals: list[ImputationInterval]
    spells: SpellData
    inf: np.ndarray
    rec: np.ndarray
    n_e: int
    n_e_int: int | None
    n_e_ext: int | None
    state: list[dict[int, float]] = field(default_factory=list)
    accepted: int = 0
    proposed: int = 0


def _prepare(partial: PartialData) -> _Period:
    events = list(partial.events)
    inf, rec = epidemic_windows(partial.g0, events)
    n_e = sum(e.kind is EventKind.INFECTION for e in events)
    ext = partial.events.external
    n_ext = sum(ext) if ext is not None else None
    return _Period(
        intervals=extract_intervals(partial),
        spells=SpellData.from_events(partial.g0, events, partial.t_max),
        inf=inf,
        rec=rec,
        n_e=n_e,
        n_e_int=None if ext is None else n_e - n_ext,
        n_e_ext=n_ext,
    )


def gibbs_run(
    partial: PartialData | Sequence[PartialData],
    priors: PriorSet | None = None,
    iters: int = 1200,
    burnin: int = 200,
    thin: int = 1,
    method: str = "darci",
    seed: int = 0,
    max_attempts: int = 1_000_000,
) -> Chain:
    """Alternate recovery-time imputation with conjugate parameter draws.

    ``partial`` may be a list of independent observation periods sharing
    parameters; their statistics are pooled. Returns draws after ``burnin``
    iterations, keeping every ``thin``-th one.

    ``darci``, ``reject`` and ``mh`` impute from the truncated-exponential
    law restricted to compatible configurations. ``exact`` proposes from that
    law by rejection and accepts with the ratio of the remaining likelihood
    terms, so its imputations follow the full conditional given the current
    parameters (closed populations only).
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    if not iters > burnin >= 0 or thin < 1:
        raise ValueError("need iters > burnin >= 0 and thin >= 1")
    periods_in = [partial] if isinstance(partial, PartialData) else list(partial)
    open_pop = any(p.open_population for p in periods_in)
    if open_pop and method == "exact":
        raise ValueError("the exact method supports closed populations only")
    if priors is None:
        priors = PriorSet.default(open_population=open_pop)
    if open_pop and priors.xi is None:
        raise ValueError("open-population data need a prior for xi")
    names = PARAM_NAMES + (("xi",) if open_pop else ())
    rng = make_rng(seed)
    periods = [_prepare(p) for p in periods_in]
    params = ModelParams.from_mapping({n: g.mean for n, g in priors.as_dict().items() if n in names})

    if method in ("mh", "exact"):
        for per in periods:
            per.state = [darci(iv, params.gamma, rng) for iv in per.intervals]

    def impute(iv: ImputationInterval, k: int, per: _Period) -> dict[int, float]:
        if method == "darci":
            return darci(iv, params.gamma, rng)
        if method == "reject":
            return reject_impute(iv, params.gamma, rng, max_attempts)
        if method == "mh":
            per.state[k] = mh_impute(iv, params.gamma, per.state[k], rng)
            return per.state[k]
        if iv.r_count:
            prop = reject_impute(iv, params.gamma, rng, max_attempts, batch=32)
            cur = per.state[k]
            q = iv.q_set
            log_ratio = iv.local.loglik(np.array([prop[x] for x in q]), params) - iv.local.loglik(
                np.array([cur[x] for x in q]), params
            )
            per.proposed += 1
            if log_ratio >= 0 or rng.random() < math.exp(log_ratio):
                per.state[k] = prop
                per.accepted += 1
        return per.state[k]

    kept, kept_a, kept_b = [], [], []
    for s in range(iters):
        total = None
        for per in periods:
            for k, iv in enumerate(per.intervals):
                try:
                    r = impute(iv, k, per)
                except Exception as exc:
                    raise ImputationError(f"iteration {s}: {exc}", s) from exc
                for q, t in r.items():
                    per.rec[q] = t
            st = per.spells.stats(per.inf, per.rec, per.n_e, per.n_e_int, per.n_e_ext)
            total = st if total is None else total + st
        post = posterior_params(total, priors)
        shapes = np.array([post[n].shape for n in names])
        rates = np.array([post[n].rate for n in names])
        draw = rng.gamma(shapes, 1.0 / rates)
        params = ModelParams.from_mapping(dict(zip(names, draw)))
        if s >= burnin and (s - burnin) % thin == 0:
            kept.append(draw)
            kept_a.append(shapes)
            kept_b.append(rates)
    proposed = sum(p.proposed for p in periods)
    rate = sum(p.accepted for p in periods) / proposed if proposed else None
    return Chain(
        names, np.array(kept), burnin, thin, seed, method, acceptance=rate,
        shapes=np.array(kept_a), rates=np.array(kept_b),
    )


def _autocov(x: np.ndarray) -> np.ndarray:
    n = len(x)
    y = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(y, size)
    return np.fft.irfft(f * np.conj(f), size)[:n] / n


def ess(series) -> float:
    """Effective sample size with Geyer's initial positive sequence truncation."""
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n < 10:
        raise ValueError("ESS needs at least 10 draws")
    acov = _autocov(x)
    if not acov[0] > 0:
        raise DegenerateChain("series has zero variance")
    rho = acov / acov[0]
    tau = -1.0
    for m in range(n // 2):
        pair = rho[2 * m] + rho[2 * m + 1]
        if pair <= 0:
            break
        tau += 2 * pair
    return float(min(max(n / tau, 1.0), n))


def spectrum0(x: np.ndarray) -> float:
    """Spectral density at frequency zero from an AIC-selected AR fit."""
    n = len(x)
    acov = _autocov(x)
    if not acov[0] > 0:
        raise DegenerateChain("window has zero variance")
    max_order = min(n - 1, int(10 * math.log10(n)))
    # Levinson-Durbin recursion over orders 0..max_order.
    phi = np.zeros(0)
    v = acov[0]
    best = (n * math.log(v), 0, v, phi)
    for p in range(1, max_order + 1):
        k = (acov[p] - phi @ acov[1:p][::-1]) / v
        phi = np.concatenate([phi - k * phi[::-1], [k]])
        v = v * (1 - k * k)
        if v <= 0:
            break
        aic = n * math.log(v) + 2 * p
        if aic < best[0]:
            best = (aic, p, v, phi)
    _, _, v, phi = best
    return float(v / (1 - phi.sum()) ** 2)


def geweke(series, first: float = 0.1, last: float = 0.5) -> tuple[float, float]:
    """Geweke Z comparing early and late window means; returns ``(z, p)``."""
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n < 100:
        raise ValueError("Geweke diagnostic needs at least 100 draws")
    if not (0 < first and 0 < last and first + last <= 1):
        raise ValueError("windows must be positive and non-overlapping")
    if not np.var(x) > 0:
        raise DegenerateChain("series has zero variance")
    a = x[: int(first * n)]
    b = x[n - int(last * n) :]
    var = spectrum0(a) / len(a) + spectrum0(b) / len(b)
    z = (a.mean() - b.mean()) / math.sqrt(var)
    return float(z), float(2 * sps.norm.sf(abs(z)))


def diagnostics(chain: Chain) -> dict[str, dict[str, float]]:
    out = {}
    for name in chain.names:
        x = chain[name]
        z, p = geweke(x)
        out[name] = {"ess": ess(x), "z": z, "p": p}
    return out


def timing_benchmark(
    instances: Sequence[ImputationInterval],
    methods: Sequence[str] = ("darci", "reject"),
    gamma: float = 0.12,
    repeats: int = 200,
    seed: int = 0,
) -> list[dict]:
    """Minimum and median wall time of one imputation draw per interval and method."""
    rows = []
    rng = make_rng(seed)
    for idx, iv in enumerate(instances):
        for method in methods:
            if method == "darci":
                fn = lambda: darci(iv, gamma, rng)  # noqa: E731
            elif method == "reject":
                fn = lambda: reject_impute(iv, gamma, rng)  # noqa: E731
            elif method == "mh":
                cur = darci(iv, gamma, rng)
                fn = lambda: mh_impute(iv, gamma, cur, rng)  # noqa: E731
            else:
                raise ValueError(f"unknown method {method!r}")
            times = np.empty(repeats)
            for k in range(repeats):
                t0 = time.perf_counter()
                fn()
                times[k] = time.perf_counter() - t0
            rows.append(
                {
                    "interval": idx + 1,
                    "to_recover": iv.r_count,
                    "method": method,
                    "min_us": float(times.min() * 1e6),
                    "median_us": float(np.median(times) * 1e6),
                }
            )
    return rows
