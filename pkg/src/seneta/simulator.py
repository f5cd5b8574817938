"""Monte Carlo Bellman-Harris and Galton-Watson ensembles.

Each replicate owns a counter-based SplitMix64 stream keyed by
(seed, replicate index), so ensembles are reproducible and independent of
how replicates are split across worker threads.  The compiled kernels release
the GIL, which is what makes the thread pool useful.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from . import _kernels
from .errors import DomainError, NoDataError
from .lifetime import Dirac, parse_lifetime_spec
from .offspring import GeometricLaw, HeavyLogLaw, OffspringLaw, TableLaw, parse_offspring_spec

TAIL_NONE, TAIL_GEOMETRIC, TAIL_HEAVYLOG = 0, 1, 2
DEFAULT_CAP = 10_000_000


# -- offspring sampling tables ---------------------------------------------

def alias_table(p) -> tuple[np.ndarray, np.ndarray]:
    """Vose alias table for the categorical law ``p`` (normalized here)."""
    p = np.asarray(p, dtype=float)
    n = len(p)
    scaled = p * (n / p.sum())
    prob = np.ones(n)
    alias = np.arange(n, dtype=np.int64)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    while small and large:
        s, l = small.pop(), large.pop()
        prob[s] = scaled[s]
        alias[s] = l
        scaled[l] -= 1.0 - scaled[s]
        (small if scaled[l] < 1.0 else large).append(l)
    # leftovers are 1 up to rounding
    for i in small + large:
        prob[i] = 1.0
    return prob, alias


@dataclass(frozen=True)
class OffspringSampler:
    """Categorical body plus an optional tail category (the last one).

    The tail category stands for every k >= ``len(prob) - 1`` and is resolved
    by geometric inversion or by exact rejection from a Pareto proposal.
    """

    prob: np.ndarray = field(repr=False)
    alias: np.ndarray = field(repr=False)
    tail_kind: int
    tail_params: np.ndarray
    degenerate: int

    @classmethod
    def from_law(cls, law: OffspringLaw) -> "OffspringSampler":
        body = np.asarray(law.body_probabilities, dtype=float)
        if isinstance(law, TableLaw):
            kind, tp, cats = TAIL_NONE, np.zeros(2), body
        else:
            kmin = float(len(body))
            cats = np.append(body, law.tail_mass)
            if isinstance(law, GeometricLaw):
                kind, tp = TAIL_GEOMETRIC, np.array([law.p, kmin])
            elif isinstance(law, HeavyLogLaw):
                kind, tp = TAIL_HEAVYLOG, np.array([law.alpha, kmin])
            else:
                raise DomainError(f"no sampler for offspring law {law!r}")
        nz = np.flatnonzero(cats > 0)
        degenerate = int(nz[0]) if kind == TAIL_NONE and len(nz) == 1 else -1
        prob, alias = alias_table(cats)
        return cls(prob, alias, kind, tp, degenerate)


# -- configuration and results ---------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    """Inputs of a simulation run.

    Attributes
    ----------
    offspring, lifetime : str
        Spec strings.  For :func:`simulate_gw` the lifetime is ignored.
    replicates : int
    times : tuple of float
        Increasing output grid (generations for Galton-Watson runs).
    cap : int
        Event budget per replicate; exceeding it censors the replicate.
    seed : int
        64-bit seed.
    workers : int
        Threads; results do not depend on it.
    """

    offspring: str
    lifetime: str = "dirac:1"
    replicates: int = 10_000
    times: tuple = (1.0,)
    cap: int = DEFAULT_CAP
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if self.replicates < 1:
            raise DomainError(f"replicate count {self.replicates!r} must be >= 1")
        if t.ndim != 1 or len(t) == 0 or np.any(np.diff(t) <= 0) or t[0] < 0:
            raise DomainError("output grid must be a nonempty increasing sequence of times >= 0")
        if self.cap < 1:
            raise DomainError(f"event cap {self.cap!r} must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise DomainError(f"seed {self.seed!r} is not a 64-bit unsigned integer")
        if self.workers < 1:
            raise DomainError(f"workers {self.workers!r} must be >= 1")
        object.__setattr__(self, "times", tuple(float(x) for x in t))


@dataclass(frozen=True)
class SimEnsemble:
    """Per-replicate trajectories on the output grid.

    ``Z[r, i]`` is -1 once replicate ``r`` has been censored at or before
    ``times[i]``; such entries are excluded from every statistic.
    """

    config: SimConfig
    times: np.ndarray
    Z: np.ndarray = field(repr=False)
    extinct: np.ndarray = field(repr=False)
    censored: np.ndarray = field(repr=False)
    censor_time: np.ndarray = field(repr=False)

    def index(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if not math.isclose(self.times[i], t, rel_tol=1e-12, abs_tol=1e-12):
            raise DomainError(f"time {t!r} is not on the output grid")
        return i

    def observed(self, t: float) -> np.ndarray:
        """Z at time ``t`` for replicates not censored by then."""
        col = self.Z[:, self.index(t)]
        return col[col >= 0]

    def mean_Z(self, t: float) -> tuple[float, float]:
        """Sample mean of Z_t and its standard error."""
        z = self.observed(t).astype(float)
        if len(z) == 0:
            raise NoDataError(f"every replicate is censored at t={t!r}")
        se = float(z.std(ddof=1) / math.sqrt(len(z))) if len(z) > 1 else math.nan
        return float(z.mean()), se

    def extinction_fraction(self, t: float, censored_survive: bool = False) -> tuple[float, float]:
        """Fraction extinct by ``t`` and its binomial standard error.

        With ``censored_survive`` a replicate censored before ``t`` counts as
        alive rather than being dropped.  It had reached the event cap, so
        its later extinction probability is of order q^Z.
        """
        col = self.Z[:, self.index(t)]
        if censored_survive:
            z = np.where(col < 0, 1, col)
        else:
            z = col[col >= 0]
        if len(z) == 0:
            raise NoDataError(f"every replicate is censored at t={t!r}")
        p = float(np.mean(z == 0))
        return p, math.sqrt(p * (1 - p) / len(z))

    def survivors(self, t: float) -> int:
        return int(np.sum(self.observed(t) > 0))


def _chunks(n: int, workers: int) -> list[tuple[int, int]]:
    k = max(1, min(workers, n))
    edges = np.linspace(0, n, k + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _run(fn, config: SimConfig, backend) -> tuple:
    parts = _chunks(config.replicates, config.workers)
    if len(parts) == 1:
        outs = [fn(*parts[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(parts)) as pool:
            outs = list(pool.map(lambda ab: fn(*ab), parts))
    return tuple(np.concatenate([o[j] for o in outs]) for j in range(4))


def _module(backend: str | None):
    if backend is None:
        return _kernels
    mods = _kernels.backends()
    if backend not in mods:
        raise DomainError(f"backend {backend!r} unavailable; have {sorted(mods)}")
    return mods[backend]


def simulate_bh(config: SimConfig, backend: str | None = None) -> SimEnsemble:
    """Event-driven Bellman-Harris simulation.

    Parameters
    ----------
    config : SimConfig
    backend : {"cython", "python"}, optional
        Force a kernel backend; by default the one picked at import.
    """
    law = parse_offspring_spec(config.offspring)
    life = parse_lifetime_spec(config.lifetime)
    smp = OffspringSampler.from_law(law)
    kind, params = life.sampler
    times = np.asarray(config.times, dtype=float)
    mod = _module(backend)

    def fn(a, b):
        return mod.simulate_bh(times, smp.prob, smp.alias, smp.tail_kind, smp.tail_params,
                               kind, np.asarray(params, dtype=float), config.seed, a, b,
                               float(config.cap))

    Z, ext, cen, ct = _run(fn, config, backend)
    return SimEnsemble(config, times, Z, ext, cen, ct)


def simulate_gw(config: SimConfig, backend: str | None = None) -> SimEnsemble:
    """Generation-by-generation Galton-Watson simulation.

    ``config.times`` are generation numbers and must be whole.  Every
    particle draws its own offspring count; single-atom laws skip the draws.
    """
    law = parse_offspring_spec(config.offspring)
    smp = OffspringSampler.from_law(law)
    gens = np.asarray(config.times, dtype=float)
    if np.any(gens != np.round(gens)):
        raise DomainError("Galton-Watson output grid must consist of whole generations")
    gens = gens.astype(np.int64)
    mod = _module(backend)

    def fn(a, b):
        return mod.simulate_gw(gens, smp.prob, smp.alias, smp.tail_kind, smp.tail_params,
                               smp.degenerate, config.seed, a, b, float(config.cap))

    Z, ext, cen, ct = _run(fn, config, backend)
    return SimEnsemble(config, gens.astype(float), Z, ext, cen, ct)


# -- estimators ------------------------------------------------------------

def chi_at(chi_schedule, t: float) -> float:
    """Evaluate a chi schedule: a callable, or a pair of arrays (t, chi)
    interpolated linearly in log chi."""
    if callable(chi_schedule):
        return float(chi_schedule(t))
    ts, chis = (np.asarray(a, dtype=float) for a in chi_schedule)
    if not ts[0] - 1e-12 <= t <= ts[-1] + 1e-12:
        raise DomainError(f"time {t!r} outside the chi schedule [{ts[0]}, {ts[-1]}]")
    return float(np.exp(np.interp(t, ts, np.log(chis))))


def empirical_laplace(ensemble: SimEnsemble, chi_schedule, y: float, t: float,
                      conditional: bool = False) -> tuple[float, float]:
    """Mean of exp(-chi_t y Z_t) with its standard error.

    Extinct replicates contribute 1 unless ``conditional`` restricts the
    average to survivors.
    """
    z = ensemble.observed(t).astype(float)
    if conditional:
        z = z[z > 0]
    if len(z) == 0:
        raise NoDataError(f"no usable replicates at t={t!r}")
    v = np.exp(-chi_at(chi_schedule, t) * y * z)
    se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else math.nan
    return float(v.mean()), se


def normalized_survivors(ensemble: SimEnsemble, chi_schedule, t: float) -> np.ndarray:
    z = ensemble.observed(t)
    return chi_at(chi_schedule, t) * z[z > 0].astype(float)


def ks_statistic(sample, cdf: Callable) -> float:
    """sup |F_n - F| for a reference CDF that may jump.

    Both one-sided limits are compared at every sample point, so point masses
    in the reference are handled exactly.
    """
    x = np.sort(np.asarray(sample, dtype=float))
    n = len(x)
    uniq, last = np.unique(x, return_index=False, return_counts=True)
    cum = np.cumsum(last) / n
    before = np.concatenate([[0.0], cum[:-1]])
    F = np.asarray(cdf(uniq), dtype=float)
    F_left = np.asarray(cdf(np.nextafter(uniq, -np.inf)), dtype=float)
    return float(max(np.max(np.abs(cum - F)), np.max(np.abs(before - F_left))))


MIN_SURVIVORS = 100


def ks_limit_check(ensemble: SimEnsemble, chi_schedule, t: float, reference_cdf: Callable) -> float:
    """KS distance between chi_t Z_t over survivors and a reference CDF.

    Raises
    ------
    NoDataError
        Fewer than 100 surviving, uncensored replicates.
    """
    x = normalized_survivors(ensemble, chi_schedule, t)
    if len(x) < MIN_SURVIVORS:
        raise NoDataError(f"only {len(x)} surviving replicates at t={t!r}; need {MIN_SURVIVORS}")
    return ks_statistic(x, reference_cdf)


def ks_two_sample(a, b) -> tuple[float, float]:
    """Two-sample KS statistic and p-value."""
    res = stats.ks_2samp(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    return float(res.statistic), float(res.pvalue)


@dataclass(frozen=True)
class SummaryRow:
    t: float
    meanZ: float
    seZ: float
    survivors: int
    laplace_y1: float
    se: float


def summarize(ensemble: SimEnsemble, chi_schedule=None) -> list[SummaryRow]:
    """Per-time summary; the Laplace columns are NaN without a chi schedule."""
    rows = []
    for t in ensemble.times:
        z = ensemble.observed(t)
        if len(z) == 0:
            rows.append(SummaryRow(float(t), math.nan, math.nan, 0, math.nan, math.nan))
            continue
        m, se = ensemble.mean_Z(t)
        lap = (math.nan, math.nan)
        if chi_schedule is not None:
            lap = empirical_laplace(ensemble, chi_schedule, 1.0, t)
        rows.append(SummaryRow(float(t), m, se, int(np.sum(z > 0)), *lap))
    return rows


def default_workers() -> int:
    return max(1, min(8, os.cpu_count() or 1))


def is_dirac(spec: str) -> bool:
    return isinstance(parse_lifetime_spec(spec), Dirac)
