"""Lifetime laws G, the Malthusian parameter, and the tilted law G_beta.

Spec grammar::

    dirac:<tau> | exp:<lambda> | gamma:<shape>,<rate> | uniform:<a>,<b> | empirical:<path>

Every law exposes ``cell_moments`` (mass and first moment of each grid cell),
which is all the grid solvers need: :func:`hat_kernel` turns it into the
mass- and mean-preserving linear-spline discretization of dG.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np
from scipy import integrate, optimize, special

from .errors import ConsistencyError, ConvergenceError, DomainError, HypothesisError, ParseError

STRONGLY_NON_LATTICE = "strongly-non-lattice"
LATTICE = "lattice"
UNKNOWN = "unknown"

# sampling kind codes shared with the simulation kernels
KIND_DIRAC, KIND_GAMMA, KIND_UNIFORM, KIND_TRUNCEXP, KIND_EMPIRICAL = range(5)


@dataclass(frozen=True)
class LifetimeLaw:
    lattice: ClassVar[str] = STRONGLY_NON_LATTICE

    def cdf(self, t):
        raise NotImplementedError

    def cell_moments(self, edges):
        """Mass and first moment about the left edge of each cell (e_i, e_{i+1}]."""
        raise NotImplementedError

    def cell_second_moments(self, edges):
        """Second moment about the left edge of each cell (e_i, e_{i+1}]."""
        raise NotImplementedError

    def laplace(self, beta: float) -> float:
        raise NotImplementedError

    @property
    def mgf_abscissa(self) -> float:
        """Supremum of s with E[e^{sX}] finite; ``laplace(-s)`` is valid below it."""
        return math.inf

    def moment(self, n: int) -> float:
        raise NotImplementedError

    def quantile_hi(self, eps: float) -> float:
        """A time T with 1 - G(T) <= eps."""
        raise NotImplementedError

    def char(self, theta):
        raise NotImplementedError

    def tilted(self, beta: float) -> "LifetimeLaw":
        """The normalized law proportional to e^{-beta t} dG(t)."""
        raise NotImplementedError

    @property
    def mean(self) -> float:
        return self.moment(1)

    @property
    def atom_at_zero(self) -> float:
        return 0.0

    @property
    def sampler(self):
        """(kind code, float parameter array) for the simulation kernels."""
        raise NotImplementedError

    pdf = None


@dataclass(frozen=True)
class Dirac(LifetimeLaw):
    tau: float
    lattice: ClassVar[str] = LATTICE

    def __post_init__(self):
        if not self.tau > 0:
            raise DomainError(f"dirac tau must be > 0, got {self.tau!r}")

    def cdf(self, t):
        return np.where(np.asarray(t) >= self.tau, 1.0, 0.0)

    def cell_moments(self, edges):
        edges = np.asarray(edges, dtype=float)
        inside = (edges[:-1] < self.tau) & (self.tau <= edges[1:])
        return inside.astype(float), np.where(inside, self.tau - edges[:-1], 0.0)

    def cell_second_moments(self, edges):
        edges = np.asarray(edges, dtype=float)
        inside = (edges[:-1] < self.tau) & (self.tau <= edges[1:])
        return np.where(inside, (self.tau - edges[:-1]) ** 2, 0.0)

    def laplace(self, beta):
        return math.exp(-beta * self.tau)

    def moment(self, n):
        return self.tau ** n

    def quantile_hi(self, eps):
        return self.tau

    def char(self, theta):
        return np.exp(1j * np.asarray(theta) * self.tau)

    def tilted(self, beta):
        return self

    @property
    def sampler(self):
        return KIND_DIRAC, np.array([self.tau])

    @property
    def spec(self):
        return f"dirac:{self.tau!r}"


@dataclass(frozen=True)
class Gamma(LifetimeLaw):
    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise DomainError(f"gamma parameters must be > 0, got {self.shape!r}, {self.rate!r}")

    def cdf(self, t):
        t = np.maximum(np.asarray(t, dtype=float), 0)
        return special.gammainc(self.shape, self.rate * t)

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        k, r = self.shape, self.rate
        with np.errstate(divide="ignore"):
            logp = k * math.log(r) + (k - 1) * np.log(t) - r * t - special.gammaln(k)
        return np.where(t > 0, np.exp(logp), 0.0)

    def cell_moments(self, edges):
        k, r = self.shape, self.rate
        x = r * np.asarray(edges, dtype=float)
        a = np.asarray(edges[:-1], dtype=float)
        # differences of the nearer tail keep relative accuracy far out
        upper = x[:-1] > k
        p_k, q_k = special.gammainc(k, x), special.gammaincc(k, x)
        p_k1, q_k1 = special.gammainc(k + 1, x), special.gammaincc(k + 1, x)
        mass = np.where(upper, q_k[:-1] - q_k[1:], p_k[1:] - p_k[:-1])
        m_abs = (k / r) * np.where(upper, q_k1[:-1] - q_k1[1:], p_k1[1:] - p_k1[:-1])
        m1 = np.clip(m_abs - a * mass, 0, (np.diff(edges)) * mass)
        return np.maximum(mass, 0), m1

    def cell_second_moments(self, edges):
        k, r = self.shape, self.rate
        e = np.asarray(edges, dtype=float)
        x = r * e
        upper = x[:-1] > k

        def incr(s):
            p, q = special.gammainc(s, x), special.gammaincc(s, x)
            return np.where(upper, q[:-1] - q[1:], p[1:] - p[:-1])

        a = e[:-1]
        mass, m1a, m2a = incr(k), (k / r) * incr(k + 1), (k * (k + 1) / r ** 2) * incr(k + 2)
        m2 = m2a - 2 * a * m1a + a * a * mass
        return np.clip(m2, 0, np.diff(e) ** 2 * np.maximum(mass, 0))

    def laplace(self, beta):
        return (self.rate / (self.rate + beta)) ** self.shape

    @property
    def mgf_abscissa(self):
        return self.rate

    def moment(self, n):
        return math.exp(special.gammaln(self.shape + n) - special.gammaln(self.shape)) / self.rate ** n

    def quantile_hi(self, eps):
        return float(special.gammainccinv(self.shape, eps)) / self.rate

    def char(self, theta):
        return (1 - 1j * np.asarray(theta) / self.rate) ** (-self.shape)

    def tilted(self, beta):
        return type(self)(self.shape, self.rate + beta) if type(self) is Gamma else Exponential(self.rate + beta)

    @property
    def sampler(self):
        return KIND_GAMMA, np.array([self.shape, self.rate])

    @property
    def spec(self):
        return f"gamma:{self.shape!r},{self.rate!r}"


class Exponential(Gamma):
    def __init__(self, rate: float):
        super().__init__(1.0, float(rate))

    def __repr__(self):
        return f"Exponential(rate={self.rate!r})"

    @property
    def spec(self):
        return f"exp:{self.rate!r}"


@dataclass(frozen=True)
class Uniform(LifetimeLaw):
    a: float
    b: float

    def __post_init__(self):
        if not (0 <= self.a < self.b):
            raise DomainError(f"uniform needs 0 <= a < b, got {self.a!r}, {self.b!r}")

    def cdf(self, t):
        return np.clip((np.asarray(t, dtype=float) - self.a) / (self.b - self.a), 0, 1)

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        return np.where((t >= self.a) & (t <= self.b), 1 / (self.b - self.a), 0.0)

    def cell_moments(self, edges):
        e = np.asarray(edges, dtype=float)
        lo = np.clip(e[:-1], self.a, self.b)
        hi = np.clip(e[1:], self.a, self.b)
        width = self.b - self.a
        mass = (hi - lo) / width
        m1 = ((hi - e[:-1]) ** 2 - (lo - e[:-1]) ** 2) / (2 * width)
        return mass, m1

    def cell_second_moments(self, edges):
        e = np.asarray(edges, dtype=float)
        lo = np.clip(e[:-1], self.a, self.b)
        hi = np.clip(e[1:], self.a, self.b)
        return ((hi - e[:-1]) ** 3 - (lo - e[:-1]) ** 3) / (3 * (self.b - self.a))

    def laplace(self, beta):
        if beta == 0:
            return 1.0
        d = self.b - self.a
        return math.exp(-beta * self.a) * -math.expm1(-beta * d) / (beta * d)

    def moment(self, n):
        return (self.b ** (n + 1) - self.a ** (n + 1)) / ((n + 1) * (self.b - self.a))

    def quantile_hi(self, eps):
        return self.b

    def char(self, theta):
        th = np.asarray(theta, dtype=float)
        d = self.b - self.a
        with np.errstate(invalid="ignore", divide="ignore"):
            val = np.exp(1j * th * self.a) * (np.exp(1j * th * d) - 1) / (1j * th * d)
        return np.where(th == 0, 1.0 + 0j, val)

    def tilted(self, beta):
        return TruncatedExponential(self.a, self.b, beta)

    @property
    def sampler(self):
        return KIND_UNIFORM, np.array([self.a, self.b])

    @property
    def spec(self):
        return f"uniform:{self.a!r},{self.b!r}"


@dataclass(frozen=True)
class TruncatedExponential(LifetimeLaw):
    """Density proportional to exp(-rate t) on [a, b]; the tilt of a uniform."""

    a: float
    b: float
    rate: float

    def _norm(self):
        # integral of rate e^{-rate t} over [a, b]
        return math.exp(-self.rate * self.a) * -math.expm1(-self.rate * (self.b - self.a))

    def _F(self, x):
        """Unnormalized CDF: integral over [a, x] of rate e^{-rate t}."""
        x = np.clip(np.asarray(x, dtype=float), self.a, self.b)
        return math.exp(-self.rate * self.a) * -np.expm1(-self.rate * (x - self.a))

    def cdf(self, t):
        return self._F(t) / self._norm()

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        return np.where((t >= self.a) & (t <= self.b), self.rate * np.exp(-self.rate * t) / self._norm(), 0.0)

    def cell_moments(self, edges):
        e = np.asarray(edges, dtype=float)
        r = self.rate
        lo = np.clip(e[:-1], self.a, self.b)
        hi = np.clip(e[1:], self.a, self.b)
        z = self._norm()
        mass = (self._F(hi) - self._F(lo)) / z
        # integral over [lo, hi] of (t - left) r e^{-rt} dt
        left = e[:-1]
        m1 = ((lo - left) * np.exp(-r * lo) - (hi - left) * np.exp(-r * hi)
              + (np.exp(-r * lo) - np.exp(-r * hi)) / r) / z
        return mass, np.clip(m1, 0, np.diff(e) * mass)

    def cell_second_moments(self, edges):
        e = np.asarray(edges, dtype=float)
        r = self.rate
        lo = np.clip(e[:-1], self.a, self.b)
        hi = np.clip(e[1:], self.a, self.b)
        left = e[:-1]
        # antiderivative of (t - left)^2 r e^{-rt}
        F = lambda t: -np.exp(-r * t) * ((t - left) ** 2 + 2 * (t - left) / r + 2 / r ** 2)
        m2 = (F(hi) - F(lo)) / self._norm()
        return np.clip(m2, 0, np.diff(e) ** 2 * self.cell_moments(e)[0])

    def laplace(self, beta):
        r = self.rate
        return r / (r + beta) * TruncatedExponential(self.a, self.b, r + beta)._norm() / self._norm()

    def moment(self, n):
        val, _ = integrate.quad(lambda t: t ** n * self.pdf(t), self.a, self.b, epsabs=0, epsrel=1e-13, limit=200)
        return val

    def quantile_hi(self, eps):
        return self.b

    def char(self, theta):
        th = np.atleast_1d(np.asarray(theta, dtype=float))
        out = np.array([complex(integrate.quad(lambda t: math.cos(x * t) * self.pdf(t), self.a, self.b)[0],
                                integrate.quad(lambda t: math.sin(x * t) * self.pdf(t), self.a, self.b)[0])
                        for x in th])
        return out if np.ndim(theta) else out[0]

    def tilted(self, beta):
        return TruncatedExponential(self.a, self.b, self.rate + beta)

    @property
    def sampler(self):
        return KIND_TRUNCEXP, np.array([self.a, self.b, self.rate])

    @property
    def spec(self):
        return f"truncexp:{self.a!r},{self.b!r},{self.rate!r}"


@dataclass(frozen=True)
class Empirical(LifetimeLaw):
    """Right-continuous step CDF through the points (t_i, G(t_i))."""

    times: tuple
    values: tuple
    path: str = field(default="", compare=False)
    lattice: ClassVar[str] = UNKNOWN

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        g = np.asarray(self.values, dtype=float)
        if len(t) == 0 or len(t) != len(g):
            raise DomainError("empirical CDF needs matching, non-empty t and G columns")
        if np.any(np.diff(t) <= 0):
            raise DomainError("empirical CDF times must be strictly increasing")
        if np.any(np.diff(g) < 0) or g[0] < 0 or t[0] < 0:
            raise DomainError("empirical CDF must be nondecreasing in [0, 1] on t >= 0")
        if abs(g[-1] - 1) > 1e-12:
            raise DomainError(f"empirical CDF must reach 1, ends at {g[-1]!r} (defective laws unsupported)")

    @property
    def masses(self):
        g = np.asarray(self.values, dtype=float)
        return np.diff(g, prepend=0.0)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t, side="right") - 1
        vals = np.asarray(self.values)
        return np.where(idx >= 0, vals[np.maximum(idx, 0)], 0.0)

    def cell_moments(self, edges):
        e = np.asarray(edges, dtype=float)
        t = np.asarray(self.times)
        p = self.masses
        cell = np.searchsorted(e, t, side="left") - 1  # t in (e_cell, e_cell+1]
        n = len(e) - 1
        ok = (cell >= 0) & (cell < n)
        mass = np.bincount(cell[ok], weights=p[ok], minlength=n)
        m1 = np.bincount(cell[ok], weights=(p * (t - e[np.clip(cell, 0, n)]))[ok], minlength=n)
        return mass, m1

    def cell_second_moments(self, edges):
        e = np.asarray(edges, dtype=float)
        t = np.asarray(self.times)
        cell = np.searchsorted(e, t, side="left") - 1
        n = len(e) - 1
        ok = (cell >= 0) & (cell < n)
        w = self.masses * (t - e[np.clip(cell, 0, n)]) ** 2
        return np.bincount(cell[ok], weights=w[ok], minlength=n)

    @property
    def atom_at_zero(self):
        return float(self.masses[0]) if self.times[0] == 0 else 0.0

    def laplace(self, beta):
        return float(np.dot(self.masses, np.exp(-beta * np.asarray(self.times))))

    def moment(self, n):
        return float(np.dot(self.masses, np.asarray(self.times) ** n))

    def quantile_hi(self, eps):
        return float(self.times[-1])

    def char(self, theta):
        th = np.asarray(theta, dtype=float)
        return np.exp(1j * np.multiply.outer(th, np.asarray(self.times))) @ self.masses

    def tilted(self, beta):
        w = self.masses * np.exp(-beta * np.asarray(self.times))
        return Empirical(self.times, tuple(np.minimum(np.cumsum(w) / w.sum(), 1.0)), self.path)

    @property
    def sampler(self):
        return KIND_EMPIRICAL, np.concatenate([np.asarray(self.times), np.asarray(self.values)])

    @property
    def spec(self):
        return f"empirical:{self.path}"


def load_empirical_csv(path: str) -> Empirical:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [c.strip() for c in next(reader, [])]
        if header != ["t", "G"]:
            raise ParseError(f"empirical CSV {path!r} must have header 't,G', got {header!r}")
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    try:
        t = tuple(float(r[0]) for r in rows)
        g = tuple(float(r[1]) for r in rows)
    except (ValueError, IndexError) as exc:
        raise ParseError(f"bad row in empirical CSV {path!r}: {exc}") from None
    return Empirical(t, g, path)


def parse_lifetime_spec(text: str) -> LifetimeLaw:
    text = text.strip()
    name, sep, body = text.partition(":")
    if not sep or not body:
        raise ParseError("expected '<family>:<params>'", text, len(text) if sep else len(name))
    start = len(name) + 1
    if name == "empirical":
        return load_empirical_csv(body)
    arity = {"dirac": 1, "exp": 1, "gamma": 2, "uniform": 2}
    if name not in arity:
        raise ParseError(f"unknown lifetime family {name!r}", text, 0)
    values, pos = [], start
    for piece in body.split(","):
        try:
            values.append(float(piece))
        except ValueError:
            raise ParseError(f"expected a number, got {piece!r}", text, pos) from None
        pos += len(piece) + 1
    if len(values) != arity[name]:
        raise ParseError(f"'{name}' takes {arity[name]} parameter(s), got {len(values)}", text, start)
    if any(not math.isfinite(v) or v < 0 for v in values):
        raise DomainError(f"lifetime parameters must be finite and non-negative: {text!r}")
    if name == "dirac":
        return Dirac(values[0])
    if name == "exp":
        return Exponential(values[0])
    if name == "gamma":
        return Gamma(*values)
    return Uniform(*values)


# -- Malthusian parameter, tilt, nu ------------------------------------------

def malthusian(law: LifetimeLaw, mu: float, numeric: bool = False) -> float:
    """Unique beta > 0 with integral of e^{-beta t} dG(t) = 1/mu."""
    if not mu > 1:
        raise HypothesisError(f"Malthusian parameter needs mu > 1, got {mu!r}")
    if not numeric:
        if isinstance(law, Dirac):
            return math.log(mu) / law.tau
        if isinstance(law, Gamma):
            return law.rate * math.expm1(math.log(mu) / law.shape)
    if law.atom_at_zero >= 1 / mu:
        raise HypothesisError("lifetime mass at 0 >= 1/mu: no Malthusian parameter")
    target = -math.log(mu)
    fn = lambda b: math.log(law.laplace(b)) - target
    hi = 1.0 / max(law.mean, 1e-300)
    for _ in range(200):
        if fn(hi) < 0:
            break
        hi *= 2
    else:
        raise ConvergenceError(f"could not bracket Malthusian root: laplace({hi}) still >= 1/mu")
    beta, info = optimize.brentq(fn, 0.0, hi, xtol=1e-300, rtol=1e-14, full_output=True, maxiter=500)
    if not info.converged:
        raise ConvergenceError(f"Malthusian root not converged in bracket [0, {hi}]")
    return beta


@dataclass(frozen=True)
class TiltedLifetime:
    """G_beta(t) = mu * integral_0^t e^{-beta u} dG(u)."""

    base: LifetimeLaw
    beta: float
    mu: float
    law: LifetimeLaw = field(repr=False)
    mass: float

    def cdf(self, t):
        return self.mass * self.law.cdf(t)

    def cell_moments(self, edges):
        m, m1 = self.law.cell_moments(edges)
        return self.mass * m, self.mass * m1

    def cell_second_moments(self, edges):
        return self.mass * self.law.cell_second_moments(edges)

    @property
    def atom_at_zero(self):
        return self.mass * self.law.atom_at_zero

    def quantile_hi(self, eps):
        return self.law.quantile_hi(eps)

    def moment(self, n):
        return self.mass * self.law.moment(n)

    @property
    def mean(self):
        return self.moment(1)

    @property
    def nu(self):
        return 1.0 / self.mean

    @property
    def lattice(self):
        return self.base.lattice


def tilt(law: LifetimeLaw, beta: float, mu: float) -> TiltedLifetime:
    mass = mu * law.laplace(beta)
    if abs(mass - 1) > 1e-6:
        raise ConsistencyError(f"(beta={beta!r}, mu={mu!r}) inconsistent: tilted mass {mass!r} != 1")
    return TiltedLifetime(law, beta, mu, law.tilted(beta), mass)


def nu(law: LifetimeLaw, beta: float, mu: float) -> float:
    """1/nu = mu * integral of t e^{-beta t} dG(t), by quadrature over G."""
    tilt(law, beta, mu)
    if isinstance(law, Dirac):
        first = mu * law.tau * math.exp(-beta * law.tau)
    elif isinstance(law, Empirical):
        t = np.asarray(law.times)
        first = mu * float(np.dot(law.masses, t * np.exp(-beta * t)))
    else:
        hi = law.quantile_hi(1e-16)
        lo = getattr(law, "a", 0.0)
        f = lambda t: t * math.exp(-beta * t) * float(law.pdf(t))
        first, _ = integrate.quad(f, lo, hi, epsabs=0, epsrel=1e-13, limit=500)
        first *= mu
    if not (first > 0 and math.isfinite(first)):
        raise ConsistencyError(f"tilted first moment {first!r} not positive and finite")
    return 1.0 / first


@dataclass(frozen=True)
class LatticeReport:
    kind: str
    scan_min: float | None = None
    heuristic: bool = False


def lattice_class(law: LifetimeLaw, n_theta: int = 20001) -> LatticeReport:
    """Analytic classification; empirical laws get a labeled heuristic scan."""
    if not isinstance(law, Empirical):
        return LatticeReport(law.lattice)
    m = law.mean
    theta = np.linspace(0.5 / m, 400 * math.pi / m, n_theta)
    gap = np.abs(1 - law.char(theta))
    return LatticeReport(UNKNOWN, float(gap.min()), heuristic=True)


def hat_kernel(law, step: float, eps: float = 1e-12) -> np.ndarray:
    """Weights K_m = integral of hat((t - m step)/step) dG(t), m = 0..M.

    Exact for piecewise-linear integrands; preserves total mass and first
    moment.  Mass beyond the (1 - eps) quantile is lumped on the last tap.
    """
    T = law.quantile_hi(eps)
    M = int(math.ceil(T / step)) + 1
    edges = step * np.arange(M + 1)
    mass, m1 = law.cell_moments(edges)
    frac = np.clip(m1 / step, 0, mass)
    K = np.zeros(M + 1)
    K[:-1] += mass - frac
    K[1:] += frac
    K[0] += law.atom_at_zero
    total = law.mass if isinstance(law, TiltedLifetime) else 1.0
    K[-1] += max(total - math.fsum(K), 0.0)
    return K


def curvature_kernel(law, step: float, eps: float = 1e-12) -> np.ndarray:
    """Second-order correction to :func:`hat_kernel`.

    Linear interpolation on a cell misses (1/2)(s)(s - step) phi'' per unit
    mass.  Returned taps T_m, m = -1..M+1 (stored from index 0), act on the
    samples directly: sum_m T_m phi_{i-m} approximates that defect with
    centred second differences.  Zero for laws sitting on grid nodes.
    """
    T = law.quantile_hi(eps)
    M = int(math.ceil(T / step)) + 1
    edges = step * np.arange(M + 1)
    _, m1 = law.cell_moments(edges)
    m2 = law.cell_second_moments(edges)
    C = 0.5 * (m2 - step * m1) / step ** 2
    S = np.convolve(C, [0.5, 0.5])
    return np.convolve(S, [1.0, -2.0, 1.0])
