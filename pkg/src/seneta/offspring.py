"""Offspring laws {pi_k}: PGF, the ratio function h, extinction root.

Three families are supported, all parsed from a compact spec string::

    binary                 pi_2 = 1
    geometric:<p>          pi_k = (1 - p) p^k,            k >= 0
    table:<p0>,<p1>,...    explicit finite table
    heavylog:<alpha>,<mu>  pi_k = c k^-2 (log k)^(-1-alpha), k >= 2, plus pi_0

Numerically everything is routed through the *excess mean*
``tail_gap(w) = mu - h(1 - w)``, evaluated without cancellation for tiny
``w``.  The PGF and ``h`` near ``s = 1`` are derived from it, so the identity
``(1 - s) h(s) + f(s) = 1`` holds by construction.
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import optimize, special
from scipy.interpolate import CubicSpline

from .errors import DomainError, HypothesisError, ParseError

#: Explicit probabilities are stored for k <= BODY_MAX; beyond it the
#: heavy-tailed and geometric families use analytic tail expressions.
BODY_MAX = 4096

# Gauss-Legendre rule used for the heavylog tail integrals.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


class XLogX(str, enum.Enum):
    FINITE = "finite"
    INFINITE = "infinite"
    UNDETERMINED = "undetermined"


def _phi1(z):
    """1 - (1 - exp(-z)) / z, accurate to full relative precision for z >= 0."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = z < 1e-2
    zs = z[small]
    out[small] = zs * (1 / 2 - zs * (1 / 6 - zs * (1 / 24 - zs * (1 / 120 - zs * (1 / 720 - zs / 5040)))))
    zl = z[~small]
    with np.errstate(invalid="ignore"):
        out[~small] = np.where(np.isinf(zl), 1.0, 1 + np.expm1(-zl) / zl)
    return out


def _excess(k, w):
    """Per-atom excess ``k - (1 - (1-w)^k) / w``; its pi-average is mu - h(1-w)."""
    k, w = np.broadcast_arrays(np.asarray(k, dtype=float), np.asarray(w, dtype=float))
    out = np.empty(k.shape)
    big = w >= 0.5
    out[big] = k[big] - (1 - np.power(1 - w[big], k[big])) / w[big]
    ws, ks = w[~big], k[~big]
    a = -np.log1p(-ws)
    # (1 - e^{-ka})/(1 - e^{-a}) rewritten through phi1 to avoid cancellation
    out[~big] = np.where(ws > 0, (a / np.where(ws > 0, ws, 1)) * ks * (_phi1(ks * a) - _phi1(a)), 0.0)
    return out


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _ret(arr, scalar):
    return float(arr) if scalar else arr


@dataclass(frozen=True)
class OffspringLaw:
    """Base class; subclasses implement ``_excess_mean`` and ``_pgf_small``."""

    def __post_init__(self):
        mu = self.mean
        if not mu > 1:
            raise HypothesisError(f"offspring mean {mu!r} <= 1: process is not supercritical")
        p = self.body_probabilities
        if p[0] + (p[1] if len(p) > 1 else 0.0) >= 1:
            raise HypothesisError("pi_0 + pi_1 >= 1: no genuine branching")

    # -- to be provided by subclasses -------------------------------------
    @property
    def mean(self) -> float:
        raise NotImplementedError

    @property
    def body_probabilities(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def tail_mass(self) -> float:
        return 0.0

    def _excess_mean(self, w):
        raise NotImplementedError

    def _pgf_small(self, s):
        """f(s) for s <= 1/2 by direct summation."""
        p = self.body_probabilities
        return np.polynomial.polynomial.polyval(s, p)

    # -- derived views ----------------------------------------------------
    @property
    def total_mass(self) -> float:
        return math.fsum(self.body_probabilities) + self.tail_mass

    def tail_gap(self, s):
        """mu - h(1 - s) for s in [0, 1]."""
        s, scalar = _as_array(s)
        if np.any((s < 0) | (s > 1)) or np.any(np.isnan(s)):
            raise DomainError(f"tail_gap argument outside [0, 1]: {s}")
        out = np.zeros(s.shape)
        pos = s > 0
        out[pos] = self._excess_mean(s[pos])
        return _ret(out, scalar)

    def complement(self, w):
        """1 - f(1 - w) = w h(1 - w), relative-accurate for small w."""
        w, scalar = _as_array(w)
        out = np.empty(w.shape)
        small = w < 0.5
        out[small] = w[small] * (self.mean - self._excess_mean_safe(w[small]))
        out[~small] = 1 - self._pgf_small(1 - w[~small])
        return _ret(out, scalar)

    def _excess_mean_safe(self, w):
        out = np.zeros(w.shape)
        pos = w > 0
        out[pos] = self._excess_mean(w[pos])
        return out

    def pgf(self, s):
        s, scalar = _as_array(s)
        _check_unit(s, "pgf")
        w = 1 - s
        out = np.empty(s.shape)
        near = w < 0.5
        out[near] = 1 - self.complement(w[near])
        out[~near] = self._pgf_small(s[~near])
        return _ret(out, scalar)

    def h(self, s):
        s, scalar = _as_array(s)
        _check_unit(s, "h")
        w = 1 - s
        out = np.empty(s.shape)
        near = w < 0.5
        out[near] = self.mean - self._excess_mean_safe(w[near])
        out[~near] = (1 - self._pgf_small(s[~near])) / w[~near]
        return _ret(out, scalar)

    @cached_property
    def extinction_probability(self) -> float:
        if self.body_probabilities[0] == 0:
            return 0.0
        target = self.mean - 1
        # tail_gap is nondecreasing; q = 1 - w where tail_gap(w) = mu - 1
        fn = lambda w: float(self._excess_mean(np.array([w]))[0]) - target
        w = optimize.brentq(fn, 1e-300, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
        return 1.0 - w

    def complement_inverse(self, wt: float) -> float:
        """Solve w h(1 - w) = wt for w in [0, 1 - q]."""
        q = self.extinction_probability
        if not 0 <= wt <= 1 - q:
            raise DomainError(f"complement target {wt!r} outside [0, 1 - q]")
        if wt == 0:
            return 0.0
        # h(1-w) in [1, mu] on [0, 1-q] brackets the root in [wt/mu, wt]
        lo, hi = wt / self.mean, min(wt, 1 - q)
        fn = lambda w: self.complement(w) - wt
        if fn(hi) <= 0:
            return hi
        if fn(lo) >= 0:
            return lo
        return optimize.brentq(fn, lo, hi, xtol=wt * 1e-17, rtol=4 * np.finfo(float).eps, maxiter=500)

    def pgf_inverse(self, v: float) -> float:
        q = self.extinction_probability
        if not q - 1e-15 <= v <= 1:
            raise DomainError(f"pgf_inverse argument {v!r} outside [q, 1] = [{q}, 1]")
        return 1.0 - self.complement_inverse(min(1 - v, 1 - q))

    def xlogx_partial(self, K: float) -> float:
        """Partial sum of k log k pi_k over k <= K."""
        p = self.body_probabilities
        k = np.arange(min(len(p), int(K) + 1))
        return float(np.sum(k[2:] * np.log(k[2:]) * p[2:len(k)]))

    @property
    def xlogx(self) -> XLogX:
        return XLogX.FINITE

    @property
    def spec(self) -> str:
        raise NotImplementedError


def _check_unit(s, name):
    if np.any((s < 0) | (s > 1)) or np.any(np.isnan(s)):
        raise DomainError(f"{name} argument outside [0, 1]: {s}")


@dataclass(frozen=True)
class TableLaw(OffspringLaw):
    """Finite offspring table pi_0..pi_K."""

    probs: tuple

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or len(p) < 2:
            raise DomainError("offspring table needs at least two entries")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise DomainError("offspring probabilities must be finite and >= 0")
        total = math.fsum(p)
        if abs(total - 1) > 1e-6:
            raise DomainError(f"offspring probabilities sum to {total!r}, not 1")
        if abs(total - 1) > 1e-14:
            object.__setattr__(self, "probs", tuple(float(x) for x in p / total))
        else:
            object.__setattr__(self, "probs", tuple(float(x) for x in p))
        super().__post_init__()

    @cached_property
    def body_probabilities(self):
        return np.array(self.probs)

    @cached_property
    def mean(self):
        p = self.body_probabilities
        return math.fsum(np.arange(len(p)) * p)

    def _excess_mean(self, w):
        p = self.body_probabilities
        k = np.arange(len(p))
        nz = p > 0
        return p[nz] @ _excess(k[nz, None], np.asarray(w)[None, :])

    def _pgf_small(self, s):
        return np.polynomial.polynomial.polyval(s, self.body_probabilities)

    @property
    def spec(self):
        if self.probs == (0.0, 0.0, 1.0):
            return "binary"
        return "table:" + ",".join(repr(float(x)) for x in self.probs)


@dataclass(frozen=True)
class GeometricLaw(OffspringLaw):
    """pi_k = (1 - p) p^k; f(s) = (1 - p) / (1 - p s)."""

    p: float

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise DomainError(f"geometric parameter {self.p!r} outside (0, 1)")
        super().__post_init__()

    @property
    def mean(self):
        return self.p / (1 - self.p)

    @cached_property
    def body_probabilities(self):
        k = np.arange(BODY_MAX + 1)
        return (1 - self.p) * self.p ** k

    @property
    def tail_mass(self):
        return self.p ** (BODY_MAX + 1)

    def _excess_mean(self, w):
        p = self.p
        w = np.asarray(w, dtype=float)
        return p * p * w / ((1 - p) * (1 - p + p * w))

    def _pgf_small(self, s):
        return (1 - self.p) / (1 - self.p * np.asarray(s, dtype=float))

    @cached_property
    def extinction_probability(self):
        return (1 - self.p) / self.p

    def xlogx_partial(self, K):
        k = np.arange(2, int(min(K, 20000)) + 1, dtype=float)
        return float(np.sum(k * np.log(k) * (1 - self.p) * self.p ** k))

    @property
    def spec(self):
        return f"geometric:{self.p!r}"


def _em_tail(power, b, A):
    """Euler-Maclaurin estimate of sum_{k >= A} k^-power (log k)^-b, power in {1, 2}."""
    la = math.log(A)
    if power == 1:
        integral = la ** (1 - b) / (b - 1)
    else:
        # int_A^inf x^-2 (log x)^-b dx = Gamma(1 - b, log A), via the recurrence
        s = 1 - b  # = -alpha < 0
        upper = special.gammaincc(s + 1, la) * special.gamma(s + 1)
        integral = (upper - la ** s * math.exp(-la)) / s
    f = A ** -power * la ** -b
    fprime = -A ** (-power - 1) * la ** -b * (power + b / la)
    return integral + f / 2 - fprime / 12


@functools.lru_cache(maxsize=16)
def _heavylog_constants(alpha: float):
    b = 1 + alpha
    k = np.arange(2, BODY_MAX + 1, dtype=float)
    lk = np.log(k) ** -b
    body0 = k ** -2 * lk
    body1 = k ** -1 * lk
    A = BODY_MAX + 1
    tail0 = _em_tail(2, b, A)
    tail1 = _em_tail(1, b, A)
    return body0, math.fsum(body0), tail0, math.fsum(body1), tail1


@dataclass(frozen=True)
class HeavyLogLaw(OffspringLaw):
    """pi_k = c k^-2 (log k)^-(1+alpha) for k >= 2, pi_1 = 0, pi_0 = 1 - c S0.

    ``c`` is fixed by the target mean.  The first ``BODY_MAX`` atoms are
    explicit; sums over the infinite tail use Euler-Maclaurin and
    Gauss-Legendre quadrature of the continuous extension.
    """

    alpha: float
    target_mean: float
    c: float = field(init=False, repr=False, compare=False)
    p0: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise DomainError(f"heavylog alpha {self.alpha!r} outside (0, 1)")
        if not self.target_mean > 1:
            raise HypothesisError(f"heavylog mean {self.target_mean!r} <= 1")
        _, s0_body, s0_tail, s1_body, s1_tail = _heavylog_constants(self.alpha)
        c = self.target_mean / (s1_body + s1_tail)
        p0 = 1 - c * (s0_body + s0_tail)
        if p0 < 0:
            raise DomainError(
                f"heavylog:{self.alpha},{self.target_mean} infeasible: pi_0 = {p0:.6g} < 0")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "p0", p0)
        super().__post_init__()

    @property
    def mean(self):
        return self.target_mean

    @cached_property
    def body_probabilities(self):
        body0 = _heavylog_constants(self.alpha)[0]
        p = np.zeros(BODY_MAX + 1)
        p[0] = self.p0
        p[2:] = self.c * body0
        return p

    @property
    def tail_mass(self):
        return self.c * _heavylog_constants(self.alpha)[2]

    def _tail_excess(self, w):
        """Integral over x > BODY_MAX + 1/2 of pi(x) * excess(x, w)."""
        b = 1 + self.alpha
        lo = math.log(BODY_MAX + 0.5)
        a = -math.log1p(-w)
        ell = -math.log(w)
        hi = max(lo + 1, ell + 40)
        n = int(math.ceil(hi - lo))
        edges = lo + (hi - lo) * np.arange(n + 1) / n
        mid = (edges[:-1] + edges[1:]) / 2
        half = (edges[1:] - edges[:-1]) / 2
        v = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
        wts = (half[:, None] * _GL_W[None, :]).ravel()
        # e^-v * excess(e^v, w) without forming e^v
        z = np.exp(v + math.log(a))
        integrand = v ** -b * (a / w) * (_phi1(z) - _phi1(np.array(a)))
        body = np.dot(wts, integrand)
        return self.c * (body + hi ** -self.alpha / self.alpha)

    def _excess_direct(self, w):
        p = self.body_probabilities
        k = np.arange(2, BODY_MAX + 1)
        out = np.empty(len(w))
        for i, wi in enumerate(w):
            out[i] = np.dot(p[2:], _excess(k, wi)) + self._tail_excess(wi)
        return out

    @cached_property
    def _spline(self):
        x = np.arange(-0.40, 6.555, 0.01)
        w = np.exp(-np.exp(x))
        return CubicSpline(x, np.log(self._excess_direct(w)))

    def _excess_mean(self, w):
        w = np.asarray(w, dtype=float)
        out = np.empty(w.shape)
        small = w < 0.5
        ell = -np.log(w[small])
        out[small] = np.exp(self._spline(np.log(ell)))
        ws = w[~small]
        out[~small] = self.mean - (1 - self._pgf_small(1 - ws)) / ws
        return out

    def _pgf_small(self, s):
        return np.polynomial.polynomial.polyval(s, self.body_probabilities)

    def xlogx_partial(self, K):
        body = super().xlogx_partial(min(K, BODY_MAX))
        if K <= BODY_MAX:
            return body
        lo, hi = math.log(BODY_MAX + 0.5), math.log(K + 0.5)
        e = 1 - self.alpha
        return body + self.c * (hi ** e - lo ** e) / e

    @property
    def xlogx(self):
        return XLogX.INFINITE

    @property
    def spec(self):
        return f"heavylog:{self.alpha!r},{self.target_mean!r}"


# -- spec-string grammar ---------------------------------------------------

def _parse_floats(text, start, body, count=None):
    values, pos = [], start
    for piece in body.split(","):
        try:
            values.append(float(piece))
        except ValueError:
            raise ParseError(f"expected a number, got {piece!r}", text, pos) from None
        if not math.isfinite(values[-1]):
            raise ParseError(f"non-finite number {piece!r}", text, pos)
        pos += len(piece) + 1
    if count is not None and len(values) != count:
        raise ParseError(f"expected {count} comma-separated numbers, got {len(values)}", text, start)
    return values


def parse_offspring_spec(text: str) -> OffspringLaw:
    """Parse ``binary | geometric:<p> | table:<p0>,... | heavylog:<alpha>,<mu>``."""
    text = text.strip()
    name, sep, body = text.partition(":")
    start = len(name) + 1
    if name == "binary":
        if sep:
            raise ParseError("'binary' takes no parameters", text, len(name))
        return TableLaw((0.0, 0.0, 1.0))
    if not sep or not body:
        if name in ("geometric", "table", "heavylog"):
            raise ParseError(f"'{name}' requires parameters after ':'", text, len(text))
        raise ParseError(f"unknown offspring family {name!r}", text, 0)
    if name == "geometric":
        (p,) = _parse_floats(text, start, body, 1)
        if not 0 < p < 1:
            raise DomainError(f"geometric p = {p!r} outside (0, 1)")
        return GeometricLaw(p)
    if name == "table":
        return TableLaw(tuple(_parse_floats(text, start, body)))
    if name == "heavylog":
        alpha, mu = _parse_floats(text, start, body, 2)
        return HeavyLogLaw(alpha, mu)
    raise ParseError(f"unknown offspring family {name!r}", text, 0)


def format_offspring_spec(law: OffspringLaw) -> str:
    return law.spec


# -- functional API --------------------------------------------------------

def pgf_eval(law: OffspringLaw, s):
    return law.pgf(s)


def h_eval(law: OffspringLaw, s):
    return law.h(s)


def tail_gap(law: OffspringLaw, s):
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr <= 0):
        raise DomainError("tail_gap requires s in (0, 1]")
    return law.tail_gap(s)


def extinction_root(law: OffspringLaw) -> float:
    if not law.mean > 1:
        raise HypothesisError("extinction_root requires mean > 1")
    return law.extinction_probability


def pgf_inverse(law: OffspringLaw, v: float) -> float:
    return law.pgf_inverse(v)


def xlogx_diverges(law: OffspringLaw, Ks=(1e2, 1e4, 1e6, 1e8)) -> XLogX:
    """Classify E(Z log Z): analytically for known families, else by partial sums."""
    if isinstance(law, (TableLaw, GeometricLaw, HeavyLogLaw)):
        return law.xlogx
    sums = np.array([law.xlogx_partial(K) for K in Ks])
    steps = np.diff(sums)
    if np.all(steps < 1e-9 * max(sums[-1], 1)):
        return XLogX.FINITE
    if np.all(steps > 0) and steps[-1] >= 0.5 * steps[0]:
        return XLogX.INFINITE
    return XLogX.UNDETERMINED
