"""Galton-Watson oracle: exact Seneta constants for unit Dirac lifetimes.

With every particle living exactly one unit of time the process is an
ordinary Galton-Watson chain, F_n is the n-fold iterate of the PGF and the
Seneta constants are chi_n = -log F_{-n}(theta).  Everything here is exact up
to root-finding tolerance, so it serves as the lattice-side reference that
the renewal machinery cannot reach.

The recursion runs on w_n = 1 - s_n: ``w_{n+1} h(1 - w_{n+1}) = w_n``.  This
keeps full relative precision even when s_n is within 1e-15 of 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, HypothesisError
from .laplace import Y_asymptote
from .offspring import OffspringLaw, XLogX, xlogx_diverges

#: Below this value of 1 - s_n a naive iteration on s would lose digits.
HIGH_PRECISION_THRESHOLD = 1e-8


def iterate_pgf(law: OffspringLaw, s: float, n: int) -> float:
    """F_n(s): the PGF applied ``n`` times to ``s``."""
    if not 0.0 <= s <= 1.0:
        raise DomainError(f"s={s!r} outside [0, 1]")
    if n < 0:
        raise DomainError(f"n={n!r} must be >= 0")
    w = 1.0 - s
    for _ in range(n):
        w = float(law.complement(w))
    return 1.0 - w


def iterate_complement(law: OffspringLaw, w: float, n: int) -> float:
    """1 - F_n(1 - w), accurate in relative terms for tiny ``w``."""
    for _ in range(n):
        w = float(law.complement(w))
    return w


@dataclass(frozen=True)
class ChiSeries:
    """Seneta constants of the embedded Galton-Watson chain.

    Attributes
    ----------
    theta : float
        Normalization, s_0 = theta.
    n : ndarray
        Generations 0..N.
    w : ndarray
        1 - s_n, kept separately for precision.
    chi, m : ndarray
        chi_n = -log s_n and m_n = mu^n chi_n.
    high_precision_from : int or None
        First generation with 1 - s_n below 1e-8.
    """

    theta: float
    mu: float
    n: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    chi: np.ndarray = field(repr=False)
    m: np.ndarray = field(repr=False)
    high_precision_from: int | None = None

    @property
    def s(self) -> np.ndarray:
        return 1.0 - self.w


def seneta_chi(law: OffspringLaw, theta: float, N: int = 60) -> ChiSeries:
    """chi_n = -log F_{-n}(theta) for n = 0..N.

    Raises
    ------
    DomainError
        ``theta`` outside (q, 1) or negative ``N``.
    """
    q = law.extinction_probability
    if not q < theta < 1:
        raise DomainError(f"theta={theta!r} must lie strictly inside (q, 1) = ({q!r}, 1)")
    if N < 0:
        raise DomainError(f"N={N!r} must be >= 0")
    w = np.empty(N + 1)
    w[0] = 1.0 - theta
    for i in range(N):
        w[i + 1] = law.complement_inverse(float(w[i]))
    chi = -np.log1p(-w)
    n = np.arange(N + 1)
    m = chi * np.exp(n * math.log(law.mean))
    small = np.flatnonzero(w < HIGH_PRECISION_THRESHOLD)
    hp = int(small[0]) if small.size else None
    return ChiSeries(float(theta), law.mean, n, w, chi, m, hp)


@dataclass(frozen=True)
class GWTheoremCheck:
    """log m_n against the discrete asymptote Y(n), with tau = 1."""

    n: np.ndarray
    log_m: np.ndarray
    Y: np.ndarray
    ratio: np.ndarray


def gw_Y(law: OffspringLaw, n) -> np.ndarray:
    """Y(n) = (1/mu) int_0^n gap(e^{-u log mu}) du (tau = 1, nu = 1)."""
    mu = law.mean
    return Y_asymptote(law, math.log(mu), 1.0, mu, np.asarray(n, dtype=float))


def gw_theorem_check(law: OffspringLaw, theta: float, N: int = 60) -> GWTheoremCheck:
    """Ratio log m_n / Y(n) for a law with E(Z log Z) infinite.

    Raises
    ------
    HypothesisError
        When E(Z log Z) is not known to be infinite; Y(n) then converges
        and its limit is quoted in the message.
    """
    kind = xlogx_diverges(law)
    if kind is not XLogX.INFINITE:
        tail = gw_Y(law, [0.0, float(N), 2.0 * N])
        raise HypothesisError(
            f"E(Z log Z) {kind.value}: hypothesis violated, Y converges "
            f"(Y({N}) = {tail[1]:.6g}, Y({2 * N}) = {tail[2]:.6g})")
    series = seneta_chi(law, theta, N)
    Y = gw_Y(law, series.n)
    log_m = np.log(series.m)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(Y > 0, log_m / Y, np.nan)
    return GWTheoremCheck(series.n, log_m, Y, ratio)
