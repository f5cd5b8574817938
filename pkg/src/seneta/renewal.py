"""Renewal function of the tilted lifetime and its linear-trend decomposition.

On a uniform grid t_i = i * delta we solve

    U = G_beta + G_beta * U

by forward substitution, then write 1 + U(t) = nu t + Ut(t).  ``Ut`` starts at
1 and levels off at (nu^2 / 2) E[X^2] for strongly non-lattice laws.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import AccuracyError, HypothesisError
from .lifetime import LATTICE, STRONGLY_NON_LATTICE, TiltedLifetime, hat_kernel


@dataclass(frozen=True)
class RenewalTable:
    """Discretized U_beta and its decomposition.

    Attributes
    ----------
    delta, horizon : float
        Grid step and last grid time.
    t, U, Ut : ndarray
        Grid times, U_beta(t_i), and Ut_i = 1 + U_i - nu t_i.
    dUt : ndarray
        Signed increments of Ut.  ``dUt[0]`` holds the value at 0, i.e. the
        unit atom plus any atom of U at 0; ``dUt.sum() == Ut[-1]``.
    nu : float
        Reciprocal mean of the tilted law.
    second_moment : float
        E[X^2] under the tilted law.
    """

    delta: float
    horizon: float
    t: np.ndarray = field(repr=False)
    U: np.ndarray = field(repr=False)
    Ut: np.ndarray = field(repr=False)
    dUt: np.ndarray = field(repr=False)
    nu: float
    second_moment: float
    G: np.ndarray = field(repr=False)
    kernel: np.ndarray = field(repr=False)

    @property
    def mass(self) -> float:
        """Total Ut-mass including the unit atom at 0."""
        return float(math.fsum(self.dUt))

    @property
    def mass_target(self) -> float:
        return 0.5 * self.nu ** 2 * self.second_moment

    def increments(self, include_atom: bool = True) -> np.ndarray:
        """Increments of Ut, optionally without the unit atom at 0."""
        d = self.dUt.copy()
        if not include_atom:
            d[0] -= 1.0
        return d

    def residual(self) -> float:
        """max |U - (G + K * U)| over the grid."""
        conv = np.convolve(self.kernel, self.U)[: len(self.U)]
        return float(np.max(np.abs(self.U - self.G - conv)))

    def wald_error(self) -> float:
        return abs(self.U[-1] / self.horizon - self.nu)

    def value(self, t) -> np.ndarray:
        """Ut at arbitrary times by linear interpolation."""
        return np.interp(t, self.t, self.Ut)

    def min_utilde(self) -> float:
        return float(self.Ut.min())


def build_table(gb: TiltedLifetime, delta: float | None = None, horizon: float | None = None,
                allow_non_lattice_override: bool = False) -> RenewalTable:
    """Solve the renewal equation for ``gb`` on [0, horizon].

    Parameters
    ----------
    gb : TiltedLifetime
        The tilted lifetime law.
    delta : float, optional
        Grid step; defaults to (1/nu)/50 and may not be coarser.
    horizon : float, optional
        Defaults to 30/nu; must be at least 20/nu.
    allow_non_lattice_override : bool
        Accept laws whose lattice class is ``unknown``.  Lattice laws are
        always rejected.

    Raises
    ------
    HypothesisError
        Lattice law, or unknown class without the override.
    AccuracyError
        Step too coarse or horizon too short.
    """
    kind = gb.lattice
    if kind == LATTICE:
        raise HypothesisError("renewal decomposition needs a strongly non-lattice lifetime; "
                              "lattice (e.g. Dirac) laws go through the Galton-Watson oracle")
    if kind != STRONGLY_NON_LATTICE and not allow_non_lattice_override:
        raise HypothesisError(f"lifetime lattice class is {kind!r}; pass the override flag to proceed")
    nu = gb.nu
    mean = 1.0 / nu
    delta = mean / 50 if delta is None else float(delta)
    horizon = 30 * mean if horizon is None else float(horizon)
    if not 0 < delta <= mean / 50 * (1 + 1e-12):
        raise AccuracyError(f"grid step {delta!r} exceeds (1/nu)/50 = {mean / 50!r}")
    if horizon < 20 * mean * (1 - 1e-12):
        raise AccuracyError(f"horizon {horizon!r} shorter than 20/nu = {20 * mean!r}")
    n = int(round(horizon / delta))
    t = delta * np.arange(n + 1)
    G = np.asarray(gb.cdf(t), dtype=float)
    K = hat_kernel(gb, delta)
    U = _kernels.renewal_forward(G, K)
    Ut = 1.0 + U - nu * t
    dUt = np.diff(Ut, prepend=0.0)
    return RenewalTable(delta, float(t[-1]), t, U, Ut, dUt, nu, gb.moment(2), G, K)


def utilde_tail(table: RenewalTable, t: float) -> float:
    """|Ut(horizon) - Ut(t)|: how much Ut mass lies beyond ``t``."""
    if t > table.horizon:
        raise AccuracyError(f"t={t!r} beyond table horizon {table.horizon!r}")
    return float(abs(table.Ut[-1] - table.value(t)))
