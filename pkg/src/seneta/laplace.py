"""Limit Laplace transform R and the derived Seneta series.

R solves the fixed-point equation

    R(y) = integral of f(R(y e^{-beta t})) dG(t),      R(1) = theta.

We iterate on W = 1 - R over the log grid u = log y.  On that grid the
equation becomes W(u) = integral of g(W(u - beta t)) dG(t) with
g(w) = 1 - f(1 - w), a causal convolution, which is discretized with the
hat kernel of G at time step du / beta.  Working with W keeps relative
precision where R is within 1e-25 of 1.

Solutions form a scale family R(c y), so every sweep is re-centred to put
R(1) = theta back in place.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import PchipInterpolator

from .errors import AccuracyError, ConvergenceError, DomainError
from .lifetime import Dirac, LifetimeLaw, curvature_kernel, hat_kernel, tilt
from .offspring import OffspringLaw
from .renewal import RenewalTable

@dataclass(frozen=True)
class LaplaceSolution:
    """R on the log grid, stored through W = 1 - R.

    Attributes
    ----------
    u : ndarray
        Uniform grid of log y, from ``u[0] < 0`` to ``u[-1] > 0``.
    W : ndarray
        1 - R(e^u), nondecreasing.
    tail : TailModel
        Continuation of W below the grid.
    upper_rate : float
        Exponential rate at which W approaches 1 - q above the grid.
    sweeps : int
        Fixed-point sweeps performed.
    trace : list of float
        Sup-norm change per sweep.
    """

    offspring: OffspringLaw = field(repr=False)
    lifetime: LifetimeLaw
    beta: float
    theta: float
    q: float
    du: float
    u: np.ndarray = field(repr=False)
    W: np.ndarray = field(repr=False)
    tail: TailModel = field(repr=False)
    sweeps: int
    trace: list = field(repr=False, default_factory=list)
    upper_rate: float = math.inf

    @property
    def R(self) -> np.ndarray:
        return 1.0 - self.W

    @property
    def y(self) -> np.ndarray:
        return np.exp(self.u)

    @property
    def slope(self) -> float:
        """d log W / du just below the grid."""
        return self.tail.slope(math.log(self.W[0]))

    @property
    def i0(self) -> int:
        """Index of the node u = 0."""
        return int(round(-self.u[0] / self.du))

    def log_W_at(self, u) -> np.ndarray:
        """log(1 - R(e^u)) with log-linear extension below and clamping above."""
        u = np.asarray(u, dtype=float)
        return _eval_logW(self.u, np.log(self.W), self.tail, self.q, u, self.upper_rate)

    def R_at(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        out = np.ones(y.shape)
        pos = y > 0
        out[pos] = -np.expm1(self.log_W_at(np.log(y[pos])))
        return out

    def residual(self) -> float:
        """Max over nodes of |R - T R| for the discretized operator T."""
        K = operator_kernel(self.lifetime, self.du / self.beta)
        new = _apply(self.offspring, self.W, self.u, K, self.tail, self.q, self.upper_rate)
        return float(np.max(np.abs(new - self.W)))

    def quadrature_residual(self, y) -> np.ndarray:
        """|R(y) - integral f(R(y e^{-beta t})) dG(t)| by adaptive quadrature.

        Independent of the grid operator; only continuous lifetimes with a
        density are supported.
        """
        law = self.lifetime
        if law.pdf is None:
            raise DomainError("quadrature residual needs a lifetime with a density")
        lo = getattr(law, "a", 0.0)
        hi = law.quantile_hi(1e-14)
        out = []
        for yy in np.atleast_1d(np.asarray(y, dtype=float)):
            fn = lambda t: float(self.offspring.complement(
                math.exp(float(self.log_W_at(math.log(yy) - self.beta * t))))) * float(law.pdf(t))
            val, _ = integrate.quad(fn, lo, hi, epsabs=1e-15, epsrel=1e-11, limit=400)
            w = math.exp(float(self.log_W_at(math.log(yy))))
            out.append(abs(w - val))
        return np.array(out)


def _upper_extension(W_top, q, upper, dist):
    """W above the grid: 1 - q approached at rate ``upper`` per unit of u."""
    gap = max(1.0 - q - W_top, 0.0)
    with np.errstate(invalid="ignore"):
        decay = np.where(np.asarray(dist) > 0, np.exp(-upper * np.asarray(dist)), 1.0)
    return (1.0 - q) - gap * decay


def _eval_logW(u_grid, logW, tail, q, u, upper=math.inf):
    interp = PchipInterpolator(u_grid, logW, extrapolate=False)
    out = np.empty(np.shape(u))
    lo = u < u_grid[0]
    hi = u > u_grid[-1]
    mid = ~(lo | hi)
    out[lo] = tail.extend(logW[0], u_grid[0] - u[lo])
    out[hi] = np.log(_upper_extension(math.exp(logW[-1]), q, upper, u[hi] - u_grid[-1]))
    out[mid] = interp(u[mid])
    return out


def upper_decay_rate(offspring: OffspringLaw, lifetime: LifetimeLaw, beta: float) -> float:
    """Rate gamma with R(e^u) - q ~ e^{-gamma u} as u -> infinity.

    Linearizing at q gives f'(q) E[e^{gamma beta X}] = 1.  Returns ``inf``
    when f'(q) = 0, and the moment-generating abscissa over beta when no
    root exists below it.
    """
    q = offspring.extinction_probability
    if q <= 0:
        return math.inf
    h = 1e-5 * min(q, 1 - q)
    d = float(offspring.pgf(q + h) - offspring.pgf(q - h)) / (2 * h)
    if d <= 0:
        return math.inf
    phi = lambda s: math.log(d) + math.log(lifetime.laplace(-s))
    a = lifetime.mgf_abscissa
    if math.isfinite(a):
        hi = a * (1 - 1e-12)
        if phi(hi) < 0:
            return a / beta
    else:
        hi = 1.0
        while phi(hi) < 0:
            hi *= 2
    return optimize.brentq(phi, 0.0, hi, xtol=1e-14) / beta


def operator_kernel(lifetime: LifetimeLaw, step: float) -> np.ndarray:
    """Hat kernel plus curvature correction, taps m = -1..M+1.

    With the correction the quadrature of the operator is fourth-order for
    smooth lifetime densities and still exact for Dirac laws on the grid.
    """
    K = hat_kernel(lifetime, step)
    C = curvature_kernel(lifetime, step)
    out = C.copy()
    out[1:len(K) + 1] += K
    return out


def _apply(law: OffspringLaw, W, u, K, tail, q, upper=math.inf):
    """One application of the fixed-point operator on the grid (no recentring).

    ``K`` comes from :func:`operator_kernel`; its first tap looks one node
    up, where W follows its exponential approach to 1 - q.
    """
    n_ghost = len(K) - 2
    du = u[1] - u[0]
    ghost = np.exp(tail.extend(math.log(W[0]), du * np.arange(n_ghost, 0, -1)))
    top = _upper_extension(W[-1], q, upper, du)
    ext = law.complement(np.concatenate([ghost, W, [top]]))
    return np.convolve(ext, K, "valid")


def local_slope(offspring: OffspringLaw, lifetime: LifetimeLaw, beta: float, w):
    """d log W / du of the solution at small level ``w``.

    With X(t) = e^{beta t} W(-beta t) the closed form for X gives
    d log X / dt ~ (nu/mu) gap / (1 + sigma), and sigma ~ (M - 1) gap / mu
    where M is the total Ut-mass.  Hence

        s(w) = 1 - (nu / (beta mu)) gap(w) / (1 + (M - 1) gap(w) / mu).

    For Dirac lifetimes the equation is a pure shift and s = log h / log mu
    exactly when h is frozen.  Both reduce to s = 1 when gap(w) = 0.
    """
    w, scalar = np.atleast_1d(np.asarray(w, dtype=float)), np.ndim(w) == 0
    mu = offspring.mean
    gap = offspring.tail_gap(w)
    if isinstance(lifetime, Dirac):
        out = np.log(mu - gap) / (beta * lifetime.tau)
    else:
        gb = tilt(lifetime, beta, mu)
        mass = 0.5 * gb.nu ** 2 * gb.moment(2)
        out = 1 - gb.nu / (beta * mu) * gap / (1 + (mass - 1) * gap / mu)
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class TailModel:
    """Continuation of log W below the grid along d log W / du = s(W).

    The slope is s(w) = 1 - kappa (1 - s0(w)) with s0 from
    :func:`local_slope`.  ``kappa`` absorbs the higher-order terms; the
    solver picks it so that the converged profile does not drift.
    ``phi`` is the u-distance accumulated along the level table ``lw``.
    """

    lw: np.ndarray = field(repr=False)
    defect: np.ndarray = field(repr=False)
    kappa: float
    phi: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, offspring, lifetime, beta, q, lw_lo=-800.0, n=80001, kappa=1.0):
        top = math.log(0.5 * (1 - q))
        lw = np.linspace(lw_lo, top, n)
        defect = 1.0 - local_slope(offspring, lifetime, beta, np.exp(lw))
        return cls._make(lw, defect, kappa)

    @classmethod
    def _make(cls, lw, defect, kappa):
        sl = np.maximum(1.0 - kappa * defect, 1e-3)
        phi = integrate.cumulative_trapezoid(1.0 / sl, lw, initial=0.0)
        return cls(lw, defect, float(kappa), phi)

    def with_kappa(self, kappa: float) -> "TailModel":
        return self._make(self.lw, self.defect, kappa)

    def slope(self, lw0: float) -> float:
        return float(1.0 - self.kappa * np.interp(lw0, self.lw, self.defect))

    def extend(self, lw0: float, dist) -> np.ndarray:
        """log W at distance ``dist`` >= 0 below a node with log W = lw0."""
        target = np.interp(lw0, self.lw, self.phi) - np.asarray(dist, dtype=float)
        out = np.interp(target, self.phi, self.lw)
        below = target < self.phi[0]
        out[below] = self.lw[0] + self.slope(self.lw[0]) * (target[below] - self.phi[0])
        return out


def _recentre(u, W, theta, q, tail, upper=math.inf):
    """Shift so that W(0) = 1 - theta; returns (shifted W, shift)."""
    logW = np.log(W)
    target = math.log1p(-theta)
    j = int(np.searchsorted(logW, target))
    if j <= 0 or j >= len(u):
        raise ConvergenceError("iterate lost the level R = theta off the grid")
    interp = PchipInterpolator(u, logW, extrapolate=False)
    c = optimize.brentq(lambda x: float(interp(x)) - target, u[j - 1], u[j], xtol=1e-15)
    return np.exp(_eval_logW(u, logW, tail, q, u + c, upper)), c


def solve_R(offspring: OffspringLaw, lifetime: LifetimeLaw, beta: float, theta: float,
            du: float = 0.01, t_max: float | None = None, nu: float | None = None,
            max_sweeps: int = 20_000, tol: float = 1e-10, rel_tol: float = 1e-9,
            drift_tol: float = 1e-8) -> LaplaceSolution:
    """Solve the limit Laplace-transform equation by re-centred iteration.

    Parameters
    ----------
    offspring, lifetime : laws
    beta : float
        Malthusian parameter of the pair.
    theta : float
        Normalization R(1) = theta, strictly between q and 1.
    du : float
        Step of the log-y grid.  For Dirac lifetimes it is shrunk so that
        beta * tau is a whole number of steps, which makes the operator an
        exact shift.
    t_max : float, optional
        The grid covers u in [-beta (t_max + 10/nu), beta t_max];
        defaults to 60 / beta.
    nu : float, optional
        Renewal rate of the tilted law, used for the lower extension.
    max_sweeps, tol, rel_tol
        Stop when the sup change of W is below ``tol`` and the relative
        change on the lower half of the grid below ``rel_tol``.
    drift_tol : float
        Largest accepted per-sweep re-centring shift of the converged profile.

    Returns
    -------
    LaplaceSolution

    Raises
    ------
    DomainError
        ``theta`` outside (q, 1).
    ConvergenceError
        No convergence within ``max_sweeps``; the trace is attached.
    """
    q = offspring.extinction_probability
    if not q < theta < 1:
        raise DomainError(f"theta={theta!r} must lie strictly inside (q, 1) = ({q!r}, 1)")
    mu = offspring.mean
    if isinstance(lifetime, Dirac):
        shift = beta * lifetime.tau
        du = shift / max(1, round(shift / du))
    t_max = 60.0 / beta if t_max is None else float(t_max)
    if nu is None:
        nu = tilt(lifetime, beta, mu).nu
    n_lo = int(math.ceil(beta * (t_max + 10.0 / nu) / du))
    n_hi = int(math.ceil(beta * t_max / du))
    u = du * np.arange(-n_lo, n_hi + 1)
    K = operator_kernel(lifetime, du / beta)
    tail = TailModel.build(offspring, lifetime, beta, q)
    upper = upper_decay_rate(offspring, lifetime, beta)
    W = (1 - q) * -np.expm1(-np.exp(u))
    W, _ = _recentre(u, W, theta, q, tail, upper)
    trace: list[float] = []
    half = n_lo // 2 or 1

    def relax(W, tail):
        # iterate with a frozen tail model until the re-centred profile is stationary
        c_prev = math.inf
        for _ in range(max_sweeps - len(trace)):
            new = _apply(offspring, W, u, K, tail, q, upper)
            new, c = _recentre(u, new, theta, q, tail, upper)
            change = float(np.max(np.abs(new - W)))
            rel = float(np.max(np.abs(np.log(new[:half] / W[:half]))))
            trace.append(change)
            W = new
            if change < tol and rel < rel_tol and abs(c - c_prev) <= 1e-3 * abs(c) + 1e-13:
                return W, c
            c_prev = c
        raise ConvergenceError(f"no convergence after {max_sweeps} sweeps "
                               f"(last sup change {trace[-1]:.3e})", trace)

    # An inconsistent lower extension turns the fixed point into a travelling
    # wave: each sweep shifts the profile by c before re-centring.  The tail
    # defect scale kappa is chosen by secant steps so that the shift vanishes.
    W, c = relax(W, tail)
    ks, cs = [tail.kappa], [c]
    while abs(cs[-1]) > drift_tol and not isinstance(lifetime, Dirac):
        if len(ks) == 1:
            k_new = ks[0] + 5.0 * cs[0]
        else:
            k_new = ks[-1] - cs[-1] * (ks[-1] - ks[-2]) / (cs[-1] - cs[-2])
        if len(ks) > 12 or not 0.0 < k_new < 4.0:
            raise ConvergenceError(f"tail drift did not vanish (kappa={ks[-1]!r}, shift={cs[-1]:.3e})",
                                   trace)
        tail = tail.with_kappa(k_new)
        W, c = relax(W, tail)
        ks.append(k_new)
        cs.append(c)
    sweep = len(trace)
    return LaplaceSolution(offspring, lifetime, beta, theta, q, du, u, W, tail, sweep, trace, upper)


# -- series in t -------------------------------------------------------------

@dataclass(frozen=True)
class SenetaSeries:
    """Derived quantities on the time grid t_i = i du / beta.

    ``gap`` is mu - h(1 - e^{-beta t}); ``gap_R`` is mu - h(R(e^{-beta t})).
    ``sigma`` and ``Y`` are filled by :func:`build_series`.
    """

    t: np.ndarray
    X: np.ndarray
    chi: np.ndarray
    gap: np.ndarray
    gap_R: np.ndarray
    beta: float
    mu: float
    nu: float
    theta: float
    sigma: np.ndarray | None = None
    Y: np.ndarray | None = None

    @property
    def logX(self) -> np.ndarray:
        return np.log(self.X)

    @property
    def ratio(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.logX / self.Y

    @property
    def step(self) -> float:
        return float(self.t[1] - self.t[0])


def X_of_t(sol: LaplaceSolution, t=None, nu: float | None = None) -> SenetaSeries:
    """X(t) = e^{beta t} (1 - R(e^{-beta t})) and companions.

    Without ``t`` the series lives on the grid nodes u = -beta t for
    t in [0, t_max]; an explicit grid is interpolated.
    """
    mu = sol.offspring.mean
    nu = tilt(sol.lifetime, sol.beta, mu).nu if nu is None else nu
    n_cover = sol.i0 - int(math.ceil(10.0 / nu * sol.beta / sol.du))
    if t is None:
        idx = np.arange(sol.i0, sol.i0 - n_cover - 1, -1)
        t = -sol.u[idx] / sol.beta
        chi = sol.W[idx]
    else:
        t = np.asarray(t, dtype=float)
        if np.any(sol.beta * t > -sol.u[sol.i0 - n_cover] + 1e-9) or np.any(t < 0):
            raise DomainError(f"t outside the covered range [0, {-sol.u[sol.i0 - n_cover] / sol.beta}]")
        chi = np.exp(sol.log_W_at(-sol.beta * t))
    X = chi * np.exp(sol.beta * t)
    gap = sol.offspring.tail_gap(np.exp(-sol.beta * t))
    gap_R = sol.offspring.tail_gap(chi)
    return SenetaSeries(t, X, chi, gap, gap_R, sol.beta, mu, nu, sol.theta)


def _stieltjes_weights(table: RenewalTable, include_atom: bool) -> np.ndarray:
    """Trapezoid weights a_j with integral of psi dUt ~ sum a_j psi(u_j)."""
    d = table.increments(include_atom)
    a = np.zeros(len(d))
    a[0] = d[0]
    a[:-1] += 0.5 * d[1:]
    a[1:] += 0.5 * d[1:]
    return a


@dataclass(frozen=True)
class SigmaSeries:
    t: np.ndarray
    sigma: np.ndarray
    truncated: np.ndarray
    error_estimate: np.ndarray


def sigma_of_t(series: SenetaSeries, table: RenewalTable, include_atom: bool = False) -> SigmaSeries:
    """sigma(t) = integral of gap_R(t+u)/mu * X(t+u)/X(t) dUt(u).

    Points whose window t + horizon runs past the series are flagged
    ``truncated`` and set to NaN.  ``include_atom`` adds the unit atom of
    Ut at u = 0, which is off by default.
    """
    t = series.t
    if table.horizon >= t[-1]:
        raise AccuracyError("series grid shorter than the renewal horizon")
    a = _stieltjes_weights(table, include_atom)
    psi = series.gap_R * series.X / series.mu
    trunc = t + table.horizon > t[-1] + 1e-9
    sigma = np.full(len(t), np.nan)
    err = np.full(len(t), np.nan)
    ok = np.flatnonzero(~trunc)
    tail = slice(int(0.9 * len(a)), None)
    tail_var = float(np.sum(np.abs(a[tail])))
    for chunk in np.array_split(ok, max(1, len(ok) // 256)):
        pts = t[chunk, None] + table.t[None, :]
        vals = np.interp(pts, t, psi)
        sigma[chunk] = vals @ a / series.X[chunk]
        err[chunk] = np.max(np.abs(vals[:, tail]), axis=1) * tail_var / series.X[chunk]
    return SigmaSeries(t, sigma, trunc, err)


def build_series(sol: LaplaceSolution, table: RenewalTable, include_atom: bool = False) -> SenetaSeries:
    """X series with sigma and Y attached (sigma is NaN where truncated)."""
    s = X_of_t(sol, nu=table.nu)
    sig = sigma_of_t(s, table, include_atom)
    Y = Y_asymptote(sol.offspring, sol.beta, table.nu, s.mu, s.t)
    return replace(s, sigma=sig.sigma, Y=Y)


def closed_form_X(series: SenetaSeries, sigma: np.ndarray | None = None) -> np.ndarray:
    """(1-theta)(1+sigma(0))/(1+sigma(t)) exp((nu/mu) int_0^t gap_R/(1+sigma)).

    Evaluated by the trapezoid rule on the series grid; NaN where sigma is.
    """
    sigma = series.sigma if sigma is None else sigma
    if sigma is None:
        raise DomainError("sigma is required for the closed form")
    integrand = series.gap_R / (1 + sigma)
    cum = integrate.cumulative_trapezoid(integrand, series.t, initial=0.0)
    return (1 - series.theta) * (1 + sigma[0]) / (1 + sigma) * np.exp(series.nu / series.mu * cum)


def integral_identity_residual(series: SenetaSeries, sigma: np.ndarray | None = None) -> np.ndarray:
    """Relative residual of

        (nu/mu) int_0^t gap_R X du = X(t) - X(0) + Xs(t) - Xs(0),  Xs = sigma X,

    normalized by X(t)."""
    sigma = series.sigma if sigma is None else sigma
    X = series.X
    lhs = series.nu / series.mu * integrate.cumulative_trapezoid(series.gap_R * X, series.t, initial=0.0)
    Xs = sigma * X
    rhs = X - X[0] + Xs - Xs[0]
    return np.abs(lhs - rhs) / X


def backward_residual(sol: LaplaceSolution, series: SenetaSeries) -> np.ndarray:
    """Relative residual of X(t) = (1/mu) int_t^inf h(R(e^{-beta u})) X(u) dG_beta(u - t).

    Returned for every t whose integration window fits in the series; NaN
    otherwise.
    """
    gb = tilt(sol.lifetime, sol.beta, series.mu)
    K = hat_kernel(gb, series.step)
    psi = (series.mu - series.gap_R) * series.X / series.mu
    n = len(psi) - len(K) + 1
    out = np.full(len(psi), np.nan)
    if n > 0:
        rhs = np.correlate(psi, K, "valid")[:n]
        out[:n] = np.abs(rhs - series.X[:n]) / series.X[:n]
    return out


@dataclass(frozen=True)
class PotterReport:
    A: float
    delta: float
    holds: bool
    worst: float
    x_ratio_max: float


def potter_check(series: SenetaSeries, table: RenewalTable, sigma: np.ndarray | None = None,
                 A: float = 2.0, delta: float = 0.5, include_atom: bool = False) -> PotterReport:
    """Check sigma(t) <= A gap_R(t)/mu * int e^{delta beta u} |dUt(u)|.

    ``worst`` is the largest sigma / bound over reported points;
    ``x_ratio_max`` the largest X(t+u) / (X(t) e^{delta beta u}) seen,
    i.e. the Potter constant actually needed on this range.
    """
    sigma = series.sigma if sigma is None else sigma
    a = np.abs(_stieltjes_weights(table, include_atom))
    moment = float(np.sum(a * np.exp(delta * series.beta * table.t)))
    ok = np.isfinite(sigma)
    bound = A * series.gap_R[ok] / series.mu * moment
    with np.errstate(divide="ignore", invalid="ignore"):
        worst = float(np.max(np.where(bound > 0, sigma[ok] / bound, 0.0)))
    logX = series.logX
    lag = np.arange(0, len(series.t), max(1, len(series.t) // 400))
    best = 0.0
    for m in lag:
        r = logX[m:] - logX[: len(logX) - m] - delta * series.beta * series.t[m]
        best = max(best, float(np.max(r)))
    return PotterReport(A, delta, worst <= 1.0, worst, math.exp(best))


def Y_asymptote(offspring: OffspringLaw, beta: float, nu: float, mu: float, t) -> np.ndarray:
    """Y(t) = (nu/mu) int_0^t (mu - h(1 - e^{-beta u})) du.

    Integrated with cumulative Simpson on a fine uniform grid, then
    interpolated onto ``t``.
    """
    t = np.asarray(t, dtype=float)
    top = float(np.max(t)) if t.size else 0.0
    if top <= 0:
        return np.zeros(t.shape)
    n = max(2001, int(math.ceil(top * beta / 0.005)) + 1)
    s = np.linspace(0.0, top, n)
    g = offspring.tail_gap(np.exp(-beta * s))
    cum = integrate.cumulative_simpson(g, x=s, initial=0.0)
    return nu / mu * np.interp(t, s, cum)


@dataclass(frozen=True)
class UchiyamaFit:
    """Least-squares fit of log gap(e^{-u}) = a - alpha log u.

    ``residual`` is the fitted log of the slowly varying factor up to a
    constant; ``accepted`` is False when the decay is not power-like.
    """

    alpha: float
    intercept: float
    u: np.ndarray
    residual: np.ndarray
    r2: float
    accepted: bool
    reason: str


def uchiyama_estimate(offspring: OffspringLaw, u_lo: float = 10.0, u_hi: float = 60.0,
                      n: int = 201) -> tuple[float, UchiyamaFit]:
    """Fit the power exponent of the tail gap over u = -log s in [u_lo, u_hi]."""
    u = np.linspace(u_lo, u_hi, n)
    gap = offspring.tail_gap(np.exp(-u))
    if np.any(np.diff(gap) > 0):
        warnings.warn("tail gap not monotone on the fit range; fit quality is doubtful", RuntimeWarning)
    if np.any(gap <= 0):
        return math.nan, UchiyamaFit(math.nan, math.nan, u, np.full(n, np.nan), 0.0, False,
                                     "tail gap vanishes on the fit range")
    lg, lu = np.log(gap), np.log(u)
    slope, icpt = np.polyfit(lu, lg, 1)
    res = lg - (icpt + slope * lu)
    r2 = 1 - float(np.sum(res ** 2) / np.sum((lg - lg.mean()) ** 2))
    # competing exponential model log gap = a + b u
    eb, ea = np.polyfit(u, lg, 1)
    res_exp = lg - (ea + eb * u)
    alpha = -float(slope)
    if np.sum(res_exp ** 2) < np.sum(res ** 2):
        accepted, reason = False, "decay is exponential in -log s, not a power"
    elif not 0 < alpha <= 1:
        accepted, reason = False, f"fitted exponent {alpha:.4g} outside (0, 1]"
    elif r2 < 0.999:
        accepted, reason = False, f"poor power-law fit (R^2 = {r2:.5f})"
    else:
        accepted, reason = True, "ok"
    return alpha, UchiyamaFit(alpha, float(icpt), u, res, r2, accepted, reason)


# -- end-to-end verification -----------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    value: float
    limit: float
    passed: bool

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.value:.3e} (limit {self.limit:g})"


@dataclass(frozen=True)
class VerifyReport:
    """Outcome of :func:`verify_pipeline`.

    ``ratios`` maps t to log X(t) / Y(t); it is empty when E(Z log Z) is
    finite, in which case ``notice`` says so.
    """

    beta: float
    nu: float
    q: float
    theta: float
    checks: list
    ratios: dict
    notice: str = ""
    series: SenetaSeries | None = field(default=None, repr=False)
    solution: LaplaceSolution | None = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        out = [f"beta = {self.beta:.17g}", f"nu = {self.nu:.17g}", f"q = {self.q:.17g}",
               f"theta = {self.theta:.17g}"]
        out += [c.line() for c in self.checks]
        for t, r in self.ratios.items():
            out.append(f"ratio log X / Y at t = {t:g}: {r:.6f}")
        if self.notice:
            out.append(self.notice)
        out.append("RESULT: " + ("PASS" if self.passed else "FAIL"))
        return out


def verify_pipeline(offspring: OffspringLaw, lifetime: LifetimeLaw, theta: float,
                    du: float = 0.01, t_max: float | None = None, delta: float | None = None,
                    horizon: float | None = None, include_atom: bool = False,
                    allow_non_lattice_override: bool = False,
                    ratio_times=(10.0, 20.0, 40.0)) -> VerifyReport:
    """Solve beta, nu, R, the renewal table and the series; run the
    self-consistency checks.

    Raises
    ------
    HypothesisError
        Lattice lifetime (or unknown class without the override).
    """
    from .lifetime import malthusian
    from .offspring import XLogX, xlogx_diverges
    from .renewal import build_table

    mu = offspring.mean
    beta = malthusian(lifetime, mu)
    gb = tilt(lifetime, beta, mu)
    table = build_table(gb, delta, horizon, allow_non_lattice_override)
    sol = solve_R(offspring, lifetime, beta, theta, du=du, t_max=t_max, nu=table.nu)
    series = build_series(sol, table, include_atom)
    t = series.t
    half = t <= 0.5 * t[-1] * (1 + 1e-12)
    cf_range = (t <= 40.0 / beta) & np.isfinite(series.sigma)
    cf = np.abs(closed_form_X(series) / series.X - 1)[cf_range]
    eq13 = integral_identity_residual(series)[half]
    bwd = backward_residual(sol, series)[half]
    r1 = abs(float(sol.R_at(np.array([1.0]))[0]) - theta)
    checks = [
        Check("fixed-point residual", sol.residual(), 1e-6, sol.residual() <= 1e-6),
        Check("R(1) - theta", r1, 1e-8, r1 <= 1e-8),
        Check("closed form vs X (relative, t <= 40/beta)", float(np.nanmax(cf)), 0.01, float(np.nanmax(cf)) <= 0.01),
        Check("integral identity (relative)", float(np.nanmax(eq13)), 0.02, float(np.nanmax(eq13)) <= 0.02),
        Check("backward renewal (relative)", float(np.nanmax(bwd)), 0.01, float(np.nanmax(bwd)) <= 0.01),
        Check("min sigma", float(np.nanmin(series.sigma)), -1e-3, float(np.nanmin(series.sigma)) >= -1e-3),
    ]
    ratios: dict = {}
    notice = ""
    if xlogx_diverges(offspring) is XLogX.INFINITE:
        for tt in ratio_times:
            if tt <= t[-1]:
                ratios[float(tt)] = float(np.interp(tt, t, series.ratio))
    else:
        notice = "hypothesis violated: E(Z log Z) finite, Y converges"
    return VerifyReport(beta, table.nu, sol.q, theta, checks, ratios, notice, series, sol)
