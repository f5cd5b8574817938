import math

import numpy as np
import pytest

from seneta.errors import ConvergenceError, DomainError
from seneta.laplace import (X_of_t, Y_asymptote, backward_residual, closed_form_X,
                            integral_identity_residual, potter_check, sigma_of_t, solve_R,
                            uchiyama_estimate, upper_decay_rate)
from seneta.lifetime import parse_lifetime_spec
from seneta.offspring import parse_offspring_spec


class TestYule:
    def test_analytic_solution(self, yule):
        y = yule.sol.y
        sel = (y >= 1e-3) & (y <= 1e3)
        err = np.max(np.abs(yule.sol.R[sel] - 1 / (1 + y[sel])))
        assert err <= 5e-4
        assert err <= 1e-8  # what the fourth-order kernel actually delivers

    def test_normalization_and_edges(self, yule):
        R = yule.sol.R_at(np.array([1e-30, 1.0, 1e30]))
        assert R[0] == pytest.approx(1.0, abs=1e-15)
        assert abs(R[1] - 0.5) <= 1e-8
        assert abs(yule.sol.R[-1] - 0.0) <= 2e-3

    def test_X(self, yule):
        s = yule.series
        assert s.X[0] == pytest.approx(0.5, abs=1e-12)
        assert np.allclose(s.X, 1 / (1 + np.exp(-s.t)), rtol=1e-8)

    def test_sigma_vanishes(self, yule):
        # Utilde == 1 is a pure atom at 0, which the default convention leaves out
        sig = sigma_of_t(yule.series, yule.table)
        assert np.nanmax(np.abs(sig.sigma)) <= 1e-6

    def test_closed_form(self, yule):
        s = yule.series
        cf = closed_form_X(s)
        assert cf[0] == pytest.approx(0.5, abs=1e-15)
        i5 = int(np.argmin(np.abs(s.t - 5)))
        assert cf[i5] == pytest.approx(s.X[i5], rel=0.01)

    def test_backward(self, yule):
        r = backward_residual(yule.sol, yule.series)
        half = yule.series.t <= yule.series.t[-1] / 2
        assert np.nanmax(r[half]) <= 0.01
        assert np.isnan(r[-1])


class TestSolverProperties:
    @pytest.mark.parametrize("name", ["yule", "heavy_exp", "heavy_gamma"])
    def test_residual(self, name, request):
        sol = request.getfixturevalue(name).sol
        assert sol.residual() <= 1e-6

    @pytest.mark.parametrize("name", ["yule", "heavy_exp", "heavy_gamma"])
    def test_quadrature_residual(self, name, request):
        # independent of the grid operator: adaptive quadrature against the density
        sol = request.getfixturevalue(name).sol
        assert np.max(sol.quadrature_residual([1e-12, 1e-3, 1.0, 1e3])) <= 1e-6

    @pytest.mark.parametrize("name", ["yule", "heavy_exp", "heavy_gamma"])
    def test_monotone_and_bounded(self, name, request):
        setup = request.getfixturevalue(name)
        R = setup.sol.R
        assert np.all(np.diff(R) <= 1e-15)
        assert np.all((R >= setup.sol.q - 1e-12) & (R <= 1))
        assert np.all(np.diff(setup.series.chi) <= 1e-15)
        assert abs(setup.sol.R_at(np.array([1.0]))[0] - setup.theta) <= 1e-8

    def test_top_tends_to_q(self, heavy_exp):
        assert abs(heavy_exp.sol.R[-1] - heavy_exp.sol.q) <= 2e-3

    def test_dirac_functional_equation(self):
        off = parse_offspring_spec("binary")
        sol = solve_R(off, parse_lifetime_spec("dirac:1"), math.log(2), 0.5)
        y = sol.y[: -200]
        assert np.max(np.abs(sol.R_at(y) - sol.R_at(y / 2) ** 2)) <= 1e-8
        assert sol.residual() <= 1e-8

    def test_theta_domain(self):
        off = parse_offspring_spec("geometric:0.6666666666666666")
        with pytest.raises(DomainError):
            solve_R(off, parse_lifetime_spec("exp:1"), 0.5, 0.4)

    def test_non_convergence_reports_trace(self):
        off = parse_offspring_spec("binary")
        with pytest.raises(ConvergenceError) as exc:
            solve_R(off, parse_lifetime_spec("exp:1"), 1.0, 0.5, max_sweeps=3)
        assert len(exc.value.trace) == 3

    def test_upper_decay(self):
        # Exp(1) lifetime, geometric offspring: f'(q) / (1 - gamma) = 1
        off = parse_offspring_spec("geometric:0.6666666666666666")
        fq = (1 - off.p) * off.p / (1 - off.p * 0.5) ** 2
        assert upper_decay_rate(off, parse_lifetime_spec("exp:1"), 1.0) == pytest.approx(1 - fq, rel=1e-8)
        assert upper_decay_rate(parse_offspring_spec("binary"), parse_lifetime_spec("exp:1"), 1.0) == math.inf


class TestHeavyLog:
    def test_X_grows(self, heavy_exp):
        s = heavy_exp.series
        sel = s.t <= 40
        assert s.X[0] == pytest.approx(1 - heavy_exp.theta, abs=1e-12)
        assert np.all(np.diff(s.X[sel]) > 0)
        assert s.X[sel][-1] > 1e6 * s.X[0]

    def test_X_range_checked(self, heavy_exp):
        with pytest.raises(DomainError):
            X_of_t(heavy_exp.sol, [1e4])

    def test_closed_form_t20(self, heavy_exp):
        s = heavy_exp.series
        i = int(np.argmin(np.abs(s.t - 20)))
        assert closed_form_X(s)[i] == pytest.approx(s.X[i], rel=0.01)

    def test_backward(self, heavy_exp):
        half = heavy_exp.series.t <= heavy_exp.series.t[-1] / 2
        assert np.nanmax(backward_residual(heavy_exp.sol, heavy_exp.series)[half]) <= 0.01

    def test_integral_identity(self, heavy_gamma):
        s = heavy_gamma.series
        half = s.t <= s.t[-1] / 2
        assert np.nanmax(integral_identity_residual(s)[half]) <= 0.02


class TestSigma:
    def test_sign_and_truncation(self, heavy_gamma):
        sig = sigma_of_t(heavy_gamma.series, heavy_gamma.table)
        ok = ~sig.truncated
        assert np.all(sig.sigma[ok] >= -1e-3)
        assert np.all(np.isnan(sig.sigma[sig.truncated]))
        assert sig.truncated[-1] and not sig.truncated[0]
        assert np.nanmax(sig.error_estimate) < 1e-3

    def test_atom_convention_discriminated(self, heavy_gamma):
        s = heavy_gamma.series
        with_atom = sigma_of_t(s, heavy_gamma.table, include_atom=True).sigma
        sel = (s.t <= 40) & np.isfinite(s.sigma)
        good = np.max(np.abs(closed_form_X(s)[sel] / s.X[sel] - 1))
        bad = np.max(np.abs(closed_form_X(s, with_atom)[sel] / s.X[sel] - 1))
        assert good <= 0.01 < bad

    def test_potter(self, heavy_gamma):
        rep = potter_check(heavy_gamma.series, heavy_gamma.table)
        assert rep.holds and rep.A == 2.0 and rep.delta == 0.5


class TestY:
    def test_binary_closed_form(self):
        t = np.linspace(0, 10, 41)
        Y = Y_asymptote(parse_offspring_spec("binary"), 1.0, 2.0, 2.0, t)
        assert Y[0] == 0.0
        assert np.allclose(Y, 1 - np.exp(-t), atol=1e-10)

    def test_heavylog_slope(self):
        t = np.linspace(20, 60, 81)
        Y = Y_asymptote(parse_offspring_spec("heavylog:0.5,2.0"), 1.0, 2.0, 2.0, t)
        assert np.all(np.diff(Y) > 0)
        slope = np.polyfit(np.log(t), np.log(Y), 1)[0]
        assert slope == pytest.approx(0.5, abs=0.05)


class TestUchiyama:
    @pytest.mark.parametrize("alpha", [0.5, 0.25])
    def test_heavylog(self, alpha):
        a, fit = uchiyama_estimate(parse_offspring_spec(f"heavylog:{alpha},2.0"))
        assert fit.accepted
        assert a == pytest.approx(alpha, abs=0.03)

    def test_binary_rejected(self):
        _, fit = uchiyama_estimate(parse_offspring_spec("binary"))
        assert not fit.accepted
