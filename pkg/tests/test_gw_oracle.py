import math

import numpy as np
import pytest

from seneta.errors import DomainError, HypothesisError
from seneta.gw_oracle import gw_theorem_check, gw_Y, iterate_complement, iterate_pgf, seneta_chi
from seneta.offspring import parse_offspring_spec

BINARY = parse_offspring_spec("binary")
GEO = parse_offspring_spec("geometric:0.6666666666666666")


@pytest.fixture(scope="module")
def heavy():
    law = parse_offspring_spec("heavylog:0.5,2.0")
    theta = 0.5 * (law.extinction_probability + 1)
    return law, theta, seneta_chi(law, theta, 60)


def test_iterate_examples():
    assert iterate_pgf(BINARY, 0.5, 2) == pytest.approx(0.0625, abs=1e-16)
    assert iterate_pgf(GEO, 0.5, 7) == pytest.approx(0.5, abs=1e-14)
    assert iterate_pgf(GEO, 0.3, 0) == pytest.approx(0.3, abs=1e-16)
    with pytest.raises(DomainError):
        iterate_pgf(GEO, 1.2, 1)


def test_geometric_closed_form():
    # linear fractional: F_n(0) = (mu^n - 1) / (mu^{n+1} - 1) for q = 1/2, mu = 2
    for n in range(6):
        assert iterate_pgf(GEO, 0.0, n) == pytest.approx((2 ** n - 1) / (2 ** (n + 1) - 1), abs=1e-14)


def test_binary_chi_exact(ln2):
    s = seneta_chi(BINARY, 0.5, 40)
    assert s.chi[0] == pytest.approx(ln2, abs=1e-16)
    assert np.max(np.abs(s.chi - 2.0 ** -s.n * ln2)) <= 1e-10
    assert np.max(np.abs(s.m - ln2)) <= 1e-10


def test_chi_zero_definition():
    for theta in (0.55, 0.8):
        assert seneta_chi(GEO, theta, 0).chi[0] == pytest.approx(-math.log(theta), abs=1e-16)


def test_domain():
    with pytest.raises(DomainError):
        seneta_chi(GEO, 0.4, 5)


def test_monotone(heavy):
    _, _, s = heavy
    assert np.all(np.diff(s.chi) < 0)
    assert np.all(np.diff(s.w) < 0)
    assert s.high_precision_from is not None


def test_round_trip(heavy):
    law, theta, s = heavy
    for n in range(0, 61, 5):
        assert abs(1 - iterate_complement(law, s.w[n], n) - theta) <= 1e-9
    # on s itself the round trip is limited by the spacing of doubles near 1
    for n in range(len(s.n)):
        if s.w[n] < 1e-8:
            break
        assert abs(iterate_pgf(law, s.s[n], n) - theta) <= 1e-9 * max(1, 1e-8 / s.w[n])


def test_heavylog_m_diverges(heavy):
    _, _, s = heavy
    assert s.m[30] >= 2 * s.m[10]
    assert np.all(np.diff(s.m[5:]) > 0)


def test_theorem_check(heavy):
    law, theta, _ = heavy
    rep = gw_theorem_check(law, theta, 60)
    assert 0.7 <= rep.ratio[30] <= 1.3
    assert abs(rep.ratio[30] - 1) < abs(rep.ratio[10] - 1)


def test_binary_rejected():
    with pytest.raises(HypothesisError, match="E\\(Z log Z\\) finite"):
        gw_theorem_check(BINARY, 0.5, 10)


def test_Y_slope_alpha_quarter():
    law = parse_offspring_spec("heavylog:0.25,2.0")
    n = np.linspace(20, 60, 41)
    slope = np.polyfit(np.log(n), np.log(gw_Y(law, n)), 1)[0]
    assert slope == pytest.approx(0.75, abs=0.05)
