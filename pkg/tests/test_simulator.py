import math

import numpy as np
import pytest

from seneta.errors import DomainError, NoDataError
from seneta.gw_oracle import iterate_pgf
from seneta.offspring import parse_offspring_spec
from seneta.simulator import (
    OffspringSampler, SimConfig, alias_table, chi_at, empirical_laplace, is_dirac,
    ks_limit_check, ks_statistic, ks_two_sample, normalized_survivors, simulate_bh,
    simulate_gw, summarize,
)

GEO = "geometric:0.6666666666666666"


def yule_chi(t):
    return math.exp(-t) / (1 + math.exp(-t))


@pytest.fixture(scope="module")
def yule_ens():
    return simulate_bh(SimConfig("binary", "exp:1", 4000, (0.0, 2.0, 4.0, 6.0), seed=11, workers=4))


def test_alias_table_reproduces_pmf():
    p = np.array([0.1, 0.0, 0.45, 0.2, 0.25])
    prob, alias = alias_table(p)
    n = len(p)
    got = np.zeros(n)
    for i in range(n):
        got[i] += prob[i] / n
        got[alias[i]] += (1 - prob[i]) / n
    np.testing.assert_allclose(got, p, atol=1e-15)


def test_sampler_tail_kinds():
    assert OffspringSampler.from_law(parse_offspring_spec("binary")).degenerate == 2
    assert OffspringSampler.from_law(parse_offspring_spec(GEO)).tail_kind != 0
    assert OffspringSampler.from_law(parse_offspring_spec("heavylog:0.5,2")).tail_kind != 0


def test_config_validation():
    with pytest.raises(DomainError):
        SimConfig("binary", times=(2.0, 1.0))
    with pytest.raises(DomainError):
        SimConfig("binary", replicates=0)
    with pytest.raises(DomainError):
        SimConfig("binary", seed=-1)
    with pytest.raises(DomainError):
        simulate_gw(SimConfig("binary", times=(1.5,)))


def test_yule_mean(yule_ens):
    for t in (2.0, 4.0, 6.0):
        m, se = yule_ens.mean_Z(t)
        assert abs(m - math.exp(t)) <= 4 * se


def test_yule_laplace(yule_ens):
    est, se = empirical_laplace(yule_ens, yule_chi, 1.0, 6.0)
    assert abs(est - 0.5) <= 4 * se + 3e-3


def test_yule_ks_geometric(yule_ens):
    # Yule survivors at time t are geometric with success probability e^{-t}
    t = 6.0
    p, c = math.exp(-t), yule_chi(t)
    cdf = lambda v: -np.expm1(np.floor(np.asarray(v) / c + 1e-9) * math.log1p(-p))
    assert ks_limit_check(yule_ens, yule_chi, t, cdf) <= 1.63 / math.sqrt(yule_ens.survivors(t))


def test_t0_point_mass(yule_ens):
    assert np.all(yule_ens.observed(0.0) == 1)
    c = yule_chi(0.0)
    assert ks_limit_check(yule_ens, yule_chi, 0.0, lambda v: (np.asarray(v) >= c).astype(float)) <= 1e-12


def test_determinism_across_workers():
    a = simulate_bh(SimConfig("binary", "gamma:2,2", 300, (1.0, 3.0), seed=5, workers=1))
    b = simulate_bh(SimConfig("binary", "gamma:2,2", 300, (1.0, 3.0), seed=5, workers=3))
    np.testing.assert_array_equal(a.Z, b.Z)
    c = simulate_bh(SimConfig("binary", "gamma:2,2", 300, (1.0, 3.0), seed=6, workers=1))
    assert not np.array_equal(a.Z, c.Z)


def test_dirac_doubling():
    t = (0.0, 1.0, 2.0, 5.0, 10.0)
    bh = simulate_bh(SimConfig("binary", "dirac:1", 5, t))
    gw = simulate_gw(SimConfig("binary", "dirac:1", 5, t))
    expect = np.array([1, 2, 4, 32, 1024])
    for e in (bh, gw):
        assert np.all(e.Z == expect)


def test_geometric_extinction():
    e = simulate_bh(SimConfig(GEO, "exp:1", 40_000, (15.0,), cap=2000, seed=7, workers=4))
    p, se = e.extinction_fraction(15.0, censored_survive=True)
    assert abs(p - 0.5) <= 4 * se


def test_gw_pgf_oracle():
    law = parse_offspring_spec(GEO)
    e = simulate_gw(SimConfig(GEO, replicates=50_000, times=(1, 2, 3), seed=3, workers=4))
    for n in (1, 2, 3):
        v = 0.5 ** e.observed(n).astype(float)
        ref = iterate_pgf(law, 0.5, n)
        assert abs(v.mean() - ref) <= 4 * v.std() / math.sqrt(len(v))
    p0, se = e.extinction_fraction(3)
    assert abs(p0 - iterate_pgf(law, 0.0, 3)) <= 4 * se


def test_heavy_tail_gw_pgf_oracle():
    # the mean is dominated by rare huge families; the PGF is the honest oracle
    spec = "heavylog:0.5,2.0"
    law = parse_offspring_spec(spec)
    e = simulate_gw(SimConfig(spec, replicates=20_000, times=(1, 2, 4), seed=9, workers=4))
    for n in (1, 2, 4):
        for s in (0.3, 0.9):
            v = s ** e.observed(n).astype(float)
            ref = iterate_pgf(law, s, n)
            assert abs(v.mean() - ref) <= 4 * v.std() / math.sqrt(len(v)) + 1e-4


def test_gw_matches_bh_dirac():
    a = simulate_gw(SimConfig(GEO, replicates=5000, times=(1, 2, 3), seed=1, workers=4))
    b = simulate_bh(SimConfig(GEO, "dirac:1", 5000, (1.0, 2.0, 3.0), seed=2, workers=4))
    for n in (1, 2, 3):
        _, p = ks_two_sample(a.observed(n), b.observed(n))
        assert p > 1e-3


def test_censoring():
    e = simulate_bh(SimConfig("binary", "exp:1", 50, (5.0, 10.0), cap=20, seed=4))
    assert e.censored.all()
    with pytest.raises(NoDataError):
        e.mean_Z(10.0)
    with pytest.raises(NoDataError):
        ks_limit_check(e, yule_chi, 10.0, lambda v: v)


def test_too_few_survivors():
    e = simulate_bh(SimConfig("binary", "exp:1", 50, (1.0,), seed=4))
    with pytest.raises(NoDataError):
        ks_limit_check(e, yule_chi, 1.0, lambda v: v)


def test_ks_statistic_exact():
    x = np.array([0.1, 0.4, 0.7])
    assert ks_statistic(x, lambda v: np.clip(v, 0, 1)) == pytest.approx(max(0.1, 1 / 3 - 0.1, 0.4 - 1 / 3, 2 / 3 - 0.4, 0.7 - 2 / 3, 1 - 0.7))


def test_chi_schedule_pairs():
    sched = (np.array([0.0, 1.0]), np.array([1.0, math.exp(-1)]))
    assert chi_at(sched, 0.5) == pytest.approx(math.exp(-0.5))
    with pytest.raises(DomainError):
        chi_at(sched, 2.0)


def test_summary_and_helpers(yule_ens):
    rows = summarize(yule_ens, yule_chi)
    assert [r.t for r in rows] == [0.0, 2.0, 4.0, 6.0]
    assert rows[0].survivors == 4000 and math.isnan(rows[0].seZ) is False
    assert len(normalized_survivors(yule_ens, yule_chi, 6.0)) == yule_ens.survivors(6.0)
    assert is_dirac("dirac:1") and not is_dirac("exp:1")
