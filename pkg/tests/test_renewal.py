import math

import numpy as np
import pytest

from seneta.errors import AccuracyError, HypothesisError
from seneta.lifetime import malthusian, parse_lifetime_spec, tilt
from seneta.renewal import build_table, utilde_tail


def tilted(spec, mu=2.0):
    law = parse_lifetime_spec(spec)
    return tilt(law, malthusian(law, mu), mu)


@pytest.fixture(scope="module")
def exp_table():
    return build_table(tilted("exp:1"))


@pytest.fixture(scope="module")
def uni_table():
    return build_table(tilted("uniform:0.5,1.5"))


def test_poisson_identity(exp_table):
    # G_beta = Exp(2): U(t) = 2t exactly, so Utilde == 1
    assert exp_table.nu == pytest.approx(2.0)
    assert np.max(np.abs(exp_table.Ut - 1.0)) <= 1e-9
    assert exp_table.mass == pytest.approx(1.0, rel=0.02)
    assert utilde_tail(exp_table, 5.0) <= 1e-9


def test_starts_at_one(exp_table, uni_table):
    assert exp_table.Ut[0] == 1.0 and uni_table.Ut[0] == 1.0
    assert uni_table.U[0] == 0.0


def test_decomposition_identity(uni_table):
    T = uni_table
    assert np.allclose(T.Ut, 1 + T.U - T.nu * T.t, atol=1e-12)
    assert math.fsum(T.dUt) == pytest.approx(T.Ut[-1], abs=1e-10)


def test_monotone(uni_table):
    assert np.all(np.diff(uni_table.U) >= -1e-12)


def test_uniform_mass_identity(uni_table):
    assert uni_table.mass == pytest.approx(uni_table.mass_target, rel=0.02)
    assert uni_table.min_utilde() >= -1e-3


def test_residual(exp_table, uni_table):
    assert exp_table.residual() <= 1e-8
    assert uni_table.residual() <= 1e-8


def test_wald(uni_table):
    # |Utilde(inf) - 1| / (nu T) is 1.5% at T = 30/nu for this law, so the
    # 1% bound needs a longer horizon
    gb = tilted("uniform:0.5,1.5")
    long = build_table(gb, horizon=60 / gb.nu)
    assert long.wald_error() / long.nu <= 0.01
    assert abs(uni_table.Ut[-1] - 1) / (uni_table.nu * uni_table.horizon) == pytest.approx(
        uni_table.wald_error() / uni_table.nu, rel=1e-6)


def test_refinement():
    gb = tilted("uniform:0.5,1.5")
    a = build_table(gb)
    b = build_table(gb, delta=a.delta / 2)
    sel = a.t >= 1 / a.nu
    rel = np.abs(b.U[::2][sel] - a.U[sel]) / a.U[sel]
    assert rel.max() <= 0.005


def test_tail_envelope(uni_table):
    T = uni_table
    assert utilde_tail(T, 15 / T.nu) <= 0.01 * abs(T.mass)
    assert utilde_tail(T, T.horizon) == 0.0
    with pytest.raises(AccuracyError):
        utilde_tail(T, 2 * T.horizon)


def test_gamma_variants():
    for spec in ("gamma:2,2", "gamma:0.5,0.3333333333333333"):
        T = build_table(tilted(spec))
        assert T.mass == pytest.approx(T.mass_target, rel=0.02)
        assert T.min_utilde() >= -1e-3


def test_rejects_lattice():
    with pytest.raises(HypothesisError):
        build_table(tilted("dirac:1"))


def test_unknown_needs_override(tmp_path):
    p = tmp_path / "g.csv"
    p.write_text("t,G\n0.5,0.3\n1.0,0.6\n1.7,1.0\n", encoding="utf-8")
    gb = tilted(f"empirical:{p}")
    with pytest.raises(HypothesisError):
        build_table(gb)
    T = build_table(gb, allow_non_lattice_override=True)
    assert T.residual() <= 1e-8


def test_accuracy_guards():
    gb = tilted("exp:1")
    with pytest.raises(AccuracyError):
        build_table(gb, delta=0.1)
    with pytest.raises(AccuracyError):
        build_table(gb, horizon=5.0)
