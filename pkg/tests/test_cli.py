import csv
import io
import math

import numpy as np
import pytest

from seneta.cli import fmt, parse_times, run


def call(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_malthusian_dirac_ln2(capsys):
    code, out, _ = call(capsys, "malthusian", "--offspring", "binary", "--lifetime", "dirac:1")
    assert code == 0
    (r,) = rows(out)
    assert float(r["beta"]) == pytest.approx(math.log(2), abs=1e-12)
    assert float(r["mu"]) == 2.0


def test_malthusian_exp(capsys):
    code, out, _ = call(capsys, "malthusian", "--offspring", "binary", "--lifetime", "exp:1")
    assert code == 0
    assert float(rows(out)[0]["beta"]) == pytest.approx(1.0, abs=1e-12)


def test_lf_and_precision(capsys):
    _, out, _ = call(capsys, "malthusian", "--offspring", "binary", "--lifetime", "dirac:1")
    assert "\r" not in out and out.endswith("\n")
    assert rows(out)[0]["beta"] == f"{math.log(2):.17g}"


def test_output_file_round_trip(tmp_path):
    path = tmp_path / "r.csv"
    assert run(["renewal", "--offspring", "binary", "--lifetime", "gamma:2,2", "-o", str(path)]) == 0
    data = rows(path.read_text(encoding="utf-8"))
    assert list(data[0]) == ["t", "U", "nu_t", "Utilde"]
    U = np.array([float(r["U"]) for r in data])
    assert np.all(np.diff(U) >= -1e-12)
    for r in data[:50]:
        for v in r.values():
            assert fmt(float(v)) == v


def test_solve_r_theta(capsys):
    code, out, _ = call(capsys, "solve-r", "--offspring", "binary", "--lifetime", "exp:1", "--theta", "0.5")
    assert code == 0
    data = rows(out)
    u = np.array([float(r["logy"]) for r in data])
    R = np.array([float(r["R"]) for r in data])
    assert np.interp(0.0, u, R) == pytest.approx(0.5, abs=1e-8)
    y = np.exp(u)
    assert np.max(np.abs(R - 1 / (1 + y))) <= 1e-6


def test_theta_mid_resolves(capsys):
    _, a, _ = call(capsys, "gw", "--offspring", "geometric:0.6666666666666666", "--generations", "3")
    _, b, _ = call(capsys, "gw", "--offspring", "geometric:0.6666666666666666", "--generations", "3",
                   "--theta", "0.75")
    assert a == b


def test_gw_binary(capsys):
    code, out, err = call(capsys, "gw", "--offspring", "binary", "--theta", "0.5", "--generations", "20")
    assert code == 0
    data = rows(out)
    assert [c for c in data[0]] == ["n", "s_n", "chi_n", "m_n", "Y", "ratio"]
    assert len(data) == 21
    for r in data:
        assert float(r["m_n"]) == pytest.approx(math.log(2), abs=1e-10)
        assert r["ratio"] == "nan"
    assert "hypothesis violated" in err


def test_asymptote_notice(capsys):
    code, out, err = call(capsys, "asymptote", "--offspring", "binary", "--lifetime", "exp:1",
                          "--t-max", "20")
    assert code == 0
    assert "hypothesis violated" in err
    data = rows(out)
    assert list(data[0]) == ["t", "X", "logX", "Y", "ratio", "sigma", "gap", "chi"]
    assert all(r["ratio"] == "nan" for r in data)


def test_simulate_and_summary(tmp_path, capsys):
    summ = tmp_path / "s.csv"
    argv = ["simulate", "--offspring", "binary", "--lifetime", "exp:1", "--replicates", "200",
            "--times", "1:3:1", "--seed", "3", "--summary", str(summ)]
    code, out, _ = call(capsys, *argv)
    assert code == 0
    data = rows(out)
    assert len(data) == 600
    assert list(data[0]) == ["replicate", "t", "Z", "extinct", "censored"]
    _, again, _ = call(capsys, *argv)
    assert again == out
    s = rows(summ.read_text())
    assert [float(r["t"]) for r in s] == [1.0, 2.0, 3.0]
    assert all(0 < float(r["laplace_y1"]) < 1 for r in s)


def test_simulate_censored_blank(capsys):
    code, out, _ = call(capsys, "simulate", "--offspring", "binary", "--lifetime", "exp:1",
                        "--replicates", "3", "--times", "8", "--cap", "5")
    assert code == 0
    for r in rows(out):
        assert r["censored"] == "1" and r["Z"] == ""


def test_simulate_gw_engine(capsys):
    code, out, _ = call(capsys, "simulate", "--offspring", "binary", "--lifetime", "dirac:1",
                        "--engine", "gw", "--replicates", "2", "--times", "0,1,4")
    assert code == 0
    assert [r["Z"] for r in rows(out)] == ["1", "2", "16"] * 2


def test_config_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("offspring = binary\nlifetime = exp:1\nreplicates = 5\ntimes = 1,2\nseed = 9\n")
    code, out, _ = call(capsys, "simulate", "--config", str(cfg), "--replicates", "2")
    assert code == 0
    assert len(rows(out)) == 4
    cfg.write_text("offspring = binary\nbogus = 1\n")
    assert call(capsys, "simulate", "--config", str(cfg))[0] == 1


def test_parse_times():
    assert parse_times("2,4,8") == (2.0, 4.0, 8.0)
    assert parse_times("0:1:0.25") == (0.0, 0.25, 0.5, 0.75, 1.0)


@pytest.mark.parametrize("argv,code", [
    ([], 1),
    (["nope"], 1),
    (["malthusian", "--offspring", "binary"], 1),
    (["malthusian", "--offspring", "bin@ry", "--lifetime", "exp:1"], 1),
    (["solve-r", "--offspring", "binary", "--lifetime", "exp:1", "--theta", "abc"], 1),
    (["malthusian", "--offspring", "table:0.5,0.5", "--lifetime", "exp:1"], 3),
    (["renewal", "--offspring", "binary", "--lifetime", "dirac:1"], 3),
    (["solve-r", "--offspring", "binary", "--lifetime", "exp:1", "--theta", "1.5"], 3),
    (["gw", "--offspring", "geometric:0.6666666666666666", "--theta", "0.2"], 3),
])
def test_exit_codes(capsys, argv, code):
    got, _, err = call(capsys, *argv)
    assert got == code
    assert err.strip()


def test_verify_yule(capsys):
    code, out, _ = call(capsys, "verify", "--offspring", "binary", "--lifetime", "exp:1")
    assert code == 0
    assert "E(Z log Z) finite" in out
    assert "PASS" in out


@pytest.mark.slow
def test_verify_heavy(capsys):
    code, out, _ = call(capsys, "verify", "--offspring", "heavylog:0.5,2.0", "--lifetime", "exp:1",
                        "--theta", "mid")
    assert code == 0
    for t in ("10", "20", "40"):
        assert f"ratio log X / Y at t = {t}:" in out
