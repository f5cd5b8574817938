import os
import subprocess
import sys

import numpy as np
import pytest

from seneta import _fallback, _kernels
from seneta.simulator import SimConfig, simulate_bh, simulate_gw

BACKENDS = _kernels.backends()
needs_core = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled core not built")


def test_splitmix_reference():
    # published SplitMix64 output for state 0 after one increment
    assert _fallback.mix64(0x9E3779B97F4A7C15) == 0xE220A8397B1DCDAF


def test_uniforms_in_range():
    u = _fallback.stream_uniforms(1, 2, 1000)
    assert u.min() >= 0 and u.max() < 1
    assert abs(u.mean() - 0.5) < 0.05


@needs_core
def test_streams_agree():
    core = BACKENDS["cython"]
    for seed, rep in [(0, 0), (7, 3), (2 ** 64 - 1, 12345)]:
        np.testing.assert_array_equal(core.stream_uniforms(seed, rep, 50), _fallback.stream_uniforms(seed, rep, 50))


@needs_core
def test_renewal_forward_agree():
    rng = np.random.default_rng(0)
    G = rng.random(300)
    K = rng.random(120) * 0.01
    np.testing.assert_allclose(BACKENDS["cython"].renewal_forward(G, K), _fallback.renewal_forward(G, K),
                               rtol=1e-13, atol=0)


@needs_core
@pytest.mark.parametrize("off,life", [
    ("binary", "exp:1"),
    ("geometric:0.6666666666666666", "gamma:0.5,0.3333333333333333"),
    ("heavylog:0.5,2.0", "uniform:0.5,1.5"),
    ("table:0.2,0.3,0.5", "dirac:1"),
])
def test_bh_agree(off, life):
    cfg = SimConfig(off, life, 40, (0.5, 1.0, 2.0, 3.0), seed=21, cap=5000)
    a = simulate_bh(cfg, backend="cython")
    b = simulate_bh(cfg, backend="python")
    np.testing.assert_array_equal(a.Z, b.Z)
    np.testing.assert_array_equal(a.extinct, b.extinct)
    np.testing.assert_array_equal(a.censored, b.censored)


@needs_core
@pytest.mark.parametrize("off", ["binary", "geometric:0.6666666666666666", "heavylog:0.5,2.0"])
def test_gw_agree(off):
    cfg = SimConfig(off, replicates=40, times=(0, 1, 2, 4), seed=8, cap=100_000)
    a = simulate_gw(cfg, backend="cython")
    b = simulate_gw(cfg, backend="python")
    np.testing.assert_array_equal(a.Z, b.Z)


def test_env_switch_selects_fallback():
    code = "from seneta import _kernels; print(_kernels.BACKEND)"
    env = dict(os.environ, SENETA_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
