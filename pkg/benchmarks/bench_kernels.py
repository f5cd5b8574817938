"""Compiled core versus pure-Python fallback on the hot kernels.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Both backends consume the same random stream, so each pair of runs is also
checked for identical output before timings are reported.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from seneta import _kernels
from seneta.lifetime import malthusian, parse_lifetime_spec, tilt, hat_kernel
from seneta.offspring import parse_offspring_spec
from seneta.simulator import OffspringSampler


def _time(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases():
    life = parse_lifetime_spec("uniform:0.5,1.5")
    beta = malthusian(life, 2.0)
    gb = tilt(life, beta, 2.0)
    step = 1.0 / gb.nu / 50
    t = step * np.arange(1501)
    G, K = np.asarray(gb.cdf(t), dtype=float), hat_kernel(gb, step)
    yield "renewal_forward (1501 nodes)", lambda m: m.renewal_forward(G, K)

    smp = OffspringSampler.from_law(parse_offspring_spec("binary"))
    kind, lp = parse_lifetime_spec("exp:1").sampler
    times = np.array([2.0, 4.0, 6.0])
    yield "simulate_bh Yule, 200 replicates to t=6", lambda m: m.simulate_bh(
        times, smp.prob, smp.alias, smp.tail_kind, smp.tail_params, kind, lp, 7, 0, 200, 1e7)

    hv = OffspringSampler.from_law(parse_offspring_spec("heavylog:0.5,2.0"))
    gens = np.arange(9, dtype=np.int64)
    yield "simulate_gw heavylog, 200 replicates to n=8", lambda m: m.simulate_gw(
        gens, hv.prob, hv.alias, hv.tail_kind, hv.tail_params, hv.degenerate, 7, 0, 200, 1e7)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    mods = _kernels.backends()
    if "cython" not in mods:
        print("compiled core not built; only the fallback is available")
    print(f"{'kernel':48s} {'python [s]':>11s} {'cython [s]':>11s} {'speedup':>8s}  same")
    for name, fn in cases():
        tp, op = _time(lambda: fn(mods["python"]), args.repeat)
        if "cython" in mods:
            tc, oc = _time(lambda: fn(mods["cython"]), args.repeat)
            a = op if isinstance(op, tuple) else (op,)
            b = oc if isinstance(oc, tuple) else (oc,)
            same = all(np.array_equal(x, y, equal_nan=True) if x.dtype.kind == "f" else np.array_equal(x, y)
                       for x, y in zip(a, b)) if "simulate" in name else bool(np.allclose(op, oc, rtol=1e-12))
            print(f"{name:48s} {tp:11.4f} {tc:11.4f} {tp / tc:8.1f}  {same}")
        else:
            print(f"{name:48s} {tp:11.4f} {'-':>11s} {'-':>8s}  -")


if __name__ == "__main__":
    main()
