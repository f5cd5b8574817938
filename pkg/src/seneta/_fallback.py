"""Pure-Python twins of the compiled kernels.

Every routine consumes the counter-based stream in exactly the same order as
``_core.pyx`` so the two backends agree draw for draw.
"""
from __future__ import annotations

import heapq
import math

import numpy as np

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
TWO_M53 = 1.0 / 9007199254740992.0


def mix64(z: int) -> int:
    z &= MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


class Stream:
    """SplitMix64 counter stream keyed by (seed, replicate)."""

    __slots__ = ("key", "counter")

    def __init__(self, seed: int, rep: int):
        self.key = mix64(mix64(seed) ^ ((rep * GOLDEN) & MASK))
        self.counter = 0

    def next_u64(self) -> int:
        self.counter += 1
        return mix64(self.key + self.counter * GOLDEN)

    def unif(self) -> float:
        return (self.next_u64() >> 11) * TWO_M53

    def unif_pos(self) -> float:
        return ((self.next_u64() >> 11) + 1) * TWO_M53


def stream_uniforms(seed: int, rep: int, n: int) -> np.ndarray:
    s = Stream(seed, rep)
    return np.array([s.unif() for _ in range(n)], dtype=float)


def _std_normal(s: Stream) -> float:
    u1 = s.unif_pos()
    u2 = s.unif()
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


def _gamma_draw(s: Stream, k: float) -> float:
    boost = 1.0
    if k < 1.0:
        boost = math.exp(math.log(s.unif_pos()) / k)
        k += 1.0
    d = k - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = _std_normal(s)
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = s.unif_pos()
        if math.log(u) < 0.5 * x * x + d - d * v + d * math.log(v):
            return d * v * boost


def _lifetime_draw(s: Stream, kind: int, p) -> float:
    if kind == 0:
        return p[0]
    if kind == 1:
        if p[0] == 1.0:
            return -math.log(s.unif_pos()) / p[1]
        return _gamma_draw(s, p[0]) / p[1]
    if kind == 2:
        return p[0] + (p[1] - p[0]) * s.unif()
    if kind == 3:
        u = s.unif()
        return p[0] - math.log1p(u * math.expm1(-p[2] * (p[1] - p[0]))) / p[2]
    m = len(p) // 2
    u = s.unif()
    lo, hi = 0, m - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if p[m + mid] > u:
            hi = mid
        else:
            lo = mid + 1
    return p[lo]


def _offspring_draw(s: Stream, prob, alias, n: int, tail_kind: int, tp) -> float:
    i = int(s.unif() * n)
    if i >= n:
        i = n - 1
    if s.unif() >= prob[i]:
        i = alias[i]
    if tail_kind == 0 or i < n - 1:
        return float(i)
    if tail_kind == 1:
        return tp[1] + math.floor(math.log(s.unif_pos()) / math.log(tp[0]))
    b = 1.0 + tp[0]
    ref = (tp[1] + 1.0) / tp[1] * math.exp(-b * math.log(math.log(tp[1])))
    while True:
        x = tp[1] / s.unif_pos()
        k = float(math.floor(x))
        u = s.unif()
        if u * ref < (k + 1.0) / k * math.exp(-b * math.log(math.log(k))):
            return k


def _outputs(R: int, T: int):
    return (np.full((R, T), -1, dtype=np.int64), np.zeros(R, dtype=bool),
            np.zeros(R, dtype=bool), np.full(R, np.nan))


def simulate_bh(times, prob, alias, tail_kind, tail_params, life_kind, life_params,
                seed, rep_start, rep_stop, cap):
    times = [float(t) for t in times]
    prob = [float(x) for x in prob]
    alias = [int(x) for x in alias]
    tp = [float(x) for x in tail_params]
    lp = [float(x) for x in life_params]
    n, T, R = len(prob), len(times), rep_stop - rep_start
    Z_out, ext, cen, ctime = _outputs(R, T)
    for r in range(R):
        s = Stream(seed, rep_start + r)
        heap = [_lifetime_draw(s, life_kind, lp)]
        Z, events, ti = 1, 0.0, 0
        row = Z_out[r]
        while True:
            if not heap:
                row[ti:] = 0
                ext[r] = True
                break
            d = heap[0]
            while ti < T and times[ti] < d:
                row[ti] = Z
                ti += 1
            if ti == T:
                break
            heapq.heappop(heap)
            k = _offspring_draw(s, prob, alias, n, tail_kind, tp)
            events += 1.0
            if events + k > cap:
                cen[r] = True
                ctime[r] = d
                break
            Z += int(k) - 1
            events += k
            for _ in range(int(k)):
                heapq.heappush(heap, d + _lifetime_draw(s, life_kind, lp))
    return Z_out, ext, cen, ctime


def simulate_gw(gens, prob, alias, tail_kind, tail_params, degenerate, seed,
                rep_start, rep_stop, cap):
    gens = [int(g) for g in gens]
    prob = [float(x) for x in prob]
    alias = [int(x) for x in alias]
    tp = [float(x) for x in tail_params]
    n, T, R = len(prob), len(gens), rep_stop - rep_start
    Z_out, ext, cen, ctime = _outputs(R, T)
    for r in range(R):
        s = Stream(seed, rep_start + r)
        Z, events, ti, gen = 1, 0.0, 0, 0
        row = Z_out[r]
        while True:
            while ti < T and gens[ti] == gen:
                row[ti] = Z
                ti += 1
            if ti == T:
                break
            if Z == 0:
                row[ti:] = 0
                ext[r] = True
                break
            if degenerate >= 0:
                if float(Z) * float(degenerate) > 9.0e18:
                    cen[r] = True
                    ctime[r] = gen + 1
                    break
                Z *= degenerate
            else:
                nxt, stop = 0.0, False
                for _ in range(Z):
                    nxt += _offspring_draw(s, prob, alias, n, tail_kind, tp)
                    events += 1.0
                    if events + nxt > cap:
                        stop = True
                        break
                if stop:
                    cen[r] = True
                    ctime[r] = gen + 1
                    break
                Z = int(nxt)
            gen += 1
    return Z_out, ext, cen, ctime


def renewal_forward(G, K) -> np.ndarray:
    G = np.asarray(G, dtype=float)
    K = np.asarray(K, dtype=float)
    N, M = len(G), len(K)
    U = np.zeros(N)
    k0 = K[0]
    for i in range(N):
        top = min(i, M - 1)
        acc = G[i]
        if top:
            acc += float(np.dot(K[1:top + 1], U[i - 1:i - top - 1 if i - top - 1 >= 0 else None:-1]))
        U[i] = acc / (1.0 - k0)
    return U
