# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: renewal recursion and branching-process simulation.

Semantics are mirrored line for line by ``_fallback.py``; both consume the
same counter-based random stream, so they produce identical ensembles.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport log, exp, sqrt, cos, floor, log1p, expm1, M_PI
from libc.stdlib cimport malloc, realloc, free
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double TWO_M53 = 1.0 / 9007199254740992.0


cdef inline uint64_t mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef struct Stream:
    uint64_t key
    uint64_t counter


cdef inline void stream_init(Stream* s, uint64_t seed, uint64_t rep) nogil:
    s.key = mix64(mix64(seed) ^ (rep * GOLDEN))
    s.counter = 0


cdef inline uint64_t next_u64(Stream* s) nogil:
    s.counter += 1
    return mix64(s.key + s.counter * GOLDEN)


cdef inline double unif(Stream* s) nogil:
    # [0, 1)
    return <double>(next_u64(s) >> 11) * TWO_M53


cdef inline double unif_pos(Stream* s) nogil:
    # (0, 1]
    return <double>((next_u64(s) >> 11) + 1) * TWO_M53


def stream_uniforms(uint64_t seed, uint64_t rep, Py_ssize_t n):
    cdef Stream s
    cdef Py_ssize_t i
    out = np.empty(n)
    cdef double[:] o = out
    stream_init(&s, seed, rep)
    for i in range(n):
        o[i] = unif(&s)
    return out


cdef inline double std_normal(Stream* s) nogil:
    cdef double u1 = unif_pos(s)
    cdef double u2 = unif(s)
    return sqrt(-2.0 * log(u1)) * cos(2.0 * M_PI * u2)


cdef double gamma_draw(Stream* s, double k) nogil:
    cdef double d, c, x, v, u, boost = 1.0
    if k < 1.0:
        boost = exp(log(unif_pos(s)) / k)
        k += 1.0
    d = k - 1.0 / 3.0
    c = 1.0 / sqrt(9.0 * d)
    while True:
        x = std_normal(s)
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = unif_pos(s)
        if log(u) < 0.5 * x * x + d - d * v + d * log(v):
            return d * v * boost


cdef double lifetime_draw(Stream* s, int kind, double* p, Py_ssize_t np_) nogil:
    cdef double u
    cdef Py_ssize_t lo, hi, mid, m
    if kind == 0:
        return p[0]
    if kind == 1:
        if p[0] == 1.0:
            return -log(unif_pos(s)) / p[1]
        return gamma_draw(s, p[0]) / p[1]
    if kind == 2:
        return p[0] + (p[1] - p[0]) * unif(s)
    if kind == 3:
        u = unif(s)
        return p[0] - log1p(u * expm1(-p[2] * (p[1] - p[0]))) / p[2]
    # empirical: p = [t_0..t_{m-1}, G_0..G_{m-1}], first index with G > u
    m = np_ // 2
    u = unif(s)
    lo = 0
    hi = m - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if p[m + mid] > u:
            hi = mid
        else:
            lo = mid + 1
    return p[lo]


cdef double offspring_draw(Stream* s, double* prob, int64_t* alias, Py_ssize_t n,
                           int tail_kind, double* tp) nogil:
    cdef Py_ssize_t i = <Py_ssize_t>(unif(s) * n)
    cdef double u, x, k, b, ref
    if i >= n:
        i = n - 1
    if unif(s) >= prob[i]:
        i = alias[i]
    if tail_kind == 0 or i < n - 1:
        return <double>i
    if tail_kind == 1:
        # geometric tail: tp = [p, kmin]
        return tp[1] + floor(log(unif_pos(s)) / log(tp[0]))
    # heavylog tail: tp = [alpha, kmin]; Pareto proposal floor(kmin/U), exact rejection
    b = 1.0 + tp[0]
    ref = (tp[1] + 1.0) / tp[1] * exp(-b * log(log(tp[1])))
    while True:
        x = tp[1] / unif_pos(s)
        k = floor(x)
        u = unif(s)
        if u * ref < (k + 1.0) / k * exp(-b * log(log(k))):
            return k


# -- binary min-heap of death times -------------------------------------------

cdef struct Heap:
    double* data
    Py_ssize_t size
    Py_ssize_t cap


cdef int heap_push(Heap* h, double x) nogil:
    cdef Py_ssize_t i, parent
    cdef double* grown
    if h.size == h.cap:
        grown = <double*>realloc(h.data, 2 * h.cap * sizeof(double))
        if grown == NULL:
            return -1
        h.data = grown
        h.cap *= 2
    i = h.size
    h.size += 1
    while i > 0:
        parent = (i - 1) >> 1
        if h.data[parent] <= x:
            break
        h.data[i] = h.data[parent]
        i = parent
    h.data[i] = x
    return 0


cdef double heap_pop(Heap* h) nogil:
    cdef double top = h.data[0]
    cdef double last
    cdef Py_ssize_t i = 0, child
    h.size -= 1
    if h.size == 0:
        return top
    last = h.data[h.size]
    while True:
        child = 2 * i + 1
        if child >= h.size:
            break
        if child + 1 < h.size and h.data[child + 1] < h.data[child]:
            child += 1
        if h.data[child] >= last:
            break
        h.data[i] = h.data[child]
        i = child
    h.data[i] = last
    return top


def simulate_bh(double[:] times, double[:] prob, int64_t[:] alias, int tail_kind,
                double[:] tail_params, int life_kind, double[:] life_params,
                uint64_t seed, Py_ssize_t rep_start, Py_ssize_t rep_stop, double cap):
    """Event-driven Bellman-Harris replicates [rep_start, rep_stop)."""
    cdef Py_ssize_t R = rep_stop - rep_start, T = times.shape[0], n = prob.shape[0]
    Z_out = np.full((R, T), -1, dtype=np.int64)
    ext_out = np.zeros(R, dtype=np.uint8)
    cen_out = np.zeros(R, dtype=np.uint8)
    ctime_out = np.full(R, np.nan)
    cdef int64_t[:, :] Zv = Z_out
    cdef cnp.uint8_t[:] ev = ext_out
    cdef cnp.uint8_t[:] cv = cen_out
    cdef double[:] ctv = ctime_out
    cdef Stream s
    cdef Heap h
    cdef Py_ssize_t r, ti, j
    cdef double d, k, events
    cdef int64_t Z
    cdef int failed = 0
    h.cap = 1024
    h.data = <double*>malloc(h.cap * sizeof(double))
    if h.data == NULL:
        raise MemoryError()
    with nogil:
        for r in range(R):
            stream_init(&s, seed, <uint64_t>(rep_start + r))
            h.size = 0
            heap_push(&h, lifetime_draw(&s, life_kind, &life_params[0], life_params.shape[0]))
            Z = 1
            events = 0.0
            ti = 0
            while True:
                if h.size == 0:
                    while ti < T:
                        Zv[r, ti] = 0
                        ti += 1
                    ev[r] = 1
                    break
                d = h.data[0]
                while ti < T and times[ti] < d:
                    Zv[r, ti] = Z
                    ti += 1
                if ti == T:
                    break
                heap_pop(&h)
                k = offspring_draw(&s, &prob[0], &alias[0], n, tail_kind, &tail_params[0])
                events += 1.0
                if events + k > cap:
                    cv[r] = 1
                    ctv[r] = d
                    break
                Z += <int64_t>k - 1
                events += k
                for j in range(<Py_ssize_t>k):
                    if heap_push(&h, d + lifetime_draw(&s, life_kind, &life_params[0], life_params.shape[0])) != 0:
                        failed = 1
                        break
                if failed:
                    break
            if failed:
                break
    free(h.data)
    if failed:
        raise MemoryError("death-time heap could not grow")
    return Z_out, ext_out.astype(bool), cen_out.astype(bool), ctime_out


def simulate_gw(int64_t[:] gens, double[:] prob, int64_t[:] alias, int tail_kind,
                double[:] tail_params, int64_t degenerate, uint64_t seed,
                Py_ssize_t rep_start, Py_ssize_t rep_stop, double cap):
    """Generation-by-generation Galton-Watson replicates; ``degenerate >= 0``
    marks a single-atom law (Z_{n+1} = degenerate * Z_n, no draws)."""
    cdef Py_ssize_t R = rep_stop - rep_start, T = gens.shape[0], n = prob.shape[0]
    Z_out = np.full((R, T), -1, dtype=np.int64)
    ext_out = np.zeros(R, dtype=np.uint8)
    cen_out = np.zeros(R, dtype=np.uint8)
    ctime_out = np.full(R, np.nan)
    cdef int64_t[:, :] Zv = Z_out
    cdef cnp.uint8_t[:] ev = ext_out
    cdef cnp.uint8_t[:] cv = cen_out
    cdef double[:] ctv = ctime_out
    cdef Stream s
    cdef Py_ssize_t r, ti, i
    cdef int64_t gen, Z
    cdef double nxt, k, events
    cdef int stop
    with nogil:
        for r in range(R):
            stream_init(&s, seed, <uint64_t>(rep_start + r))
            Z = 1
            events = 0.0
            ti = 0
            gen = 0
            stop = 0
            while True:
                while ti < T and gens[ti] == gen:
                    Zv[r, ti] = Z
                    ti += 1
                if ti == T:
                    break
                if Z == 0:
                    while ti < T:
                        Zv[r, ti] = 0
                        ti += 1
                    ev[r] = 1
                    break
                if degenerate >= 0:
                    nxt = <double>Z * <double>degenerate
                    if nxt > 9.0e18:
                        cv[r] = 1
                        ctv[r] = gen + 1
                        break
                    Z = Z * degenerate
                else:
                    nxt = 0.0
                    for i in range(Z):
                        k = offspring_draw(&s, &prob[0], &alias[0], n, tail_kind, &tail_params[0])
                        events += 1.0
                        nxt += k
                        if events + nxt > cap:
                            stop = 1
                            break
                    if stop:
                        cv[r] = 1
                        ctv[r] = gen + 1
                        break
                    Z = <int64_t>nxt
                gen += 1
    return Z_out, ext_out.astype(bool), cen_out.astype(bool), ctime_out


def renewal_forward(double[:] G, double[:] K):
    """Solve U_i = G_i + sum_{m=0}^{i} K_m U_{i-m} by forward substitution."""
    cdef Py_ssize_t N = G.shape[0], M = K.shape[0], i, m, top
    out = np.zeros(N)
    cdef double[:] U = out
    cdef double acc, k0 = K[0]
    with nogil:
        for i in range(N):
            acc = G[i]
            top = i if i < M - 1 else M - 1
            for m in range(1, top + 1):
                acc += K[m] * U[i - m]
            U[i] = acc / (1.0 - k0)
    return out
