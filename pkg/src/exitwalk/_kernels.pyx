# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled walk kernels.

Mirrors ``_kernels_py`` operation for operation; see ``kernelspec`` for the
encoding of step laws and the word-consumption contract.
"""
import numpy as np

from libc.math cimport cos, fabs, log, pow, sin, sqrt
from libc.stdint cimport int64_t, uint64_t
from libc.stdlib cimport free, malloc
from libc.string cimport memset

cdef enum:
    K_POINT = 0
    K_FIXED = 1
    K_RANDOM = 2
    K_GAUSS = 3
    K_RADIAL = 4
    K_WITNESS = 5

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double INV_2_53 = 1.0 / 9007199254740992.0
cdef double TWO_PI = 6.283185307179586
cdef double TIE_TOL = 1e-8
cdef int64_t RECOMPUTE_MASK = 0xFFFF


cdef struct Spec:
    int kind
    int d
    int m
    int mode
    int W
    int has_shift
    int sparse
    const int64_t* idx
    const double* a
    const double* b
    const double* mu
    double p
    double trunc


cdef struct Work:
    double* S
    int64_t* perm
    int64_t* swp
    int64_t* sidx
    double* sval
    double* dense


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t word_at(uint64_t key, uint64_t ctr) noexcept nogil:
    return mix64(key + (ctr + 1) * GOLDEN)


cdef inline int64_t bounded(uint64_t w, int64_t n) noexcept nogil:
    return <int64_t>(((w >> 32) * <uint64_t>n) >> 32)


cdef inline double sign_of(uint64_t bits) noexcept nogil:
    # lowest bit set -> -1.0; branch-free since the bit is a fair coin
    return 1.0 - 2.0 * <double>(bits & 1)


cdef inline double fpow(double x, double p) noexcept nogil:
    if p == 2.0:
        return x * x
    return pow(fabs(x), p)


cdef inline double root(double s, double p) noexcept nogil:
    if p == 2.0:
        return sqrt(s)
    return pow(s, 1.0 / p)


cdef inline int gen_step(const Spec* sp, Work* wk, uint64_t key, uint64_t c) noexcept nogil:
    """Fill the step for word offset ``c``; return nnz, or -1 if dense."""
    cdef int i, j, n = 0, kk, d = sp.d
    cdef int64_t t, tmp, v
    cdef uint64_t bits = 0, w1, w2
    cdef double u, R, sg, nrm, q, scale
    if sp.kind == K_POINT:
        for i in range(d):
            wk.dense[i] = sp.a[i]
        n = -1
    elif sp.kind == K_FIXED:
        for i in range(sp.m):
            if i % 64 == 0:
                bits = word_at(key, c + i // 64)
            wk.sidx[i] = sp.idx[i]
            wk.sval[i] = sp.a[i] * sign_of(bits >> (i % 64))
        n = sp.m
    elif sp.kind == K_RANDOM:
        kk = sp.mode
        for i in range(kk):
            t = i + bounded(word_at(key, c + i), d - i)
            wk.swp[i] = t
            tmp = wk.perm[i]
            wk.perm[i] = wk.perm[t]
            wk.perm[t] = tmp
        for i in range(kk):
            if i % 64 == 0:
                bits = word_at(key, c + kk + i // 64)
            j = <int>wk.perm[i]
            wk.sidx[i] = j
            wk.sval[i] = sp.a[j] * sign_of(bits >> (i % 64))
        for i in range(kk - 1, -1, -1):
            t = wk.swp[i]
            tmp = wk.perm[i]
            wk.perm[i] = wk.perm[t]
            wk.perm[t] = tmp
        n = kk
    elif sp.kind == K_GAUSS:
        i = 0
        while i < d:
            w1 = word_at(key, c + i)
            w2 = word_at(key, c + i + 1)
            u = ((w1 >> 11) + 1) * INV_2_53
            R = sqrt(-2.0 * log(u))
            u = (w2 >> 11) * INV_2_53
            wk.dense[i] = sp.a[i] * (R * cos(TWO_PI * u))
            if i + 1 < d:
                wk.dense[i + 1] = sp.a[i + 1] * (R * sin(TWO_PI * u))
            i += 2
        n = -1
    elif sp.kind == K_RADIAL:
        u = (word_at(key, c) >> 11) * INV_2_53
        i = 0
        while i < sp.m - 1 and sp.b[i] <= u:
            i += 1
        w2 = word_at(key, c + 1)
        if sp.mode == 0:
            wk.sidx[0] = 0
            sg = sign_of(w2)
        else:
            v = bounded(w2, 2 * d)
            wk.sidx[0] = v >> 1
            sg = sign_of(<uint64_t>v)
        wk.sval[0] = sg * sp.a[i]
        n = 1
    else:  # K_WITNESS
        t = bounded(word_at(key, c), sp.mode)
        sg = sign_of(word_at(key, c + 1))
        for i in range(d):
            wk.dense[i] = sg * sp.a[t * d + i]
        n = -1

    if sp.has_shift:
        if n >= 0:
            for i in range(d):
                wk.dense[i] = sp.mu[i]
            for i in range(n):
                wk.dense[wk.sidx[i]] += wk.sval[i]
        else:
            for i in range(d):
                wk.dense[i] += sp.mu[i]
        n = -1

    if sp.trunc > 0.0:
        q = 0.0
        if n >= 0:
            for i in range(n):
                q += fpow(wk.sval[i], sp.p)
        else:
            for i in range(d):
                q += fpow(wk.dense[i], sp.p)
        nrm = root(q, sp.p)
        if nrm > sp.trunc:
            scale = sp.trunc / nrm
            if n >= 0:
                for i in range(n):
                    wk.sval[i] = wk.sval[i] * scale
            else:
                for i in range(d):
                    wk.dense[i] = wk.dense[i] * scale
    return n


cdef inline double full_power_sum(const Spec* sp, Work* wk) noexcept nogil:
    cdef double s = 0.0
    cdef int j
    for j in range(sp.d):
        s += fpow(wk.S[j], sp.p)
    return s


cdef inline double apply_step(const Spec* sp, Work* wk, int n, double ps) noexcept nogil:
    cdef int i
    cdef int64_t j
    cdef double a0, b0
    if n >= 0:
        for i in range(n):
            j = wk.sidx[i]
            a0 = wk.S[j]
            b0 = a0 + wk.sval[i]
            wk.S[j] = b0
            ps += fpow(b0, sp.p) - fpow(a0, sp.p)
        return ps
    for i in range(sp.d):
        wk.S[i] += wk.dense[i]
    return full_power_sum(sp, wk)


cdef int alloc_work(Work* wk, const Spec* sp) noexcept nogil:
    cdef int d = sp.d
    cdef int nn = d if d > sp.m else sp.m
    cdef int i
    if nn < 1:
        nn = 1
    wk.S = <double*>malloc(d * sizeof(double))
    wk.perm = <int64_t*>malloc(d * sizeof(int64_t))
    wk.swp = <int64_t*>malloc(nn * sizeof(int64_t))
    wk.sidx = <int64_t*>malloc(nn * sizeof(int64_t))
    wk.sval = <double*>malloc(nn * sizeof(double))
    wk.dense = <double*>malloc(d * sizeof(double))
    if not (wk.S and wk.perm and wk.swp and wk.sidx and wk.sval and wk.dense):
        return -1
    for i in range(d):
        wk.perm[i] = i
    return 0


cdef void free_work(Work* wk) noexcept nogil:
    free(wk.S)
    free(wk.perm)
    free(wk.swp)
    free(wk.sidx)
    free(wk.sval)
    free(wk.dense)


cdef Spec make_spec(int kind, int d, const int64_t[::1] idx, const double[::1] a,
                    const double[::1] b, int mode, const double[::1] mu, double p,
                    double trunc):
    cdef Spec sp
    sp.kind = kind
    sp.d = d
    sp.mode = mode
    sp.p = p
    sp.trunc = trunc
    sp.has_shift = mu.shape[0] > 0
    sp.idx = &idx[0] if idx.shape[0] > 0 else NULL
    sp.a = &a[0] if a.shape[0] > 0 else NULL
    sp.b = &b[0] if b.shape[0] > 0 else NULL
    sp.mu = &mu[0] if mu.shape[0] > 0 else NULL
    if kind == K_FIXED:
        sp.m = idx.shape[0]
    elif kind == K_RADIAL:
        sp.m = a.shape[0]
    else:
        sp.m = 0
    if kind == K_POINT:
        sp.W = 0
    elif kind == K_FIXED:
        sp.W = (sp.m + 63) // 64
    elif kind == K_RANDOM:
        sp.W = mode + (mode + 63) // 64
    elif kind == K_GAUSS:
        sp.W = 2 * ((d + 1) // 2)
    else:
        sp.W = 2
    sp.sparse = (kind == K_FIXED or kind == K_RANDOM or kind == K_RADIAL) and not sp.has_shift
    return sp


def _as_args(idx, a, b, mu):
    return (np.ascontiguousarray(idx, dtype=np.int64), np.ascontiguousarray(a, dtype=np.float64),
            np.ascontiguousarray(b, dtype=np.float64), np.ascontiguousarray(mu, dtype=np.float64))


def exit_times(int kind, int d, idx, a, b, int mode, mu, keys, uint64_t word0,
               double p, double r, int64_t cap, double trunc=0.0):
    """First n with ||S_n|| > r for each stream key; 0 marks a censored path."""
    idx, a, b, mu = _as_args(idx, a, b, mu)
    cdef const uint64_t[::1] kv = np.ascontiguousarray(keys, dtype=np.uint64)
    cdef Spec sp = make_spec(kind, d, idx, a, b, mode, mu, p, trunc)
    cdef Py_ssize_t npaths = kv.shape[0]
    out = np.zeros(npaths, dtype=np.int64)
    cdef int64_t[::1] ov = out
    cdef Work wk
    cdef Py_ssize_t q
    cdef int64_t t, n
    cdef int nnz
    cdef double ps, rp = r * r if p == 2.0 else pow(r, p)
    cdef uint64_t key, W = sp.W
    if alloc_work(&wk, &sp) != 0:
        free_work(&wk)
        raise MemoryError()
    with nogil:
        for q in range(npaths):
            key = kv[q]
            memset(wk.S, 0, d * sizeof(double))
            ps = 0.0
            ov[q] = 0
            for t in range(cap):
                nnz = gen_step(&sp, &wk, key, word0 + <uint64_t>t * W)
                ps = apply_step(&sp, &wk, nnz, ps)
                n = t + 1
                if sp.sparse and (n & RECOMPUTE_MASK) == 0:
                    ps = full_power_sum(&sp, &wk)
                if fabs(ps - rp) <= TIE_TOL * rp:
                    ps = full_power_sum(&sp, &wk)
                if ps > rp:
                    ov[q] = n
                    break
    free_work(&wk)
    return out


def norm_trajectories(int kind, int d, idx, a, b, int mode, mu, keys, uint64_t word0,
                      double p, grid):
    """||S_n|| at each n of the increasing ``grid`` for every stream."""
    idx, a, b, mu = _as_args(idx, a, b, mu)
    cdef const uint64_t[::1] kv = np.ascontiguousarray(keys, dtype=np.uint64)
    cdef const int64_t[::1] gv = np.ascontiguousarray(grid, dtype=np.int64)
    cdef Spec sp = make_spec(kind, d, idx, a, b, mode, mu, p, 0.0)
    cdef Py_ssize_t npaths = kv.shape[0], ng = gv.shape[0]
    out = np.zeros((npaths, ng), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Work wk
    cdef Py_ssize_t q, g
    cdef int64_t t, n, nmax = gv[ng - 1] if ng > 0 else 0
    cdef int nnz
    cdef double ps
    cdef uint64_t key, W = sp.W
    if alloc_work(&wk, &sp) != 0:
        free_work(&wk)
        raise MemoryError()
    with nogil:
        for q in range(npaths):
            key = kv[q]
            memset(wk.S, 0, d * sizeof(double))
            ps = 0.0
            g = 0
            for t in range(nmax):
                nnz = gen_step(&sp, &wk, key, word0 + <uint64_t>t * W)
                ps = apply_step(&sp, &wk, nnz, ps)
                n = t + 1
                if sp.sparse and (n & RECOMPUTE_MASK) == 0:
                    ps = full_power_sum(&sp, &wk)
                while g < ng and gv[g] == n:
                    ps = full_power_sum(&sp, &wk)
                    ov[q, g] = root(ps, p)
                    g += 1
    free_work(&wk)
    return out


def sample_steps(int kind, int d, idx, a, b, int mode, mu, keys, uint64_t word0, double p=2.0):
    """One step per stream key, read at word offset ``word0``; shape (n, d)."""
    idx, a, b, mu = _as_args(idx, a, b, mu)
    cdef const uint64_t[::1] kv = np.ascontiguousarray(keys, dtype=np.uint64)
    cdef Spec sp = make_spec(kind, d, idx, a, b, mode, mu, p, 0.0)
    cdef Py_ssize_t npaths = kv.shape[0]
    out = np.zeros((npaths, d), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Work wk
    cdef Py_ssize_t q
    cdef int i, nnz
    if alloc_work(&wk, &sp) != 0:
        free_work(&wk)
        raise MemoryError()
    with nogil:
        for q in range(npaths):
            nnz = gen_step(&sp, &wk, kv[q], word0)
            if nnz >= 0:
                for i in range(nnz):
                    ov[q, wk.sidx[i]] += wk.sval[i]
            else:
                for i in range(d):
                    ov[q, i] = wk.dense[i]
    free_work(&wk)
    return out
