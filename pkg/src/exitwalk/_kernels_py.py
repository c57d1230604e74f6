"""Pure numpy walk kernels.

Same signatures and the same word-consumption contract as the compiled
``_kernels`` module.  Work is vectorized across paths; each loop iteration
advances every still-active path by one step.  Discrete step laws give
bit-identical results to the compiled kernel; Gaussian steps can differ in
the last ulp because numpy and libm evaluate ``log``/``cos`` differently.
"""
from __future__ import annotations

import numpy as np

from .kernelspec import FIXED, GAUSS, POINT, RADIAL, RANDOM, WITNESS, _words
from .rng import GOLDEN, MASK64, mix64_array

_INV_2_53 = 1.0 / 9007199254740992.0
_TWO_PI = 6.283185307179586
TIE_TOL = 1e-8
RECOMPUTE_EVERY = 1 << 16
_U32 = np.uint64(32)


def _word(keys: np.ndarray, ctr: int) -> np.ndarray:
    return mix64_array(keys + np.uint64(((ctr + 1) * GOLDEN) & MASK64))


def _bounded(w: np.ndarray, n) -> np.ndarray:
    n = np.asarray(n, dtype=np.uint64)
    return (((w >> _U32) * n) >> _U32).astype(np.int64)


def _fpow(x, p):
    if p == 2.0:
        return x * x
    return np.power(np.abs(x), p)


def _root(s, p):
    if p == 2.0:
        return np.sqrt(s)
    return np.power(s, 1.0 / p)


class _Law:
    def __init__(self, kind, d, idx, a, b, mode, mu, p):
        self.kind = int(kind)
        self.d = int(d)
        self.idx = np.asarray(idx, dtype=np.int64)
        self.a = np.asarray(a, dtype=np.float64)
        self.b = np.asarray(b, dtype=np.float64)
        self.mode = int(mode)
        self.mu = np.asarray(mu, dtype=np.float64)
        self.p = float(p)
        m = len(self.idx) if self.kind == FIXED else (len(self.a) if self.kind == RADIAL else 0)
        self.m = m
        self.W = _words(self.kind, self.d, m, self.mode)
        self.has_shift = len(self.mu) > 0
        self.sparse = self.kind in (FIXED, RANDOM, RADIAL) and not self.has_shift

    def step(self, keys: np.ndarray, c: int, trunc: float = 0.0):
        """Steps for all ``keys`` at word offset ``c``.

        Returns ``(cols, vals)`` with shape (n, nnz) for sparse laws, or
        ``(None, dense)`` with shape (n, d).
        """
        n = len(keys)
        d = self.d
        cols = vals = dense = None
        if self.kind == POINT:
            dense = np.broadcast_to(self.a, (n, d)).copy()
        elif self.kind == FIXED:
            m = self.m
            vals = np.empty((n, m))
            for i in range(m):
                if i % 64 == 0:
                    bits = _word(keys, c + i // 64)
                neg = ((bits >> np.uint64(i % 64)) & np.uint64(1)).astype(bool)
                vals[:, i] = np.where(neg, -self.a[i], self.a[i])
            cols = np.broadcast_to(self.idx, (n, m))
        elif self.kind == RANDOM:
            k = self.mode
            rows = np.arange(n)
            perm = np.broadcast_to(np.arange(d, dtype=np.int64), (n, d)).copy()
            for i in range(k):
                t = i + _bounded(_word(keys, c + i), d - i)
                tmp = perm[:, i].copy()
                perm[:, i] = perm[rows, t]
                perm[rows, t] = tmp
            cols = perm[:, :k]
            vals = np.empty((n, k))
            for i in range(k):
                if i % 64 == 0:
                    bits = _word(keys, c + k + i // 64)
                neg = ((bits >> np.uint64(i % 64)) & np.uint64(1)).astype(bool)
                al = self.a[cols[:, i]]
                vals[:, i] = np.where(neg, -al, al)
        elif self.kind == GAUSS:
            dense = np.empty((n, d))
            for i in range(0, d, 2):
                w1 = _word(keys, c + i)
                w2 = _word(keys, c + i + 1)
                u1 = ((w1 >> np.uint64(11)) + np.uint64(1)).astype(np.float64) * _INV_2_53
                R = np.sqrt(-2.0 * np.log(u1))
                u2 = (w2 >> np.uint64(11)).astype(np.float64) * _INV_2_53
                dense[:, i] = self.a[i] * (R * np.cos(_TWO_PI * u2))
                if i + 1 < d:
                    dense[:, i + 1] = self.a[i + 1] * (R * np.sin(_TWO_PI * u2))
        elif self.kind == RADIAL:
            u = (_word(keys, c) >> np.uint64(11)).astype(np.float64) * _INV_2_53
            j = np.minimum(np.searchsorted(self.b, u, side="right"), self.m - 1)
            w2 = _word(keys, c + 1)
            if self.mode == 0:
                axis = np.zeros(n, dtype=np.int64)
                neg = (w2 & np.uint64(1)).astype(bool)
            else:
                v = _bounded(w2, 2 * d)
                axis = v >> 1
                neg = (v & 1).astype(bool)
            rad = self.a[j]
            cols = axis[:, None]
            vals = np.where(neg, -rad, rad)[:, None]
        elif self.kind == WITNESS:
            t = _bounded(_word(keys, c), self.mode)
            neg = (_word(keys, c + 1) & np.uint64(1)).astype(bool)
            vecs = self.a.reshape(self.mode, d)[t]
            dense = np.where(neg[:, None], -vecs, vecs)
        else:
            raise ValueError(f"unknown kernel kind {self.kind}")

        if self.has_shift:
            if dense is None:
                base = np.broadcast_to(self.mu, (n, d)).copy()
                rows = np.arange(n)
                for i in range(cols.shape[1]):
                    base[rows, cols[:, i]] += vals[:, i]
                dense = base
                cols = vals = None
            else:
                dense = dense + self.mu

        if trunc > 0.0:
            arr = vals if dense is None else dense
            q = np.zeros(n)
            for i in range(arr.shape[1]):
                q += _fpow(arr[:, i], self.p)
            nrm = _root(q, self.p)
            over = nrm > trunc
            if np.any(over):
                arr = arr.copy()
                scale = trunc / nrm[over]
                arr[over] = arr[over] * scale[:, None]
                if dense is None:
                    vals = arr
                else:
                    dense = arr
        return (cols, vals) if dense is None else (None, dense)


def _full_power_sum(S: np.ndarray, p: float) -> np.ndarray:
    s = np.zeros(S.shape[0])
    for j in range(S.shape[1]):
        s += _fpow(S[:, j], p)
    return s


def _apply(law: _Law, S: np.ndarray, ps: np.ndarray, cols, vals) -> np.ndarray:
    if cols is None:
        S += vals
        return _full_power_sum(S, law.p)
    rows = np.arange(S.shape[0])
    for i in range(cols.shape[1]):
        j = cols[:, i]
        a0 = S[rows, j]
        b0 = a0 + vals[:, i]
        S[rows, j] = b0
        ps = ps + (_fpow(b0, law.p) - _fpow(a0, law.p))
    return ps


def exit_times(kind, d, idx, a, b, mode, mu, keys, word0, p, r, cap, trunc=0.0):
    """First n with ||S_n|| > r for each stream key; 0 marks a censored path."""
    law = _Law(kind, d, idx, a, b, mode, mu, p)
    keys = np.ascontiguousarray(keys, dtype=np.uint64)
    npaths = len(keys)
    out = np.zeros(npaths, dtype=np.int64)
    rp = r * r if p == 2.0 else float(np.power(r, p))
    active = np.arange(npaths)
    S = np.zeros((npaths, law.d))
    ps = np.zeros(npaths)
    akeys = keys
    W = law.W
    for t in range(int(cap)):
        if len(active) == 0:
            break
        cols, vals = law.step(akeys, word0 + t * W, trunc)
        ps = _apply(law, S, ps, cols, vals)
        n = t + 1
        if law.sparse and n % RECOMPUTE_EVERY == 0:
            ps = _full_power_sum(S, law.p)
        near = np.abs(ps - rp) <= TIE_TOL * rp
        if np.any(near):
            ps[near] = _full_power_sum(S[near], law.p)
        done = ps > rp
        if np.any(done):
            out[active[done]] = n
            keep = ~done
            active, S, ps, akeys = active[keep], S[keep], ps[keep], akeys[keep]
    return out


def norm_trajectories(kind, d, idx, a, b, mode, mu, keys, word0, p, grid):
    """||S_n|| at each n of the increasing ``grid`` for every stream."""
    law = _Law(kind, d, idx, a, b, mode, mu, p)
    keys = np.ascontiguousarray(keys, dtype=np.uint64)
    grid = np.asarray(grid, dtype=np.int64)
    out = np.zeros((len(keys), len(grid)))
    if len(grid) == 0:
        return out
    S = np.zeros((len(keys), law.d))
    ps = np.zeros(len(keys))
    W = law.W
    g = 0
    for t in range(int(grid[-1])):
        cols, vals = law.step(keys, word0 + t * W)
        ps = _apply(law, S, ps, cols, vals)
        n = t + 1
        if law.sparse and n % RECOMPUTE_EVERY == 0:
            ps = _full_power_sum(S, law.p)
        while g < len(grid) and grid[g] == n:
            ps = _full_power_sum(S, law.p)
            out[:, g] = _root(ps, law.p)
            g += 1
    return out


def sample_steps(kind, d, idx, a, b, mode, mu, keys, word0, p=2.0):
    """One step per stream key, read at word offset ``word0``; shape (n, d)."""
    law = _Law(kind, d, idx, a, b, mode, mu, p)
    keys = np.ascontiguousarray(keys, dtype=np.uint64)
    cols, vals = law.step(keys, word0)
    if cols is None:
        return np.ascontiguousarray(vals, dtype=np.float64)
    out = np.zeros((len(keys), law.d))
    rows = np.arange(len(keys))
    for i in range(cols.shape[1]):
        out[rows, cols[:, i]] += vals[:, i]
    return out
