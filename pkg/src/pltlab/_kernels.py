"""Compiled inner loops.

Systems and targets are lowered (see ``systems.compile_system`` and
``systems.compile_target``) to small integer/float tables that these kernels
interpret.  Every orbit in the package, including the single-point
``iterate``, goes through ``step`` so that different code paths see
bitwise-identical orbits.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# op codes
ROT = 0
SKEW = 1
AUTO = 2
DOUB = 3
FTRANS = 4
FPOW = 5

# tau kinds
TAU_STEP = 0
TAU_TRIG = 1

# primitive target kinds
BALL = 0
BOX = 1
FULL = 2

_LATTICE = 4503599627370496.0  # 2**52
_LMASK = np.uint64((1 << 52) - 1)
_TWO_PI = 2.0 * np.pi


@njit(cache=True, nogil=True)
def wrap(v):
    w = v - np.floor(v)
    if w >= 1.0:
        w = 0.0
    return w


@njit(cache=True, nogil=True)
def _splitmix(k):
    z = k + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def double_lattice(x):
    # x -> 2x mod 1 on the 2**-52 lattice; the vacated low bit is refilled
    # from a hash of the state (exact doubling of a dyadic double reaches 0
    # within 53 steps)
    k = np.uint64(x * _LATTICE)
    bit = _splitmix(k) >> np.uint64(63)
    k2 = ((k << np.uint64(1)) & _LMASK) | bit
    return float(k2) / _LATTICE


@njit(cache=True, nogil=True)
def tau_value(s, fp, tp, kind):
    c = int(fp[tp])
    m = int(fp[tp + 1])
    y = s[c]
    if kind == TAU_STEP:
        # breakpoints fp[tp+2 : tp+2+m], values fp[tp+2+m : tp+3+2m]
        idx = 0
        while idx < m and y >= fp[tp + 2 + idx]:
            idx += 1
        return fp[tp + 2 + m + idx]
    acc = 0.0
    for k in range(1, m + 1):
        acc += fp[tp + 1 + k] * np.cos(_TWO_PI * k * y) + fp[tp + 1 + m + k] * np.sin(_TWO_PI * k * y)
    return acc


@njit(cache=True, nogil=True)
def _matvec(s, tmp, off, dim, fp, p):
    for i in range(dim):
        acc = 0.0
        for j in range(dim):
            acc += fp[p + i * dim + j] * s[off + j]
        tmp[i] = acc
    for i in range(dim):
        s[off + i] = wrap(tmp[i])


@njit(cache=True, nogil=True)
def step(s, tmp, ops, fp):
    for q in range(ops.shape[0]):
        code = ops[q, 0]
        off = ops[q, 1]
        dim = ops[q, 2]
        p = ops[q, 3]
        if code == ROT:
            for i in range(dim):
                s[off + i] = wrap(s[off + i] + fp[p + i])
        elif code == SKEW:
            a = s[off]
            b = s[off + 1]
            s[off] = wrap(a + fp[p])
            s[off + 1] = wrap(b + a)
        elif code == AUTO:
            _matvec(s, tmp, off, dim, fp, p)
        elif code == DOUB:
            s[off] = double_lattice(s[off])
        elif code == FTRANS:
            t = tau_value(s, fp, ops[q, 5], ops[q, 4])
            for i in range(dim):
                s[off + i] = wrap(s[off + i] + t * fp[p + i])
        elif code == FPOW:
            t = int(np.rint(tau_value(s, fp, ops[q, 5], ops[q, 4])))
            if t >= 0:
                for _ in range(t):
                    _matvec(s, tmp, off, dim, fp, p)
            else:
                for _ in range(-t):
                    _matvec(s, tmp, off, dim, fp, p + dim * dim)


@njit(cache=True, nogil=True)
def _in_prim(s, row, tf):
    kind = row[1]
    off = row[2]
    dim = row[3]
    p = row[4]
    if kind == FULL:
        return True
    if kind == BALL:
        acc = 0.0
        for i in range(dim):
            d = abs(s[off + i] - tf[p + i])
            if d > 0.5:
                d = 1.0 - d
            acc += d * d
        r = tf[p + dim]
        return acc <= r * r
    for i in range(dim):
        d = abs(s[off + i] - tf[p + i])
        if d > 0.5:
            d = 1.0 - d
        if d > tf[p + dim + i]:
            return False
    return True


@njit(cache=True, nogil=True)
def in_clause(s, ti, cs, tf, c):
    # c is 1-based
    for q in range(cs[c - 1], cs[c]):
        if not _in_prim(s, ti[q], tf):
            return False
    return True


@njit(cache=True, nogil=True)
def label_of(s, ti, cs, tf):
    for c in range(1, cs.shape[0]):
        if in_clause(s, ti, cs, tf, c):
            return c
    return 0


@njit(cache=True, nogil=True)
def labels_tables(points, ti, cs, tf):
    out = np.zeros(points.shape[0], dtype=np.int64)
    for i in range(points.shape[0]):
        out[i] = label_of(points[i], ti, cs, tf)
    return out


@njit(cache=True, nogil=True)
def advance_tables(states, ops, fp, n):
    """Reference route: interpret the op table directly."""
    out = states.copy()
    tmp = np.empty(states.shape[1])
    for i in range(out.shape[0]):
        s = out[i]
        for _ in range(n):
            step(s, tmp, ops, fp)
    return out


# Engines below take a compiled ``step_fn(s, fp)`` and membership functions
# ``label_fn(s, tf) -> int`` / ``clause_fn(s, tf, c) -> bool`` (see _codegen).


@njit(nogil=True)
def advance(step_fn, fp, states, n):
    out = states.copy()
    for i in range(out.shape[0]):
        s = out[i]
        for _ in range(n):
            step_fn(s, fp)
    return out


@njit(nogil=True)
def labels_batch(label_fn, tf, points):
    out = np.zeros(points.shape[0], dtype=np.int64)
    for i in range(points.shape[0]):
        out[i] = label_fn(points[i], tf)
    return out


@njit(nogil=True)
def orbit_block(step_fn, fp, states, nsteps):
    """States at times 0..nsteps-1 (shape (nsteps, N, d)); ``states`` is advanced in place by nsteps."""
    n, d = states.shape
    out = np.empty((nsteps, n, d))
    for i in range(n):
        s = states[i]
        for t in range(nsteps):
            for j in range(d):
                out[t, i, j] = s[j]
            step_fn(s, fp)
    return out


@njit(nogil=True)
def return_gaps(step_fn, fp, label_fn, tf, states, count, cap):
    n, d = states.shape
    gaps = np.zeros((n, count), dtype=np.int64)
    cens = np.zeros((n, count), dtype=np.bool_)
    labels = np.zeros((n, count), dtype=np.int64)
    s = np.empty(d)
    for i in range(n):
        for j in range(d):
            s[j] = states[i, j]
        for k in range(count):
            g = 0
            hit = 0
            while g < cap:
                step_fn(s, fp)
                g += 1
                hit = label_fn(s, tf)
                if hit:
                    break
            if hit:
                gaps[i, k] = g
                labels[i, k] = hit
            else:
                for kk in range(k, count):
                    gaps[i, kk] = cap
                    cens[i, kk] = True
                break
    return gaps, cens, labels


@njit(nogil=True)
def delayed_gaps(step_fn, fp, clause_fn, tf, states, alpha, kappa, count, cap):
    # probe j (1-based) sits at time alphatilde[j] and tests clause kappa[j-1]
    n, d = states.shape
    L = alpha.shape[0]
    gaps = np.zeros((n, count), dtype=np.int64)
    cens = np.zeros((n, count), dtype=np.bool_)
    s = np.empty(d)
    for i in range(n):
        for j in range(d):
            s[j] = states[i, j]
        probe = 0
        for k in range(count):
            g = 0
            hit = False
            while g < cap and probe < L:
                for _ in range(alpha[probe]):
                    step_fn(s, fp)
                c = kappa[probe]
                probe += 1
                g += 1
                if c > 0 and clause_fn(s, tf, c):
                    hit = True
                    break
            if hit:
                gaps[i, k] = g
            else:
                for kk in range(k, count):
                    gaps[i, kk] = cap
                    cens[i, kk] = True
                break
    return gaps, cens


@njit(nogil=True)
def delayed_counts(step_fn, fp, clause_fn, tf, states, alpha, kappa, horizons):
    # S at each horizon (probe counts); horizons sorted, <= len(alpha)
    n, d = states.shape
    J = horizons.shape[0]
    out = np.zeros((n, J), dtype=np.int64)
    s = np.empty(d)
    last = horizons[J - 1] if J else 0
    for i in range(n):
        for j in range(d):
            s[j] = states[i, j]
        acc = 0
        h = 0
        while h < J and horizons[h] == 0:
            h += 1
        for probe in range(last):
            for _ in range(alpha[probe]):
                step_fn(s, fp)
            c = kappa[probe]
            if c > 0 and clause_fn(s, tf, c):
                acc += 1
            while h < J and horizons[h] == probe + 1:
                out[i, h] = acc
                h += 1
    return out


@njit(nogil=True)
def ergodic_sums(step_fn, fp, tau_fn, tfp, states, checkpoints):
    """tau_n(y) for n in checkpoints (sorted, >= 0)."""
    n, d = states.shape
    J = checkpoints.shape[0]
    out = np.zeros((n, J))
    s = np.empty(d)
    last = checkpoints[J - 1] if J else 0
    for i in range(n):
        for j in range(d):
            s[j] = states[i, j]
        acc = 0.0
        h = 0
        while h < J and checkpoints[h] == 0:
            h += 1
        for t in range(last):
            acc += tau_fn(s, tfp)
            step_fn(s, fp)
            while h < J and checkpoints[h] == t + 1:
                out[i, h] = acc
                h += 1
    return out
