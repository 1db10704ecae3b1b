"""Numba-jitted kernel implementations (see kernels_numpy for the contracts)."""

import numpy as np
from numba import njit

from .kernels_numpy import (  # noqa: F401  (re-exported layout constants)
    STATE_DIM,
    IPX,
    IVX,
    IPY,
    IVY,
    IOM,
    SMALL_TURN,
)

# keep the scalar Taylor branch identical to the numpy version
_SMALL = SMALL_TURN


@njit(cache=True)
def _ratios_scalar(w):
    if abs(w) < _SMALL:
        w2 = w * w
        a = 1.0 - w2 / 6.0 + w2 * w2 / 120.0 - w2 * w2 * w2 / 5040.0
        b = w / 2.0 - w * w2 / 24.0 + w * w2 * w2 / 720.0 - w * w2 * w2 * w2 / 40320.0
    else:
        a = np.sin(w) / w
        b = (1.0 - np.cos(w)) / w
    return a, b


def turn_ratios(w):
    # vector helper kept in numpy form; the hot path is ct_propagate below
    from .kernels_numpy import turn_ratios as _np_ratios

    return _np_ratios(w)


@njit(cache=True)
def ct_propagate(states, noise):
    n = states.shape[0]
    out = np.empty_like(states)
    for j in range(n):
        w = states[j, 4]
        a, b = _ratios_scalar(w)
        c = np.cos(w)
        s = np.sin(w)
        px = states[j, 0]
        vx = states[j, 1]
        py = states[j, 2]
        vy = states[j, 3]
        ax = noise[j, 0]
        ay = noise[j, 1]
        out[j, 0] = px + a * vx - b * vy + 0.5 * ax
        out[j, 1] = c * vx - s * vy + ax
        out[j, 2] = py + b * vx + a * vy + 0.5 * ay
        out[j, 3] = s * vx + c * vy + ay
        out[j, 4] = w + noise[j, 2]
    return out


@njit(cache=True)
def systematic_indices(weights, u0, count):
    n = weights.shape[0]
    idx = np.empty(count, dtype=np.int64)
    i = 0
    c = weights[0]
    for k in range(count):
        u = (u0 + k) / count
        while c < u and i < n - 1:
            i += 1
            c += weights[i]
        idx[k] = i
    return idx


@njit(cache=True)
def likelihood_matrix(px, py, zx, zy, sigma):
    j = px.shape[0]
    m = zx.shape[0]
    inv2 = 1.0 / (2.0 * sigma * sigma)
    norm = 1.0 / (2.0 * np.pi * sigma * sigma)
    out = np.empty((j, m), dtype=np.float64)
    for a in range(j):
        for b in range(m):
            dx = px[a] - zx[b]
            dy = py[a] - zy[b]
            arg = (dx * dx + dy * dy) * inv2
            if arg < 700.0:
                out[a, b] = np.exp(-arg) * norm
            else:
                out[a, b] = 0.0
    return out


@njit(cache=True)
def uniform_mixture_indices(sizes, betas, u0, count):
    k = betas.shape[0]
    out = np.empty(count, dtype=np.int64)
    offsets = np.zeros(k + 1, dtype=np.int64)
    for s in range(k):
        offsets[s + 1] = offsets[s] + sizes[s]
    s = 0
    cum = betas[0]
    for i in range(count):
        pos = (u0 + i) / count
        while pos >= cum and s < k - 1:
            s += 1
            cum += betas[s]
        lo = cum - betas[s]
        size = sizes[s]
        j = int((pos - lo) / betas[s] * size)
        if j >= size:
            j = size - 1
        if j < 0:
            j = 0
        out[i] = offsets[s] + j
    return out


@njit(cache=True)
def enum_associations(n, m, total):
    out = np.zeros((total, n), dtype=np.int32)
    assign = np.zeros(n, dtype=np.int32)
    used = np.zeros(m + 1, dtype=np.bool_)
    choice = np.full(n, -1, dtype=np.int64)
    k = 0
    d = 0
    while d >= 0:
        prev = choice[d]
        if prev > 0:
            used[prev] = False
        nxt = prev + 1
        while nxt >= 1 and nxt <= m and used[nxt]:
            nxt += 1
        if nxt > m:
            choice[d] = -1
            d -= 1
            continue
        choice[d] = nxt
        assign[d] = nxt
        if nxt > 0:
            used[nxt] = True
        if d == n - 1:
            out[k, :] = assign
            k += 1
        else:
            d += 1
    return out[:k]


@njit(cache=True)
def gibbs_associations(logf, sweeps, seed):
    np.random.seed(seed)
    n, cols = logf.shape
    m = cols - 1
    out = np.zeros((sweeps + 1, n), dtype=np.int32)
    assign = np.zeros(n, dtype=np.int32)
    used = np.zeros(m + 1, dtype=np.bool_)

    for j in range(n):
        best = 0
        best_val = logf[j, 0]
        for o in range(1, m + 1):
            if not used[o] and logf[j, o] > best_val:
                best_val = logf[j, o]
                best = o
        assign[j] = best
        if best > 0:
            used[best] = True
    out[0, :] = assign

    probs = np.zeros(m + 1, dtype=np.float64)
    options = np.zeros(m + 1, dtype=np.int64)
    for s in range(sweeps):
        for j in range(n):
            cur = assign[j]
            if cur > 0:
                used[cur] = False
            n_opt = 1
            options[0] = 0
            mx = logf[j, 0]
            for o in range(1, m + 1):
                if not used[o]:
                    options[n_opt] = o
                    if logf[j, o] > mx:
                        mx = logf[j, o]
                    n_opt += 1
            total = 0.0
            for t in range(n_opt):
                p = np.exp(logf[j, options[t]] - mx)
                probs[t] = p
                total += p
            r = np.random.random() * total
            acc = 0.0
            pick = options[n_opt - 1]
            for t in range(n_opt):
                acc += probs[t]
                if r < acc:
                    pick = options[t]
                    break
            assign[j] = pick
            if pick > 0:
                used[pick] = True
        out[s + 1, :] = assign
    return out
