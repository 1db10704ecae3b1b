"""Pure-numpy kernel implementations.

These are the reference implementations of the numeric inner loops; the
numba backend mirrors them loop-for-loop.  Particle state arrays use the
column layout [px, vx, py, vy, omega] so the constant-turn transition acts
on contiguous blocks.  Velocities are in meters per sampling period and
omega in radians per sampling period (the matrix assumes a unit period).
"""

import numpy as np

STATE_DIM = 5
IPX, IVX, IPY, IVY, IOM = 0, 1, 2, 3, 4

# below this |omega| the sin/cos ratios switch to Taylor expansions
SMALL_TURN = 1e-8


def turn_ratios(w):
    """Return (sin w / w, (1 - cos w) / w) with a stable small-angle branch."""
    w = np.asarray(w, dtype=np.float64)
    small = np.abs(w) < SMALL_TURN
    safe = np.where(small, 1.0, w)
    w2 = w * w
    a_taylor = 1.0 - w2 / 6.0 + w2 * w2 / 120.0 - w2 * w2 * w2 / 5040.0
    b_taylor = w / 2.0 - w * w2 / 24.0 + w * w2 * w2 / 720.0 - w * w2 * w2 * w2 / 40320.0
    a = np.where(small, a_taylor, np.sin(safe) / safe)
    b = np.where(small, b_taylor, (1.0 - np.cos(safe)) / safe)
    return a, b


def ct_propagate(states, noise):
    """One constant-turn step for a block of particles.

    states: (N, 5) array in the layout above.
    noise:  (N, 3) array of pre-scaled disturbances (ax, ay, du); pass zeros
            for the deterministic map.  Accelerations enter through
            G = [[1/2, 0], [1, 0], [0, 1/2], [0, 1]].
    """
    w = states[:, IOM]
    a, b = turn_ratios(w)
    c = np.cos(w)
    s = np.sin(w)
    out = np.empty_like(states)
    px, vx = states[:, IPX], states[:, IVX]
    py, vy = states[:, IPY], states[:, IVY]
    ax, ay, du = noise[:, 0], noise[:, 1], noise[:, 2]
    out[:, IPX] = px + a * vx - b * vy + 0.5 * ax
    out[:, IVX] = c * vx - s * vy + ax
    out[:, IPY] = py + b * vx + a * vy + 0.5 * ay
    out[:, IVY] = s * vx + c * vy + ay
    out[:, IOM] = w + du
    return out


def systematic_indices(weights, u0, count):
    """Systematic-resampling index pick.

    weights must be normalized; u0 is one uniform draw in [0, 1).  Returns
    ``count`` indices whose slot positions are (u0 + i) / count on the CDF.
    """
    positions = (u0 + np.arange(count, dtype=np.float64)) / count
    cdf = np.cumsum(weights)
    idx = np.searchsorted(cdf, positions, side="left")
    return np.minimum(idx, len(weights) - 1).astype(np.int64)


def likelihood_matrix(px, py, zx, zy, sigma):
    """Isotropic Gaussian position likelihoods, shape (particles, measurements).

    Exponents below exp(-700) (about 1e-304) are written as exact zeros
    without evaluating the exponential; both backends share the cutoff.
    """
    dx = px[:, None] - zx[None, :]
    dy = py[:, None] - zy[None, :]
    inv2 = 1.0 / (2.0 * sigma * sigma)
    norm = 1.0 / (2.0 * np.pi * sigma * sigma)
    arg = (dx * dx + dy * dy) * inv2
    out = np.zeros_like(arg)
    np.exp(-arg, out=out, where=arg < 700.0)
    return out * norm


def uniform_mixture_indices(sizes, betas, u0, count):
    """Systematic pick from a mixture of equal-weight particle blocks.

    sizes[s] particles of block s occupy a CDF interval of width betas[s]
    (betas normalized); returns indices into the virtual concatenation of
    the blocks.  Equivalent to systematic resampling of the concatenated,
    beta-scaled weight vector.
    """
    bounds = np.cumsum(betas)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    pos = (u0 + np.arange(count, dtype=np.float64)) / count
    src = np.minimum(np.searchsorted(bounds, pos, side="right"), len(betas) - 1)
    lower = bounds[src] - betas[src]
    j = ((pos - lower) / betas[src] * sizes[src]).astype(np.int64)
    j = np.minimum(j, sizes[src] - 1)
    return offsets[src] + j


def enum_associations(n, m, total):
    """Enumerate every partial injection of measurements to components.

    Entry j of a row is 0 for a missed detection or the 1-based index of the
    measurement claimed by component j; no measurement appears twice.  Rows
    come out in depth-first order with the all-miss row first.  ``total``
    must equal the exact count of such maps.
    """
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


def gibbs_associations(logf, sweeps, seed):
    """Gibbs-sample association vectors from per-component log factors.

    logf has shape (n, m + 1); column 0 is the miss factor and column j the
    factor for claiming measurement j.  Starts from a greedy assignment and
    records the vector after every sweep (greedy row included).  Uses the
    legacy Mersenne Twister so the numba twin draws an identical stream.
    """
    rng = np.random.RandomState(seed)
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
            r = rng.random_sample() * total
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
