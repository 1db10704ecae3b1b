"""Per-node SMC-LMB filter: prediction with rim births, measurement update,
and the prune/cap/resample bookkeeping that keeps it tractable.

The update marginalizes over track-to-measurement association events.  Each
event maps every component to "missed" or to one measurement (injectively);
events are enumerated exhaustively while their count fits the configured
budget and Gibbs-sampled beyond it.  Event weights use clutter-normalized
likelihoods, so unassociated measurements contribute a constant factor and
drop out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    BernoulliComponent,
    Label,
    LmbDensity,
    ParticleSet,
    resample,
)
from .dynamics import (
    CtModelParams,
    Measurement,
    SensorModel,
    detection_mask,
    propagate_particles,
)
from .kernels import (
    IPX,
    IPY,
    IVX,
    IVY,
    enum_associations,
    gibbs_associations,
    likelihood_matrix,
)

# assignment factors this far (in log) below the miss factor are treated as
# impossible when deciding which components enter the event engine
_GATE_LOG = 60.0

_LOG_FLOOR = 1e-300


class NumericalError(RuntimeError):
    """Raised when the update degenerates beyond recovery (exit code 3)."""


@dataclass(frozen=True, slots=True)
class BirthModel:
    """Birth components spread around the rim of a sensor's field of view.

    Velocities are drawn uniformly per axis in per-period units; positions
    are Gaussian around equally spaced rim points, radially clamped so every
    birth particle lies inside the closed FoV disc.
    """

    fov_radius: float
    count: int = 16
    existence: float = 0.05
    position_std: float = 5.0
    max_step_speed: float = 1.5
    particles: int = 1000

    def __post_init__(self):
        if not 0.0 < self.existence < 1.0:
            raise ValueError("birth existence must lie in (0, 1)")
        if self.count < 1 or self.particles < 1:
            raise ValueError("birth count and particle count must be positive")
        if self.fov_radius <= 0:
            raise ValueError("fov_radius must be positive")

    def make_components(
        self, k: int, origin: int, center, rng: np.random.Generator
    ) -> tuple[BernoulliComponent, ...]:
        cx, cy = float(center[0]), float(center[1])
        r = self.fov_radius
        j = self.particles
        total = self.count * j
        theta = 2.0 * math.pi * np.arange(self.count) / self.count
        pos = rng.standard_normal((total, 2)) * self.position_std
        pos[:, 0] += np.repeat(cx + r * np.cos(theta), j)
        pos[:, 1] += np.repeat(cy + r * np.sin(theta), j)
        # clamp into the closed disc so every birth particle is detectable
        dx = pos[:, 0] - cx
        dy = pos[:, 1] - cy
        dist = np.hypot(dx, dy)
        scale = np.minimum(1.0, r / np.maximum(dist, 1e-12))
        states = np.zeros((total, 5))
        states[:, IPX] = cx + dx * scale
        states[:, IPY] = cy + dy * scale
        states[:, (IVX, IVY)] = rng.uniform(-self.max_step_speed, self.max_step_speed, (total, 2))
        weights = np.full(j, 1.0 / j)
        out = []
        for m in range(1, self.count + 1):
            out.append(
                BernoulliComponent(
                    label=Label(k, origin, m),
                    existence=self.existence,
                    density=ParticleSet(weights, states[(m - 1) * j : m * j]),
                )
            )
        return tuple(out)


@dataclass(frozen=True, slots=True)
class FilterConfig:
    particles_per_component: int = 1000
    prune_threshold: float = 1e-3
    extraction_threshold: float = 0.9
    max_components: int = 100
    association_mode: str = "exhaustive"  # exhaustive up to max_events, then sampled
    max_events: int = 100_000
    gibbs_sweeps: int = 200

    def __post_init__(self):
        if self.particles_per_component < 1:
            raise ValueError("particles_per_component must be at least 1")
        if not 0.0 <= self.prune_threshold < 1.0:
            raise ValueError("prune_threshold must lie in [0, 1)")
        if not 0.0 < self.extraction_threshold < 1.0:
            raise ValueError("extraction_threshold must lie in (0, 1)")
        if self.association_mode not in ("exhaustive", "sampled"):
            raise ValueError("association_mode must be 'exhaustive' or 'sampled'")
        if self.max_events < 1 or self.gibbs_sweeps < 1:
            raise ValueError("event budgets must be positive")


def partial_injection_count(n: int, m: int) -> int:
    """Number of one-to-one maps of a subset of m measurements onto n components."""
    return sum(math.comb(n, k) * math.comb(m, k) * math.factorial(k) for k in range(min(n, m) + 1))


def predict(
    prior: LmbDensity,
    motion: CtModelParams,
    birth: BirthModel,
    k_next: int,
    node: int,
    rng: np.random.Generator,
    fov_center,
) -> LmbDensity:
    """Survival-scaled propagation of every component plus fresh rim births.

    ``node`` is the origin identity stamped into the new birth labels; the
    baseline mode passes the reserved origin instead of the node id.
    """
    if prior.time != k_next - 1:
        raise ValueError(f"prior is at time {prior.time}, cannot predict to {k_next}")
    ps = motion.survival_prob
    comps = []
    if prior.components:
        # propagate every component's particles in one stacked kernel call
        sizes = [len(c.density) for c in prior.components]
        stacked = np.concatenate([c.density.states for c in prior.components])
        moved = propagate_particles(stacked, motion, noisy=True, rng=rng)
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        for n, c in enumerate(prior.components):
            comps.append(
                BernoulliComponent(
                    label=c.label,
                    existence=c.existence * ps,
                    density=ParticleSet(c.density.weights, moved[offsets[n] : offsets[n + 1]]),
                )
            )
    existing = {c.label for c in comps}
    for b in birth.make_components(k_next, node, fov_center, rng):
        if b.label in existing:
            raise RuntimeError(f"birth label collision at {b.label}")
        comps.append(b)
    return LmbDensity(tuple(comps), time=k_next, owner=prior.owner)


def enumerate_associations(
    log_miss: np.ndarray,
    log_assign: np.ndarray,
    budget: int,
    rng: np.random.Generator | None = None,
    sweeps: int = 200,
    mode: str = "exhaustive",
):
    """Weighted association events for given per-component log factors.

    log_miss: (n,) log factors for a missed detection.
    log_assign: (n, m) log factors for claiming each measurement (-inf allowed).
    Returns (events, weights): events is (K, n) with 0 for miss and 1-based
    measurement indices otherwise; weights are normalized to sum to one.
    Enumeration is exhaustive while the event count fits the budget,
    otherwise a Gibbs sweep collects a sampled subset whose weights are
    renormalized.
    """
    log_miss = np.asarray(log_miss, dtype=np.float64)
    log_assign = np.asarray(log_assign, dtype=np.float64)
    n = log_miss.shape[0]
    m = log_assign.shape[1] if log_assign.size else 0
    if n == 0:
        return np.zeros((1, 0), dtype=np.int32), np.ones(1)
    logf = np.ascontiguousarray(np.hstack([log_miss[:, None], log_assign]))

    count = partial_injection_count(n, m)
    if mode == "exhaustive" and count <= budget:
        events = enum_associations(n, m, count)
    else:
        if rng is None:
            raise ValueError("sampled association requires an rng")
        seed = int(rng.integers(0, 2**31 - 1))
        raw = gibbs_associations(logf, sweeps, seed)
        events = np.unique(raw, axis=0)

    lw = logf[np.arange(n), events].sum(axis=1)
    mx = lw.max()
    if not np.isfinite(mx):
        raise NumericalError("all association events have zero probability")
    w = np.exp(lw - mx)
    return events, w / w.sum()


def update(
    predicted: LmbDensity,
    scan: list[Measurement],
    sensor: SensorModel,
    sensor_position,
    cfg: FilterConfig,
    rng: np.random.Generator,
) -> LmbDensity:
    """Association-marginalized Bayes update, then prune/cap/resample.

    Components with no particle inside the field of view are passed through
    untouched (zero detection probability carries no information).
    """
    for z in scan:
        if z.sensor != sensor.node:
            raise ValueError(f"measurement from sensor {z.sensor} in scan for {sensor.node}")
        if z.time != predicted.time:
            raise ValueError(f"measurement at time {z.time} in scan for {predicted.time}")

    m_all = len(scan)
    zx = np.ascontiguousarray([z.zx for z in scan], dtype=np.float64)
    zy = np.ascontiguousarray([z.zy for z in scan], dtype=np.float64)
    kappa = max(sensor.clutter_density(), _LOG_FLOOR)
    sigma = sensor.meas_noise_std

    # measurements farther than this from a component's particle bounding box
    # would only produce likelihoods the 700-exponent cutoff zeroes anyway
    gate = math.sqrt(2.0 * 700.0) * sigma

    untouched: list[BernoulliComponent] = []
    active: list[BernoulliComponent] = []
    pd_rows: list[np.ndarray] = []
    lmiss_vals: list[float] = []
    s_rows: list[np.ndarray] = []
    g_mats: list[np.ndarray | None] = []
    near_cols: list[np.ndarray | None] = []
    for c in predicted.components:
        pd = detection_mask(c.density.states, sensor, sensor_position)
        if not pd.any():
            untouched.append(c)
            continue
        w = c.density.weights
        s = np.zeros(m_all)
        g = None
        near_idx = None
        if m_all:
            px = c.density.states[:, IPX]
            py = c.density.states[:, IPY]
            near = (
                (zx > px.min() - gate)
                & (zx < px.max() + gate)
                & (zy > py.min() - gate)
                & (zy < py.max() + gate)
            )
            if near.any():
                near_idx = np.nonzero(near)[0]
                g = likelihood_matrix(
                    np.ascontiguousarray(px),
                    np.ascontiguousarray(py),
                    np.ascontiguousarray(zx[near_idx]),
                    np.ascontiguousarray(zy[near_idx]),
                    sigma,
                )
                s[near_idx] = (w * pd) @ g
        active.append(c)
        pd_rows.append(pd)
        lmiss_vals.append(float(w @ (1.0 - pd)))
        s_rows.append(s)
        g_mats.append(g)
        near_cols.append(near_idx)

    n_act = len(active)
    out = list(untouched)
    if n_act:
        r_vec = np.array([c.existence for c in active])
        lmiss_vec = np.array(lmiss_vals)
        miss_factor = np.maximum(1.0 - r_vec + r_vec * lmiss_vec, _LOG_FLOOR)
        log_miss = np.log(miss_factor)
        if m_all:
            s_mat = np.vstack(s_rows)
            with np.errstate(divide="ignore"):
                log_assign = np.where(
                    s_mat > 0.0,
                    np.log(np.maximum(r_vec[:, None] * s_mat / kappa, _LOG_FLOOR)),
                    -np.inf,
                )
            competitive = log_assign > (log_miss[:, None] - _GATE_LOG)
            assoc_rows = np.nonzero(competitive.any(axis=1))[0]
        else:
            log_assign = np.zeros((n_act, 0))
            assoc_rows = np.zeros(0, dtype=np.int64)

        # only components with a competitive assignment option enter the engine
        q_by_row: dict[int, np.ndarray] = {}
        meas_cols = np.zeros(0, dtype=np.int64)
        if assoc_rows.size:
            engaged = competitive[assoc_rows].any(axis=0)
            meas_cols = np.nonzero(engaged)[0]
            events, weights = enumerate_associations(
                log_miss[assoc_rows],
                log_assign[np.ix_(assoc_rows, meas_cols)],
                cfg.max_events,
                rng=rng,
                sweeps=cfg.gibbs_sweeps,
                mode=cfg.association_mode,
            )
            m_red = meas_cols.size
            for pos, i in enumerate(assoc_rows.tolist()):
                q = np.zeros(m_red + 1)
                np.add.at(q, events[:, pos], weights)
                q_by_row[i] = q

        for i, c in enumerate(active):
            r = c.existence
            lmiss = lmiss_vals[i]
            cond_miss_r = r * lmiss / miss_factor[i] if lmiss > 0.0 else 0.0
            w = c.density.weights
            pd = pd_rows[i]

            q = q_by_row.get(i)
            if q is None:
                q0 = 1.0
                q_assign = None
            else:
                q0 = float(q[0])
                q_assign = q[1:]

            r_post = q0 * cond_miss_r + (0.0 if q_assign is None else float(q_assign.sum()))
            r_post = min(max(r_post, 0.0), 1.0)

            t = np.zeros_like(w)
            if lmiss > 0.0 and q0 > 0.0:
                t += (q0 * cond_miss_r / lmiss) * (w * (1.0 - pd))
            if q_assign is not None and q_assign.any():
                s_sel = s_rows[i][meas_cols]
                mask = (q_assign > 0.0) & (s_sel > 0.0)
                if mask.any():
                    coef_full = np.zeros(m_all)
                    coef_full[meas_cols[mask]] = q_assign[mask] / s_sel[mask]
                    coef = coef_full[near_cols[i]]
                    t += (w * pd) * (g_mats[i] @ coef)

            total = t.sum()
            if r_post <= 0.0 or total <= 0.0:
                out.append(BernoulliComponent(c.label, 0.0, c.density))
                continue
            post = resample(
                ParticleSet(t / total, c.density.states), cfg.particles_per_component, rng
            )
            out.append(BernoulliComponent(c.label, r_post, post))

    kept = [c for c in out if c.existence >= cfg.prune_threshold]
    if len(kept) > cfg.max_components:
        kept.sort(key=lambda c: (-c.existence, c.label))
        kept = kept[: cfg.max_components]
    return LmbDensity(tuple(kept), time=predicted.time, owner=predicted.owner)


def bernoulli_miss_posterior(r: float, pd: float) -> float:
    """Closed-form single-object existence after a missed detection."""
    return r * (1.0 - pd) / (1.0 - r * pd)
