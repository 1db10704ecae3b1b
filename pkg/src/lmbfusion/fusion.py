"""Complementary fusion of LMB posteriors and the fixed-round consensus driver.

Fusion is union-style: for each label, existence odds of every input holding
that label are summed, which can only raise existence (a near-certain input
dominates).  Duplicate components, i.e. distinct labels whose EAP positions
coincide, are folded into the oldest label by the union rule.  One consensus
round fuses every node with its neighbors' pre-round snapshot; N rounds
propagate information exactly N hops.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .core import (
    BernoulliComponent,
    Label,
    LmbDensity,
    ParticleSet,
    clamped_odds,
)
from .kernels import IPX, IPY, systematic_indices, uniform_mixture_indices
from .network import NetworkGraph

_equal_weights_cache: dict[int, np.ndarray] = {}


def _equal_weights(count: int) -> np.ndarray:
    w = _equal_weights_cache.get(count)
    if w is None:
        w = np.full(count, 1.0 / count)
        w.setflags(write=False)
        _equal_weights_cache[count] = w
    return w


@dataclass(frozen=True, slots=True)
class FusionConfig:
    consensus_iterations: int = 3
    merge_distance: float = 2.0
    merged_particles: int = 1000
    equal_weights: bool = True  # the only supported weighting; kept explicit

    def __post_init__(self):
        if self.consensus_iterations < 0:
            raise ValueError("consensus_iterations must be nonnegative")
        if self.merge_distance <= 0:
            raise ValueError("merge_distance must be positive")
        if self.merged_particles < 1:
            raise ValueError("merged_particles must be at least 1")
        if not self.equal_weights:
            raise ValueError("only equal neighbor weights are supported")


def fuse_existence(rs) -> float:
    """Fused existence: sum of (clamped) odds mapped back to a probability."""
    rs = list(rs)
    if not rs:
        raise ValueError("fuse_existence needs at least the local input")
    total = sum(clamped_odds(r) for r in rs)
    return total / (1.0 + total)


def _mixture_resample(sources, count: int, rng: np.random.Generator) -> ParticleSet:
    """Systematic resample of the mixture sum_s beta_s * p_s to equal weights.

    Equivalent to concatenating all particles with weights scaled by beta_s,
    normalizing and resampling, but uniform-weight sources are sampled with
    a closed-form slot map so the concatenation is never materialized.
    """
    parts = [p for b, p in sources if b > 0.0]
    betas = np.array([b for b, _ in sources if b > 0.0], dtype=np.float64)
    if not len(parts):
        raise ValueError("mixture needs at least one positive weight")
    betas /= betas.sum()

    u0 = rng.random()
    equal_weights = _equal_weights(count)
    if all(p.has_uniform_weights() for p in parts):
        # equal internal weights make the particle index affine in the slot
        # position, so the scaled concatenation is never materialized
        sizes = np.array([len(p) for p in parts], dtype=np.int64)
        idx = uniform_mixture_indices(sizes, betas, u0, count)
        if len(parts) == 1:
            return ParticleSet(equal_weights, parts[0].states[idx])
        if len(parts) == 2:
            split = len(parts[0])
            out = np.empty((count, parts[0].states.shape[1]))
            first = idx < split
            out[first] = parts[0].states[idx[first]]
            out[~first] = parts[1].states[idx[~first] - split]
            return ParticleSet(equal_weights, out)
        x_cat = np.concatenate([p.states for p in parts], axis=0)
        return ParticleSet(equal_weights, x_cat[idx])

    w_cat = np.concatenate([b * p.weights for b, p in zip(betas, parts)])
    x_cat = np.concatenate([p.states for p in parts], axis=0)
    w_cat /= w_cat.sum()
    idx = systematic_indices(np.ascontiguousarray(w_cat), u0, count)
    return ParticleSet(equal_weights, x_cat[idx])


def fuse_density(inputs, merged_particles: int, rng: np.random.Generator) -> ParticleSet:
    """Odds-weighted mixture of source densities, resampled to equal weights.

    ``inputs`` is a list of (existence, ParticleSet).  If every source has
    zero existence the local (first) source's particles are returned as-is.
    When all sources share one particle set object the mixture is that set
    exactly, so it is returned without resampling noise.
    """
    if not inputs:
        raise ValueError("fuse_density needs at least the local input")
    rhos = [clamped_odds(r) for r, _ in inputs]
    if sum(rhos) == 0.0:
        return inputs[0][1]
    first = inputs[0][1]
    if all(p is first for _, p in inputs) and len(first) == merged_particles:
        return first
    return _mixture_resample([(rho, p) for rho, (_, p) in zip(rhos, inputs)], merged_particles, rng)


def complementary_fuse(
    local: LmbDensity,
    received: list[LmbDensity],
    cfg: FusionConfig,
    rng: np.random.Generator,
    _cache: dict | None = None,
) -> LmbDensity:
    """Union of the local posterior with every received one.

    Labels present in a single input pass through untouched; shared labels
    get odds-summed existence and an odds-weighted density mixture.
    ``_cache`` (optional, scoped by the caller) reuses the fused component
    when the exact same source components are fused again, as happens at
    every node of a consensus round; the result is identical by symmetry.
    """
    for d in received:
        if d.time != local.time:
            raise ValueError(f"cannot fuse densities at times {local.time} and {d.time}")
    inputs = [local] + sorted(received, key=lambda d: d.owner)
    label_sources: dict[Label, list[BernoulliComponent]] = {}
    for d in inputs:
        for c in d.components:
            label_sources.setdefault(c.label, []).append(c)

    out = []
    for label in sorted(label_sources):
        srcs = label_sources[label]
        if len(srcs) == 1:
            out.append(srcs[0])
            continue
        key = None
        if _cache is not None:
            key = ("fuse", *map(id, srcs))
            hit = _cache.get(key)
            if hit is not None:
                out.append(hit)
                continue
        r = fuse_existence([c.existence for c in srcs])
        ps = fuse_density([(c.existence, c.density) for c in srcs], cfg.merged_particles, rng)
        comp = BernoulliComponent(label, r, ps)
        if key is not None:
            _cache[key] = comp
        out.append(comp)
    return LmbDensity(tuple(out), time=local.time, owner=local.owner)


def detect_duplicates(d: LmbDensity, tau: float) -> list[list[Label]]:
    """Connected components of the graph with edges at EAP distance < tau.

    Clusters come back label-sorted (oldest first), singletons included,
    ordered by their oldest label.  A KD-tree generates the candidate pairs
    so the pass stays near-linear in the component count.
    """
    if tau <= 0:
        raise ValueError("merge distance must be positive")
    comps = d.components
    n = len(comps)
    if n == 0:
        return []
    pos = np.empty((n, 2))
    for i, c in enumerate(comps):
        e = c.eap()
        pos[i, 0] = e[IPX]
        pos[i, 1] = e[IPY]

    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    # query_pairs is inclusive of tau; the duplicate edge is strict, so re-check
    pairs = cKDTree(pos).query_pairs(tau, output_type="ndarray")
    if len(pairs):
        dx = pos[pairs[:, 0], 0] - pos[pairs[:, 1], 0]
        dy = pos[pairs[:, 0], 1] - pos[pairs[:, 1], 1]
        strict = (dx * dx + dy * dy) < tau * tau
        for a, b in pairs[strict].tolist():
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[rb] = ra

    groups: dict[int, list[Label]] = {}
    for i, c in enumerate(comps):
        groups.setdefault(find(i), []).append(c.label)
    clusters = [sorted(g) for g in groups.values()]
    clusters.sort(key=lambda g: g[0])
    return clusters


def merge_pair(
    c1: BernoulliComponent,
    c2: BernoulliComponent,
    merged_particles: int,
    rng: np.random.Generator,
) -> BernoulliComponent:
    """Fold two duplicate components into one.

    The merged label is the older one; existence combines by the union rule
    r1 + r2 - r1*r2; particles mix with scale factors alpha_i proportional
    to the existence probabilities and are resampled to equal weights.
    """
    if c1.label == c2.label:
        raise ValueError("merge_pair needs two distinct labels")
    older = c1 if c1.label < c2.label else c2
    r1, r2 = c1.existence, c2.existence
    r = r1 + r2 - r1 * r2
    alpha1 = r1 / (r1 + r2) if r1 + r2 > 0.0 else 0.5
    ps = _mixture_resample(
        [(alpha1, c1.density), (1.0 - alpha1, c2.density)], merged_particles, rng
    )
    return BernoulliComponent(older.label, r, ps)


def merge_all(
    d: LmbDensity,
    cfg: FusionConfig,
    rng: np.random.Generator,
    _cache: dict | None = None,
) -> LmbDensity:
    """Merge every duplicate cluster, folding in label-age order.

    ``_cache`` reuses a fold result when the identical pair of components is
    merged again (the ordinary case across nodes of one consensus round).
    """
    clusters = detect_duplicates(d, cfg.merge_distance)
    if all(len(c) == 1 for c in clusters):
        return d
    out = []
    for cluster in clusters:
        if len(cluster) == 1:
            out.append(d.get(cluster[0]))
            continue
        acc = d.get(cluster[0])
        for label in cluster[1:]:
            nxt = d.get(label)
            if _cache is not None:
                key = ("merge", id(acc), id(nxt))
                hit = _cache.get(key)
                if hit is None:
                    hit = merge_pair(acc, nxt, cfg.merged_particles, rng)
                    _cache[key] = hit
                acc = hit
            else:
                acc = merge_pair(acc, nxt, cfg.merged_particles, rng)
        out.append(acc)
    return d.replace_components(out)


def consensus_round(
    posteriors: dict[int, LmbDensity],
    graph: NetworkGraph,
    cfg: FusionConfig,
    rng: np.random.Generator,
    merge: bool = True,
) -> dict[int, LmbDensity]:
    """One synchronous round: every node fuses its neighbors' snapshots.

    All nodes read the pre-round posteriors, so the result is independent of
    node order.  ``merge=False`` gives the baseline behavior (fuse only).
    """
    times = {d.time for d in posteriors.values()}
    if len(times) > 1:
        raise ValueError(f"posteriors span multiple scan times: {sorted(times)}")
    out = {}
    for i in sorted(posteriors):
        received = [posteriors[j] for j in graph.neighbors(i) if j in posteriors]
        fused = complementary_fuse(posteriors[i], received, cfg, rng)
        out[i] = merge_all(fused, cfg, rng) if merge else fused
    return out


def run_consensus(
    posteriors: dict[int, LmbDensity],
    graph: NetworkGraph,
    cfg: FusionConfig,
    rng: np.random.Generator,
    merge: bool = True,
) -> dict[int, LmbDensity]:
    """Apply exactly ``cfg.consensus_iterations`` rounds; zero rounds is the identity."""
    out = dict(posteriors)
    for _ in range(cfg.consensus_iterations):
        out = consensus_round(out, graph, cfg, rng, merge=merge)
    return out
