"""Evaluation: OSPA on point sets, windowed OSPA(2) on track sets,
cardinality statistics, and the CSV reports the CLI emits.

Distances use planar position only, consistent with the meter-valued
cutoff.  For the track metric, the base distance between two tracks over a
window is the average of per-scan cutoff-clipped distances; scans where
exactly one of the two tracks exists contribute the full cutoff, scans
where neither exists are excluded from the averaging denominator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import Label


@dataclass(frozen=True, slots=True)
class MetricsConfig:
    cutoff: float = 50.0
    order: float = 1.0
    window: int = 10

    def __post_init__(self):
        if self.cutoff <= 0:
            raise ValueError("cutoff must be positive")
        if self.order < 1:
            raise ValueError("order must be at least 1")
        if self.window < 1:
            raise ValueError("window must be at least 1")


def optimal_assignment(cost: np.ndarray) -> tuple[list[tuple[int, int]], float]:
    """Minimum-cost one-to-one assignment of a rectangular cost matrix."""
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError("cost matrix must be two-dimensional")
    if cost.size == 0:
        return [], 0.0
    if (cost < 0).any():
        raise ValueError("cost matrix must be nonnegative")
    rows, cols = linear_sum_assignment(cost)
    return list(zip(rows.tolist(), cols.tolist())), float(cost[rows, cols].sum())


def _as_points(xs) -> np.ndarray:
    arr = np.asarray(xs, dtype=np.float64)
    if arr.size == 0:
        return arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("point sets must be (n, 2) arrays")
    return arr


def ospa(x, y, cutoff: float = 50.0, order: float = 1.0) -> float:
    """Optimal subpattern assignment distance between two planar point sets."""
    if cutoff <= 0 or order < 1:
        raise ValueError("need cutoff > 0 and order >= 1")
    x = _as_points(x)
    y = _as_points(y)
    n, m = len(x), len(y)
    if n == 0 and m == 0:
        return 0.0
    if n == 0 or m == 0:
        return cutoff
    d = np.linalg.norm(x[:, None, :] - y[None, :, :], axis=2)
    d = np.minimum(d, cutoff) ** order
    rows, cols = linear_sum_assignment(d)
    matched = float(d[rows, cols].sum())
    big = max(n, m)
    penalty = (cutoff**order) * (big - min(n, m))
    return float(((matched + penalty) / big) ** (1.0 / order))


Track = Mapping[int, tuple[float, float]]  # scan -> planar position


def track_distance(ta: Track, tb: Track, scans: Sequence[int], cutoff: float) -> float:
    """Time-averaged cutoff-clipped distance between two tracks over ``scans``."""
    total = 0.0
    present = 0
    for k in scans:
        a = ta.get(k)
        b = tb.get(k)
        if a is None and b is None:
            continue
        present += 1
        if a is None or b is None:
            total += cutoff
        else:
            total += min(cutoff, math.hypot(a[0] - b[0], a[1] - b[1]))
    if present == 0:
        return 0.0
    return total / present


def ospa2(
    est_tracks: Mapping[object, Track],
    truth_tracks: Mapping[object, Track],
    k: int,
    cfg: MetricsConfig,
) -> float:
    """OSPA over track sets with the windowed track base distance.

    The window is [max(1, k - w + 1), k]; tracks with no presence in the
    window are ignored.  Labels only establish track identity; the
    assignment between estimated and truth tracks is optimized.
    """
    if k < 1:
        raise ValueError("scan index must be at least 1")
    scans = range(max(1, k - cfg.window + 1), k + 1)
    est = [t for t in est_tracks.values() if any(s in t for s in scans)]
    tru = [t for t in truth_tracks.values() if any(s in t for s in scans)]
    n, m = len(est), len(tru)
    if n == 0 and m == 0:
        return 0.0
    if n == 0 or m == 0:
        return cfg.cutoff
    d = np.empty((n, m))
    for i, ta in enumerate(est):
        for j, tb in enumerate(tru):
            d[i, j] = track_distance(ta, tb, scans, cfg.cutoff)
    d = np.minimum(d, cfg.cutoff) ** cfg.order
    rows, cols = linear_sum_assignment(d)
    matched = float(d[rows, cols].sum())
    big = max(n, m)
    penalty = (cfg.cutoff**cfg.order) * (big - min(n, m))
    return float(((matched + penalty) / big) ** (1.0 / cfg.order))


# ---------------------------------------------------------------------------
# run-level track history and reports


@dataclass(frozen=True, slots=True)
class TrackHistory:
    """Extracted estimates per (node, scan) plus the ground-truth track set.

    estimates: (node, scan) -> list of (label, (px, py))
    truth_tracks: vehicle id -> {scan: (px, py)}
    node_hosts: node id -> host vehicle id (None for stationary nodes)
    node_spans: node id -> (first scan, last scan) of existence
    """

    estimates: Mapping[tuple[int, int], list[tuple[Label, tuple[float, float]]]]
    truth_tracks: Mapping[int, Track]
    node_hosts: Mapping[int, int | None]
    node_spans: Mapping[int, tuple[int, int]]
    scans: int


def truth_alive_count(h: TrackHistory, k: int) -> int:
    return sum(1 for t in h.truth_tracks.values() if k in t)


def active_nodes(h: TrackHistory, k: int) -> list[int]:
    return sorted(n for n, (a, b) in h.node_spans.items() if a <= k <= b)


def cardinality_report(h: TrackHistory) -> list[tuple[int, float, int, float]]:
    """Per scan: (scan, mean estimated count over nodes, alive-vehicle count,
    mean host-excluded truth count over nodes)."""
    rows = []
    for k in range(1, h.scans + 1):
        nodes = active_nodes(h, k)
        if not nodes:
            continue
        est = float(np.mean([len(h.estimates.get((n, k), [])) for n in nodes]))
        total = truth_alive_count(h, k)
        per_node = []
        for n in nodes:
            host = h.node_hosts.get(n)
            host_alive = host is not None and k in h.truth_tracks.get(host, {})
            per_node.append(total - (1 if host_alive else 0))
        rows.append((k, est, total, float(np.mean(per_node))))
    return rows


def node_estimate_tracks(
    h: TrackHistory, node: int, host_suppression_radius: float = 1.0
) -> dict[Label, dict[int, tuple[float, float]]]:
    """Label-keyed track set one node reported, with its own vehicle removed.

    The per-node evaluation ground truth excludes the node's host vehicle,
    so estimates within ``host_suppression_radius`` of the host's true
    position are dropped symmetrically.
    """
    host = h.node_hosts.get(node)
    host_track = h.truth_tracks.get(host, {}) if host is not None else {}
    tracks: dict[Label, dict[int, tuple[float, float]]] = {}
    a, b = h.node_spans[node]
    for k in range(a, b + 1):
        for label, pos in h.estimates.get((node, k), []):
            hp = host_track.get(k)
            if hp is not None and math.hypot(pos[0] - hp[0], pos[1] - hp[1]) <= host_suppression_radius:
                continue
            tracks.setdefault(label, {})[k] = pos
    return tracks


def node_truth_tracks(h: TrackHistory, node: int) -> dict[int, Track]:
    """Ground-truth tracks as seen for one node's evaluation (host excluded)."""
    host = h.node_hosts.get(node)
    return {vid: t for vid, t in h.truth_tracks.items() if vid != host}


def ospa2_series(
    h: TrackHistory, cfg: MetricsConfig, host_suppression_radius: float = 1.0
) -> list[tuple[int, float]]:
    """Per scan, the OSPA(2) value averaged over the nodes active at it."""
    per_node_est = {
        n: node_estimate_tracks(h, n, host_suppression_radius) for n in h.node_spans
    }
    per_node_truth = {n: node_truth_tracks(h, n) for n in h.node_spans}
    out = []
    for k in range(1, h.scans + 1):
        nodes = active_nodes(h, k)
        if not nodes:
            continue
        vals = [ospa2(per_node_est[n], per_node_truth[n], k, cfg) for n in nodes]
        out.append((k, float(np.mean(vals))))
    return out
