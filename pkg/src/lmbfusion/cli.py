"""Batch experiment driver: seeded simulation runs and their evaluation.

``simulate`` executes the per-scan pipeline at every sensor node: predict
with rim births, measurement update, then the fixed number of consensus
rounds (fuse + merge with node-extended labels in "ours" mode; fuse only
with degenerate two-part labels in "baseline" mode).  Estimates extracted
from the consensus output are the node's situational awareness and feed the
reports; the node's own filter recursion continues from its local
post-update posterior.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .backend import active_backend
from .core import (
    RESERVED_ORIGIN,
    Label,
    LmbDensity,
    empty_density,
    extract_estimates,
)
from .dynamics import SensorModel
from .filtering import BirthModel, FilterConfig, NumericalError, predict, update
from .fusion import FusionConfig, complementary_fuse, merge_all
from .metrics import (
    MetricsConfig,
    TrackHistory,
    cardinality_report,
    ospa2_series,
)
from .network import NetworkGraph, message_from_density, serialize
from .scenario import (
    GroundTruth,
    ScenarioConfig,
    ScenarioError,
    generate_truth,
    load_scenario,
    sensor_active,
    sensor_position,
    simulate_scan,
    truth_from_csv,
    truth_to_csv,
)
from .seeds import CONSENSUS, MEASURE, PREDICT, UPDATE, derive_rng

TRACKS_HEADER = "node,scan,birth_time,origin_node,birth_index,px,py"
CARDINALITY_HEADER = "scan,mean_est,truth,truth_host_excluded"

# rim birth points are spaced roughly this many meters apart; a 50 m radius
# gives the default 16 components
BIRTH_RIM_SPACING = 20.0


@dataclass(frozen=True, slots=True)
class RunConfig:
    scenario: str
    mode: str = "ours"
    consensus_iterations: int = 3
    particles: int = 1000
    seed: int = 0
    runs: int = 1
    out: str = "runs"
    dump_messages: bool = False
    metrics: MetricsConfig = MetricsConfig()

    def __post_init__(self):
        if self.mode not in ("ours", "baseline"):
            raise ValueError(f"mode must be 'ours' or 'baseline', got {self.mode!r}")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if self.particles < 1:
            raise ValueError("particles must be at least 1")
        if self.consensus_iterations < 0:
            raise ValueError("consensus iterations must be nonnegative")


def rim_birth_count(fov_radius: float) -> int:
    return max(16, math.ceil(2.0 * math.pi * fov_radius / BIRTH_RIM_SPACING))


def hop_limited_fusion(
    locals_: dict[int, LmbDensity],
    graph: NetworkGraph,
    cfg: FusionConfig,
    merge: bool,
    rng_factory,
    on_round=None,
) -> dict[int, LmbDensity]:
    """N-hop complementary fusion with each origin's local counted once.

    Round xi forwards the local posteriors one more hop, so after round xi a
    node holds the locals of every origin within xi hops and fuses them in a
    single complementary union.  Unlike re-fusing already-fused results each
    round, a stale or newborn component cannot have its existence odds
    re-summed scan after scan, which would otherwise amplify every clutter
    bump into a network-wide extracted track.  Reach semantics are unchanged:
    information still travels exactly one hop per round.
    """
    rounds = cfg.consensus_iterations
    if rounds == 0:
        return dict(locals_)
    known: dict[int, dict[int, LmbDensity]] = {i: {i: d} for i, d in locals_.items()}
    final: dict[int, LmbDensity] = {}
    # nodes fuse/merge the same shared component objects; reuse those results
    cache: dict = {}
    for xi in range(1, rounds + 1):
        snapshot = {i: dict(m) for i, m in known.items()}
        for i in known:
            for j in graph.neighbors(i):
                if j in snapshot:
                    for origin, dens in snapshot[j].items():
                        known[i].setdefault(origin, dens)
        last = xi == rounds
        if on_round is None and not last:
            continue
        for i in sorted(known):
            rng = rng_factory(i, xi)
            received = [known[i][o] for o in sorted(known[i]) if o != i]
            fused = complementary_fuse(locals_[i], received, cfg, rng, _cache=cache)
            if merge:
                fused = merge_all(fused, cfg, rng, _cache=cache)
            if on_round is not None:
                on_round(i, xi, fused)
            if last:
                final[i] = fused
    return final


def scenario_graph(
    positions: dict[int, tuple[float, float]],
    sensors: dict[int, SensorModel],
    comm_range: float,
) -> NetworkGraph:
    """Range-disc graph; a stationary sensor links to anything inside its FoV range."""
    nodes = tuple(sorted(positions))
    edges = set()
    for idx, a in enumerate(nodes):
        for b in nodes[idx + 1 :]:
            ax, ay = positions[a]
            bx, by = positions[b]
            d = math.hypot(ax - bx, ay - by)
            limit = comm_range
            if sensors[a].host is None:
                limit = max(limit, sensors[a].range)
            if sensors[b].host is None:
                limit = max(limit, sensors[b].range)
            if 0.0 < d <= limit:
                edges.add((a, b))
    return NetworkGraph(nodes, frozenset(edges))


def scenario_hash(cfg: ScenarioConfig) -> str:
    blob = json.dumps(
        {
            "name": cfg.name,
            "area": cfg.area,
            "dt": cfg.dt,
            "scans": cfg.scans,
            "comm_range": cfg.comm_range,
            "min_turn_radius": cfg.min_turn_radius,
            "vehicles": [
                [v.vid, v.birth, v.death, v.waypoints, v.speeds, v.turn_radius]
                for v in cfg.vehicles
            ],
            "sensors": [
                [s.node, s.range, s.detection_prob, s.clutter_rate, s.meas_noise_std, s.mount]
                for s in cfg.sensors
            ],
            "motion": [cfg.motion.sigma_accel, cfg.motion.sigma_turn, cfg.motion.survival_prob],
        },
        sort_keys=True,
    ).encode()
    return hashlib.sha256(blob).hexdigest()


def simulate_run(
    cfg: ScenarioConfig,
    truth: GroundTruth,
    rc: RunConfig,
    run_index: int,
    message_sink=None,
) -> TrackHistory:
    """One seeded simulation; returns the extracted track history."""
    master = rc.seed
    merge = rc.mode == "ours"
    fcfg = FilterConfig(particles_per_component=rc.particles)
    fusion_cfg = FusionConfig(
        consensus_iterations=rc.consensus_iterations, merged_particles=rc.particles
    )
    sensors = {s.node: s for s in cfg.sensors}
    births = {
        s.node: BirthModel(
            fov_radius=s.range,
            count=rim_birth_count(s.range),
            max_step_speed=15.0 * cfg.dt,
            particles=rc.particles,
        )
        for s in cfg.sensors
    }

    locals_: dict[int, LmbDensity] = {}
    spans: dict[int, tuple[int, int]] = {}
    estimates: dict[tuple[int, int], list[tuple[Label, tuple[float, float]]]] = {}

    for k in range(1, cfg.scans + 1):
        active = [s for s in cfg.sensors if sensor_active(s, truth, k)]
        positions = {s.node: sensor_position(s, truth, k) for s in active}
        graph = scenario_graph(positions, sensors, cfg.comm_range)

        for s in sorted(active, key=lambda s: s.node):
            node = s.node
            a, b = spans.get(node, (k, k))
            spans[node] = (min(a, k), max(b, k))
            prior = locals_.get(node)
            if prior is None:
                prior = empty_density(k - 1, node)
            origin = node if merge else RESERVED_ORIGIN
            predicted = predict(
                prior,
                cfg.motion,
                births[node],
                k,
                origin,
                derive_rng(master, run_index, k, node, PREDICT),
                fov_center=positions[node],
            )
            scan = simulate_scan(truth, k, s, derive_rng(master, run_index, k, node, MEASURE))
            locals_[node] = update(
                predicted,
                scan,
                s,
                positions[node],
                fcfg,
                derive_rng(master, run_index, k, node, UPDATE),
            )
        for node in list(locals_):
            if node not in positions:
                del locals_[node]

        on_round = None
        if message_sink is not None:
            on_round = lambda node, xi, dens: message_sink(
                node, k, xi, serialize(message_from_density(dens, xi))
            )
        fused = hop_limited_fusion(
            locals_,
            graph,
            fusion_cfg,
            merge,
            rng_factory=lambda node, xi: derive_rng(master, run_index, k, node, CONSENSUS, xi),
            on_round=on_round,
        )

        for node in sorted(fused):
            rows = []
            for label, state in extract_estimates(fused[node], fcfg.extraction_threshold):
                rows.append((label, (state.px, state.py)))
            estimates[(node, k)] = rows

    truth_tracks = {
        vid: {
            k: truth.position(vid, k)
            for k in range(span[0], min(span[1], truth.scans) + 1)
        }
        for vid, span in truth.lifespans.items()
    }
    hosts = {s.node: s.host for s in cfg.sensors if s.node in spans}
    return TrackHistory(
        estimates=estimates,
        truth_tracks=truth_tracks,
        node_hosts=hosts,
        node_spans=spans,
        scans=cfg.scans,
    )


def tracks_to_csv(h: TrackHistory) -> str:
    lines = [TRACKS_HEADER]
    for (node, scan) in sorted(h.estimates):
        for label, (px, py) in sorted(h.estimates[(node, scan)]):
            lines.append(f"{node},{scan},{label.birth_time},{label.origin_node},{label.birth_index},{px!r},{py!r}")
    return "\n".join(lines) + "\n"


def cardinality_to_csv(h: TrackHistory) -> str:
    lines = [CARDINALITY_HEADER]
    for scan, est, total, host_excl in cardinality_report(h):
        lines.append(f"{scan},{est!r},{total},{host_excl!r}")
    return "\n".join(lines) + "\n"


def ospa2_to_csv(h: TrackHistory, metrics: MetricsConfig) -> str:
    lines = ["scan,value"]
    for scan, value in ospa2_series(h, metrics):
        lines.append(f"{scan},{value!r}")
    return "\n".join(lines) + "\n"


def write_run_dir(
    run_dir: Path,
    cfg: ScenarioConfig,
    truth: GroundTruth,
    rc: RunConfig,
    run_index: int,
    history: TrackHistory,
    messages: list[tuple[int, int, int, bytes]] | None,
) -> None:
    run_dir.mkdir(parents=True, exist_ok=True)
    meta = {
        "version": __version__,
        "backend": active_backend(),
        "scenario": cfg.name,
        "scenario_hash": scenario_hash(cfg),
        "mode": rc.mode,
        "consensus_iterations": rc.consensus_iterations,
        "particles": rc.particles,
        "seed": rc.seed,
        "run_index": run_index,
        "metrics": {
            "cutoff": rc.metrics.cutoff,
            "order": rc.metrics.order,
            "window": rc.metrics.window,
        },
        "nodes": {
            str(n): {"host": history.node_hosts.get(n), "span": list(history.node_spans[n])}
            for n in sorted(history.node_spans)
        },
        "scans": cfg.scans,
    }
    (run_dir / "config.json").write_text(json.dumps(meta, sort_keys=True, indent=1) + "\n")
    (run_dir / "truth.csv").write_text(truth_to_csv(truth))
    (run_dir / "tracks.csv").write_text(tracks_to_csv(history))
    (run_dir / "cardinality.csv").write_text(cardinality_to_csv(history))
    (run_dir / "ospa2.csv").write_text(ospa2_to_csv(history, rc.metrics))
    if messages is not None:
        mdir = run_dir / "messages"
        mdir.mkdir(exist_ok=True)
        for node, scan, xi, blob in messages:
            (mdir / f"node{node:03d}_scan{scan:04d}_round{xi}.json").write_bytes(blob)


def simulate(rc: RunConfig) -> list[Path]:
    """Run ``rc.runs`` seeded simulations; returns the run directories."""
    cfg = load_scenario(rc.scenario)
    truth = generate_truth(cfg)
    out_root = Path(rc.out)
    dirs = []
    for run_index in range(rc.runs):
        messages: list[tuple[int, int, int, bytes]] | None = [] if rc.dump_messages else None
        sink = None
        if messages is not None:
            sink = lambda node, k, xi, blob: messages.append((node, k, xi, blob))
        history = simulate_run(cfg, truth, rc, run_index, message_sink=sink)
        run_dir = out_root / f"run_{run_index:03d}_{rc.mode}"
        write_run_dir(run_dir, cfg, truth, rc, run_index, history, messages)
        dirs.append(run_dir)
    return dirs


# ---------------------------------------------------------------------------
# evaluation across runs


def tracks_from_csv(text: str):
    lines = [ln for ln in text.strip().splitlines() if ln]
    if not lines or lines[0] != TRACKS_HEADER:
        raise ScenarioError("tracks.csv", "missing or wrong header")
    estimates: dict[tuple[int, int], list[tuple[Label, tuple[float, float]]]] = {}
    for ln in lines[1:]:
        parts = ln.split(",")
        node, scan = int(parts[0]), int(parts[1])
        label = Label(int(parts[2]), int(parts[3]), int(parts[4]))
        pos = (float(parts[5]), float(parts[6]))
        estimates.setdefault((node, scan), []).append((label, pos))
    return estimates


def load_run(run_dir: Path) -> tuple[dict, TrackHistory]:
    cfg_path = run_dir / "config.json"
    if not cfg_path.exists():
        raise ScenarioError(str(cfg_path), "missing config.json")
    meta = json.loads(cfg_path.read_text())
    truth_path = run_dir / "truth.csv"
    if not truth_path.exists():
        raise ScenarioError(str(truth_path), "missing truth export")
    truth = truth_from_csv(truth_path.read_text())
    tracks_path = run_dir / "tracks.csv"
    if not tracks_path.exists():
        raise ScenarioError(str(tracks_path), "missing tracks export")
    estimates = tracks_from_csv(tracks_path.read_text())
    node_hosts = {}
    node_spans = {}
    for node_str, info in meta["nodes"].items():
        node = int(node_str)
        node_hosts[node] = info["host"]
        node_spans[node] = tuple(info["span"])
    truth_tracks = {
        vid: {k: truth.position(vid, k) for k in range(a, b + 1)}
        for vid, (a, b) in truth.lifespans.items()
    }
    history = TrackHistory(
        estimates=estimates,
        truth_tracks=truth_tracks,
        node_hosts=node_hosts,
        node_spans=node_spans,
        scans=meta["scans"],
    )
    return meta, history


def evaluate(run_dirs: list[Path], metrics: MetricsConfig, out_dir: Path) -> dict:
    """Aggregate per-scan cardinality and OSPA(2) across runs, per mode."""
    if not run_dirs:
        raise ScenarioError("runs", "no run directories given")
    runs = [load_run(Path(d)) for d in run_dirs]
    hashes = {meta["scenario_hash"] for meta, _ in runs}
    if len(hashes) > 1:
        raise ScenarioError("runs", f"mismatched scenario hashes across runs: {sorted(hashes)}")

    by_mode: dict[str, list[TrackHistory]] = {}
    for meta, history in runs:
        by_mode.setdefault(meta["mode"], []).append(history)

    scans = runs[0][1].scans
    ospa_cols: dict[str, dict[int, float]] = {}
    card_cols: dict[str, dict[int, float]] = {}
    summary = {}
    for mode, histories in sorted(by_mode.items()):
        ospa_acc: dict[int, list[float]] = {}
        card_acc: dict[int, list[float]] = {}
        for h in histories:
            for k, v in ospa2_series(h, metrics):
                ospa_acc.setdefault(k, []).append(v)
            for k, est, total, _ in cardinality_report(h):
                card_acc.setdefault(k, []).append(est - total)
        ospa_cols[mode] = {k: float(np.mean(v)) for k, v in ospa_acc.items()}
        card_cols[mode] = {k: float(np.mean(v)) for k, v in card_acc.items()}
        summary[mode] = {
            "runs": len(histories),
            "mean_ospa2": float(np.mean([v for v in ospa_cols[mode].values()])),
            "mean_cardinality_error": float(
                np.mean([abs(v) for v in card_cols[mode].values()])
            ),
        }

    out_dir.mkdir(parents=True, exist_ok=True)
    modes = sorted(by_mode)
    lines = ["scan," + ",".join(f"ospa2_{m}" for m in modes)]
    for k in range(1, scans + 1):
        if any(k in ospa_cols[m] for m in modes):
            lines.append(
                f"{k}," + ",".join(repr(ospa_cols[m][k]) if k in ospa_cols[m] else "" for m in modes)
            )
    (out_dir / "ospa2.csv").write_text("\n".join(lines) + "\n")

    lines = ["scan," + ",".join(f"cardinality_error_{m}" for m in modes)]
    for k in range(1, scans + 1):
        if any(k in card_cols[m] for m in modes):
            lines.append(
                f"{k}," + ",".join(repr(card_cols[m][k]) if k in card_cols[m] else "" for m in modes)
            )
    (out_dir / "cardinality_eval.csv").write_text("\n".join(lines) + "\n")

    lines = ["mode,runs,mean_ospa2,mean_cardinality_error"]
    for mode in modes:
        s = summary[mode]
        lines.append(f"{mode},{s['runs']},{s['mean_ospa2']!r},{s['mean_cardinality_error']!r}")
    (out_dir / "summary.csv").write_text("\n".join(lines) + "\n")
    return summary


# ---------------------------------------------------------------------------
# command line


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lmbfusion",
        description="Distributed connected-vehicle tracking simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run seeded Monte Carlo simulations")
    sim.add_argument("--scenario", required=True, help="scenario file or builtin name (paper10)")
    sim.add_argument("--mode", choices=("ours", "baseline"), default="ours")
    sim.add_argument("--consensus", type=int, default=3, metavar="N")
    sim.add_argument("--particles", type=int, default=1000, metavar="J")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--runs", type=int, default=1)
    sim.add_argument("--out", required=True)
    sim.add_argument("--dump-messages", action="store_true")
    _metrics_flags(sim)

    ev = sub.add_parser("evaluate", help="aggregate completed run directories")
    ev.add_argument("run_dirs", nargs="+")
    ev.add_argument("--out", required=True)
    _metrics_flags(ev)
    return parser


def _metrics_flags(p):
    p.add_argument("--metrics-window", type=int, default=10)
    p.add_argument("--metrics-cutoff", type=float, default=50.0)
    p.add_argument("--metrics-order", type=float, default=1.0)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        metrics = MetricsConfig(
            cutoff=args.metrics_cutoff, order=args.metrics_order, window=args.metrics_window
        )
        if args.command == "simulate":
            rc = RunConfig(
                scenario=args.scenario,
                mode=args.mode,
                consensus_iterations=args.consensus,
                particles=args.particles,
                seed=args.seed,
                runs=args.runs,
                out=args.out,
                dump_messages=args.dump_messages,
                metrics=metrics,
            )
            dirs = simulate(rc)
            for d in dirs:
                print(d)
            return 0
        summary = evaluate([Path(d) for d in args.run_dirs], metrics, Path(args.out))
        for mode, s in sorted(summary.items()):
            print(
                f"{mode}: runs={s['runs']} mean_ospa2={s['mean_ospa2']:.3f} "
                f"mean_cardinality_error={s['mean_cardinality_error']:.3f}"
            )
        return 0
    except (ScenarioError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
