"""Ground-truth world: vehicle trajectories, sensor placement, synthetic scans.

Trajectories are declarative: a vehicle follows straight constant-speed legs
through its waypoints, with corners rounded by constant-turn arcs whose
radius is fitted to the local geometry.  If a corner cannot fit an arc of at
least ``min_turn_radius`` the scenario is rejected.  A vehicle that reaches
the end of its waypoints before its death scan continues straight along its
final heading.

Truth states are in physical units (m, m/s, rad/s); the filter's per-period
units are produced at the boundary by the CLI driver.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .dynamics import CtModelParams, KinematicState, Measurement, SensorModel


class ScenarioError(ValueError):
    """Invalid scenario file or configuration; ``path`` names the bad field."""

    def __init__(self, path: str, reason: str):
        self.path = path
        super().__init__(f"{path}: {reason}")


@dataclass(frozen=True, slots=True)
class VehicleSpec:
    vid: int
    birth: int
    death: int
    waypoints: tuple[tuple[float, float], ...]
    speeds: tuple[float, ...]  # one per leg
    turn_radius: float = 8.0


@dataclass(frozen=True, slots=True)
class ScenarioConfig:
    name: str
    area: tuple[float, float, float, float]  # x0, y0, x1, y1
    dt: float
    scans: int
    comm_range: float
    vehicles: tuple[VehicleSpec, ...]
    sensors: tuple[SensorModel, ...]
    motion: CtModelParams
    min_turn_radius: float = 2.0
    seed: int = 0


@dataclass(frozen=True, slots=True)
class GroundTruth:
    """Per-scan states of alive vehicles, keyed scan -> vehicle id."""

    states: dict[int, dict[int, KinematicState]]
    lifespans: dict[int, tuple[int, int]]
    scans: int

    def alive(self, k: int) -> list[int]:
        return sorted(self.states.get(k, {}))

    def state(self, vid: int, k: int) -> KinematicState:
        try:
            return self.states[k][vid]
        except KeyError:
            raise KeyError(f"vehicle {vid} is not alive at scan {k}") from None

    def position(self, vid: int, k: int) -> tuple[float, float]:
        s = self.state(vid, k)
        return (s.px, s.py)


# ---------------------------------------------------------------------------
# trajectory construction


def _fit_corner(avail_prev, avail_next, turn_angle, preferred, minimum, where):
    """Largest feasible fillet radius at a corner, capped at ``preferred``.

    The tangent offset r*tan(|angle|/2) may use all the room left on the
    incoming leg and at most half of the outgoing leg (the other half is
    reserved for the next corner).
    """
    half = math.tan(abs(turn_angle) / 2.0)
    max_r = min(avail_prev, 0.5 * avail_next) / half
    r = min(preferred, max_r)
    if r < minimum:
        raise ScenarioError(where, f"corner needs turn radius {r:.2f} m < minimum {minimum} m")
    return r


def _build_path(spec: VehicleSpec, min_turn_radius: float, where: str):
    """Segment list [(kind, data, speed, length)] for one vehicle."""
    pts = [np.asarray(p, dtype=np.float64) for p in spec.waypoints]
    if len(pts) < 2:
        raise ScenarioError(where, "need at least two waypoints")
    legs = []
    for i in range(len(pts) - 1):
        d = pts[i + 1] - pts[i]
        length = float(np.hypot(d[0], d[1]))
        if length <= 1e-9:
            raise ScenarioError(where, f"zero-length leg at waypoint {i}")
        legs.append((pts[i], pts[i + 1], d / length, length, spec.speeds[i]))

    segments = []
    cursor = pts[0]
    for i in range(1, len(pts) - 1):
        _, _, u, len_prev, v_prev = legs[i - 1]
        _, _, w, len_next, _ = legs[i]
        cross = u[0] * w[1] - u[1] * w[0]
        dot = float(np.clip(u @ w, -1.0, 1.0))
        angle = math.atan2(cross, dot)
        if abs(angle) < 1e-9:
            continue
        avail_prev = float(np.hypot(*(pts[i] - cursor)))
        r = _fit_corner(avail_prev, len_next, angle, spec.turn_radius, min_turn_radius, where)
        offset = r * math.tan(abs(angle) / 2.0)
        t_in = pts[i] - u * offset
        t_out = pts[i] + w * offset
        line_len = float(np.hypot(*(t_in - cursor)))
        if line_len > 1e-9:
            segments.append(("line", (cursor.copy(), u.copy()), v_prev, line_len))
        sign = 1.0 if cross > 0 else -1.0
        normal = np.array([-u[1], u[0]]) * sign
        center = t_in + normal * r
        a0 = math.atan2(t_in[1] - center[1], t_in[0] - center[0])
        arc_len = r * abs(angle)
        segments.append(("arc", (center, r, a0, sign), v_prev, arc_len))
        cursor = t_out
    _, end, u, _, v_last = legs[-1]
    tail = float(np.hypot(*(end - cursor)))
    if tail > 1e-9:
        segments.append(("line", (cursor.copy(), u.copy()), v_last, tail))
    # final heading for the straight extension past the last waypoint
    return segments, (end.copy(), u.copy(), v_last)


def _sample_path(segments, extension, t: float):
    """Physical state after ``t`` seconds of travel along the path."""
    remaining = t
    for kind, data, speed, length in segments:
        duration = length / speed
        if remaining <= duration + 1e-12:
            dist = remaining * speed
            if kind == "line":
                start, direction = data
                pos = start + direction * dist
                heading = math.atan2(direction[1], direction[0])
                omega = 0.0
            else:
                center, r, a0, sign = data
                a = a0 + sign * dist / r
                pos = center + r * np.array([math.cos(a), math.sin(a)])
                heading = a + sign * math.pi / 2.0
                omega = sign * speed / r
            return pos, heading, speed, omega
        remaining -= duration
    end, direction, speed = extension
    pos = end + direction * (remaining * speed)
    return pos, math.atan2(direction[1], direction[0]), speed, 0.0


def generate_truth(cfg: ScenarioConfig) -> GroundTruth:
    """Deterministic waypoint-following truth, sampled once per scan."""
    states: dict[int, dict[int, KinematicState]] = {k: {} for k in range(1, cfg.scans + 1)}
    lifespans = {}
    for v in cfg.vehicles:
        where = f"vehicles[{v.vid}]"
        segments, extension = _build_path(v, cfg.min_turn_radius, where)
        lifespans[v.vid] = (v.birth, v.death)
        for k in range(v.birth, min(v.death, cfg.scans) + 1):
            t = (k - v.birth) * cfg.dt
            pos, heading, speed, omega = _sample_path(segments, extension, t)
            states[k][v.vid] = KinematicState(
                px=float(pos[0]),
                py=float(pos[1]),
                vx=speed * math.cos(heading),
                vy=speed * math.sin(heading),
                omega=omega,
            )
    return GroundTruth(states=states, lifespans=lifespans, scans=cfg.scans)


# ---------------------------------------------------------------------------
# measurement synthesis


def sensor_position(sensor: SensorModel, truth: GroundTruth, k: int) -> tuple[float, float]:
    if sensor.host is None:
        return sensor.mount
    return truth.position(sensor.host, k)


def sensor_active(sensor: SensorModel, truth: GroundTruth, k: int) -> bool:
    if sensor.host is None:
        return True
    birth, death = truth.lifespans[sensor.host]
    return birth <= k <= death


def simulate_scan(
    truth: GroundTruth, k: int, sensor: SensorModel, rng: np.random.Generator
) -> list[Measurement]:
    """One scan: per-object detections (host excluded) plus Poisson clutter."""
    if not 1 <= k <= truth.scans:
        raise ValueError(f"scan {k} outside horizon 1..{truth.scans}")
    center = sensor_position(sensor, truth, k)
    sigma = sensor.meas_noise_std
    out = []
    for vid in truth.alive(k):
        if vid == sensor.host:
            continue
        px, py = truth.position(vid, k)
        dist = math.hypot(px - center[0], py - center[1])
        pd = sensor.detection_prob if dist <= sensor.range else 0.0
        if pd > 0.0 and rng.random() < pd:
            noise = rng.standard_normal(2) * sigma
            out.append(Measurement(px + noise[0], py + noise[1], k, sensor.node))
    n_clutter = rng.poisson(sensor.clutter_rate)
    if n_clutter:
        radii = sensor.range * np.sqrt(rng.random(n_clutter))
        angles = 2.0 * math.pi * rng.random(n_clutter)
        for r, a in zip(radii, angles):
            out.append(
                Measurement(center[0] + r * math.cos(a), center[1] + r * math.sin(a), k, sensor.node)
            )
    rng.shuffle(out)
    return out


# ---------------------------------------------------------------------------
# scenario file schema ("v1", JSON)


def _field(obj, key, path, kind=None, default=None, required=True):
    if key not in obj:
        if not required:
            return default
        raise ScenarioError(f"{path}{key}", "missing field")
    val = obj[key]
    if kind is int and (not isinstance(val, int) or isinstance(val, bool)):
        raise ScenarioError(f"{path}{key}", f"expected integer, got {type(val).__name__}")
    if kind is float:
        if not isinstance(val, (int, float)) or isinstance(val, bool):
            raise ScenarioError(f"{path}{key}", f"expected number, got {type(val).__name__}")
        val = float(val)
    if kind is list and not isinstance(val, list):
        raise ScenarioError(f"{path}{key}", f"expected list, got {type(val).__name__}")
    if kind is str and not isinstance(val, str):
        raise ScenarioError(f"{path}{key}", f"expected string, got {type(val).__name__}")
    return val


def parse_scenario(obj: dict, name: str = "<memory>") -> ScenarioConfig:
    if not isinstance(obj, dict):
        raise ScenarioError("document", "top level must be an object")
    version = _field(obj, "version", "", kind=str)
    if version != "v1":
        raise ScenarioError("version", f"unknown scenario version {version!r}")
    area_raw = _field(obj, "area", "", kind=list)
    if len(area_raw) != 4 or not all(isinstance(v, (int, float)) for v in area_raw):
        raise ScenarioError("area", "expected [x0, y0, x1, y1]")
    area = tuple(float(v) for v in area_raw)
    if area[2] <= area[0] or area[3] <= area[1]:
        raise ScenarioError("area", "empty area")
    dt = _field(obj, "dt", "", kind=float)
    if dt <= 0:
        raise ScenarioError("dt", "must be positive")
    scans = _field(obj, "scans", "", kind=int)
    if scans < 1:
        raise ScenarioError("scans", "must be at least 1")
    comm_range = _field(obj, "comm_range", "", kind=float, default=100.0, required=False)
    min_turn_radius = _field(obj, "min_turn_radius", "", kind=float, default=2.0, required=False)
    seed = _field(obj, "seed", "", kind=int, default=0, required=False)

    motion_raw = obj.get("motion", {})
    motion = CtModelParams(
        sigma_accel=_field(motion_raw, "sigma_accel", "motion.", kind=float, default=15.0, required=False),
        sigma_turn=_field(motion_raw, "sigma_turn", "motion.", kind=float, default=30.0, required=False),
        dt=dt,
        survival_prob=_field(motion_raw, "survival_prob", "motion.", kind=float, default=0.9, required=False),
    )

    vehicles = []
    seen_vids = set()
    for n, rv in enumerate(_field(obj, "vehicles", "", kind=list)):
        path = f"vehicles[{n}]."
        vid = _field(rv, "id", path, kind=int)
        if vid in seen_vids:
            raise ScenarioError(f"{path}id", f"duplicate vehicle id {vid}")
        seen_vids.add(vid)
        birth = _field(rv, "birth", path, kind=int)
        death = _field(rv, "death", path, kind=int)
        if birth < 1:
            raise ScenarioError(f"{path}birth", "must be at least 1")
        if birth >= death:
            raise ScenarioError(f"{path}death", f"birth {birth} must precede death {death}")
        wps_raw = _field(rv, "waypoints", path, kind=list)
        if len(wps_raw) < 2:
            raise ScenarioError(f"{path}waypoints", "need at least two waypoints")
        wps = []
        for m, wp in enumerate(wps_raw):
            if not isinstance(wp, list) or len(wp) != 2 or not all(isinstance(c, (int, float)) for c in wp):
                raise ScenarioError(f"{path}waypoints[{m}]", "expected [x, y]")
            x, y = float(wp[0]), float(wp[1])
            if not (area[0] <= x <= area[2] and area[1] <= y <= area[3]):
                raise ScenarioError(f"{path}waypoints[{m}]", f"waypoint ({x}, {y}) outside area")
            wps.append((x, y))
        n_legs = len(wps) - 1
        if "speeds" in rv:
            speeds_raw = _field(rv, "speeds", path, kind=list)
            if len(speeds_raw) not in (n_legs, len(wps)):
                raise ScenarioError(f"{path}speeds", f"expected {n_legs} per-leg speeds")
            speeds = tuple(float(s) for s in speeds_raw[:n_legs])
        else:
            v0 = _field(rv, "speed", path, kind=float)
            speeds = tuple(v0 for _ in range(n_legs))
        if any(s <= 0 for s in speeds):
            raise ScenarioError(f"{path}speeds", "speeds must be positive")
        turn_radius = _field(rv, "turn_radius", path, kind=float, default=8.0, required=False)
        vehicles.append(VehicleSpec(vid, birth, death, tuple(wps), speeds, turn_radius))

    sensors = []
    seen_nodes = set()
    for n, rs in enumerate(_field(obj, "sensors", "", kind=list)):
        path = f"sensors[{n}]."
        node = _field(rs, "id", path, kind=int)
        if node in seen_nodes:
            raise ScenarioError(f"{path}id", f"duplicate sensor id {node}")
        seen_nodes.add(node)
        rng_ = _field(rs, "range", path, kind=float)
        if "host" in rs:
            host = _field(rs, "host", path, kind=int)
            if host not in seen_vids:
                raise ScenarioError(f"{path}host", f"unknown host vehicle {host}")
            mount: int | tuple[float, float] = host
        elif "fixed" in rs:
            fx = _field(rs, "fixed", path, kind=list)
            if len(fx) != 2 or not all(isinstance(c, (int, float)) for c in fx):
                raise ScenarioError(f"{path}fixed", "expected [x, y]")
            mount = (float(fx[0]), float(fx[1]))
        else:
            raise ScenarioError(f"{path}host", "sensor needs either 'host' or 'fixed'")
        sensors.append(
            SensorModel(
                node=node,
                range=rng_,
                detection_prob=_field(rs, "detection_prob", path, kind=float, default=0.95, required=False),
                clutter_rate=_field(rs, "clutter_rate", path, kind=float, default=10.0, required=False),
                meas_noise_std=_field(rs, "meas_noise_std", path, kind=float, default=1.0, required=False),
                mount=mount,
            )
        )
    if not sensors:
        raise ScenarioError("sensors", "need at least one sensor")

    return ScenarioConfig(
        name=_field(obj, "name", "", kind=str, default=name, required=False),
        area=area,
        dt=dt,
        scans=scans,
        comm_range=comm_range,
        vehicles=tuple(vehicles),
        sensors=tuple(sensors),
        motion=motion,
        min_turn_radius=min_turn_radius,
        seed=seed,
    )


def builtin_scenario_path(name: str) -> Path:
    """Path of a scenario shipped inside the package (e.g. 'paper10')."""
    res = resources.files("lmbfusion") / "scenarios" / f"{name}.scenario"
    with resources.as_file(res) as p:
        return Path(p)


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Parse a scenario file; bare names resolve to shipped scenarios."""
    p = Path(path)
    if not p.exists() and p.suffix == "" and "/" not in str(path):
        candidate = builtin_scenario_path(str(path))
        if candidate.exists():
            p = candidate
    if not p.exists():
        raise ScenarioError("file", f"scenario file not found: {path}")
    try:
        obj = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError("document", f"not valid JSON ({exc})") from None
    return parse_scenario(obj, name=p.stem)


# ---------------------------------------------------------------------------
# truth CSV export

TRUTH_HEADER = "scan,vehicle_id,px,py,vx,vy,omega"


def truth_to_csv(truth: GroundTruth) -> str:
    lines = [TRUTH_HEADER]
    for k in range(1, truth.scans + 1):
        for vid in truth.alive(k):
            s = truth.state(vid, k)
            lines.append(f"{k},{vid},{s.px!r},{s.py!r},{s.vx!r},{s.vy!r},{s.omega!r}")
    return "\n".join(lines) + "\n"


def truth_from_csv(text: str) -> GroundTruth:
    lines = [ln for ln in text.strip().splitlines() if ln]
    if not lines or lines[0] != TRUTH_HEADER:
        raise ScenarioError("truth.csv", "missing or wrong header")
    states: dict[int, dict[int, KinematicState]] = {}
    lifespans: dict[int, tuple[int, int]] = {}
    for ln in lines[1:]:
        parts = ln.split(",")
        k, vid = int(parts[0]), int(parts[1])
        px, py, vx, vy, om = (float(v) for v in parts[2:7])
        states.setdefault(k, {})[vid] = KinematicState(px, py, vx, vy, om)
        b, d = lifespans.get(vid, (k, k))
        lifespans[vid] = (min(b, k), max(d, k))
    scans = max(states) if states else 0
    return GroundTruth(states=states, lifespans=lifespans, scans=scans)
