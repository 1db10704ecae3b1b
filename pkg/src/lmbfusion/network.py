"""Network graph model and the serialized posterior-exchange format.

The wire format is versioned JSON ("v1"): floats are emitted with Python's
shortest round-trip repr, so a decode-encode cycle reproduces every particle
bit-for-bit.  Components and particles are ordered deterministically (labels
sorted), which makes message bytes reproducible for a given seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .core import BernoulliComponent, Label, LmbDensity, ParticleSet

SCHEMA_VERSION = "v1"

WEIGHT_SUM_TOL = 1e-6


class MessageParseError(ValueError):
    """Malformed posterior message; ``field`` names the offending element."""

    def __init__(self, field: str, reason: str):
        self.field = field
        super().__init__(f"{field}: {reason}")


@dataclass(frozen=True, slots=True)
class NetworkGraph:
    """Undirected communication graph; adjacency stored without self-loops."""

    nodes: tuple[int, ...]
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        nodes = tuple(sorted(set(self.nodes)))
        norm = set()
        for a, b in self.edges:
            if a == b:
                raise ValueError("self-loops are not stored explicitly")
            if a not in nodes or b not in nodes:
                raise ValueError(f"edge ({a}, {b}) references unknown node")
            norm.add((min(a, b), max(a, b)))
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", frozenset(norm))

    def neighbors(self, i: int) -> tuple[int, ...]:
        """Adjacent nodes, excluding ``i`` itself."""
        out = [b if a == i else a for a, b in self.edges if i in (a, b)]
        return tuple(sorted(out))

    def neighborhood(self, i: int) -> tuple[int, ...]:
        """The neighbor set including the node itself."""
        return tuple(sorted({i, *self.neighbors(i)}))


def build_graph(positions: dict[int, tuple[float, float]], comm_range: float) -> NetworkGraph:
    """Range-disc graph: an edge wherever 0 < distance <= comm_range."""
    if comm_range <= 0:
        raise ValueError("comm_range must be positive")
    nodes = tuple(sorted(positions))
    edges = set()
    for idx, a in enumerate(nodes):
        ax, ay = positions[a]
        for b in nodes[idx + 1 :]:
            bx, by = positions[b]
            d = math.hypot(ax - bx, ay - by)
            if 0.0 < d <= comm_range:
                edges.add((a, b))
    return NetworkGraph(nodes, frozenset(edges))


@dataclass(frozen=True, slots=True)
class PosteriorMessage:
    owner: int
    time: int
    consensus_index: int
    components: tuple[BernoulliComponent, ...]


def message_from_density(d: LmbDensity, consensus_index: int) -> PosteriorMessage:
    return PosteriorMessage(d.owner, d.time, consensus_index, d.components)


def density_from_message(msg: PosteriorMessage) -> LmbDensity:
    return LmbDensity(msg.components, time=msg.time, owner=msg.owner)


def serialize(msg: PosteriorMessage) -> bytes:
    obj = {
        "version": SCHEMA_VERSION,
        "owner": msg.owner,
        "time": msg.time,
        "consensus_index": msg.consensus_index,
        "components": [
            {
                "label": list(c.label),
                "existence": c.existence,
                "weights": c.density.weights.tolist(),
                "states": c.density.states.tolist(),
            }
            for c in sorted(msg.components, key=lambda c: c.label)
        ],
    }
    return json.dumps(obj, separators=(",", ":")).encode("utf-8")


def _require(obj: dict, field: str, kind, path: str):
    if field not in obj:
        raise MessageParseError(f"{path}{field}", "missing field")
    value = obj[field]
    if kind is int:
        if not isinstance(value, int) or isinstance(value, bool):
            raise MessageParseError(f"{path}{field}", f"expected integer, got {type(value).__name__}")
    elif kind is list:
        if not isinstance(value, list):
            raise MessageParseError(f"{path}{field}", f"expected list, got {type(value).__name__}")
    elif kind is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise MessageParseError(f"{path}{field}", f"expected number, got {type(value).__name__}")
        value = float(value)
        if not math.isfinite(value):
            raise MessageParseError(f"{path}{field}", "value must be finite")
    return value


def deserialize(data: bytes) -> PosteriorMessage:
    try:
        obj = json.loads(data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MessageParseError("document", f"not valid JSON ({exc})") from None
    if not isinstance(obj, dict):
        raise MessageParseError("document", "top level must be an object")

    version = obj.get("version")
    if version != SCHEMA_VERSION:
        raise MessageParseError("version", f"unknown schema version {version!r}")
    owner = _require(obj, "owner", int, "")
    time = _require(obj, "time", int, "")
    xi = _require(obj, "consensus_index", int, "")
    raw_comps = _require(obj, "components", list, "")

    comps = []
    seen: set[Label] = set()
    for n, rc in enumerate(raw_comps):
        path = f"components[{n}]."
        if not isinstance(rc, dict):
            raise MessageParseError(f"components[{n}]", "component must be an object")
        label_raw = _require(rc, "label", list, path)
        if len(label_raw) != 3 or any(not isinstance(v, int) or isinstance(v, bool) for v in label_raw):
            raise MessageParseError(f"{path}label", "label must be three integers")
        label = Label(*label_raw)
        if label in seen:
            raise MessageParseError(f"{path}label", f"duplicate label {tuple(label)}")
        seen.add(label)
        existence = _require(rc, "existence", float, path)
        if not 0.0 <= existence <= 1.0:
            raise MessageParseError(f"{path}existence", f"existence {existence} outside [0, 1]")
        weights_raw = _require(rc, "weights", list, path)
        states_raw = _require(rc, "states", list, path)
        try:
            weights = np.asarray(weights_raw, dtype=np.float64)
            states = np.asarray(states_raw, dtype=np.float64)
        except (TypeError, ValueError):
            raise MessageParseError(f"{path}weights", "non-numeric particle data") from None
        if weights.ndim != 1:
            raise MessageParseError(f"{path}weights", "weights must be a flat list")
        if states.ndim != 2 or (states.size and states.shape[1] != 5):
            raise MessageParseError(f"{path}states", "states must be rows of 5 numbers")
        if states.size == 0:
            states = states.reshape(0, 5)
        if len(weights) != len(states):
            raise MessageParseError(f"{path}states", "weights and states lengths differ")
        if not np.all(np.isfinite(weights)) or not np.all(np.isfinite(states)):
            raise MessageParseError(f"{path}states", "particle data must be finite")
        if len(weights) and abs(float(weights.sum()) - 1.0) > WEIGHT_SUM_TOL:
            raise MessageParseError(
                f"{path}weights", f"weights sum to {float(weights.sum())!r}, expected 1"
            )
        if existence > 0.0 and len(weights) == 0:
            raise MessageParseError(f"{path}weights", "positive existence requires particles")
        comps.append(BernoulliComponent(label, existence, ParticleSet(weights, states)))

    return PosteriorMessage(owner, time, xi, tuple(comps))
