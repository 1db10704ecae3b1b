"""Fundamental labeled-RFS types and particle-set utilities.

All types are immutable after construction (particle arrays are marked
read-only), so densities can be shared freely across node simulations and
consensus snapshots without copying.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .dynamics import KinematicState
from .kernels import IPX, IPY, STATE_DIM, systematic_indices

# origin marker for the degenerate two-part labels of the baseline mode
RESERVED_ORIGIN = -1

# existence probabilities are clamped below 1 before odds ratios are formed,
# so fusion stays finite while a near-certain input still dominates
EXISTENCE_CLAMP = 1.0 - 1e-9


class Label(NamedTuple):
    """Track identity triple; tuple order gives the 'older than' ordering."""

    birth_time: int
    origin_node: int
    birth_index: int


@dataclass(frozen=True, eq=False, slots=True)
class ParticleSet:
    """Weighted particle approximation of a single-object state density."""

    weights: np.ndarray
    states: np.ndarray
    _uniform: bool = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        x = np.ascontiguousarray(self.states, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != STATE_DIM:
            raise ValueError(f"states must have shape (J, {STATE_DIM})")
        if w.ndim != 1 or w.shape[0] != x.shape[0]:
            raise ValueError("weights and states must have matching length")
        w.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "states", x)

    def __len__(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def from_raw(cls, weights, states) -> "ParticleSet":
        """Build with normalization; raises if the weights have zero mass."""
        w = np.asarray(weights, dtype=np.float64)
        total = w.sum()
        if not total > 0.0:
            raise ValueError("particle weights must have positive total mass")
        return cls(w / total, np.asarray(states, dtype=np.float64))

    @classmethod
    def uniform(cls, states) -> "ParticleSet":
        states = np.asarray(states, dtype=np.float64)
        n = states.shape[0]
        return cls(np.full(n, 1.0 / n), states)

    def mean(self) -> np.ndarray:
        return self.weights @ self.states

    def positions(self) -> np.ndarray:
        return self.states[:, (IPX, IPY)]

    def has_uniform_weights(self) -> bool:
        if self._uniform is None:
            n = len(self)
            object.__setattr__(
                self, "_uniform", n > 0 and bool(np.all(self.weights == self.weights[0]))
            )
        return self._uniform


@dataclass(frozen=True, eq=False, slots=True)
class BernoulliComponent:
    """One possibly-existing object: label, existence probability, density."""

    label: Label
    existence: float
    density: ParticleSet
    _eap: np.ndarray = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        if not 0.0 <= self.existence <= 1.0:
            raise ValueError(f"existence must lie in [0, 1], got {self.existence}")
        if self.existence > 0.0 and len(self.density) == 0:
            raise ValueError("a component with positive existence needs particles")

    def eap(self) -> np.ndarray:
        if self._eap is None:
            object.__setattr__(self, "_eap", self.density.mean())
        return self._eap


@dataclass(frozen=True, eq=False, slots=True)
class LmbDensity:
    """A node's multi-object posterior: Bernoulli components with unique labels."""

    components: tuple[BernoulliComponent, ...]
    time: int
    owner: int
    _by_label: dict = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        comps = tuple(sorted(self.components, key=lambda c: c.label))
        labels = [c.label for c in comps]
        if len(set(labels)) != len(labels):
            raise ValueError("component labels must be pairwise distinct")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "_by_label", {c.label: c for c in comps})

    def __len__(self) -> int:
        return len(self.components)

    def labels(self) -> tuple[Label, ...]:
        return tuple(c.label for c in self.components)

    def __contains__(self, label: Label) -> bool:
        return label in self._by_label

    def get(self, label: Label) -> BernoulliComponent | None:
        return self._by_label.get(label)

    def replace_components(self, components: Iterable[BernoulliComponent]) -> "LmbDensity":
        return LmbDensity(tuple(components), time=self.time, owner=self.owner)


def empty_density(time: int, owner: int) -> LmbDensity:
    return LmbDensity((), time=time, owner=owner)


def odds(r: float) -> float:
    """Existence odds r / (1 - r); the r = 1 point maps to infinity."""
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"probability out of range: {r}")
    if r == 1.0:
        return math.inf
    return r / (1.0 - r)


def clamped_odds(r: float) -> float:
    """Odds with the existence clamp applied; always finite."""
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"probability out of range: {r}")
    r = min(r, EXISTENCE_CLAMP)
    return r / (1.0 - r)


def eap_estimate(c: BernoulliComponent) -> KinematicState:
    """Expected-a-posteriori state: the weighted average of the particles."""
    if len(c.density) == 0:
        raise ValueError("cannot form an EAP estimate from an empty particle set")
    return KinematicState.from_array(c.density.mean())


def extract_estimates(
    d: LmbDensity, threshold: float = 0.9
) -> list[tuple[Label, KinematicState]]:
    """(label, EAP) for components whose existence strictly exceeds the threshold."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("extraction threshold must lie in (0, 1)")
    out = []
    for c in d.components:  # components are label-sorted
        if c.existence > threshold:
            out.append((c.label, eap_estimate(c)))
    return out


def prune(d: LmbDensity, min_existence: float) -> LmbDensity:
    """Drop components with existence below ``min_existence``."""
    if not 0.0 <= min_existence < 1.0:
        raise ValueError("prune threshold must lie in [0, 1)")
    kept = tuple(c for c in d.components if c.existence >= min_existence)
    if len(kept) == len(d.components):
        return d
    return d.replace_components(kept)


def resample(p: ParticleSet, target_count: int, rng: np.random.Generator) -> ParticleSet:
    """Systematic resampling to ``target_count`` equal-weight particles."""
    if target_count < 1:
        raise ValueError("target_count must be at least 1")
    total = p.weights.sum()
    if not total > 0.0:
        raise ValueError("cannot resample from all-zero weights")
    w = p.weights / total
    idx = systematic_indices(w, rng.random(), target_count)
    return ParticleSet(np.full(target_count, 1.0 / target_count), p.states[idx])
