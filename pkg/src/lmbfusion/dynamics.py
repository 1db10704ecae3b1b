"""Single-object motion and observation models.

Unit convention: the filter works in "per sampling period" units.  A state
vector carries velocities in meters per period and a turn rate in radians
per period, so the constant-turn matrix applies verbatim with a unit
period.  Ground truth and configuration use physical units (m/s, rad/s,
m/s^2); conversion happens at the scenario boundary via
``to_step_units`` / ``to_physical_units`` and the ``step_*`` properties of
:class:`CtModelParams`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import IOM, IPX, IPY, IVX, IVY, ct_propagate, turn_ratios


@dataclass(frozen=True, slots=True)
class KinematicState:
    """Planar position, velocity and turn rate of a single object."""

    px: float
    py: float
    vx: float
    vy: float
    omega: float

    def as_array(self) -> np.ndarray:
        """Encode into the internal particle layout [px, vx, py, vy, omega]."""
        out = np.empty(5, dtype=np.float64)
        out[IPX] = self.px
        out[IVX] = self.vx
        out[IPY] = self.py
        out[IVY] = self.vy
        out[IOM] = self.omega
        return out

    @staticmethod
    def from_array(arr) -> "KinematicState":
        return KinematicState(
            px=float(arr[IPX]),
            py=float(arr[IPY]),
            vx=float(arr[IVX]),
            vy=float(arr[IVY]),
            omega=float(arr[IOM]),
        )

    @property
    def position(self) -> tuple[float, float]:
        return (self.px, self.py)

    @property
    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)


def to_step_units(state: KinematicState, dt: float) -> KinematicState:
    """Physical (m/s, rad/s) to per-period units."""
    return KinematicState(state.px, state.py, state.vx * dt, state.vy * dt, state.omega * dt)


def to_physical_units(state: KinematicState, dt: float) -> KinematicState:
    """Per-period units back to physical (m/s, rad/s)."""
    return KinematicState(state.px, state.py, state.vx / dt, state.vy / dt, state.omega / dt)


@dataclass(frozen=True, slots=True)
class CtModelParams:
    """Constant-turn process model parameters in physical units."""

    sigma_accel: float = 15.0  # m/s^2
    sigma_turn: float = 30.0  # deg/s
    dt: float = 0.1  # s
    survival_prob: float = 0.9

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.sigma_accel < 0 or self.sigma_turn < 0:
            raise ValueError("noise standard deviations must be nonnegative")
        if not 0.0 <= self.survival_prob <= 1.0:
            raise ValueError("survival_prob must lie in [0, 1]")

    @property
    def step_accel_std(self) -> float:
        """Acceleration noise std in m/period^2."""
        return self.sigma_accel * self.dt * self.dt

    @property
    def step_turn_std(self) -> float:
        """Turn-rate noise std in rad/period."""
        return math.radians(self.sigma_turn) * self.dt

    def step_process_cov(self) -> np.ndarray:
        """Q = diag(sigma_a^2 G G^T, sigma_u^2) in per-period units."""
        g = np.array([[0.5, 0.0], [1.0, 0.0], [0.0, 0.5], [0.0, 1.0]])
        q = np.zeros((5, 5))
        q[:4, :4] = (self.step_accel_std**2) * (g @ g.T)
        q[4, 4] = self.step_turn_std**2
        return q


@dataclass(frozen=True, slots=True)
class SensorModel:
    """One radar: circular field of view, point detections, Poisson clutter.

    ``mount`` is either a host vehicle id (mobile radar, FoV centered on the
    host's true position) or a fixed (x, y) position.
    """

    node: int
    range: float
    detection_prob: float = 0.95
    clutter_rate: float = 10.0
    meas_noise_std: float = 1.0
    mount: int | tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.range <= 0:
            raise ValueError("sensor range must be positive")
        if not 0.0 <= self.detection_prob <= 1.0:
            raise ValueError("detection_prob must lie in [0, 1]")
        if self.clutter_rate < 0:
            raise ValueError("clutter_rate must be nonnegative")
        if self.meas_noise_std < 0:
            raise ValueError("meas_noise_std must be nonnegative")

    @property
    def host(self) -> int | None:
        return self.mount if isinstance(self.mount, int) else None

    def clutter_density(self) -> float:
        """Poisson clutter intensity per unit area over the FoV disc."""
        return self.clutter_rate / (math.pi * self.range * self.range)


@dataclass(frozen=True, slots=True)
class Measurement:
    zx: float
    zy: float
    time: int
    sensor: int


def ct_matrix(omega: float) -> np.ndarray:
    """Unit-period constant-turn transition acting on [px, vx, py, vy]."""
    a, b = turn_ratios(np.array([omega]))
    a = float(a[0])
    b = float(b[0])
    c = math.cos(omega)
    s = math.sin(omega)
    return np.array(
        [
            [1.0, a, 0.0, -b],
            [0.0, c, 0.0, -s],
            [0.0, b, 1.0, a],
            [0.0, s, 0.0, c],
        ]
    )


def ct_transition(
    x: KinematicState,
    params: CtModelParams,
    noisy: bool = False,
    rng: np.random.Generator | None = None,
) -> KinematicState:
    """Propagate one per-period state through the constant-turn model."""
    states = x.as_array()[None, :]
    if noisy:
        if rng is None:
            raise ValueError("noisy transition requires an rng")
        raw = rng.standard_normal(3)
        noise = np.array(
            [[raw[0] * params.step_accel_std, raw[1] * params.step_accel_std, raw[2] * params.step_turn_std]]
        )
    else:
        noise = np.zeros((1, 3))
    return KinematicState.from_array(ct_propagate(states, noise)[0])


def propagate_particles(
    states: np.ndarray,
    params: CtModelParams,
    noisy: bool,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Constant-turn step for a (J, 5) particle block, per-particle turn rates."""
    if noisy:
        if rng is None:
            raise ValueError("noisy propagation requires an rng")
        noise = rng.standard_normal((states.shape[0], 3))
        noise[:, 0] *= params.step_accel_std
        noise[:, 1] *= params.step_accel_std
        noise[:, 2] *= params.step_turn_std
    else:
        noise = np.zeros((states.shape[0], 3))
    return ct_propagate(np.ascontiguousarray(states), noise)


def measurement_likelihood(z: Measurement, x: KinematicState, s: SensorModel) -> float:
    """Gaussian position likelihood; the FoV never modifies this value."""
    if z.sensor != s.node:
        raise ValueError(f"measurement from sensor {z.sensor} given to sensor {s.node}")
    sigma = s.meas_noise_std
    dx = z.zx - x.px
    dy = z.zy - x.py
    return math.exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma)) / (2.0 * math.pi * sigma * sigma)


def detection_probability(x: KinematicState, s: SensorModel, sensor_position) -> float:
    """Detection probability: constant inside the FoV disc, exactly zero outside."""
    dx = x.px - sensor_position[0]
    dy = x.py - sensor_position[1]
    if math.hypot(dx, dy) <= s.range:
        return s.detection_prob
    return 0.0


def detection_mask(states: np.ndarray, s: SensorModel, sensor_position) -> np.ndarray:
    """Per-particle detection probabilities for a (J, 5) block."""
    dx = states[:, IPX] - sensor_position[0]
    dy = states[:, IPY] - sensor_position[1]
    inside = (dx * dx + dy * dy) <= s.range * s.range
    return np.where(inside, s.detection_prob, 0.0)
