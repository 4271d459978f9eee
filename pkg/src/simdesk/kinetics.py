"""Free expansion of an ideal gas in the unit box.

Particles start uniformly in the corner octant [0, 0.5)^3 with Gaussian
velocities, move ballistically (no interactions), and reflect specularly
off the walls.  A coarse-grained Shannon entropy over an m x m x m grid
(k_B = 1) is sampled every ``sample_every`` steps, starting at t = 0, so
the series runs from ln(m^3 / 8) at confinement to ln(m^3) at equilibrium.

Randomness comes from two named PCG64 streams split from the seed:
SeedSequence([seed, 0]) drives positions, SeedSequence([seed, 1])
velocities.  Identical parameters give bit-identical trajectories.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bus import MessageBus, TOPIC_PLOT_DATA

ENTROPY_SERIES = "entropy"


@dataclass(frozen=True)
class GasParams:
    n_particles: int = 50_000
    dt: float = 0.005
    thermal_speed: float = 1.0
    seed: int = 20260810
    entropy_grid_m: int = 10
    sample_every: int = 10

    def __post_init__(self) -> None:
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.thermal_speed <= 0:
            raise ValueError("thermal_speed must be positive")
        if self.entropy_grid_m < 2:
            raise ValueError("entropy_grid_m must be >= 2")
        if self.sample_every < 1:
            raise ValueError("sample_every must be >= 1")


@dataclass
class GasState:
    positions: np.ndarray  # (N, 3) in [0, 1]^3
    velocities: np.ndarray  # (N, 3)
    sim_time: float = 0.0
    step_index: int = 0


@dataclass(frozen=True)
class EntropySample:
    t: float
    s: float


def init_state(params: GasParams) -> GasState:
    pos_rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([params.seed, 0])))
    vel_rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([params.seed, 1])))
    positions = pos_rng.random((params.n_particles, 3)) * 0.5
    velocities = vel_rng.standard_normal((params.n_particles, 3)) * params.thermal_speed
    return GasState(positions, velocities)


def step_physics(state: GasState, dt: float) -> GasState:
    """Advance one ballistic step with iterated specular wall reflection.

    Mutates ``state`` in place and returns it.  A step long enough to
    cross the box several times just reflects repeatedly.
    """
    p = state.positions
    v = state.velocities
    p += v * dt
    while True:
        low = p < 0.0
        if low.any():
            p[low] = -p[low]
            v[low] = -v[low]
        high = p > 1.0
        if high.any():
            p[high] = 2.0 - p[high]
            v[high] = -v[high]
        if not ((p < 0.0).any() or (p > 1.0).any()):
            break
    state.sim_time += dt
    state.step_index += 1
    return state


def entropy_of_positions(positions: np.ndarray, m: int) -> float:
    """Shannon entropy of grid-cell occupancy, -sum p_i ln p_i, empty cells zero."""
    if m < 2:
        raise ValueError("grid size must be >= 2")
    # Positions sit in [0, 1]; the closed upper boundary folds into the last cell.
    idx = np.minimum((positions * m).astype(np.int64), m - 1)
    flat = (idx[:, 0] * m + idx[:, 1]) * m + idx[:, 2]
    counts = np.bincount(flat, minlength=m * m * m)
    n = positions.shape[0]
    pr = counts[counts > 0].astype(float) / n
    return float(-np.sum(pr * np.log(pr)))


def compute_entropy(state: GasState, m: int) -> float:
    return entropy_of_positions(state.positions, m)


def kinetic_energy(state: GasState) -> float:
    return float(0.5 * np.sum(state.velocities * state.velocities))


class GasSimulation:
    """Engine-compatible stepping contract around the gas state.

    Each step samples entropy at multiples of ``sample_every`` (including
    step 0, before any motion) and then advances the physics.  Samples go
    to the local list and, when a bus is attached, onto ``plot.data``.
    """

    def __init__(self, params: GasParams, bus: Optional[MessageBus] = None,
                 max_steps: Optional[int] = None, view_scope: Optional[str] = None) -> None:
        self.params = params
        self.bus = bus
        self.max_steps = max_steps
        self.view_scope = view_scope
        self.samples: list[EntropySample] = []
        self._lock = threading.Lock()
        self.state = init_state(params)

    def _record_sample(self) -> None:
        s = compute_entropy(self.state, self.params.entropy_grid_m)
        sample = EntropySample(self.state.sim_time, s)
        self.samples.append(sample)
        if self.bus is not None:
            self.bus.publish(
                TOPIC_PLOT_DATA,
                {"series": ENTROPY_SERIES, "x": sample.t, "y": sample.s},
                scope=self.view_scope,
            )

    def step(self) -> bool:
        with self._lock:
            if self.state.step_index % self.params.sample_every == 0:
                self._record_sample()
            step_physics(self.state, self.params.dt)
            if self.max_steps is not None and self.state.step_index >= self.max_steps:
                return False
        return True

    def reset(self) -> None:
        with self._lock:
            self.state = init_state(self.params)
            self.samples.clear()

    def snapshot_positions(self) -> np.ndarray:
        """Copy of current positions; safe to call off the engine thread."""
        with self._lock:
            return self.state.positions.copy()

    def state_digest(self) -> bytes:
        """Raw bytes of positions+velocities, for bit-identity checks."""
        with self._lock:
            return self.state.positions.tobytes() + self.state.velocities.tobytes()


def entropy_csv_bytes(samples: list[EntropySample]) -> bytes:
    lines = ["t,s"]
    lines.extend(f"{s.t!r},{s.s!r}" for s in samples)
    return ("\n".join(lines) + "\n").encode("ascii")
