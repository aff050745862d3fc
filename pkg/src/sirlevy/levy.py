"""Sampling of the driving noise: Brownian increments plus compound-Poisson jumps.

The jump part is a compound Poisson process of total rate ``lam`` whose marks
come from a two-point law.  For the 3-dimensional driver the marks are

    (-0.1, 0.1, 0.0)  with probability 2/3   (mass moves X -> Y)
    ( 0.0, -0.1, 0.1) with probability 1/3   (mass moves Y -> Z)

Both have Euclidean norm sqrt(0.02) > 0.1, so every jump clears the
large-jump threshold 0.1 and there is no compensated small-jump part.

The scalar driver reuses the same total rate with jump effects drawn
uniformly from {-0.1, +0.1}: the per-component magnitude 0.1 and the rate are
kept, which is the natural scalar reduction of the vector mark law.  The
large-jump classification is inherited from the vector law (all marks clear
the threshold strictly), so neither driver ever produces a compensated
small-jump term.

A whole noise path is a pure function of (seed, lam, horizon, dim): the jump
skeleton is drawn eagerly, then the remaining generator state serves Brownian
increments on demand, one interval at a time, in call order.
"""

from __future__ import annotations

import numpy as np

LARGE_JUMP_THRESHOLD = 0.1

MARKS_3D = np.array([[-0.1, 0.1, 0.0], [0.0, -0.1, 0.1]])
MARK_WEIGHTS_3D = np.array([2.0 / 3.0, 1.0 / 3.0])

MARKS_1D = np.array([[-0.1], [0.1]])
MARK_WEIGHTS_1D = np.array([0.5, 0.5])

JUMP_RATE_CHOICES = (1, 2, 3, 4)


def sample_lambda(rng: np.random.Generator) -> int:
    """Jump rate drawn uniformly from {1, 2, 3, 4}."""
    return int(rng.integers(1, 5))


def _make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    # Philox is counter-based: cheap to spawn in bulk and stable across runs
    return np.random.Generator(np.random.Philox(seed))


class LevyPathNoise:
    """One realization of the driving noise on (0, horizon].

    Jump times and marks are fixed at construction; Brownian increments are
    drawn on demand via :meth:`brownian_increment` and are deterministic given
    the seed and the sequence of requested intervals.
    """

    def __init__(self, seed, rate: float, horizon: float, dim: int):
        if dim not in (1, 3):
            raise ValueError(f"driver dimension must be 1 or 3, got {dim}")
        if horizon <= 0.0:
            raise ValueError(f"horizon must be positive, got {horizon}")
        if rate < 0.0:
            raise ValueError(f"jump rate must be nonnegative, got {rate}")
        self.seed = seed
        self.rate = float(rate)
        self.horizon = float(horizon)
        self.dim = int(dim)
        self._rng = _make_rng(seed)

        marks, weights = (MARKS_3D, MARK_WEIGHTS_3D) if dim == 3 else (MARKS_1D, MARK_WEIGHTS_1D)
        while True:
            count = int(self._rng.poisson(self.rate * self.horizon))
            times = np.sort(self._rng.uniform(0.0, self.horizon, size=count))
            # ties or a time of exactly 0.0 have probability ~0; redraw rather
            # than carry a skeleton outside (0, horizon) or not strictly increasing
            if count == 0 or (times[0] > 0.0 and np.all(np.diff(times) > 0.0)):
                break
        idx = self._rng.choice(len(marks), size=count, p=weights)
        self.jump_times = times
        self.jump_marks = marks[idx]

    @property
    def jump_count(self) -> int:
        return len(self.jump_times)

    def brownian_increment(self, t0: float, t1: float) -> np.ndarray:
        """Gaussian increment over [t0, t1]: mean 0, variance (t1 - t0) per component."""
        if t0 >= t1:
            raise ValueError(f"need t0 < t1, got [{t0}, {t1}]")
        return self._rng.standard_normal(self.dim) * np.sqrt(t1 - t0)

    def brownian_increments(self, dts: np.ndarray) -> np.ndarray:
        """Batch of per-interval increments; identical to sequential single draws."""
        dts = np.asarray(dts, dtype=float)
        if np.any(dts <= 0.0):
            raise ValueError("all interval lengths must be positive")
        return self._rng.standard_normal((dts.size, self.dim)) * np.sqrt(dts)[:, None]


def sample_jump_skeleton(rate: float, horizon: float, dim: int, seed) -> LevyPathNoise:
    """Fresh noise path: Poisson(rate) jump times on (0, horizon] with two-point marks."""
    return LevyPathNoise(seed, rate, horizon, dim)
