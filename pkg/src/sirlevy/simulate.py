"""Trajectory container, jump-adapted Euler-Maruyama integrator, RK4 ODE solver.

The stochastic integrator works on the union of a uniform internal grid
(``substeps`` intervals per observation interval) and all jump times of the
supplied noise path, so jumps land exactly on integration nodes.  Observation
times are integration nodes by construction; no interpolation happens
anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .levy import LevyPathNoise
from .models import SirParams, get_model
from .transmission import ThetaParams, make_beta_fast

DEFAULT_SUBSTEPS = 10


class SimulationError(RuntimeError):
    """Raised when the integrator produces a non-finite state."""

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


@dataclass
class Trajectory:
    """Observation grid plus states, with the generation metadata attached."""

    times: np.ndarray
    states: np.ndarray  # (len(times), 3)
    model: str
    theta: ThetaParams | None = None
    params: SirParams | None = None
    seed: int | None = None
    lam: float | None = None
    clamp_count: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.shape != (self.times.size, 3):
            raise ValueError(
                f"states shape {self.states.shape} does not match {self.times.size} times"
            )

    @property
    def n_intervals(self) -> int:
        return self.times.size - 1

    def spacing(self, rtol: float = 1e-8) -> float:
        """Grid spacing; raises if the grid is not (numerically) regular."""
        diffs = np.diff(self.times)
        dt = diffs[0]
        if np.any(np.abs(diffs - dt) > rtol * dt):
            raise ValueError("trajectory grid is not regularly spaced")
        return float(dt)


def simulate_sde(
    model,
    theta: ThetaParams,
    params: SirParams,
    s0,
    horizon: float,
    n_obs: int,
    noise: LevyPathNoise,
    substeps: int = DEFAULT_SUBSTEPS,
) -> Trajectory:
    """Integrate one noise realization; return states at the n_obs + 1 observation nodes.

    Drift advances with the internal Euler step; Brownian and jump terms enter
    scaled by params.eps.  Jumps apply the state-dependent coefficient at the
    pre-jump state.  Negative undershoots are clamped to zero and counted.
    """
    model = get_model(model)
    if n_obs < 1 or substeps < 1:
        raise ValueError("n_obs and substeps must be >= 1")
    if noise.dim != model.driver_dim:
        raise ValueError(f"noise dimension {noise.dim} does not match model {model.tag}")
    if noise.horizon < horizon:
        raise ValueError("noise path horizon is shorter than the simulation horizon")

    n_steps = n_obs * substeps
    base = np.linspace(0.0, horizon, n_steps + 1)
    keep = noise.jump_times <= horizon
    jump_times = noise.jump_times[keep]
    jump_marks = noise.jump_marks[keep]
    grid = np.union1d(base, jump_times)
    dts = np.diff(grid)

    # one batch draw produces the same stream as per-interval draws, in grid order
    incs = noise.brownian_increments(dts).tolist()
    grid_list = grid.tolist()
    dts_list = dts.tolist()
    jump_node = np.searchsorted(grid, jump_times).tolist()
    marks_list = jump_marks.tolist()
    obs_node = np.searchsorted(grid, base[::substeps]).tolist()

    beta = make_beta_fast(theta)
    eps_sigma = params.eps * params.sigma
    birth, death, gamma = params.birth, params.death, params.gamma
    numbers = model.tag == "numbers"

    x, y, z = (float(v) for v in np.asarray(s0, dtype=float))
    out = np.empty((n_obs + 1, 3))
    out[0] = (x, y, z)
    clamps = 0
    obs_ptr = 1
    jump_ptr = 0
    n_jumps = len(jump_node)

    for i in range(len(grid_list) - 1):
        t = grid_list[i]
        dt = dts_list[i]
        infections = beta(t) * x * y
        c = eps_sigma * x * y * z
        dw = incs[i]
        if numbers:
            x, y, z = (
                x + dt * (birth - death * x - infections) + c * dw[0],
                y + dt * (infections - (death + gamma) * y) + c * dw[1],
                z + dt * (gamma * y - death * z) + c * dw[2],
            )
        else:
            recoveries = gamma * y
            cdw = c * dw[0]
            x, y, z = (
                x + dt * (-infections) - cdw,
                y + dt * (infections - recoveries) + 2.0 * cdw,
                z + dt * recoveries - cdw,
            )
        if x < 0.0:
            x = 0.0
            clamps += 1
        if y < 0.0:
            y = 0.0
            clamps += 1
        if z < 0.0:
            z = 0.0
            clamps += 1
        t_next = grid_list[i + 1]
        if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(z)):
            raise SimulationError(f"non-finite state at t={t_next}", time=t_next)

        while jump_ptr < n_jumps and jump_node[jump_ptr] == i + 1:
            cj = eps_sigma * x * y * z
            m = marks_list[jump_ptr]
            if numbers:
                x += cj * m[0]
                y += cj * m[1]
                z += cj * m[2]
            else:
                cjm = cj * m[0]
                x += -cjm
                y += 2.0 * cjm
                z += -cjm
            if x < 0.0:
                x = 0.0
                clamps += 1
            if y < 0.0:
                y = 0.0
                clamps += 1
            if z < 0.0:
                z = 0.0
                clamps += 1
            if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(z)):
                raise SimulationError(f"non-finite state at jump t={t_next}", time=t_next)
            jump_ptr += 1

        if obs_ptr <= n_obs and obs_node[obs_ptr] == i + 1:
            out[obs_ptr] = (x, y, z)
            obs_ptr += 1

    if obs_ptr != n_obs + 1:
        raise SimulationError("observation nodes were not all visited", time=horizon)

    return Trajectory(
        times=base[::substeps].copy(),
        states=out,
        model=model.tag,
        theta=theta,
        params=params,
        seed=noise.seed if isinstance(noise.seed, int) else None,
        lam=noise.rate,
        clamp_count=clamps,
        meta={"substeps": substeps, "flagged": clamps > 5},
    )


def solve_ode(
    model,
    theta: ThetaParams,
    params: SirParams,
    s0,
    horizon: float,
    n_steps: int,
) -> Trajectory:
    """Classical fixed-step RK4 on the drift-only system; returns every node."""
    model = get_model(model)
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    times = np.linspace(0.0, horizon, n_steps + 1)
    h = horizon / n_steps
    drift = model.drift
    s = np.asarray(s0, dtype=float).copy()
    out = np.empty((n_steps + 1, 3))
    out[0] = s
    for i in range(n_steps):
        t = times[i]
        k1 = drift(t, s, theta, params)
        k2 = drift(t + 0.5 * h, s + 0.5 * h * k1, theta, params)
        k3 = drift(t + 0.5 * h, s + 0.5 * h * k2, theta, params)
        k4 = drift(t + h, s + h * k3, theta, params)
        s = s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(s)):
            raise SimulationError(f"non-finite state at t={times[i + 1]}", time=float(times[i + 1]))
        out[i + 1] = s
    return Trajectory(times=times, states=out, model=model.tag, theta=theta, params=params)


def predict_ensemble(
    model,
    theta: ThetaParams,
    params: SirParams,
    s0,
    horizon: float = 3.0,
    n_obs: int | None = None,
    n_paths: int = 100,
    seed: int = 0,
    substeps: int = DEFAULT_SUBSTEPS,
    lam: float | None = None,
    max_retries: int = 10,
) -> Trajectory:
    """Pointwise mean of n_paths stochastic paths on [0, horizon].

    Each path gets its own noise seed (spawned from ``seed``) and, unless
    ``lam`` is fixed, its own jump rate drawn uniformly from {1, 2, 3, 4}.
    A path that fails is rerun with a fresh sub-seed, up to ``max_retries``
    times.  With eps == 0 every path coincides, so the single deterministic
    Euler path is returned exactly.
    """
    model = get_model(model)
    if n_obs is None:
        n_obs = max(1, round(100 * horizon))

    def one_path(path_idx: int) -> Trajectory:
        for attempt in range(max_retries + 1):
            ss = np.random.SeedSequence(entropy=seed, spawn_key=(path_idx, attempt))
            rng = np.random.Generator(np.random.Philox(ss))
            rate = lam if lam is not None else int(rng.integers(1, 5))
            noise = LevyPathNoise(ss.spawn(1)[0], rate, horizon, model.driver_dim)
            try:
                return simulate_sde(model, theta, params, s0, horizon, n_obs, noise, substeps)
            except SimulationError:
                if attempt == max_retries:
                    raise
        raise AssertionError("unreachable")

    first = one_path(0)
    if params.eps == 0.0:
        return first

    total = first.states.copy()
    clamps = first.clamp_count
    for j in range(1, n_paths):
        traj = one_path(j)
        total += traj.states
        clamps += traj.clamp_count
    return Trajectory(
        times=first.times,
        states=total / n_paths,
        model=model.tag,
        theta=theta,
        params=params,
        seed=seed,
        lam=lam,
        clamp_count=clamps,
        meta={"n_paths": n_paths, "substeps": substeps, "ensemble_mean": True},
    )
