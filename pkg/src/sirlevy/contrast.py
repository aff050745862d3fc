"""One-step Euler residuals and the least-squares objective built on them.

For a trajectory observed on a regular grid with spacing dt, the residuals are

    P_k = S_{t_k} - S_{t_{k-1}} - dt * drift(t_{k-1}, S_{t_{k-1}}, theta)

and the objective is ``scale * sum_k P_k' W_{k-1} P_k`` with W the identity
(plain form) or the inverse of the squared noise coefficient (weighted form,
population-numbers model only).  The scale factor is n / eps**2 (or n when
eps == 0); it never moves the argmin, it only keeps reported values comparable
across noise levels.

For a fixed period the residuals are affine in the transmission coefficients
(base, cos_k, sin_k), so the inner minimization is an exact linear
least-squares problem; :func:`alpha_quadratic` exposes that quadratic and
:func:`linear_solve_alpha` solves it directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import SirParams, drift_beta_split, get_model, noise_coeff_numbers
from .simulate import Trajectory
from .transmission import PERIOD_FLOOR, ThetaParams, beta_grad

ALPHA_INIT_DEFAULT = (0.51, 0.31, 0.21)


class DegenerateWeightsError(RuntimeError):
    """Weighted form with a vanishing noise coefficient somewhere on the grid."""


class SingularDesignError(ValueError):
    def __init__(self, message: str, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


@dataclass(frozen=True)
class ContrastConfig:
    """Objective form and the noise amplitude used in the reporting scale."""

    form: str = "plain"  # "plain" | "weighted"
    eps: float = 0.0

    def __post_init__(self):
        if self.form not in ("plain", "weighted"):
            raise ValueError(f"unknown contrast form {self.form!r}")
        if self.eps < 0.0:
            raise ValueError("eps must be nonnegative")

    def scale(self, n: int) -> float:
        return n / self.eps**2 if self.eps > 0.0 else float(n)

    def check_model(self, model_tag: str) -> None:
        # the proportional model's noise matrix is rank one, so the weighted
        # form is only valid for the numbers model
        if self.form == "weighted" and model_tag != "numbers":
            raise ValueError("the weighted form requires the population-numbers model")


def _resolve(traj: Trajectory, params: SirParams | None, cfg: ContrastConfig | None):
    if params is None:
        params = traj.params
    if params is None:
        raise ValueError("params not given and trajectory carries none")
    if cfg is None:
        cfg = ContrastConfig(form="plain", eps=params.eps)
    cfg.check_model(traj.model)
    return params, cfg


def residuals(traj: Trajectory, theta: ThetaParams, params: SirParams | None = None) -> np.ndarray:
    """One-step Euler residuals, shape (n, 3)."""
    if params is None:
        params = traj.params
    model = get_model(traj.model)
    dt = traj.spacing()
    t0 = traj.times[:-1]
    s0 = traj.states[:-1]
    return traj.states[1:] - s0 - dt * model.drift(t0, s0, theta, params)


def inverse_weights(traj: Trajectory, params: SirParams) -> tuple[np.ndarray, bool]:
    """Per-interval weights 1 / (sigma*X*Y*Z)^2 at the left nodes; flags degeneracy.

    Degenerate means some state component vanishes on the grid, in which case
    the weighted objective is identically zero by its indicator.
    """
    c = noise_coeff_numbers(traj.states[:-1], params)
    if np.any(c == 0.0):
        return np.zeros(c.size), True
    return 1.0 / c**2, False


def contrast_plain(
    traj: Trajectory,
    theta: ThetaParams,
    params: SirParams | None = None,
    cfg: ContrastConfig | None = None,
) -> float:
    params, cfg = _resolve(traj, params, cfg)
    P = residuals(traj, theta, params)
    return cfg.scale(len(P)) * float(np.einsum("ki,ki->", P, P))


def contrast_weighted(
    traj: Trajectory,
    theta: ThetaParams,
    params: SirParams | None = None,
    cfg: ContrastConfig | None = None,
) -> tuple[float, bool]:
    """Weighted objective value and the degeneracy flag (value 0 when degenerate)."""
    if params is None:
        params = traj.params
    if cfg is None:
        cfg = ContrastConfig(form="weighted", eps=params.eps)
    cfg.check_model(traj.model)
    w, degenerate = inverse_weights(traj, params)
    if degenerate:
        return 0.0, True
    P = residuals(traj, theta, params)
    return cfg.scale(len(P)) * float(np.einsum("k,ki,ki->", w, P, P)), False


def contrast_value(
    traj: Trajectory,
    theta: ThetaParams,
    params: SirParams | None = None,
    cfg: ContrastConfig | None = None,
) -> float:
    params, cfg = _resolve(traj, params, cfg)
    if cfg.form == "weighted":
        return contrast_weighted(traj, theta, params, cfg)[0]
    return contrast_plain(traj, theta, params, cfg)


def contrast_gradient(
    traj: Trajectory,
    theta: ThetaParams,
    params: SirParams | None = None,
    cfg: ContrastConfig | None = None,
) -> np.ndarray:
    """Analytic gradient in (period, base, cos_k, sin_k); zeros if degenerate weighted."""
    params, cfg = _resolve(traj, params, cfg)
    dt = traj.spacing()
    t0 = traj.times[:-1]
    n = t0.size
    if cfg.form == "weighted":
        w, degenerate = inverse_weights(traj, params)
        if degenerate:
            return np.zeros(theta.dim)
    else:
        w = np.ones(n)
    P = residuals(traj, theta, params)
    _, v = drift_beta_split(traj.model, traj.states[:-1], params)
    B = beta_grad(t0, theta)  # (n, p)
    pv = np.einsum("ki,ki->k", P, v)
    return -2.0 * dt * cfg.scale(n) * (B.T @ (w * pv))


def _design_columns(t: np.ndarray, period: float, order: int) -> np.ndarray:
    """Columns (1, cos(2 pi k t / period), sin(...)) for k = 1..order; shape (n, 2K+1)."""
    if period < PERIOD_FLOOR:
        raise ValueError(f"period {period} is below the floor {PERIOD_FLOOR}")
    k = np.arange(1, order + 1, dtype=float)
    wphase = (2.0 * np.pi / period) * np.multiply.outer(t, k)
    return np.concatenate([np.ones((t.size, 1)), np.cos(wphase), np.sin(wphase)], axis=1)


def alpha_column_names(order: int) -> list[str]:
    return ["base"] + [f"cos{k}" for k in range(1, order + 1)] + [f"sin{k}" for k in range(1, order + 1)]


@dataclass
class AlphaQuadratic:
    """The objective restricted to the transmission coefficients at fixed period.

    value(alpha) = scale * (const - 2 lin @ alpha + alpha @ gram @ alpha)
    """

    gram: np.ndarray  # (q, q), includes the dt^2 factor
    lin: np.ndarray  # (q,), includes the dt factor
    const: float
    scale: float
    period: float
    order: int

    def value(self, alpha: np.ndarray) -> float:
        a = np.asarray(alpha, dtype=float)
        return self.scale * (self.const - 2.0 * self.lin @ a + a @ self.gram @ a)

    def grad(self, alpha: np.ndarray) -> np.ndarray:
        a = np.asarray(alpha, dtype=float)
        return self.scale * 2.0 * (self.gram @ a - self.lin)

    def lipschitz(self) -> float:
        """Largest curvature of the quadratic (for step-size and stop scaling)."""
        return float(2.0 * self.scale * np.linalg.eigvalsh(self.gram).max())


@dataclass
class AlphaProfile:
    """Shared pieces of the coefficient subproblem, reusable across periods.

    Building these arrays dominates the per-period cost, so a period scan
    should construct one profile and call :meth:`quadratic` per test period.
    """

    t: np.ndarray  # left grid nodes (n,)
    r: np.ndarray  # residual with the transmission term removed (n, 3)
    v: np.ndarray  # transmission direction (-X*Y, X*Y, 0) per node (n, 3)
    w: np.ndarray  # per-node weights (n,)
    dt: float
    scale: float
    order: int

    def quadratic(self, period: float) -> AlphaQuadratic:
        C = _design_columns(self.t, period, self.order)
        s = self.w * np.einsum("ki,ki->k", self.v, self.v)
        gram = self.dt**2 * np.einsum("k,ki,kj->ij", s, C, C)
        lin = self.dt * (C.T @ (self.w * np.einsum("ki,ki->k", self.r, self.v)))
        const = float(np.einsum("k,ki,ki->", self.w, self.r, self.r))
        return AlphaQuadratic(
            gram=gram, lin=lin, const=const, scale=self.scale, period=period, order=self.order
        )

    def solve_clipped(self, period: float, lower, upper) -> tuple[np.ndarray, float]:
        """Cheap scan step: normal-equations solve clipped into the box.

        The clipped value upper-bounds the box-constrained minimum; exact
        enough to rank scan candidates, with the winner re-solved properly.
        """
        quad = self.quadratic(period)
        try:
            alpha = np.linalg.solve(quad.gram, quad.lin)
        except np.linalg.LinAlgError:
            alpha = np.linalg.lstsq(quad.gram, quad.lin, rcond=None)[0]
        alpha = np.clip(alpha, lower, upper)
        return alpha, quad.value(alpha)


def alpha_profile(
    traj: Trajectory,
    params: SirParams | None = None,
    cfg: ContrastConfig | None = None,
    order: int = 1,
) -> AlphaProfile:
    params, cfg = _resolve(traj, params, cfg)
    dt = traj.spacing()
    t0 = traj.times[:-1]
    n = t0.size
    if cfg.form == "weighted":
        w, degenerate = inverse_weights(traj, params)
        if degenerate:
            raise DegenerateWeightsError("weighted objective is identically zero on this trajectory")
    else:
        w = np.ones(n)
    g, v = drift_beta_split(traj.model, traj.states[:-1], params)
    r = traj.states[1:] - traj.states[:-1] - dt * g  # residual with beta term removed
    return AlphaProfile(t=t0, r=r, v=v, w=w, dt=dt, scale=cfg.scale(n), order=order)


def alpha_quadratic(
    traj: Trajectory,
    period: float,
    params: SirParams | None = None,
    cfg: ContrastConfig | None = None,
    order: int = 1,
) -> AlphaQuadratic:
    return alpha_profile(traj, params, cfg, order).quadratic(period)


def linear_solve_alpha(
    traj: Trajectory,
    period: float,
    params: SirParams | None = None,
    cfg: ContrastConfig | None = None,
    order: int = 1,
) -> np.ndarray:
    """Exact unconstrained minimizer of the objective over (base, cos_k, sin_k).

    Solves the stacked weighted least-squares problem whose normal equations
    are the first-order conditions of the quadratic; raises SingularDesignError
    (naming the offending columns) when the design is rank deficient, e.g. when
    X*Y vanishes along the whole trajectory.
    """
    params, cfg = _resolve(traj, params, cfg)
    dt = traj.spacing()
    t0 = traj.times[:-1]
    if cfg.form == "weighted":
        w, degenerate = inverse_weights(traj, params)
        if degenerate:
            raise DegenerateWeightsError("weighted objective is identically zero on this trajectory")
    else:
        w = np.ones(t0.size)
    g, v = drift_beta_split(traj.model, traj.states[:-1], params)
    r = traj.states[1:] - traj.states[:-1] - dt * g
    C = _design_columns(t0, period, order)
    sw = np.sqrt(w)
    design = (dt * np.einsum("k,ki,kj->kij", sw, v, C)).reshape(-1, C.shape[1])
    target = (sw[:, None] * r).reshape(-1)
    sol, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    q = C.shape[1]
    if rank < q:
        names = alpha_column_names(order)
        norms = np.linalg.norm(design, axis=0)
        dead = [names[j] for j in range(q) if norms[j] <= 1e-14 * max(1.0, norms.max())]
        culprit = dead if dead else names
        raise SingularDesignError(
            f"design matrix rank {rank} < {q}; deficient columns: {', '.join(culprit)}",
            columns=culprit,
        )
    return sol
