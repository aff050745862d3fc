"""Drift and noise coefficients of the two stochastic SIR variants.

Two model forms share one coefficient interface so the simulator and the
least-squares machinery stay model-agnostic:

* ``numbers``      -- compartments are population counts; birth/death terms
  present; the noise matrix is (sigma*X*Y*Z) times the 3x3 identity driving a
  3-dimensional noise source.
* ``proportions``  -- compartments are fractions summing to one; no
  demographics; the noise column is sigma*X*Y*Z * (-1, 2, -1) driving a scalar
  noise source, so noise increments cancel across compartments.

States are plain length-3 arrays ordered (X, Y, Z) = (susceptible, infected,
recovered).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .transmission import ThetaParams, beta_eval


@dataclass(frozen=True)
class SirParams:
    """Fixed model constants.

    birth / death are the demographic rates (zero for the proportional model),
    gamma the recovery rate, sigma the scale of the state-dependent noise
    coefficient, eps the small-noise amplitude in [0, 1).
    """

    birth: float = 0.0
    death: float = 0.0
    gamma: float = 0.07142
    sigma: float = 0.5
    eps: float = 0.0

    def __post_init__(self):
        if self.gamma <= 0.0 or self.sigma <= 0.0:
            raise ValueError("gamma and sigma must be positive")
        if not 0.0 <= self.eps < 1.0:
            raise ValueError(f"eps must lie in [0, 1), got {self.eps}")
        if self.birth < 0.0 or self.death < 0.0:
            raise ValueError("birth and death rates must be nonnegative")

    def with_eps(self, eps: float) -> "SirParams":
        return replace(self, eps=eps)


def numbers_defaults(eps: float = 0.0) -> SirParams:
    """Constants of the population-numbers simulation study."""
    return SirParams(birth=0.018, death=0.00042, gamma=0.07142, sigma=0.5, eps=eps)


def proportions_defaults(eps: float = 0.0) -> SirParams:
    """Constants of the population-proportions simulation study."""
    return SirParams(birth=0.0, death=0.0, gamma=0.07142, sigma=0.5, eps=eps)


# initial states used in the simulation studies
NUMBERS_X0 = (2.3, 0.19, 0.25)
PROPORTIONS_X0 = (0.82, 0.07, 0.11)


def _split(state):
    s = np.asarray(state, dtype=float)
    return s[..., 0], s[..., 1], s[..., 2]


def drift_numbers(t, state, theta: ThetaParams, p: SirParams) -> np.ndarray:
    """(birth - death*X - beta*X*Y, beta*X*Y - (death+gamma)*Y, gamma*Y - death*Z)."""
    x, y, z = _split(state)
    infections = beta_eval(t, theta) * x * y
    return np.stack(
        [
            p.birth - p.death * x - infections,
            infections - (p.death + p.gamma) * y,
            p.gamma * y - p.death * z,
        ],
        axis=-1,
    )


def drift_proportions(t, state, theta: ThetaParams, p: SirParams) -> np.ndarray:
    """(-beta*X*Y, beta*X*Y - gamma*Y, gamma*Y); components sum to zero."""
    x, y, _ = _split(state)
    infections = beta_eval(t, theta) * x * y
    recoveries = p.gamma * y
    return np.stack([-infections, infections - recoveries, recoveries], axis=-1)


def noise_coeff_numbers(state, p: SirParams):
    """Scalar sigma*X*Y*Z; the model's noise matrix is this times the identity."""
    x, y, z = _split(state)
    return p.sigma * x * y * z


def noise_coeff_proportions(state, p: SirParams) -> np.ndarray:
    """Column (-1, 2, -1) * sigma*X*Y*Z; components sum to zero exactly."""
    c = noise_coeff_numbers(state, p)
    return np.stack([-c, 2.0 * c, -c], axis=-1)


def drift_beta_split(model_tag: str, state, p: SirParams):
    """Decompose the drift as g + beta(t) * v with v = (-X*Y, X*Y, 0).

    Returns (g, v); both broadcast over leading state axes.  The residuals are
    affine in the transmission coefficients through this split.
    """
    x, y, z = _split(state)
    xy = x * y
    v = np.stack([-xy, xy, np.zeros_like(xy)], axis=-1)
    if model_tag == "numbers":
        g = np.stack(
            [p.birth - p.death * x, -(p.death + p.gamma) * y, p.gamma * y - p.death * z],
            axis=-1,
        )
    elif model_tag == "proportions":
        ry = p.gamma * y
        g = np.stack([np.zeros_like(ry), -ry, ry], axis=-1)
    else:
        raise ValueError(f"unknown model tag {model_tag!r}")
    return g, v


@dataclass(frozen=True)
class SirModel:
    """One SIR variant: drift, noise matrix, and the driving-noise dimension."""

    tag: str
    driver_dim: int
    drift: Callable
    noise_matrix: Callable  # state, params -> (3, driver_dim)

    def validate_state(self, state, tol: float = 1e-10) -> None:
        s = np.asarray(state, dtype=float)
        if s.shape[-1] != 3:
            raise ValueError("state must have 3 components (X, Y, Z)")
        if np.any(s < 0.0):
            raise ValueError(f"state components must be nonnegative, got {s}")
        if self.tag == "proportions" and np.any(np.abs(s.sum(axis=-1) - 1.0) > tol):
            raise ValueError(f"proportions state must sum to 1 within {tol}, got {s}")


def _noise_matrix_numbers(state, p: SirParams) -> np.ndarray:
    return noise_coeff_numbers(state, p) * np.eye(3)


def _noise_matrix_proportions(state, p: SirParams) -> np.ndarray:
    return noise_coeff_proportions(state, p).reshape(3, 1)


NUMBERS = SirModel("numbers", 3, drift_numbers, _noise_matrix_numbers)
PROPORTIONS = SirModel("proportions", 1, drift_proportions, _noise_matrix_proportions)

_MODELS = {"numbers": NUMBERS, "proportions": PROPORTIONS}


def get_model(model) -> SirModel:
    if isinstance(model, SirModel):
        return model
    try:
        return _MODELS[model]
    except KeyError:
        raise ValueError(f"unknown model {model!r}; expected 'numbers' or 'proportions'") from None


def clamp_nonnegative(state: np.ndarray) -> tuple[np.ndarray, int]:
    """Zero out negative components (discretization undershoot); count how many."""
    neg = state < 0.0
    if not neg.any():
        return state, 0
    out = state.copy()
    out[neg] = 0.0
    return out, int(neg.sum())
