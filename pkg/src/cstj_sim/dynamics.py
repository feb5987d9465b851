"""Rogue-drone motion model and the pursuit team's discrete move set."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass
class TargetState:
    """Kinematic state of the rogue drone: 3D position and velocity."""

    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.velocity = np.asarray(self.velocity, dtype=float).reshape(3)
        if not (np.isfinite(self.position).all() and np.isfinite(self.velocity).all()):
            raise ValueError("state components must be finite")

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity])

    @classmethod
    def from_vector(cls, vec) -> "TargetState":
        vec = np.asarray(vec, dtype=float).reshape(6)
        return cls(vec[:3].copy(), vec[3:].copy())


@dataclass
class MotionModel:
    """Constant-velocity dynamics driven by white acceleration noise."""

    dt: float
    accel_noise_cov: np.ndarray

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        cov = np.asarray(self.accel_noise_cov, dtype=float).reshape(3, 3)
        if not np.allclose(cov, cov.T, atol=1e-9):
            raise ValueError("accel_noise_cov must be symmetric")
        if np.linalg.eigvalsh(cov).min() < -1e-9:
            raise ValueError("accel_noise_cov must be positive semidefinite")
        self.accel_noise_cov = 0.5 * (cov + cov.T)

    def transition_matrix(self) -> np.ndarray:
        """6x6 state transition: position advances by dt * velocity."""
        phi = np.eye(6)
        phi[:3, 3:] = self.dt * np.eye(3)
        return phi

    def noise_gain(self) -> np.ndarray:
        """6x3 gain mapping an acceleration draw into the state update."""
        gamma = np.zeros((6, 3))
        gamma[:3] = 0.5 * self.dt**2 * np.eye(3)
        gamma[3:] = self.dt * np.eye(3)
        return gamma


@dataclass
class AgentState:
    """A pursuing UAV: integer id plus its current position."""

    id: int
    position: np.ndarray

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)


@dataclass(frozen=True)
class ActionGrid:
    """Spherical move grid: radial step sizes times a (phi, theta) lattice."""

    radial_steps_m: tuple
    n_phi: int
    n_theta: int

    def __post_init__(self):
        steps = tuple(float(r) for r in self.radial_steps_m)
        if len(steps) == 0 or any(r <= 0 for r in steps):
            raise ValueError("radial_steps_m must be nonempty with all steps > 0")
        if self.n_phi < 1 or self.n_theta < 1:
            raise ValueError("n_phi and n_theta must be >= 1")
        object.__setattr__(self, "radial_steps_m", steps)


def step_target(state: TargetState, model: MotionModel, rng: np.random.Generator) -> TargetState:
    """Advance the drone one step with a fresh acceleration-noise draw."""
    nu = rng.multivariate_normal(np.zeros(3), model.accel_noise_cov)
    position = state.position + model.dt * state.velocity + 0.5 * model.dt**2 * nu
    velocity = state.velocity + model.dt * nu
    return TargetState(position, velocity)


def transition_logpdf(next_state: TargetState, prev_state: TargetState, model: MotionModel) -> float:
    """Log density of one propagation step from prev_state to next_state.

    The 6x6 process covariance has rank at most 3, so the density lives on
    the 3D acceleration subspace: the noise draw is recovered from the
    velocity residual and the position residual must agree with it (relative
    tolerance 1e-6); inconsistent residuals give -inf.
    """
    dt = model.dt
    nu = (next_state.velocity - prev_state.velocity) / dt
    pos_from_noise = 0.5 * dt**2 * nu
    expected_pos = prev_state.position + dt * prev_state.velocity + pos_from_noise
    residual = next_state.position - expected_pos
    scale = max(
        1.0,
        float(np.abs(next_state.position - prev_state.position).max()),
        float(np.abs(pos_from_noise).max()),
    )
    if float(np.abs(residual).max()) > 1e-6 * scale:
        return float("-inf")
    try:
        chol = np.linalg.cholesky(model.accel_noise_cov)
    except np.linalg.LinAlgError:
        raise ValueError("degenerate noise covariance") from None
    z = np.linalg.solve(chol, nu)
    log_det = 2.0 * np.log(np.diag(chol)).sum()
    return float(-0.5 * (z @ z) - 0.5 * log_det - 1.5 * math.log(2.0 * math.pi))


@lru_cache(maxsize=None)
def _grid_offsets(grid: ActionGrid) -> np.ndarray:
    d_phi = math.pi / grid.n_phi
    d_theta = 2.0 * math.pi / grid.n_theta
    raw = []
    for radius in grid.radial_steps_m:
        for l2 in range(0, grid.n_phi + 1):
            for l3 in range(1, grid.n_theta + 1):
                raw.append(
                    (
                        radius * math.sin(l2 * d_phi) * math.cos(l3 * d_theta),
                        radius * math.sin(l2 * d_phi) * math.sin(l3 * d_theta),
                        radius * math.cos(l2 * d_phi),
                    )
                )
    offsets = np.asarray(raw, dtype=float)
    # the lattice degenerates at the poles; drop offsets within 1e-9 m of a kept one
    diff = offsets[:, None, :] - offsets[None, :, :]
    close = np.sqrt((diff * diff).sum(axis=-1)) <= 1e-9
    keep = []
    for i in range(len(offsets)):
        if not any(close[i, j] for j in keep):
            keep.append(i)
    out = offsets[keep]
    out.setflags(write=False)
    return out


def enumerate_actions(state: AgentState, grid: ActionGrid) -> np.ndarray:
    """Candidate next positions, deduplicated, in deterministic lattice order."""
    return state.position + _grid_offsets(grid)
