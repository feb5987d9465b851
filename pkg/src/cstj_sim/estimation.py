"""Per-agent SIR particle filter with a clutter-aware measurement-set
likelihood, EAP extraction, and sequential covariance-intersection fusion."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import MotionModel, TargetState
from .sensing import (
    SensingParams,
    detection_prob_at_distance,
    measurement_array,
    spherical_coords,
    wrap_azimuth,
)


@dataclass
class ParticleSet:
    """Weighted particle approximation of one agent's filtering density."""

    states: np.ndarray  # (n, 6) rows of position + velocity
    weights: np.ndarray  # (n,), nonnegative, summing to one

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.states.ndim != 2 or self.states.shape[1] != 6 or len(self.states) < 1:
            raise ValueError("states must be an (n, 6) array with n >= 1")
        if self.weights.shape != (len(self.states),):
            raise ValueError("weights must match the particle count")
        if self.weights.min() < 0 or abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be nonnegative and sum to one")

    def __len__(self) -> int:
        return len(self.states)


@dataclass
class Estimate:
    """State mean with its 6x6 covariance."""

    mean: TargetState
    covariance: np.ndarray

    def __post_init__(self):
        cov = np.asarray(self.covariance, dtype=float).reshape(6, 6)
        self.covariance = 0.5 * (cov + cov.T)


def init_particles(prior_mean: TargetState, prior_cov, n: int, rng: np.random.Generator) -> ParticleSet:
    """Draw n i.i.d. Gaussian particles with uniform weights."""
    if n < 1:
        raise ValueError("particle count must be >= 1")
    cov = np.asarray(prior_cov, dtype=float).reshape(6, 6)
    cov = 0.5 * (cov + cov.T)
    eigs = np.linalg.eigvalsh(cov)
    if eigs.min() < -1e-9 * max(1.0, abs(eigs.max())):
        raise ValueError("prior covariance is not positive semidefinite")
    states = rng.multivariate_normal(prior_mean.as_vector(), cov, size=n)
    return ParticleSet(states, np.full(n, 1.0 / n))


def predict(ps: ParticleSet, model: MotionModel, rng: np.random.Generator) -> ParticleSet:
    """Propagate every particle through the motion model; weights unchanged."""
    nu = rng.multivariate_normal(np.zeros(3), model.accel_noise_cov, size=len(ps))
    states = ps.states @ model.transition_matrix().T + nu @ model.noise_gain().T
    return ParticleSet(states, ps.weights.copy())


def predicted_state(ps: ParticleSet) -> TargetState:
    """Weighted particle mean, used as the expected predicted drone state."""
    return TargetState.from_vector(ps.weights @ ps.states)


def _safe_log(values):
    with np.errstate(divide="ignore"):
        return np.log(values)


def _log_measurement_densities(states, meas, sensor_pos, p: SensingParams):
    """(n_particles, n_meas) log Gaussian densities of each measurement.

    The azimuth residual is wrapped into (-pi, pi]; the range noise scale
    grows linearly with the particle's distance from the sensor.
    """
    delta = states[:, :3] - np.asarray(sensor_pos, dtype=float)
    rng_, azimuth, inclination = spherical_coords(delta)
    sigma_rho = p.sigma_rho0_m + p.beta_rho * rng_
    d_rho = meas[:, 0][None, :] - rng_[:, None]
    d_az = wrap_azimuth(meas[:, 1][None, :] - azimuth[:, None])
    d_inc = meas[:, 2][None, :] - inclination[:, None]
    log_norm = (
        np.log(sigma_rho)[:, None]
        + math.log(p.sigma_theta_rad)
        + math.log(p.sigma_phi_rad)
        + 1.5 * math.log(2.0 * math.pi)
    )
    quad = (
        (d_rho / sigma_rho[:, None]) ** 2
        + (d_az / p.sigma_theta_rad) ** 2
        + (d_inc / p.sigma_phi_rad) ** 2
    )
    return -0.5 * quad - log_norm


def _log_set_likelihood(states, measurements, sensor_pos, p: SensingParams):
    """Log likelihood of the whole measurement set for each state row.

    Sums a "missed detection, all clutter" hypothesis with one hypothesis per
    measurement being the target return, each weighted by the Poisson clutter
    process; clutter-free sensing degenerates to the obvious special cases.
    """
    n_meas = len(measurements)
    delta = states[:, :3] - np.asarray(sensor_pos, dtype=float)
    dist = np.sqrt((delta * delta).sum(axis=-1))
    p_d = detection_prob_at_distance(dist, p)
    lam = p.clutter_rate
    if lam > 0:
        base = n_meas * math.log(lam * p.clutter_density) - lam
        if n_meas == 0:
            return base + _safe_log(1.0 - p_d)
        g = np.exp(_log_measurement_densities(states, measurement_array(measurements), sensor_pos, p))
        return base + _safe_log((1.0 - p_d) + p_d * g.sum(axis=1) / (lam * p.clutter_density))
    if n_meas == 0:
        return _safe_log(1.0 - p_d)
    if n_meas == 1:
        g = np.exp(_log_measurement_densities(states, measurement_array(measurements), sensor_pos, p))
        return _safe_log(p_d * g[:, 0])
    return np.full(len(states), -np.inf)


def likelihood(measurements, x: TargetState, s_pos, p: SensingParams) -> float:
    """Exact measurement-set likelihood value for a single state."""
    return float(np.exp(_log_set_likelihood(x.as_vector()[None, :], measurements, s_pos, p))[0])


def effective_sample_size(weights) -> float:
    return float(1.0 / np.sum(np.asarray(weights, dtype=float) ** 2))


def _systematic_resample(weights, rng: np.random.Generator) -> np.ndarray:
    n = len(weights)
    points = (rng.random() + np.arange(n)) / n
    indices = np.searchsorted(np.cumsum(weights), points)
    return np.minimum(indices, n - 1)


def update(
    ps: ParticleSet,
    measurements,
    sensor_pos,
    p: SensingParams,
    rng: np.random.Generator,
) -> tuple[ParticleSet, bool]:
    """Reweight by the set likelihood, then resample if the ESS drops below n/2.

    Returns the new particle set and an "uninformative update" flag: when the
    likelihood underflows to zero for every particle the prior weights are
    kept and the flag is set.
    """
    log_l = _log_set_likelihood(ps.states, measurements, sensor_pos, p)
    log_w = _safe_log(ps.weights) + log_l
    peak = log_w.max()
    if not np.isfinite(peak):
        return ParticleSet(ps.states.copy(), ps.weights.copy()), True
    weights = np.exp(log_w - peak)
    weights /= weights.sum()
    states = ps.states
    if effective_sample_size(weights) < 0.5 * len(weights):
        indices = _systematic_resample(weights, rng)
        states = states[indices]
        weights = np.full(len(weights), 1.0 / len(weights))
    return ParticleSet(states.copy(), weights), False


def eap(ps: ParticleSet) -> Estimate:
    """Weighted mean and covariance of the particle set."""
    mean = ps.weights @ ps.states
    centered = ps.states - mean
    cov = (ps.weights * centered.T) @ centered
    return Estimate(TargetState.from_vector(mean), cov)


def _golden_section_min(f, lo: float, hi: float, tol: float) -> float:
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - inv_phi * (hi - lo)
    d = lo + inv_phi * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - inv_phi * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + inv_phi * (hi - lo)
            fd = f(d)
    return 0.5 * (lo + hi)


def _information_matrix(cov: np.ndarray) -> np.ndarray:
    cov = 0.5 * (cov + cov.T)
    eye = np.eye(len(cov))
    # prefer the raw covariance when it is comfortably invertible
    eigs = np.linalg.eigvalsh(cov)
    candidates = [cov] if eigs.min() > 1e-12 * max(1.0, eigs.max()) else []
    candidates.append(cov + 1e-9 * eye)
    for candidate in candidates:
        try:
            info = np.linalg.inv(candidate)
        except np.linalg.LinAlgError:
            continue
        if np.isfinite(info).all():
            return 0.5 * (info + info.T)
    raise ValueError("singular covariance after regularization")


def _ci_pair(a: Estimate, b: Estimate) -> Estimate:
    info_a = _information_matrix(a.covariance)
    info_b = _information_matrix(b.covariance)

    def fused_trace(w: float) -> float:
        try:
            return float(np.trace(np.linalg.inv(w * info_a + (1.0 - w) * info_b)))
        except np.linalg.LinAlgError:
            return float("inf")

    w_star = _golden_section_min(fused_trace, 0.0, 1.0, 1e-6)
    # the trace is convex in w but its minimum may sit on the boundary
    w_best = min((0.0, 1.0, w_star), key=fused_trace)
    fused_info = w_best * info_a + (1.0 - w_best) * info_b
    fused_cov = np.linalg.inv(fused_info)
    fused_mean = fused_cov @ (
        w_best * info_a @ a.mean.as_vector() + (1.0 - w_best) * info_b @ b.mean.as_vector()
    )
    return Estimate(TargetState.from_vector(fused_mean), fused_cov)


def ci_fuse(estimates) -> Estimate:
    """Fold covariance intersection pairwise, left to right.

    Each pairwise weight is chosen by golden-section search to minimize the
    trace of the fused covariance. Callers fix the fold order (ascending
    agent id in the simulator); a single estimate is returned unchanged.
    """
    estimates = list(estimates)
    if not estimates:
        raise ValueError("ci_fuse needs at least one estimate")
    fused = estimates[0]
    for other in estimates[1:]:
        fused = _ci_pair(fused, other)
    return fused
