"""Scenario runner: full pursuit trials, step metrics, and Monte-Carlo sweeps.

Every step executes, in order: per-agent predict and predicted-state
extraction, candidate thresholding and the sequential jamming decisions (or
the tracking-only baseline), simultaneous agent moves, the drone's own noisy
advance, per-agent measurement collection and filter update, covariance-
intersection fusion, and metric computation against the true drone state.

Determinism: a single master seed expands into independent per-trial,
per-agent, per-subsystem streams through counter-based seed-sequence keys,
so results are reproducible and independent of trial scheduling.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .control import (
    DecisionRecord,
    Fallback,
    ct_decide,
    sequential_decide,
)
from .dynamics import (
    ActionGrid,
    AgentState,
    MotionModel,
    TargetState,
    enumerate_actions,
    step_target,
)
from .estimation import Estimate, ci_fuse, eap, init_particles, predict, predicted_state, update
from .geometry_rf import AntennaParams, RfParams, aggregate_power_db, received_power_db
from .sensing import SensingParams, collect

_STREAM_SCENARIO = 0
_STREAM_TARGET = 1
_STREAM_SENSE = 2
_STREAM_FILTER = 3


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)))


@dataclass
class ScenarioConfig:
    """Everything one trial needs; see the CLI module for file keys and units."""

    mode: str = "cstj"  # "cstj" or "ct"
    seed: int = 0
    n_agents: int = 4
    n_steps: int = 50
    n_trials: int = 50
    arena_min: np.ndarray = field(default_factory=lambda: np.zeros(3))
    arena_max: np.ndarray = field(default_factory=lambda: np.full(3, 100.0))
    target_init: TargetState | None = None  # None: drawn per trial
    prior_sigma: np.ndarray = field(default_factory=lambda: np.array([5.0, 5.0, 5.0, 1.0, 1.0, 1.0]))
    spawn_radius_m: float = 5.0
    motion: MotionModel = field(default_factory=lambda: MotionModel(1.0, np.diag([2.0, 2.0, 2.0])))
    actions: ActionGrid = field(default_factory=lambda: ActionGrid((1.0, 3.0, 5.0), 2, 4))
    sensing: SensingParams = field(
        default_factory=lambda: SensingParams(
            p_d_max=0.99,
            eta_per_m=0.02,
            r0_m=2.0,
            sigma_theta_rad=np.pi / 50.0,
            sigma_phi_rad=np.pi / 50.0,
            sigma_rho0_m=2.0,
            beta_rho=0.05,
            clutter_rate=15.0,
            rho_max_m=100.0 * np.sqrt(3.0),
        )
    )
    antenna: AntennaParams = field(
        default_factory=lambda: AntennaParams(effective_range_m=100.0, opening_angle_rad=np.radians(80.0))
    )
    rf: RfParams = field(
        default_factory=lambda: RfParams(
            near_field_loss_db=32.4,
            path_loss_exponent=2.5,
            attenuation_db=6.0206,
            power_levels_db=(None, -10.0, 0.0, 7.0, 10.0),
            interference_threshold_db=-50.0,
        )
    )
    tracking_threshold: float = 0.8
    ct_power_db: float = 7.0
    n_particles: int = 2000

    def __post_init__(self):
        self.arena_min = np.asarray(self.arena_min, dtype=float).reshape(3)
        self.arena_max = np.asarray(self.arena_max, dtype=float).reshape(3)
        self.prior_sigma = np.asarray(self.prior_sigma, dtype=float).reshape(6)


@dataclass
class AgentStepLog:
    agent_id: int
    estimate: Estimate
    decision: DecisionRecord
    n_measurements: int
    interference_db: float | None
    uninformative_update: bool


@dataclass
class StepLog:
    step: int
    true_state: TargetState
    fused: Estimate
    agents: list[AgentStepLog]
    tracking_error_m: float
    target_power_db: float | None
    max_interference_db: float | None
    pair_interference_db: np.ndarray  # (n, n): power at row agent from column agent, NaN if none
    any_fallback: bool
    violation: bool


@dataclass
class StepMetrics:
    tracking_error_m: float
    target_power_db: float | None
    agent_interference_db: list
    pair_interference_db: np.ndarray
    max_interference_db: float | None
    violation: bool


def compute_metrics(
    true_state: TargetState,
    fused: Estimate,
    decisions: list[DecisionRecord],
    ant: AntennaParams,
    rf: RfParams,
) -> StepMetrics:
    """Step metrics against the true drone state and the executed decisions.

    Jamming metrics use the true drone position (what physically matters),
    not the predicted one the controller aimed at.
    """
    diff = fused.mean.position - true_state.position
    tracking_error = float(np.sqrt((diff * diff).sum()))

    target_contribs = []
    for rec in decisions:
        level = rf.power_levels_db[rec.power_index]
        if level is None:
            continue
        c = received_power_db(level, rec.chosen_position, rec.aim_point, ant, rf, true_state.position)
        if c is not None:
            target_contribs.append(c)
    target_power = aggregate_power_db(target_contribs)

    n = len(decisions)
    pair = np.full((n, n), np.nan)
    per_agent = []
    for i, receiver in enumerate(decisions):
        vals = []
        for j, sender in enumerate(decisions):
            if j == i:
                continue
            level = rf.power_levels_db[sender.power_index]
            if level is None:
                continue
            c = received_power_db(level, sender.chosen_position, sender.aim_point, ant, rf, receiver.chosen_position)
            if c is None:
                continue
            pair[i, j] = c
            vals.append(c)
        per_agent.append(aggregate_power_db(vals))
    present = [v for v in per_agent if v is not None]
    max_interference = max(present) if present else None
    violation = any(v is not None and v >= rf.interference_threshold_db for v in per_agent)
    return StepMetrics(tracking_error, target_power, per_agent, pair, max_interference, violation)


def _power_index(rf: RfParams, level_db: float) -> int:
    for i, level in enumerate(rf.power_levels_db):
        if level is not None and level == level_db:
            return i
    raise ValueError(f"power level {level_db} dB is not one of the configured transmit levels")


def _spawn_in_sphere(center, radius, rng) -> np.ndarray:
    direction = rng.normal(size=3)
    direction /= np.sqrt((direction * direction).sum())
    return center + radius * rng.random() ** (1.0 / 3.0) * direction


def run_trial(cfg: ScenarioConfig, trial_index: int = 0) -> list[StepLog]:
    """Run one seeded trial and return its per-step logs."""
    scen_rng = _rng(cfg.seed, trial_index, _STREAM_SCENARIO)
    if cfg.target_init is not None:
        truth = TargetState(cfg.target_init.position.copy(), cfg.target_init.velocity.copy())
    else:
        truth = TargetState(
            scen_rng.uniform(cfg.arena_min, cfg.arena_max),
            scen_rng.uniform(-2.0, 2.0, size=3),
        )
    prior_cov = np.diag(cfg.prior_sigma**2)
    prior_mean = TargetState.from_vector(truth.as_vector() + scen_rng.normal(size=6) * cfg.prior_sigma)
    agents = [
        AgentState(j, _spawn_in_sphere(truth.position, cfg.spawn_radius_m, scen_rng))
        for j in range(cfg.n_agents)
    ]

    target_rng = _rng(cfg.seed, trial_index, _STREAM_TARGET)
    sense_rngs = [_rng(cfg.seed, trial_index, _STREAM_SENSE, j) for j in range(cfg.n_agents)]
    filter_rngs = [_rng(cfg.seed, trial_index, _STREAM_FILTER, j) for j in range(cfg.n_agents)]
    particles = [
        init_particles(prior_mean, prior_cov, cfg.n_particles, filter_rngs[j])
        for j in range(cfg.n_agents)
    ]
    ct_index = _power_index(cfg.rf, cfg.ct_power_db) if cfg.mode == "ct" else 0

    logs: list[StepLog] = []
    for step in range(1, cfg.n_steps + 1):
        predictions = []
        for j in range(cfg.n_agents):
            particles[j] = predict(particles[j], cfg.motion, filter_rngs[j])
            predictions.append(predicted_state(particles[j]))
        action_sets = [enumerate_actions(agents[j], cfg.actions) for j in range(cfg.n_agents)]
        if cfg.mode == "ct":
            decisions = ct_decide(agents, predictions, action_sets, cfg.sensing, ct_index)
        else:
            decisions = sequential_decide(
                agents, predictions, action_sets, cfg.antenna, cfg.rf, cfg.sensing, cfg.tracking_threshold
            )
        for j in range(cfg.n_agents):
            agents[j].position = decisions[j].chosen_position.copy()

        truth = step_target(truth, cfg.motion, target_rng)

        estimates = []
        meas_counts = []
        uninformative = []
        for j in range(cfg.n_agents):
            measurements = collect(truth, agents[j].position, cfg.sensing, sense_rngs[j])
            particles[j], flag = update(particles[j], measurements, agents[j].position, cfg.sensing, filter_rngs[j])
            estimates.append(eap(particles[j]))
            meas_counts.append(len(measurements))
            uninformative.append(flag)
        fused = ci_fuse(estimates)
        metrics = compute_metrics(truth, fused, decisions, cfg.antenna, cfg.rf)

        agent_logs = [
            AgentStepLog(
                agents[j].id,
                estimates[j],
                decisions[j],
                meas_counts[j],
                metrics.agent_interference_db[j],
                uninformative[j],
            )
            for j in range(cfg.n_agents)
        ]
        logs.append(
            StepLog(
                step=step,
                true_state=truth,
                fused=fused,
                agents=agent_logs,
                tracking_error_m=metrics.tracking_error_m,
                target_power_db=metrics.target_power_db,
                max_interference_db=metrics.max_interference_db,
                pair_interference_db=metrics.pair_interference_db,
                any_fallback=any(d.fallback_used is not Fallback.NONE for d in decisions),
                violation=metrics.violation,
            )
        )
    return logs


def _run_trial_args(args) -> list[StepLog]:
    cfg, trial_index = args
    return run_trial(cfg, trial_index)


def run_trials(cfg: ScenarioConfig, jobs: int = 1) -> list[list[StepLog]]:
    """All trials of the configured Monte-Carlo run, ordered by trial index."""
    indices = range(cfg.n_trials)
    if jobs <= 1:
        return [run_trial(cfg, t) for t in indices]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_trial_args, [(cfg, t) for t in indices]))


@dataclass
class TrialSummary:
    """Per-step series of one trial plus its interference/fallback counts."""

    tracking_error_m: np.ndarray
    target_power_db: np.ndarray  # NaN where no power reached the drone
    max_interference_db: np.ndarray  # NaN where nobody interfered with anybody
    violations: int
    fallback_steps: int

    @classmethod
    def from_logs(cls, logs: list[StepLog]) -> "TrialSummary":
        return cls(
            tracking_error_m=np.array([log.tracking_error_m for log in logs]),
            target_power_db=np.array(
                [np.nan if log.target_power_db is None else log.target_power_db for log in logs]
            ),
            max_interference_db=np.array(
                [np.nan if log.max_interference_db is None else log.max_interference_db for log in logs]
            ),
            violations=sum(log.violation for log in logs),
            fallback_steps=sum(log.any_fallback for log in logs),
        )


@dataclass
class MonteCarloSummary:
    """Cross-trial per-step means (dB series averaged over present values)."""

    tracking_error_m: np.ndarray
    target_power_db: np.ndarray
    max_interference_db: np.ndarray
    per_trial: list[TrialSummary]


def _nanmean_over_trials(matrix: np.ndarray) -> np.ndarray:
    mask = ~np.isnan(matrix)
    counts = mask.sum(axis=0)
    sums = np.where(mask, matrix, 0.0).sum(axis=0)
    return np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)


def summarize_trials(per_trial: list[TrialSummary]) -> MonteCarloSummary:
    return MonteCarloSummary(
        tracking_error_m=_nanmean_over_trials(np.stack([t.tracking_error_m for t in per_trial])),
        target_power_db=_nanmean_over_trials(np.stack([t.target_power_db for t in per_trial])),
        max_interference_db=_nanmean_over_trials(np.stack([t.max_interference_db for t in per_trial])),
        per_trial=per_trial,
    )


def run_monte_carlo(cfg: ScenarioConfig, n_trials: int | None = None, jobs: int = 1) -> MonteCarloSummary:
    """Run the configured trials (count overridable) and aggregate per step."""
    if n_trials is not None:
        cfg = replace(cfg, n_trials=n_trials)
    if cfg.n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    logs = run_trials(cfg, jobs=jobs)
    return summarize_trials([TrialSummary.from_logs(trial) for trial in logs])


def mean_target_power_db(logs_by_trial: list[list[StepLog]]) -> float | None:
    """Overall delivered power: linear-domain mean over every trial-step, in dB.

    Steps where nothing reached the drone count as zero linear power; returns
    None if no step delivered anything.
    """
    linear = [
        0.0 if log.target_power_db is None else 10.0 ** (log.target_power_db / 10.0)
        for trial in logs_by_trial
        for log in trial
    ]
    if not linear:
        return None
    mean = float(np.mean(linear))
    return None if mean <= 0.0 else float(10.0 * np.log10(mean))
