"""Cascaded tracking-then-jamming controller.

Each agent first filters its move set down to candidates that keep the
predicted detection probability above a threshold, then picks the
(move, power level) pair that maximizes power delivered to the predicted
drone position subject to two interference limits: what the agent itself
would receive from already-committed teammates, and what its transmission
would add at each committed teammate. Agents decide sequentially in id
order, so later agents see all earlier commitments.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .dynamics import TargetState
from .geometry_rf import (
    AntennaParams,
    RfParams,
    aggregate_power_db,
    db_to_linear,
    received_power_db,
    received_power_map,
)
from .sensing import SensingParams, detection_prob_at_distance


class Fallback(enum.Enum):
    """Degraded decision modes used when the jamming step is infeasible."""

    NONE = "none"
    TRACKING = "tracking_fallback"
    POWER_OFF = "power_off_fallback"


@dataclass
class DecisionRecord:
    """One agent's committed move, transmit level, and antenna aim for a step."""

    agent_id: int
    chosen_position: np.ndarray
    power_index: int  # index into RfParams.power_levels_db; 0 = off
    aim_point: np.ndarray  # the agent's own predicted drone position
    objective_value_db: float | None
    fallback_used: Fallback

    def __post_init__(self):
        self.chosen_position = np.asarray(self.chosen_position, dtype=float).reshape(3)
        self.aim_point = np.asarray(self.aim_point, dtype=float).reshape(3)


def tracking_objective(predicted_target: TargetState, candidate_pos, p: SensingParams) -> float:
    """Detection probability of the predicted drone from a candidate position."""
    delta = predicted_target.position - np.asarray(candidate_pos, dtype=float)
    return detection_prob_at_distance(np.sqrt((delta * delta).sum()), p)


def _tracking_scores(predicted_target: TargetState, candidates, p: SensingParams) -> np.ndarray:
    delta = np.asarray(candidates, dtype=float) - predicted_target.position
    return detection_prob_at_distance(np.sqrt((delta * delta).sum(axis=-1)), p)


def admissible_set(predicted_target: TargetState, actions, p: SensingParams, threshold: float) -> np.ndarray:
    """Actions whose tracking objective strictly exceeds the threshold, order kept."""
    actions = np.asarray(actions, dtype=float)
    return actions[_tracking_scores(predicted_target, actions, p) > threshold]


def _within_limit(contributions_db, limit_db: float) -> bool:
    total = aggregate_power_db(contributions_db)
    return total is None or total < limit_db


def solve_jamming(
    agent_id: int,
    candidates,
    predicted_target: TargetState,
    decided,
    ant: AntennaParams,
    rf: RfParams,
    sensing: SensingParams,
) -> DecisionRecord:
    """Pick the feasible (candidate, power level) pair with maximal delivered power.

    Feasibility: (a) the aggregate power the agent would receive at the
    candidate position from committed transmitters stays below the
    interference threshold, and (b) for every committed teammate, the
    aggregate of this agent's new contribution plus all other committed
    transmitters stays below it too. Delivered power counts as zero when the
    predicted drone lies outside the candidate's cone or the level is off.
    Ties break toward the lower power level, then the lower candidate index.

    Fallback ladder when no transmitting pair is feasible: move to the
    best-tracking candidate that still satisfies (a) with the antenna off;
    if even (a) fails everywhere, take the best-tracking candidate outright.
    """
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    if len(candidates) == 0:
        raise ValueError("solve_jamming needs a nonempty candidate set")
    levels = rf.power_levels_db
    limit_db = rf.interference_threshold_db
    aim = predicted_target.position.copy()
    decided = list(decided)
    transmitting = [r for r in decided if levels[r.power_index] is not None]

    # power arriving at each candidate from committed transmitters, id order
    inbound: list[list[float]] = [[] for _ in range(len(candidates))]
    for rec in transmitting:
        contrib = received_power_map(
            levels[rec.power_index], rec.chosen_position, rec.aim_point, ant, rf, candidates
        )
        for k in np.flatnonzero(~np.isnan(contrib)):
            inbound[int(k)].append(float(contrib[k]))
    inbound_ok = np.array([_within_limit(vals, limit_db) for vals in inbound])

    # what each committed receiver already absorbs from its other teammates
    base_load: dict[int, list[float]] = {}
    coupling: dict[int, np.ndarray] = {}
    for rec in decided:
        vals = []
        for other in transmitting:
            if other.agent_id == rec.agent_id:
                continue
            c = received_power_db(
                levels[other.power_index], other.chosen_position, other.aim_point, ant, rf, rec.chosen_position
            )
            if c is not None:
                vals.append(c)
        base_load[rec.agent_id] = vals
        # per-candidate gain toward this receiver for a 0 dB transmission
        coupling[rec.agent_id] = received_power_map(0.0, candidates, aim, ant, rf, rec.chosen_position)

    # delivered power toward the predicted drone for a 0 dB transmission
    delivery = received_power_map(0.0, candidates, aim, ant, rf, aim)

    best_key = None
    best = None
    any_transmitting_feasible = False
    for k in range(len(candidates)):
        if not inbound_ok[k]:
            continue
        for w, level in enumerate(levels):
            feasible = True
            for rec in decided:
                vals = base_load[rec.agent_id]
                gain = coupling[rec.agent_id][k]
                if level is not None and not np.isnan(gain):
                    vals = vals + [float(level + gain)]
                if not _within_limit(vals, limit_db):
                    feasible = False
                    break
            if not feasible:
                continue
            if level is not None:
                any_transmitting_feasible = True
            if level is None or np.isnan(delivery[k]):
                objective_db = None
                objective_lin = 0.0
            else:
                objective_db = float(level + delivery[k])
                objective_lin = float(db_to_linear(objective_db))
            key = (objective_lin, -w, -k)
            if best_key is None or key > best_key:
                best_key = key
                best = (k, w, objective_db)
    if any_transmitting_feasible:
        k, w, objective_db = best
        return DecisionRecord(agent_id, candidates[k].copy(), w, aim, objective_db, Fallback.NONE)

    scores = _tracking_scores(predicted_target, candidates, sensing)
    clear = np.flatnonzero(inbound_ok)
    if len(clear) > 0:
        k = int(clear[int(np.argmax(scores[clear]))])
        return DecisionRecord(agent_id, candidates[k].copy(), 0, aim, None, Fallback.POWER_OFF)
    k = int(np.argmax(scores))
    return DecisionRecord(agent_id, candidates[k].copy(), 0, aim, None, Fallback.TRACKING)


def sequential_decide(
    agents,
    predicted_targets,
    action_sets,
    ant: AntennaParams,
    rf: RfParams,
    sensing: SensingParams,
    tracking_threshold: float,
) -> list[DecisionRecord]:
    """Decide all agents in ascending id order, each seeing prior commitments.

    An agent whose thresholded candidate set comes up empty skips the jamming
    step entirely: it takes the best-tracking action from its full move set
    with the antenna off.
    """
    ids = [a.id for a in agents]
    if any(b <= a for a, b in zip(ids, ids[1:])):
        raise ValueError("agents must be ordered by strictly increasing id")
    decided: list[DecisionRecord] = []
    for agent, predicted, actions in zip(agents, predicted_targets, action_sets):
        candidates = admissible_set(predicted, actions, sensing, tracking_threshold)
        if len(candidates) == 0:
            scores = _tracking_scores(predicted, actions, sensing)
            k = int(np.argmax(scores))
            record = DecisionRecord(
                agent.id, np.asarray(actions, dtype=float)[k].copy(), 0,
                predicted.position.copy(), None, Fallback.TRACKING,
            )
        else:
            record = solve_jamming(agent.id, candidates, predicted, decided, ant, rf, sensing)
        decided.append(record)
    return decided


def ct_decide(
    agents,
    predicted_targets,
    action_sets,
    sensing: SensingParams,
    power_index: int,
) -> list[DecisionRecord]:
    """Tracking-only baseline: best-tracking move, fixed power, no constraints."""
    decisions = []
    for agent, predicted, actions in zip(agents, predicted_targets, action_sets):
        actions = np.asarray(actions, dtype=float)
        k = int(np.argmax(_tracking_scores(predicted, actions, sensing)))
        decisions.append(
            DecisionRecord(agent.id, actions[k].copy(), power_index, predicted.position.copy(), None, Fallback.NONE)
        )
    return decisions
