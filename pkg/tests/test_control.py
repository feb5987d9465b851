import math

import numpy as np
import pytest

from cstj_sim.control import (
    DecisionRecord,
    Fallback,
    admissible_set,
    ct_decide,
    sequential_decide,
    solve_jamming,
    tracking_objective,
)
from cstj_sim.dynamics import ActionGrid, AgentState, TargetState, enumerate_actions
from cstj_sim.geometry_rf import AntennaParams, RfParams, aggregate_power_db, received_power_db
from cstj_sim.sensing import SensingParams
from oracles import solve_jamming_reference

ANT = AntennaParams(100.0, math.radians(80.0))
RF = RfParams(32.4, 2.5, 6.0206, (None, -10.0, 0.0, 7.0, 10.0), -50.0)
SENSING = SensingParams(
    p_d_max=0.99,
    eta_per_m=0.02,
    r0_m=2.0,
    sigma_theta_rad=math.pi / 50,
    sigma_phi_rad=math.pi / 50,
    sigma_rho0_m=2.0,
    beta_rho=0.05,
    clutter_rate=15.0,
    rho_max_m=100.0 * math.sqrt(3.0),
)
GRID = ActionGrid((1.0, 3.0, 5.0), 2, 4)


def _pred(position) -> TargetState:
    return TargetState(position, [0.0, 0.0, 0.0])


class TestTrackingObjective:
    def test_inside_full_detection(self):
        assert tracking_objective(_pred([1.0, 0, 0]), [0.5, 0, 0], SENSING) == SENSING.p_d_max

    def test_beyond_cutoff(self):
        assert tracking_objective(_pred([51.5, 0, 0]), [0.0, 0, 0], SENSING) == 0.0

    def test_argmax_matches_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            target = _pred(rng.uniform(0, 40, 3))
            actions = enumerate_actions(AgentState(0, rng.uniform(0, 40, 3)), GRID)
            scores = [tracking_objective(target, a, SENSING) for a in actions]
            best = int(np.argmax(scores))
            assert scores[best] == max(scores)


class TestAdmissibleSet:
    def test_zero_threshold_keeps_everything_in_range(self):
        target = _pred([5.0, 0, 0])
        actions = enumerate_actions(AgentState(0, [0.0, 0, 0]), GRID)
        kept = admissible_set(target, actions, SENSING, 0.0)
        assert len(kept) == len(actions)  # all candidates well within 51.5 m

    def test_unit_threshold_empties(self):
        target = _pred([5.0, 0, 0])
        actions = enumerate_actions(AgentState(0, [0.0, 0, 0]), GRID)
        assert len(admissible_set(target, actions, SENSING, 1.0)) == 0

    def test_cutoff_distance_at_point_eight(self):
        # threshold 0.8 keeps exactly the candidates nearer than 11.5 m
        cutoff = SENSING.r0_m + (SENSING.p_d_max - 0.8) / SENSING.eta_per_m
        assert cutoff == pytest.approx(11.5)
        target = _pred([0.0, 0, 0])
        candidates = np.array([[d, 0.0, 0.0] for d in np.linspace(0.5, 20.0, 100)])
        kept = admissible_set(target, candidates, SENSING, 0.8)
        expected = candidates[np.linalg.norm(candidates, axis=1) < cutoff - 1e-9]
        np.testing.assert_allclose(kept, expected)

    def test_monotone_in_threshold(self):
        rng = np.random.default_rng(1)
        target = _pred(rng.uniform(0, 30, 3))
        actions = enumerate_actions(AgentState(0, rng.uniform(0, 30, 3)), GRID)
        loose = admissible_set(target, actions, SENSING, 0.0)
        tight = admissible_set(target, actions, SENSING, 0.85)
        as_set = {tuple(row) for row in loose}
        assert all(tuple(row) in as_set for row in tight)

    def test_order_preserved(self):
        target = _pred([3.0, 0, 0])
        actions = enumerate_actions(AgentState(0, [0.0, 0, 0]), GRID)
        kept = admissible_set(target, actions, SENSING, 0.5)
        rows = [tuple(r) for r in actions]
        indices = [rows.index(tuple(r)) for r in kept]
        assert indices == sorted(indices)


def _decision(agent_id, position, power_index, aim):
    return DecisionRecord(agent_id, position, power_index, aim, None, Fallback.NONE)


class TestSolveJamming:
    def test_unconstrained_picks_nearest_at_max_power(self):
        target = _pred([10.0, 0.0, 0.0])
        candidates = np.array([[4.0, 0, 0], [2.0, 0, 0], [6.0, 0, 0]])
        rec = solve_jamming(0, candidates, target, [], ANT, RF, SENSING)
        assert rec.fallback_used is Fallback.NONE
        assert rec.power_index == len(RF.power_levels_db) - 1
        np.testing.assert_array_equal(rec.chosen_position, [6.0, 0, 0])  # nearest to the drone
        assert rec.objective_value_db == pytest.approx(10.0 - (32.4 + 25 * math.log10(4.0) + 6.0206))

    def test_saturating_interference_forces_tracking_fallback(self):
        # a committed transmitter one metre from every candidate, all candidates
        # inside its cone: every pairing violates the inbound limit
        target = _pred([0.0, 0.0, 30.0])
        half = ANT.opening_angle_rad / 2
        directions = [
            np.array([math.sin(half * f) * math.cos(t), math.sin(half * f) * math.sin(t), math.cos(half * f)])
            for f in (0.0, 0.5, 0.9)
            for t in (0.0, 2.0, 4.0)
        ]
        jammer_pos = np.array([0.0, 0.0, 0.0])
        candidates = np.array([jammer_pos + d for d in directions])  # all at 1 m
        jammer = _decision(7, jammer_pos, len(RF.power_levels_db) - 1, [0.0, 0.0, 10.0])
        rec = solve_jamming(8, candidates, target, [jammer], ANT, RF, SENSING)
        assert rec.fallback_used is Fallback.TRACKING
        assert rec.power_index == 0
        received = received_power_db(10.0, jammer_pos, [0.0, 0.0, 10.0], ANT, RF, rec.chosen_position)
        assert received == pytest.approx(10.0 - 38.4206)  # indeed above the -50 dB limit
        scores = [tracking_objective(target, c, SENSING) for c in candidates]
        np.testing.assert_array_equal(rec.chosen_position, candidates[int(np.argmax(scores))])

    def test_power_off_fallback_keeps_inbound_safe_candidates(self):
        # the deciding agent would jam the committed receiver at any level from
        # anywhere nearby, but the receiver itself is silent, so staying off works
        target = _pred([0.0, 0.0, 5.0])
        receiver = _decision(3, np.array([0.0, 0.0, 2.5]), 0, [0.0, 0.0, 5.0])  # off, receives only
        candidates = np.array([[0.0, 0.0, 2.0], [0.0, 0.5, 2.0]])
        rec = solve_jamming(4, candidates, target, [receiver], ANT, RF, SENSING)
        assert rec.fallback_used is Fallback.POWER_OFF
        assert rec.power_index == 0
        np.testing.assert_array_equal(rec.chosen_position, [0.0, 0.0, 2.0])  # best tracking

    def test_matches_reference_enumeration(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            target = _pred(rng.uniform(10, 60, 3))
            n_candidates = int(rng.integers(1, 19))
            center = rng.uniform(10, 60, 3)
            candidates = center + rng.uniform(-6, 6, (n_candidates, 3))
            decided = []
            for i in range(int(rng.integers(0, 4))):
                decided.append(
                    DecisionRecord(
                        i,
                        center + rng.uniform(-12, 12, 3),
                        int(rng.integers(0, len(RF.power_levels_db))),
                        rng.uniform(10, 60, 3),
                        None,
                        Fallback.NONE,
                    )
                )
            got = solve_jamming(9, candidates, target, decided, ANT, RF, SENSING)
            want = solve_jamming_reference(9, candidates, target, decided, ANT, RF, SENSING)
            assert got.power_index == want.power_index
            assert got.fallback_used is want.fallback_used
            np.testing.assert_allclose(got.chosen_position, want.chosen_position)

    def test_non_off_decision_recheck_passes_exactly(self):
        rng = np.random.default_rng(3)
        checked = 0
        for _ in range(100):
            target = _pred(rng.uniform(10, 60, 3))
            center = rng.uniform(10, 60, 3)
            candidates = center + rng.uniform(-6, 6, (int(rng.integers(1, 19)), 3))
            decided = [
                DecisionRecord(
                    i,
                    center + rng.uniform(-12, 12, 3),
                    int(rng.integers(0, len(RF.power_levels_db))),
                    rng.uniform(10, 60, 3),
                    None,
                    Fallback.NONE,
                )
                for i in range(int(rng.integers(0, 4)))
            ]
            rec = solve_jamming(9, candidates, target, decided, ANT, RF, SENSING)
            if rec.fallback_used is not Fallback.NONE or rec.power_index == 0:
                continue
            checked += 1
            # inbound: what the new agent receives at its chosen spot
            inbound = []
            for other in decided:
                level = RF.power_levels_db[other.power_index]
                if level is None:
                    continue
                c = received_power_db(level, other.chosen_position, other.aim_point, ANT, RF, rec.chosen_position)
                if c is not None:
                    inbound.append(c)
            total = aggregate_power_db(inbound)
            assert total is None or total < RF.interference_threshold_db
            # outbound: what every committed receiver now absorbs
            for receiver in decided:
                vals = []
                for sender in decided + [rec]:
                    if sender.agent_id == receiver.agent_id:
                        continue
                    level = RF.power_levels_db[sender.power_index]
                    if level is None:
                        continue
                    c = received_power_db(
                        level, sender.chosen_position, sender.aim_point, ANT, RF, receiver.chosen_position
                    )
                    if c is not None:
                        vals.append(c)
                total = aggregate_power_db(vals)
                assert total is None or total < RF.interference_threshold_db
        assert checked >= 10  # the sweep must actually exercise transmitting decisions

    def test_objective_monotone_in_power(self):
        # fixed candidate toward a fixed drone: delivered power rises with the level
        values = [
            received_power_db(level, [4.0, 0, 0], [10.0, 0, 0], ANT, RF, [10.0, 0, 0])
            for level in RF.power_levels_db[1:]
        ]
        assert all(v is not None for v in values)
        assert all(a < b for a, b in zip(values, values[1:]))

    def test_db_shift_leaves_choices_unchanged(self):
        rng = np.random.default_rng(4)
        for shift in (-7.0, 13.0):
            shifted_rf = RfParams(
                32.4,
                2.5,
                6.0206,
                (None, *[l + shift for l in RF.power_levels_db[1:]]),
                RF.interference_threshold_db + shift,
            )
            for _ in range(30):
                target = _pred(rng.uniform(10, 60, 3))
                center = rng.uniform(10, 60, 3)
                candidates = center + rng.uniform(-6, 6, (12, 3))
                decided = [
                    DecisionRecord(
                        i,
                        center + rng.uniform(-12, 12, 3),
                        int(rng.integers(0, len(RF.power_levels_db))),
                        rng.uniform(10, 60, 3),
                        None,
                        Fallback.NONE,
                    )
                    for i in range(2)
                ]
                base = solve_jamming(9, candidates, target, decided, ANT, RF, SENSING)
                moved = solve_jamming(9, candidates, target, decided, ANT, shifted_rf, SENSING)
                assert base.power_index == moved.power_index
                assert base.fallback_used is moved.fallback_used
                np.testing.assert_allclose(base.chosen_position, moved.chosen_position)


class TestSequentialDecide:
    def _agents(self, positions):
        return [AgentState(i, p) for i, p in enumerate(positions)]

    def test_single_agent_equals_direct_solve(self):
        agent = AgentState(0, np.array([20.0, 20.0, 20.0]))
        target = _pred([25.0, 20.0, 20.0])
        actions = enumerate_actions(agent, GRID)
        candidates = admissible_set(target, actions, SENSING, 0.8)
        direct = solve_jamming(0, candidates, target, [], ANT, RF, SENSING)
        seq = sequential_decide([agent], [target], [actions], ANT, RF, SENSING, 0.8)
        assert len(seq) == 1
        assert seq[0].power_index == direct.power_index
        np.testing.assert_array_equal(seq[0].chosen_position, direct.chosen_position)

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        positions = rng.uniform(20, 40, (4, 3))
        agents = self._agents(positions)
        targets = [_pred(rng.uniform(20, 40, 3)) for _ in agents]
        actions = [enumerate_actions(a, GRID) for a in agents]
        first = sequential_decide(agents, targets, actions, ANT, RF, SENSING, 0.8)
        second = sequential_decide(agents, targets, actions, ANT, RF, SENSING, 0.8)
        for a, b in zip(first, second):
            assert a.power_index == b.power_index
            np.testing.assert_array_equal(a.chosen_position, b.chosen_position)

    def test_posthoc_audit_when_no_fallback(self):
        rng = np.random.default_rng(6)
        audited = 0
        for _ in range(40):
            spot = rng.uniform(20, 60, 3)
            agents = self._agents(spot + rng.uniform(-4, 4, (4, 3)))
            target = _pred(spot + rng.uniform(-3, 3, 3))
            targets = [target] * 4
            actions = [enumerate_actions(a, GRID) for a in agents]
            decisions = sequential_decide(agents, targets, actions, ANT, RF, SENSING, 0.8)
            if any(d.fallback_used is not Fallback.NONE for d in decisions):
                continue
            audited += 1
            for receiver in decisions:
                vals = []
                for sender in decisions:
                    if sender.agent_id == receiver.agent_id:
                        continue
                    level = RF.power_levels_db[sender.power_index]
                    if level is None:
                        continue
                    c = received_power_db(
                        level, sender.chosen_position, sender.aim_point, ANT, RF, receiver.chosen_position
                    )
                    if c is not None:
                        vals.append(c)
                total = aggregate_power_db(vals)
                assert total is None or total < RF.interference_threshold_db
        assert audited >= 10

    def test_empty_candidate_set_takes_tracking_fallback(self):
        agent = AgentState(0, np.array([0.0, 0.0, 0.0]))
        far_target = _pred([40.0, 0.0, 0.0])  # unreachable above threshold: best is 5 m closer
        actions = enumerate_actions(agent, GRID)
        decisions = sequential_decide([agent], [far_target], [actions], ANT, RF, SENSING, 0.8)
        assert decisions[0].fallback_used is Fallback.TRACKING
        assert decisions[0].power_index == 0
        scores = [tracking_objective(far_target, a, SENSING) for a in actions]
        np.testing.assert_array_equal(decisions[0].chosen_position, actions[int(np.argmax(scores))])

    def test_all_off_causes_no_interference(self):
        rng = np.random.default_rng(7)
        agents = self._agents(rng.uniform(20, 40, (3, 3)))
        decisions = [
            DecisionRecord(a.id, a.position, 0, a.position + [1.0, 0, 0], None, Fallback.NONE)
            for a in agents
        ]
        for receiver in decisions:
            vals = []
            for sender in decisions:
                if sender.agent_id == receiver.agent_id:
                    continue
                level = RF.power_levels_db[sender.power_index]
                if level is not None:
                    vals.append(0.0)
            assert aggregate_power_db(vals) is None

    def test_unsorted_agents_rejected(self):
        agents = [AgentState(1, [0.0, 0, 0]), AgentState(0, [1.0, 0, 0])]
        with pytest.raises(ValueError, match="increasing id"):
            sequential_decide(agents, [_pred([5.0, 0, 0])] * 2, [np.zeros((1, 3))] * 2, ANT, RF, SENSING, 0.8)


class TestCtDecide:
    def test_single_agent_best_tracking_position(self):
        agent = AgentState(0, np.array([0.0, 0.0, 0.0]))
        target = _pred([40.0, 0.0, 0.0])
        actions = enumerate_actions(agent, GRID)
        decisions = ct_decide([agent], [target], [actions], SENSING, 3)
        scores = [tracking_objective(target, a, SENSING) for a in actions]
        np.testing.assert_array_equal(decisions[0].chosen_position, actions[int(np.argmax(scores))])

    def test_power_is_always_the_constant(self):
        rng = np.random.default_rng(8)
        agents = [AgentState(i, rng.uniform(0, 50, 3)) for i in range(5)]
        targets = [_pred(rng.uniform(0, 50, 3)) for _ in agents]
        actions = [enumerate_actions(a, GRID) for a in agents]
        decisions = ct_decide(agents, targets, actions, SENSING, 3)
        assert all(d.power_index == 3 for d in decisions)
        assert all(d.fallback_used is Fallback.NONE for d in decisions)
