import numpy as np
import pytest

from hanoilab.agents import (
    AgentSpec,
    CohortProtocol,
    agent_policy,
    simulate_cohort,
    simulate_trial,
)
from hanoilab.feedback import Condition, allowed_moves
from hanoilab.toh import Move, apply_move, triangle_of


@pytest.fixture(scope="module")
def cohort20():
    specs = [
        AgentSpec(model="M2", k=1.0, gamma=0.95, rng_seed=1000 + i, target_weight=3.0)
        for i in range(20)
    ]
    return simulate_cohort(specs, CohortProtocol(condition=Condition.NUMERIC))


class TestAgentPolicy:
    def test_m4_two_action_arithmetic(self, graph4):
        # the corner state has exactly one +2 and one -2 action; k=0.5
        # gives e / (e + 1/e) on the good one
        spec = AgentSpec(model="M4", k=0.5)
        pol = agent_policy(spec, graph4, "2222")
        dist = graph4.distance_array("2222")
        probs = {
            m: p
            for m, p in pol.action_probabilities("0000")
        }
        good = next(
            m for m, s in graph4.neighbors("0000") if dist[graph4.index_of(s)] == 14
        )
        assert len(probs) == 2
        assert probs[good] == pytest.approx(np.e / (np.e + 1 / np.e), abs=1e-12)
        assert probs[good] == pytest.approx(0.8808, abs=5e-5)

    def test_m2_with_zero_gain_equals_m1(self, graph4):
        m1 = agent_policy(AgentSpec(model="M1", target_weight=2.0), graph4, "0022")
        m2 = agent_policy(AgentSpec(model="M2", k=0.0, target_weight=2.0), graph4, "0022")
        m3 = agent_policy(AgentSpec(model="M3", k=0.0, target_weight=2.0), graph4, "0022")
        assert np.max(np.abs(m1.probs - m2.probs)) < 1e-9
        assert np.max(np.abs(m1.probs - m3.probs)) < 1e-9

    def test_m1_target_indicator_prefers_bfs_greedy_moves(self, graph4):
        # strong enough indicator reward makes the most likely action set
        # exactly the distance-decreasing set, at every state
        spec = AgentSpec(model="M1", gamma=0.95, target_weight=10.0)
        pol = agent_policy(spec, graph4, "2222")
        dist = graph4.distance_array("2222")
        for i in range(graph4.n_states):
            lo, hi = graph4.indptr[i], graph4.indptr[i + 1]
            probs = pol.probs[lo:hi]
            amax = set(np.flatnonzero(probs >= probs.max() - 1e-12))
            dmin = min(dist[graph4.edge_dst[e]] for e in range(lo, hi))
            greedy = {
                e - lo for e in range(lo, hi) if dist[graph4.edge_dst[e]] == dmin
            }
            assert amax == greedy

    def test_large_gain_takes_only_good_moves(self, graph4):
        from hanoilab.feedback import feedback_signal_table
        from hanoilab.mdp import target_reward_mdp, value_iteration

        h = feedback_signal_table(value_iteration(target_reward_mdp(graph4, "0022", 0.95)))
        rng = np.random.default_rng(0)
        for model in ("M2", "M3", "M4"):
            spec = AgentSpec(model=model, k=50.0, target_weight=1.0)
            pol = agent_policy(spec, graph4, "0022")
            state = "0000"
            for _ in range(200):
                e = pol.sample_edge(graph4.index_of(state), rng)
                assert h[e] == 2.0
                state = graph4.states[graph4.edge_dst[e]]
                if state == "0022":
                    state = "0000"

    def test_policies_are_proper_distributions(self, graph4):
        for model in ("M1", "M2", "M3", "M4"):
            pol = agent_policy(AgentSpec(model=model, k=0.7, target_weight=2.0), graph4, "1112")
            rows = np.bincount(graph4.edge_src, weights=pol.probs, minlength=graph4.n_states)
            assert np.allclose(rows, 1.0, atol=1e-9)

    def test_unknown_model_rejected(self):
        with pytest.raises(ValueError):
            AgentSpec(model="M5")


class TestSimulateTrial:
    def test_greedy_limit_agent_solves_optimally(self, graph4):
        # indicator weight scaled x50 concentrates the softmax onto the
        # greedy set; the seeded rollout solves in exactly m_min moves
        for target in ("2222", "1112", "0022"):
            m_min = graph4.distance("0000", target)
            spec = AgentSpec(model="M1", gamma=0.95, target_weight=50.0)
            rec = simulate_trial(
                spec, Condition.NO_FEEDBACK, 4, "0000", target,
                allowed_moves(m_min), np.random.default_rng(1), graph=graph4,
            )
            assert rec.solved and rec.m_used == m_min

    def test_budget_exhaustion(self, graph4):
        spec = AgentSpec(model="M1", target_weight=0.0, rng_seed=3)
        rec = simulate_trial(
            spec, Condition.NO_FEEDBACK, 4, "0000", "2222", 2,
            np.random.default_rng(3), graph=graph4,
        )
        assert not rec.solved
        assert rec.pct == 0.0
        assert rec.score.total == 0

    def test_same_seed_identical_records(self, graph4):
        spec = AgentSpec(model="M2", k=1.0, target_weight=3.0)
        recs = [
            simulate_trial(
                spec, Condition.NUMERIC, 4, "0000", "0022", 18,
                np.random.default_rng(77), graph=graph4,
            )
            for _ in range(2)
        ]
        assert recs[0] == recs[1]

    def test_numeric_condition_labels_every_move(self, graph4):
        spec = AgentSpec(model="M1", target_weight=3.0)
        rec = simulate_trial(
            spec, Condition.NUMERIC, 4, "0000", "0022", 18,
            np.random.default_rng(5), graph=graph4,
        )
        assert all(m.label in ("good move +2", "bad move -2") for m in rec.moves)
        goods = sum(1 for m in rec.moves if m.label == "good move +2")
        assert rec.score.feedback_bonus == 2 * (goods - (rec.m_used - goods))

    def test_no_feedback_condition_has_no_labels(self, graph4):
        spec = AgentSpec(model="M1", target_weight=3.0)
        rec = simulate_trial(
            spec, Condition.NO_FEEDBACK, 4, "0000", "0022", 18,
            np.random.default_rng(5), graph=graph4,
        )
        assert all(m.label is None and m.requested is None for m in rec.moves)

    def test_subgoal_latched_once_visited(self, graph4):
        spec = AgentSpec(model="M1", target_weight=50.0)
        rec = simulate_trial(
            spec, Condition.SUBGOAL, 4, "0000", "0022", 18,
            np.random.default_rng(2), graph=graph4,
        )
        assert rec.subgoal == "1110"
        visited = rec.subgoal in rec.states()
        assert rec.score.subgoal_bonus == (5 if visited else 0)


class TestSimulateCohort:
    def test_record_counts(self, cohort20):
        assert len(cohort20) == 300
        assert sum(1 for r in cohort20 if r.phase == "training") == 200
        assert sum(1 for r in cohort20 if r.phase == "transfer") == 100

    def test_disk_counts_by_phase(self, cohort20):
        assert all(r.n == 4 for r in cohort20 if r.phase == "training")
        assert all(r.n == 5 for r in cohort20 if r.phase == "transfer")

    def test_targets_never_in_start_triangle(self, cohort20):
        assert all(triangle_of(r.target) != "T1" for r in cohort20)

    def test_transfer_records_have_no_feedback_fields(self, cohort20):
        for r in cohort20:
            if r.phase == "transfer":
                assert r.subgoal is None
                assert all(m.label is None and m.requested is None for m in r.moves)

    def test_chains_replay_through_puzzle_rules(self, cohort20):
        for rec in cohort20:
            rec.validate_chain()
            state = rec.start
            for mv in rec.moves:
                state = apply_move(state, Move(mv.from_peg, mv.to_peg))
                assert state == mv.post
            assert rec.solved == (state == rec.target and rec.m_used <= rec.m_allowed)

    def test_same_seeds_bit_identical(self):
        specs = [AgentSpec(model="M1", rng_seed=5, target_weight=3.0)]
        a = simulate_cohort(specs, CohortProtocol(condition=Condition.NO_FEEDBACK))
        b = simulate_cohort(specs, CohortProtocol(condition=Condition.NO_FEEDBACK))
        assert a == b

    def test_disjoint_seeds_differ(self):
        a = simulate_cohort([AgentSpec(model="M1", rng_seed=5, target_weight=3.0)])
        b = simulate_cohort([AgentSpec(model="M1", rng_seed=6, target_weight=3.0)])
        assert a != b

    def test_trial_indices_run_1_to_15(self, cohort20):
        by_agent = {}
        for r in cohort20:
            by_agent.setdefault(r.session_id, []).append(r.trial_index)
        for indices in by_agent.values():
            assert indices == list(range(1, 16))
