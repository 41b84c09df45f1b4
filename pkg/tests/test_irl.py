import numpy as np
import pytest

from hanoilab.agents import AgentSpec, agent_policy, simulate_trial
from hanoilab.errors import NotAdjacent, TooFewTrajectories
from hanoilab.feedback import Condition
from hanoilab.irl import (
    Demonstrations,
    FeatureMap,
    IrlConfig,
    cross_validate,
    edge_rewards,
    fit,
    likelihood_gradient,
    log_likelihood,
    reward_map_csv,
    reward_map_export,
    soft_threshold,
)
from hanoilab.toh import Move

GAMMA = 0.95


def make_demos(graph, target="0022", count=12, weight=8.0, seed=29, model="M1", k=1.0):
    spec = AgentSpec(model=model, k=k, gamma=GAMMA, target_weight=weight)
    policy = agent_policy(spec, graph, target)
    paths = []
    for s in range(count):
        rec = simulate_trial(
            spec, Condition.NO_FEEDBACK, graph.n, "0" * graph.n, target, 18,
            np.random.default_rng([seed, s]), graph=graph, policy=policy,
        )
        paths.append([(m.pre, Move(m.from_peg, m.to_peg)) for m in rec.moves])
    return Demonstrations.from_steps(graph, paths, target=target, absorbing=True)


@pytest.fixture(scope="module")
def demos(graph4):
    return make_demos(graph4)


def fd_gradient(demos, weights, featmap, gamma, step=1e-5):
    grad = np.empty(featmap.size)
    for j in range(featmap.size):
        hi = weights.copy()
        hi[j] += step
        lo = weights.copy()
        lo[j] -= step
        grad[j] = (
            log_likelihood(demos, hi, featmap, gamma)
            - log_likelihood(demos, lo, featmap, gamma)
        ) / (2 * step)
    return grad


class TestFeatureMap:
    def test_all_states_dimension(self, graph4):
        assert FeatureMap.all_states(graph4).size == 81

    def test_subset8_dimension_and_states(self, graph4):
        fm = FeatureMap.subset8(graph4)
        assert fm.size == 8
        assert set(fm.states) == {
            "2200", "1100", "1110", "2220", "0012", "2212", "1121", "0021",
        }

    def test_arrival_feature_indexes_successor(self, graph4):
        fm = FeatureMap.all_states(graph4)
        fidx = fm.arrival_feature(graph4)
        assert (fidx == graph4.edge_dst).all()

    def test_edge_rewards_collect_on_arrival(self, graph4):
        fm = FeatureMap.subset8(graph4)
        w = np.zeros(8)
        w[fm.states.index("1110")] = 3.0
        r = edge_rewards(graph4, fm, w)
        t = graph4.index_of("1110")
        assert (r[graph4.edge_dst == t] == 3.0).all()
        assert (r[graph4.edge_dst != t] == 0.0).all()


class TestDemonstrations:
    def test_counts(self, graph4, demos):
        ec = demos.edge_counts()
        assert ec.sum() == demos.n_steps
        assert demos.state_counts().sum() == demos.n_steps

    def test_initial_states(self, demos):
        assert set(demos.initial_states()) == {"0000"}

    def test_select_subsets(self, demos):
        sub = demos.select([0, 2])
        assert sub.n_paths == 2
        assert sub.paths_edges[0] is demos.paths_edges[0]

    def test_illegal_step_rejected(self, graph4):
        with pytest.raises(NotAdjacent):
            Demonstrations.from_steps(graph4, [[("0000", Move(1, 2))]])


class TestLogLikelihood:
    def test_always_nonpositive(self, graph4, demos):
        rng = np.random.default_rng(0)
        fm = FeatureMap.subset8(graph4)
        for _ in range(3):
            assert log_likelihood(demos, rng.normal(0, 1, 8), fm, GAMMA) < 0

    def test_zero_weights_symmetric_start_step_costs_log2(self, graph4):
        fm = FeatureMap.all_states(graph4)
        one_step = Demonstrations.from_steps(graph4, [[("0000", Move(0, 1))]])
        ll = log_likelihood(one_step, np.zeros(81), fm, GAMMA)
        assert ll == pytest.approx(-np.log(2.0), abs=1e-9)

    def test_single_step_matches_policy_log_prob(self, graph4):
        spec = AgentSpec(model="M1", gamma=GAMMA, target_weight=5.0)
        pol = agent_policy(spec, graph4, "0022")
        fm = FeatureMap.all_states(graph4)
        w = np.zeros(81)
        w[graph4.index_of("0022")] = 5.0
        step = [("0000", Move(0, 1))]
        ll = log_likelihood(Demonstrations.from_steps(graph4, [step]), w, fm, GAMMA)
        assert ll == pytest.approx(np.log(pol.prob("0000", "1000")), abs=1e-9)

    def test_duplicating_demos_doubles_loglik(self, graph4, demos):
        fm = FeatureMap.subset8(graph4)
        w = np.full(8, 0.3)
        once = log_likelihood(demos, w, fm, GAMMA)
        doubled = Demonstrations(
            graph=graph4, paths_edges=demos.paths_edges * 2, target=demos.target,
            absorbing=True,
        )
        assert log_likelihood(doubled, w, fm, GAMMA) == pytest.approx(2 * once, rel=1e-12)

    def test_invariant_to_path_order(self, graph4, demos):
        fm = FeatureMap.subset8(graph4)
        w = np.full(8, -0.2)
        shuffled = Demonstrations(
            graph=graph4, paths_edges=tuple(reversed(demos.paths_edges)),
            target=demos.target, absorbing=True,
        )
        assert log_likelihood(demos, w, fm, GAMMA) == log_likelihood(shuffled, w, fm, GAMMA)

    def test_reward_shift_invariance(self, graph4, demos):
        # adding a constant to every state reward leaves the policy alone
        # on pooled, target-free data (no absorbing state to pin the scale)
        pooled = Demonstrations(graph=graph4, paths_edges=demos.paths_edges, target=None)
        fm = FeatureMap.all_states(graph4)
        rng = np.random.default_rng(4)
        w = rng.normal(0, 1, 81)
        base = log_likelihood(pooled, w, fm, GAMMA)
        shifted = log_likelihood(pooled, w + 2.5, fm, GAMMA)
        assert shifted == pytest.approx(base, abs=1e-9)


class TestGradient:
    @pytest.mark.parametrize("mode", ["all_states", "subset8"])
    def test_matches_central_differences(self, graph4, demos, mode):
        fm = FeatureMap.for_mode(mode, graph4)
        rng = np.random.default_rng(17)
        for _ in range(3):
            w = rng.normal(0, 1, fm.size)
            an = likelihood_gradient(demos, w, fm, GAMMA)
            fd = fd_gradient(demos, w, fm, GAMMA)
            np.testing.assert_allclose(an, fd, rtol=1e-5, atol=1e-6)

    def test_gradient_near_zero_at_unpenalized_optimum(self, graph4, demos):
        fm = FeatureMap.subset8(graph4)
        out = fit(demos, fm, 0.0, IrlConfig(tol=1e-9, max_iter=4000))
        grad = likelihood_gradient(demos, out.weights, fm, GAMMA)
        assert np.max(np.abs(grad)) < 1e-3

    def test_unvisited_far_feature_has_no_empirical_mass(self, graph4):
        # a lone demo near the start never collects the far corner feature:
        # its gradient is the pure model-expectation term, far smaller than
        # the gradient on the state the demo actually reached
        fm = FeatureMap.all_states(graph4)
        one = Demonstrations.from_steps(graph4, [[("0000", Move(0, 1))]])
        far = graph4.index_of("2222")
        near = graph4.index_of("1000")
        assert one.edge_counts()[graph4.edge_dst == far].sum() == 0
        grad = likelihood_gradient(one, np.zeros(81), fm, GAMMA)
        assert abs(grad[far]) < abs(grad[near])


class TestFit:
    def test_soft_threshold(self):
        x = np.array([-2.0, -0.5, 0.0, 0.5, 2.0])
        np.testing.assert_allclose(soft_threshold(x, 1.0), [-1.0, 0.0, 0.0, 0.0, 1.0])

    def test_huge_lambda_gives_exact_zero(self, graph4, demos):
        fm = FeatureMap.subset8(graph4)
        g0 = likelihood_gradient(demos, np.zeros(8), fm, GAMMA)
        lam = 10.0 * float(np.max(np.abs(g0)))
        out = fit(demos, fm, lam, IrlConfig())
        assert np.count_nonzero(out.weights) == 0

    def test_train_loglik_nonincreasing_in_lambda(self, graph4, demos):
        fm = FeatureMap.subset8(graph4)
        cfg = IrlConfig(tol=1e-8, max_iter=4000)
        w0 = None
        logls = []
        for lam in (0.0, 0.5, 1.0, 2.0, 4.0):
            out = fit(demos, fm, lam, cfg, w0=w0)
            w0 = out.weights
            logls.append(out.train_loglik)
        for a, b in zip(logls, logls[1:]):
            assert b <= a + 1e-6

    def test_nonzero_count_nonincreasing_in_lambda(self, graph4, demos):
        fm = FeatureMap.subset8(graph4)
        cfg = IrlConfig(tol=1e-8, max_iter=4000)
        counts = []
        w0 = None
        for lam in (0.0, 1.0, 4.0, 16.0):
            out = fit(demos, fm, lam, cfg, w0=w0)
            w0 = out.weights
            counts.append(int(np.count_nonzero(out.weights)))
        assert counts == sorted(counts, reverse=True)

    def test_deterministic(self, graph4, demos):
        fm = FeatureMap.subset8(graph4)
        a = fit(demos, fm, 0.3, IrlConfig())
        b = fit(demos, fm, 0.3, IrlConfig())
        assert np.array_equal(a.weights, b.weights)


class TestCrossValidate:
    def test_grid_has_21_points(self):
        assert len(IrlConfig().lambda_grid) == 21
        assert IrlConfig().lambda_grid[0] == 0.0
        assert IrlConfig().lambda_grid[-1] == 2.0

    def test_single_lambda_grid(self, graph4, demos):
        cfg = IrlConfig(lambda_grid=(0.7,))
        res = cross_validate(demos, FeatureMap.subset8(graph4), cfg)
        assert res.selected_lambda == 0.7
        assert len(res.mean_val_loglik) == 1

    def test_selected_lambda_maximizes_mean_validation(self, graph4, demos):
        cfg = IrlConfig(lambda_grid=(0.0, 0.5, 1.0))
        res = cross_validate(demos, FeatureMap.subset8(graph4), cfg)
        best = max(res.mean_val_loglik)
        assert res.mean_val_loglik[res.lambda_grid.index(res.selected_lambda)] == best

    def test_too_few_trajectories(self, graph4):
        small = make_demos(graph4, count=3)
        with pytest.raises(TooFewTrajectories):
            cross_validate(small, FeatureMap.subset8(graph4), IrlConfig())

    def test_fold_determinism(self, graph4, demos):
        cfg = IrlConfig(lambda_grid=(0.0, 1.0), seed=11)
        a = cross_validate(demos, FeatureMap.subset8(graph4), cfg)
        b = cross_validate(demos, FeatureMap.subset8(graph4), cfg)
        assert a.selected_lambda == b.selected_lambda
        assert np.array_equal(a.weights, b.weights)


class TestRewardMap:
    def test_all_zero_weights_export_zeros(self, graph4):
        fm = FeatureMap.subset8(graph4)
        res = cross_validate(
            make_demos(graph4, count=6, weight=0.0), fm,
            IrlConfig(lambda_grid=(10_000.0,)),
        )
        rm = reward_map_export(res, fm, graph4)
        assert all(v == 0.0 for _, v in rm)

    def test_subset8_has_at_most_8_nonzero(self, graph4, demos):
        fm = FeatureMap.subset8(graph4)
        res = cross_validate(demos, fm, IrlConfig(lambda_grid=(0.2,)))
        rm = reward_map_export(res, fm, graph4)
        assert sum(1 for _, v in rm if v != 0.0) <= 8

    def test_normalized_to_unit_peak(self, graph4, demos):
        fm = FeatureMap.subset8(graph4)
        res = cross_validate(demos, fm, IrlConfig(lambda_grid=(0.0,)))
        rm = reward_map_export(res, fm, graph4)
        assert max(abs(v) for _, v in rm) == pytest.approx(1.0)

    def test_csv_format(self, graph4, demos):
        fm = FeatureMap.subset8(graph4)
        res = cross_validate(demos, fm, IrlConfig(lambda_grid=(0.5,)))
        lines = reward_map_csv(reward_map_export(res, fm, graph4)).splitlines()
        assert lines[0] == "state,reward"
        assert len(lines) == 82
