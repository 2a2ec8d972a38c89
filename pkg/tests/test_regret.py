from dataclasses import replace

import numpy as np
import pytest

from symbiosim.auction import run_auction
from symbiosim.core import MarketParams
from symbiosim.learning import ActionGrid, build_grid
from symbiosim.regret import (
    counterfactual_payoffs,
    counterfactual_regret,
    rolling_median,
)
from symbiosim.simulation import RunConfig, run

from conftest import make_layout

PARAMS = MarketParams(c_d=0.0, s=1.0, rho=0.001)


def grid_of(*values):
    return ActionGrid(phi_min=float(values[0]), values=np.array(values, dtype=np.float64))


class TestCounterfactualRegret:
    def test_single_arm_zero_regret(self):
        layout = make_layout([((0.0, 0.0), 10.0, 1.0)], [((0.0, 0.0), 10.0)])
        rec = counterfactual_regret(layout, PARAMS, [0], grid_of(0.7))
        assert rec.per_seller_regret.tolist() == [0.0]
        assert rec.total_regret == 0.0

    def test_two_arm_hand_computation(self):
        # both arms sell all 10 units at zero distance: rewards 500 vs 1000
        layout = make_layout([((0.0, 0.0), 10.0, 1.0)], [((0.0, 0.0), 10.0)])
        grid = grid_of(0.5, 1.0)
        low = counterfactual_regret(layout, PARAMS, [0], grid)
        high = counterfactual_regret(layout, PARAMS, [1], grid)
        assert low.per_seller_regret.tolist() == [500.0]
        assert high.per_seller_regret.tolist() == [0.0]

    def test_undercutting_matches_exhaustive_tabulation(self):
        # two sellers compete for one buyer; tabulate the full K x K payoff
        # bimatrix with direct auction runs and check regret against row maxima
        params = replace(PARAMS, c_d=15.0)
        layout = make_layout(
            [((0.0, 0.0), 8.0, 1.0)],
            [((10.0, 0.0), 6.0), ((12.0, 0.0), 6.0)],
        )
        grid = build_grid(4, params.c_d, params.p_m)
        K = grid.K
        payoff = np.zeros((K, K, 2))
        for k0 in range(K):
            for k1 in range(K):
                res = run_auction(layout, params, grid.values[[k0, k1]])
                payoff[k0, k1, :] = res.seller_revenue - res.unsold * params.c_d
        for k0 in range(K):
            for k1 in range(K):
                rec = counterfactual_regret(layout, params, [k0, k1], grid)
                expect0 = payoff[:, k1, 0].max() - payoff[k0, k1, 0]
                expect1 = payoff[k0, :, 1].max() - payoff[k0, k1, 1]
                assert rec.per_seller_regret[0] == pytest.approx(expect0, abs=1e-12)
                assert rec.per_seller_regret[1] == pytest.approx(expect1, abs=1e-12)
                assert rec.total_regret == pytest.approx(expect0 + expect1, abs=1e-12)

    def test_nonnegative_on_random_instances(self):
        rng = np.random.default_rng(17)
        params = replace(PARAMS, c_d=30.0)
        grid = build_grid(5, params.c_d, params.p_m)
        for _ in range(25):
            n_b = int(rng.integers(1, 4))
            n_s = int(rng.integers(1, 4))
            layout = make_layout(
                [((rng.uniform(0, 50), rng.uniform(0, 50)), rng.integers(1, 9), rng.uniform(0.7, 1.3)) for _ in range(n_b)],
                [((rng.uniform(0, 50), rng.uniform(0, 50)), rng.integers(1, 9)) for _ in range(n_s)],
            )
            actions = rng.integers(0, grid.K, n_s)
            rec = counterfactual_regret(layout, params, actions, grid)
            assert np.all(rec.per_seller_regret >= 0.0)

    def test_zero_regret_fixed_point(self):
        # two isolated monopolies: the cross pair is just out of tolerance,
        # so each seller's best arm is independent and the profile of row
        # maxima is a pure grid equilibrium with zero total regret
        params = PARAMS  # c_d = 0, so arms are nonnegative multipliers
        layout = make_layout(
            [((0.0, 0.0), 8.0, 1.0), ((1001.0, 0.0), 8.0, 1.0)],
            [((0.0, 0.0), 6.0), ((1001.0, 0.0), 6.0)],
        )
        grid = build_grid(4, params.c_d, params.p_m)
        K = grid.K
        payoff = np.zeros((K, K, 2))
        for k0 in range(K):
            for k1 in range(K):
                res = run_auction(layout, params, grid.values[[k0, k1]])
                payoff[k0, k1, :] = res.seller_revenue - res.unsold * params.c_d
        eq = None
        for k0 in range(K):
            for k1 in range(K):
                if (
                    payoff[k0, k1, 0] == payoff[:, k1, 0].max()
                    and payoff[k0, k1, 1] == payoff[k0, :, 1].max()
                ):
                    eq = (k0, k1)
                    break
            if eq:
                break
        assert eq is not None, "isolated monopolies admit a pure grid equilibrium"
        rec = counterfactual_regret(layout, params, list(eq), grid)
        assert rec.total_regret == 0.0
        payoffs = counterfactual_payoffs(layout, params, list(eq), grid)
        assert payoffs.shape == (2, K)

    def test_bad_indices_rejected(self):
        layout = make_layout([((0.0, 0.0), 1.0, 1.0)], [((0.0, 0.0), 1.0)])
        with pytest.raises(ValueError):
            counterfactual_regret(layout, PARAMS, [5], grid_of(0.5, 1.0))


class TestSelfConsistency:
    def test_replayed_played_action_equals_live_reward(self):
        params = MarketParams(
            c_d=12.0, s=1.3, rho=0.005, n_firms=10, K=6, horizon=12, seed=77
        )
        result = run(RunConfig(params=params, regret_mode="every_step"))
        grid = build_grid(params.K, params.c_d, params.p_m)
        layout = result.layout
        rng = np.random.default_rng(4)
        for _ in range(40):
            t = int(rng.integers(params.horizon))
            j = int(rng.integers(len(layout.sellers)))
            actions = result.records[t].per_seller_action
            payoffs = counterfactual_payoffs(layout, params, actions, grid)
            live = result.records[t].per_seller_reward[j]
            assert payoffs[j, actions[j]] == live  # bit-exact


class TestRollingMedian:
    def test_constant_series(self):
        out = rolling_median([5.0] * 10, 4)
        assert out.tolist() == [5.0] * 10

    def test_window_one_is_identity(self):
        x = [3.0, 1.0, 4.0, 1.0, 5.0]
        assert rolling_median(x, 1).tolist() == x

    def test_hand_computed_trailing_medians(self):
        assert rolling_median([1, 9, 2, 8, 3], 3).tolist() == [1.0, 5.0, 2.0, 8.0, 3.0]

    def test_empty(self):
        assert rolling_median([], 5).size == 0

    def test_bad_window(self):
        with pytest.raises(ValueError):
            rolling_median([1.0], 0)
