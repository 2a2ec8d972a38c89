import numpy as np
import pytest
from hypothesis import given, strategies as st

from symbiosim.core import Contract
from symbiosim.metrics import (
    MarketAggregates,
    aggregate_step,
    symbiosis_index,
    weighted_mean_price,
)


def contract(qty, price):
    return Contract(buyer_id=0, seller_id=0, qty=qty, unit_price=price, round=1)


class TestSymbiosisIndex:
    def test_full_demand_satisfied(self):
        assert symbiosis_index(50, 100, 50) == 1.0

    def test_no_trades(self):
        assert symbiosis_index(0, 100, 50) == 0.0

    def test_supply_limited(self):
        assert symbiosis_index(30, 40, 120) == 0.75

    def test_empty_market_is_vacuously_complete(self):
        assert symbiosis_index(0, 0, 50) == 1.0
        assert symbiosis_index(0, 100, 0) == 1.0

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            symbiosis_index(-1, 10, 10)

    @given(
        q=st.floats(0, 1000),
        sell=st.floats(0.001, 1000),
        need=st.floats(0.001, 1000),
        k=st.floats(0.01, 100),
    )
    def test_scale_invariance(self, q, sell, need, k):
        q = min(q, sell, need)  # respect the aggregate invariant
        si = symbiosis_index(q, sell, need)
        si_k = symbiosis_index(q * k, sell * k, need * k)
        assert si_k == pytest.approx(si, rel=1e-9)

    @given(
        sell=st.floats(0, 100),
        need=st.floats(0, 100),
        frac=st.floats(0, 1),
    )
    def test_range(self, sell, need, frac):
        q = frac * min(sell, need)
        assert 0.0 <= symbiosis_index(q, sell, need) <= 1.0


class TestWeightedMeanPrice:
    def test_single(self):
        assert weighted_mean_price([contract(1, 10)]) == 10.0

    def test_symmetric_weights(self):
        assert weighted_mean_price([contract(2, 10), contract(2, 20)]) == 15.0

    def test_asymmetric_weights(self):
        assert weighted_mean_price([contract(1, 10), contract(3, 20)]) == 17.5

    def test_empty_is_missing(self):
        assert weighted_mean_price([]) is None


class TestAggregates:
    def test_aggregate_step_matches_object_path(self):
        qtys = np.array([1.0, 3.0])
        prices = np.array([10.0, 20.0])
        agg = aggregate_step(qtys, prices, q_toSell=10.0, q_needed=4.0)
        assert agg.mean_price == weighted_mean_price(
            [contract(1, 10), contract(3, 20)]
        )
        assert agg.q_bought == 4.0
        assert agg.si == 1.0

    def test_no_trades(self):
        agg = aggregate_step(np.array([]), np.array([]), 10.0, 5.0)
        assert agg.mean_price is None
        assert agg.si == 0.0

    def test_invariant_fields(self):
        agg = MarketAggregates(q_bought=3.0, q_toSell=4.0, q_needed=12.0)
        assert agg.si == 0.75
