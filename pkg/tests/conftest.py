import numpy as np
import pytest

from symbiosim.core import Buyer, FirmLayout, Seller
from symbiosim.spatial import distance_matrix


def make_layout(buyer_specs, seller_specs, width=100.0) -> FirmLayout:
    """Hand-built layout; specs are (position, qty, beta) / (position, qty)."""
    buyers = tuple(
        Buyer(id=i, position=pos, q_need=float(q), beta=float(beta))
        for i, (pos, q, beta) in enumerate(buyer_specs)
    )
    sellers = tuple(
        Seller(id=j, position=pos, q_supply=float(q))
        for j, (pos, q) in enumerate(seller_specs)
    )
    dist = distance_matrix(
        np.array([b.position for b in buyers], dtype=np.float64),
        np.array([s.position for s in sellers], dtype=np.float64),
    )
    return FirmLayout(buyers=buyers, sellers=sellers, dist=dist, width=width)


@pytest.fixture
def tiny_layout():
    """One buyer (need 10, beta 1.0) colocated with one seller (supply 5)."""
    return make_layout([((0.0, 0.0), 10.0, 1.0)], [((0.0, 0.0), 5.0)])
