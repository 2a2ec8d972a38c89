"""Clustered firm layout generation and distance geometry.

Layouts are produced on an abstract square of side ``width = sqrt(n_firms /
rho)``.  Cluster centers are uniform over the square; each firm sits at its
cluster center plus isotropic Gaussian noise with per-axis standard
deviation ``cs * width``.  Out-of-square positions wrap around (torus fold)
so that ``cs = 1`` yields a near-uniform scatter while the firm count stays
exact.  Distances are plain Euclidean on the folded coordinates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .core import STREAM_LAYOUT, Buyer, ConfigError, FirmLayout, Seller, substream


@dataclass(frozen=True)
class LayoutSpec:
    """Geometry inputs for one layout draw."""

    n_firms: int
    n_clusters: int
    rho: float
    cs: float
    seed: int

    def __post_init__(self) -> None:
        if self.n_firms < 2:
            raise ConfigError(f"n_firms must be at least 2, got {self.n_firms}")
        if self.n_clusters < 1:
            raise ConfigError(f"n_clusters must be at least 1, got {self.n_clusters}")
        if not self.rho > 0:
            raise ConfigError(f"rho must be positive, got {self.rho}")
        if not 0.0 <= self.cs <= 1.0:
            raise ConfigError(f"cs must lie in [0, 1], got {self.cs}")

    @property
    def width(self) -> float:
        """Side length in km of the square environment."""
        return math.sqrt(self.n_firms / self.rho)


def distance_matrix(buyer_pos: np.ndarray, seller_pos: np.ndarray) -> np.ndarray:
    """Euclidean distances, shape (n_buyers, n_sellers)."""
    b = np.asarray(buyer_pos, dtype=np.float64)
    s = np.asarray(seller_pos, dtype=np.float64)
    diff = b[:, None, :] - s[None, :, :]
    return np.sqrt((diff * diff).sum(axis=-1))


def generate_layout(spec: LayoutSpec, buyer_fraction: float) -> FirmLayout:
    """Draw positions and roles; economic fields stay at their defaults.

    Draw order from the layout sub-stream is fixed (centers, noise, role
    permutation), so identical ``(spec, buyer_fraction)`` always reproduce
    the same layout bit for bit.
    """
    if not 0.0 < buyer_fraction < 1.0:
        raise ConfigError(f"buyer_fraction must lie in (0, 1), got {buyer_fraction}")
    n_buyers = int(math.floor(buyer_fraction * spec.n_firms))
    n_sellers = spec.n_firms - n_buyers
    if n_buyers < 1 or n_sellers < 1:
        raise ConfigError(
            f"buyer_fraction {buyer_fraction} with {spec.n_firms} firms "
            "leaves one side of the market empty"
        )

    rng = substream(spec.seed, STREAM_LAYOUT)
    width = spec.width
    centers = rng.uniform(0.0, width, size=(spec.n_clusters, 2))
    noise = rng.normal(0.0, spec.cs * width, size=(spec.n_firms, 2))
    cluster_of = np.arange(spec.n_firms) % spec.n_clusters
    pos = np.mod(centers[cluster_of] + noise, width)

    perm = rng.permutation(spec.n_firms)
    buyer_firms = np.sort(perm[:n_buyers])
    seller_firms = np.sort(perm[n_buyers:])

    buyers = tuple(
        Buyer(id=i, position=(float(pos[f, 0]), float(pos[f, 1])))
        for i, f in enumerate(buyer_firms)
    )
    sellers = tuple(
        Seller(id=j, position=(float(pos[f, 0]), float(pos[f, 1])))
        for j, f in enumerate(seller_firms)
    )
    dist = distance_matrix(pos[buyer_firms], pos[seller_firms])
    return FirmLayout(buyers=buyers, sellers=sellers, dist=dist, width=width)


def layout_to_json(layout: FirmLayout, seed: int | None = None) -> str:
    """Serialize a layout for reproducibility audits."""
    doc = {
        "width": layout.width,
        "seed": seed,
        "buyers": [
            {"id": b.id, "x": b.position[0], "y": b.position[1], "q_need": b.q_need, "beta": b.beta}
            for b in layout.buyers
        ],
        "sellers": [
            {"id": s.id, "x": s.position[0], "y": s.position[1], "q_supply": s.q_supply}
            for s in layout.sellers
        ],
    }
    return json.dumps(doc, indent=2)


def layout_from_json(text: str) -> FirmLayout:
    doc = json.loads(text)
    buyers = tuple(
        Buyer(id=b["id"], position=(b["x"], b["y"]), q_need=b["q_need"], beta=b["beta"])
        for b in doc["buyers"]
    )
    sellers = tuple(
        Seller(id=s["id"], position=(s["x"], s["y"]), q_supply=s["q_supply"])
        for s in doc["sellers"]
    )
    dist = distance_matrix(
        np.array([b.position for b in buyers]), np.array([s.position for s in sellers])
    )
    return FirmLayout(buyers=buyers, sellers=sellers, dist=dist, width=doc["width"])
