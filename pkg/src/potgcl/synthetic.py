"""Planted-partition (stochastic block model) graphs with block-indicator features."""
from __future__ import annotations

import numpy as np

from .graph import Graph


def sbm_graph(block_sizes=(100, 100, 100), p_in=0.05, p_out=0.005, feature_dim=32, noise=1.0, seed=0):
    """Sample an SBM graph whose features are noisy one-hot block indicators.

    The first ``feature_dim // k * k`` feature columns are split into ``k``
    equal groups; block ``b`` sets its group to 1.  Gaussian noise of scale
    ``noise`` is added to every column.  Labels are block ids.
    """
    rng = np.random.default_rng(seed)
    sizes = np.asarray(block_sizes, dtype=np.int64)
    k = len(sizes)
    labels = np.repeat(np.arange(k), sizes)
    n = int(sizes.sum())

    iu, ju = np.triu_indices(n, k=1)
    same = labels[iu] == labels[ju]
    prob = np.where(same, p_in, p_out)
    keep = rng.random(len(iu)) < prob
    edges = np.stack([iu[keep], ju[keep]], axis=1)

    group = feature_dim // k
    if group < 1:
        raise ValueError(f"feature_dim={feature_dim} is too small for {k} blocks")
    features = rng.normal(scale=noise, size=(n, feature_dim))
    for b in range(k):
        features[labels == b, b * group : (b + 1) * group] += 1.0
    return Graph(n, edges, features, labels, k)


def random_regular_ring(n, feature_dim=4, seed=0):
    """A cycle (every node has degree 2) with Gaussian features."""
    rng = np.random.default_rng(seed)
    edges = np.stack([np.arange(n), (np.arange(n) + 1) % n], axis=1)
    return Graph(n, edges, rng.normal(size=(n, feature_dim)))


def random_graph(n, num_edges, feature_dim, seed=0):
    """Uniformly random simple graph with exactly ``num_edges`` edges."""
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    pick = rng.choice(len(iu), size=num_edges, replace=False)
    return Graph(n, np.stack([iu[pick], ju[pick]], axis=1), rng.normal(size=(n, feature_dim)))
