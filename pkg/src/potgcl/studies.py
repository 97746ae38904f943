"""Post-training analyses: loss imbalance, compactness vs degree, paired runs."""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from . import autodiff as ad
from .augment import budgets_from_rate, message_passing_bounds, sample_edge_drop
from .certify import compactness_bounds, contrast_weight
from .encoder import gcn_forward
from .graph import normalized_message_passing
from .objectives import infonce_loss
from .trainer import train


def quartiles(values):
    q25, q50, q75 = np.quantile(np.asarray(values, dtype=np.float64), [0.25, 0.5, 0.75])
    return float(q25), float(q50), float(q75)


def per_node_infonce_samples(enc, proj, g, cfg, n_samples=500, seed=None):
    """Per-node InfoNCE for ``n_samples`` freshly sampled view pairs (S x N).

    Parameters are only read; nothing is recorded on a tape.
    """
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 7919] if seed is None else seed))
    out = np.empty((n_samples, g.num_nodes))
    with ad.no_grad():
        for s in range(n_samples):
            v1 = sample_edge_drop(g, cfg.drop_rate_view1, cfg.strategy, rng)
            v2 = sample_edge_drop(g, cfg.drop_rate_view2, cfg.strategy, rng)
            Z1 = gcn_forward(enc, g.features, normalized_message_passing(v1))
            Z2 = gcn_forward(enc, g.features, normalized_message_passing(v2))
            out[s] = infonce_loss(Z1, Z2, proj, cfg.tau)[1]
    return out


def imbalance_study(enc, proj, g, cfg, n_samples=500, seed=None):
    """Average per-node InfoNCE over sampled augmentation pairs plus its quartiles."""
    mean = per_node_infonce_samples(enc, proj, g, cfg, n_samples, seed).mean(axis=0)
    return mean, quartiles(mean)


def evaluate_compactness(enc, g, cfg):
    """Certified compactness of every node with the unaugmented graph as the fixed view."""
    A = normalized_message_passing(g)
    mb = message_passing_bounds(g, budgets_from_rate(g, cfg.max_rate))
    with ad.no_grad():
        Z = gcn_forward(enc, g.features, A)
        f = compactness_bounds(
            enc, g, mb, contrast_weight(Z), A_realized=A, layer2=cfg.layer2, relax_index=cfg.relax_index
        )
    return f.values[:, 0]


def compactness_by_degree(enc, g, cfg):
    """Sorted ``(degree, mean compactness)`` pairs, one per distinct raw degree."""
    f = evaluate_compactness(enc, g, cfg)
    deg = g.degrees.raw_degree
    return [(int(d), float(f[deg == d].mean())) for d in np.unique(deg)]


def rank_correlation(x, y):
    """Spearman correlation (average ranks for ties)."""
    from scipy.stats import spearmanr

    return float(spearmanr(x, y).statistic)


def paired_runs(g, cfg):
    """Train the baseline (kappa = 0) and the regularized run from the same seed."""
    base = train(g, replace(cfg, kappa=0.0))
    pot = train(g, cfg)
    return base, pot


def infonce_shift_study(g, cfg, n_samples=500, runs=None):
    """Per-node mean InfoNCE of the baseline and regularized encoders."""
    base, pot = runs if runs is not None else paired_runs(g, cfg)
    return {
        "baseline": imbalance_study(base[0], base[1], g, cfg, n_samples)[0],
        "pot": imbalance_study(pot[0], pot[1], g, cfg, n_samples)[0],
    }


def compactness_trajectory(g, cfg, runs=None):
    """Per-epoch mean node compactness (averaged over both views) for both runs."""
    base, pot = runs if runs is not None else paired_runs(g, cfg)
    return {"baseline": base[2].mean_compactness, "pot": pot[2].mean_compactness}
