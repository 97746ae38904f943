"""Check certified compactness against exhaustive enumeration on random tiny graphs."""
import argparse
import time

import numpy as np

from potgcl.augment import budgets_from_rate, message_passing_bounds, sample_edge_drop
from potgcl.certify import brute_force_compactness, compactness_bounds, contrast_weight
from potgcl.encoder import gcn_forward, init_encoder
from potgcl.errors import DegenerateEmbeddingError
from potgcl.graph import Graph, normalized_message_passing


def tiny_instance(rng, max_nodes=8, max_edges=12):
    n = int(rng.integers(2, max_nodes + 1))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    m = int(rng.integers(1, min(max_edges, len(pairs)) + 1))
    edges = [pairs[k] for k in rng.choice(len(pairs), m, replace=False)]
    g = Graph(n, edges, rng.normal(size=(n, int(rng.integers(1, 5)))))
    p = init_encoder(g.num_features, int(rng.integers(1, 5)), int(rng.integers(1, 5)), rng=rng,
                     gamma=float(rng.choice([0.0, 0.1, 0.25, 0.5])))
    for t in p.tensors():
        t.values[:] = rng.normal(size=t.values.shape)
    return g, p


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--instances", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    done = skipped = bad = 0
    worst = -np.inf
    start = time.perf_counter()
    while done < args.instances:
        g, p = tiny_instance(rng)
        r1, r2 = rng.uniform(0, 0.6, size=2)
        A1 = normalized_message_passing(sample_edge_drop(g, r1, seed=rng))
        A2 = normalized_message_passing(sample_edge_drop(g, r2, seed=rng))
        try:
            w1 = contrast_weight(gcn_forward(p, g.features, A1))
            w2 = contrast_weight(gcn_forward(p, g.features, A2))
        except DegenerateEmbeddingError:
            skipped += 1
            continue
        b = budgets_from_rate(g, max(r1, r2))
        mb = message_passing_bounds(g, b)
        for w, A_other in ((w2, A1), (w1, A2)):
            gap = compactness_bounds(p, g, mb, w, A_realized=A_other).values[:, 0] - brute_force_compactness(p, g, b, w)
            worst = max(worst, gap.max())
            bad += int((gap > 1e-9).sum())
        done += 1
    print(f"instances {done} (redrawn {skipped}), violations {bad}, max(bound - oracle) {worst:.3g}, "
          f"{time.perf_counter() - start:.1f}s")
    return int(bad > 0)


if __name__ == "__main__":
    raise SystemExit(main())
