"""Wall time of the certified bound as the edge count doubles at fixed N and dims."""
import argparse
import time

from potgcl import autodiff as ad
from potgcl.augment import budgets_from_rate, message_passing_bounds
from potgcl.certify import NeighborhoodIndex, compactness_bounds, contrast_weight
from potgcl.encoder import gcn_forward, init_encoder
from potgcl.graph import normalized_message_passing
from potgcl.synthetic import random_graph


def time_bounds(g, reps):
    p = init_encoder(g.num_features, 64, 32, rng=0)
    mb = message_passing_bounds(g, budgets_from_rate(g, 0.4))
    w = contrast_weight(gcn_forward(p, g.features, normalized_message_passing(g)))
    hops = NeighborhoodIndex(g)
    best = float("inf")
    for _ in range(reps):
        t = time.perf_counter()
        with ad.no_grad():
            compactness_bounds(p, g, mb, w, hops=hops)
        best = min(best, time.perf_counter() - t)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nodes", type=int, default=1000)
    ap.add_argument("--edges", type=int, nargs="+", default=[1250, 2500, 5000, 10000])
    ap.add_argument("--reps", type=int, default=7)
    args = ap.parse_args()

    prev = None
    for m in args.edges:
        t = time_bounds(random_graph(args.nodes, m, 32, seed=0), args.reps)
        ratio = "" if prev is None else f"  x{t / prev:.2f}"
        print(f"N {args.nodes}  |E| {m:6d}  {1e3 * t:8.1f} ms{ratio}")
        prev = t


if __name__ == "__main__":
    main()
