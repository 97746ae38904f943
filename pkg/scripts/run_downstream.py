"""Node classification (Mi-/Ma-F1) of baseline vs POT encoders across seeds.

Uses the SBM fixture unless --edges/--features/--labels point at a dataset.
"""
import argparse
from dataclasses import replace

import numpy as np

from potgcl.evaluate import evaluate_embeddings
from potgcl.graph import load_graph
from potgcl.synthetic import sbm_graph
from potgcl.trainer import TrainConfig, embed, train


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--kappa", type=float, default=0.4)
    ap.add_argument("--edges")
    ap.add_argument("--features")
    ap.add_argument("--labels")
    args = ap.parse_args()

    g = load_graph(args.edges, args.features, args.labels) if args.edges else sbm_graph(seed=0)
    scores = {"baseline": [], "pot": []}
    for seed in range(args.seeds):
        cfg = TrainConfig(kappa=args.kappa, seed=seed)
        for arm, c in (("baseline", replace(cfg, kappa=0.0)), ("pot", cfg)):
            enc = train(g, c, track_compactness=False)[0]
            res = evaluate_embeddings(embed(enc, g), g.labels)
            scores[arm].append((100 * res["micro_mean"], 100 * res["macro_mean"]))
            print(f"seed {seed} {arm:8s} Mi-F1 {scores[arm][-1][0]:.2f}  Ma-F1 {scores[arm][-1][1]:.2f}")
    b, p = np.array(scores["baseline"]), np.array(scores["pot"])
    for k, name in enumerate(("Mi-F1", "Ma-F1")):
        print(f"{name}: baseline {b[:, k].mean():.2f} +- {b[:, k].std(ddof=1):.2f}  "
              f"POT {p[:, k].mean():.2f} +- {p[:, k].std(ddof=1):.2f}  paired diff {np.mean(p[:, k] - b[:, k]):+.2f}")


if __name__ == "__main__":
    main()
