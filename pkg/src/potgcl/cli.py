"""Command-line entry points: train, certify, analyze, eval.

Configuration is a JSON file::

    {
      "data": {"edges": "g.edges", "features": "g.csv", "labels": "g.labels"},
      "train": {"epochs": 200, "kappa": 0.4, "seed": 0},
      "output_dir": "runs/demo",
      "analyze": {"n_samples": 500},
      "eval": {"seeds": [0, 1, 2, 3, 4], "train_frac": 0.1, "valid_frac": 0.1}
    }

Relative paths are resolved against the config file's directory.
Precedence: built-in defaults < config file < command-line flags
(``--output-dir``, ``--set train.key=value``).

Exit codes: 0 ok, 1 runtime failure, 2 usage/config error, 3 oracle guard.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import subprocess
import sys
from contextlib import nullcontext
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import autodiff as ad
from .augment import budgets_from_rate, message_passing_bounds, sample_edge_drop
from .certify import MAX_ORACLE_EDGES, brute_force_compactness, compactness_bounds, contrast_weight
from .encoder import gcn_forward, load_checkpoint, save_checkpoint
from .errors import EnumerationGuardError, PotError, TrainingAbortedError, ValidationError
from .evaluate import evaluate_embeddings
from .graph import load_graph, normalized_message_passing
from .studies import (
    compactness_by_degree,
    compactness_trajectory,
    evaluate_compactness,
    imbalance_study,
    infonce_shift_study,
    paired_runs,
    quartiles,
    rank_correlation,
)
from .trainer import TrainConfig, embed, train

log = logging.getLogger("potgcl")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_GUARD = 0, 1, 2, 3
STUDIES = ("imbalance", "degree", "trajectory", "shift")
SECTIONS = {"data", "train", "output_dir", "analyze", "eval"}


class ConfigError(Exception):
    pass


@dataclass
class ExperimentConfig:
    edges: Path
    features: Path
    labels: Path | None
    train: TrainConfig
    output_dir: Path
    analyze: dict = field(default_factory=dict)
    eval: dict = field(default_factory=dict)


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(path, overrides=(), output_dir=None):
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    unknown = set(raw) - SECTIONS
    if unknown:
        raise ConfigError(f"{path}: unknown sections {sorted(unknown)}")

    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, name = key.partition(".")
        if not sep or not dot or section not in SECTIONS - {"output_dir"}:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        raw.setdefault(section, {})[name] = _parse_value(value)

    base = path.parent
    data = raw.get("data", {})

    def resolve(p):
        return p if p is None else (base / p if not Path(p).is_absolute() else Path(p))

    for key in ("edges", "features"):
        if key not in data:
            raise ConfigError(f"data.{key} is required")
    files = {k: resolve(data.get(k)) for k in ("edges", "features", "labels")}
    for k, p in files.items():
        if p is not None and not p.is_file():
            raise ConfigError(f"data.{k}: file not found: {p}")

    try:
        tcfg = TrainConfig.from_dict(raw.get("train", {}))
    except (ValidationError, TypeError) as exc:
        raise ConfigError(f"train: {exc}") from None
    out = Path(output_dir) if output_dir is not None else resolve(raw.get("output_dir", "runs/default"))
    return ExperimentConfig(
        edges=files["edges"],
        features=files["features"],
        labels=files["labels"],
        train=tcfg,
        output_dir=out,
        analyze=dict(raw.get("analyze", {})),
        eval=dict(raw.get("eval", {})),
    )


def version_string():
    """``git describe``-style identifier, falling back to the package version."""
    try:
        res = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if res.returncode == 0 and res.stdout.strip():
            return f"{__version__}+g{res.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load_encoder(args, exp, g):
    if args.checkpoint is None:
        raise ConfigError("--checkpoint is required for this command")
    try:
        enc, proj = load_checkpoint(args.checkpoint)
    except FileNotFoundError:
        raise ConfigError(f"checkpoint not found: {args.checkpoint}") from None
    if enc.dims[0] != g.num_features:
        raise ConfigError(f"checkpoint expects {enc.dims[0]} features, data has {g.num_features}")
    return enc, proj


def cmd_train(args, exp, g):
    exp.output_dir.mkdir(parents=True, exist_ok=True)
    enc, proj, tlog = train(g, exp.train)
    ck = exp.output_dir / "checkpoint.json"
    save_checkpoint(ck, enc, proj)
    tlog.to_csv(exp.output_dir / "train_log.csv")
    _write_json(
        exp.output_dir / "manifest.json",
        {
            "version": version_string(),
            "command": "train",
            "data": {k: str(getattr(exp, k)) if getattr(exp, k) else None for k in ("edges", "features", "labels")},
            "train": exp.train.to_dict(),
            "outputs": ["checkpoint.json", "train_log.csv"],
        },
    )
    last = tlog.rows[-1]
    print(f"trained {exp.train.epochs} epochs; final infonce={last['infonce']:.4f} pot={last['pot']:.4f}")
    return EXIT_OK


def _certify_views(g, cfg):
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 4242]))
    v1 = sample_edge_drop(g, cfg.drop_rate_view1, cfg.strategy, rng)
    v2 = sample_edge_drop(g, cfg.drop_rate_view2, cfg.strategy, rng)
    return normalized_message_passing(v1), normalized_message_passing(v2)


def cmd_certify(args, exp, g):
    enc, _ = _load_encoder(args, exp, g)
    cfg = exp.train
    if args.oracle and g.num_edges > MAX_ORACLE_EDGES:
        raise EnumerationGuardError(
            f"--oracle refused: {g.num_edges} edges exceeds the enumeration guard of {MAX_ORACLE_EDGES}"
        )
    b = budgets_from_rate(g, cfg.max_rate)
    mb = message_passing_bounds(g, b)
    A1, A2 = _certify_views(g, cfg)
    opts = dict(layer2=cfg.layer2, relax_index=cfg.relax_index)
    with ad.no_grad():
        Z1, Z2 = gcn_forward(enc, g.features, A1).values, gcn_forward(enc, g.features, A2).values
        w1, w2 = contrast_weight(Z1), contrast_weight(Z2)
        f_g2 = compactness_bounds(enc, g, mb, w2, A_realized=A1, **opts).values[:, 0]
        f_g1 = compactness_bounds(enc, g, mb, w1, A_realized=A2, **opts).values[:, 0]
    realized = np.sum(Z1 * w2.W, axis=1)

    header = ["node_id", "f_G1", "f_G2", "realized_value"]
    cols = [f_g1, f_g2, realized]
    verdict = None
    if args.oracle:
        oracle = brute_force_compactness(enc, g, b, w2)
        oracle_g1 = brute_force_compactness(enc, g, b, w1)
        header.append("oracle_min")
        cols.append(oracle)
        bad = int(np.sum(f_g2 > oracle + 1e-9) + np.sum(f_g1 > oracle_g1 + 1e-9))
        verdict = "SOUND" if bad == 0 else f"UNSOUND ({bad} violations)"

    exp.output_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(exp.output_dir / "compactness.csv", header, [[i, *(float(c[i]) for c in cols)] for i in range(g.num_nodes)])
    if verdict is not None:
        (exp.output_dir / "verdict.txt").write_text(verdict + "\n", encoding="utf-8")
        print(verdict)
    print(f"mean f_G1={f_g1.mean():.4f} f_G2={f_g2.mean():.4f} realized={realized.mean():.4f}")
    return EXIT_OK if verdict in (None, "SOUND") else EXIT_RUNTIME


def cmd_analyze(args, exp, g):
    cfg = exp.train
    out = exp.output_dir
    out.mkdir(parents=True, exist_ok=True)
    n_samples = int(exp.analyze.get("n_samples", 500))
    study = args.study

    if study in ("imbalance", "degree"):
        enc, proj = _load_encoder(args, exp, g)
        if study == "imbalance":
            if proj is None:
                raise ConfigError("checkpoint has no projector; the imbalance study needs one")
            mean, (q25, q50, q75) = imbalance_study(enc, proj, g, cfg, n_samples)
            _write_csv(out / "imbalance.csv", ["node_id", "value"], [[i, float(v)] for i, v in enumerate(mean)])
            summary = {"q25": q25, "q50": q50, "q75": q75, "mean": float(mean.mean()), "n_samples": n_samples}
        else:
            rows = compactness_by_degree(enc, g, cfg)
            _write_csv(out / "degree.csv", ["degree", "value"], rows)
            f = evaluate_compactness(enc, g, cfg)
            rho = rank_correlation(g.degrees.raw_degree, f) if len(rows) > 1 else float("nan")
            summary = {"groups": len(rows), "spearman_degree_compactness": rho, "mean": float(f.mean())}
    else:
        runs = paired_runs(g, cfg)
        if study == "trajectory":
            traj = compactness_trajectory(g, cfg, runs)
            rows = [[e + 1, float(a), float(b)] for e, (a, b) in enumerate(zip(traj["baseline"], traj["pot"]))]
            _write_csv(out / "trajectory.csv", ["epoch", "baseline", "pot"], rows)
            summary = {"final_baseline": rows[-1][1], "final_pot": rows[-1][2], "epochs": len(rows)}
        else:
            shift = infonce_shift_study(g, cfg, n_samples, runs)
            for arm in ("baseline", "pot"):
                _write_csv(out / f"shift_{arm}.csv", ["node_id", "value"], [[i, float(v)] for i, v in enumerate(shift[arm])])
            summary = {
                f"{arm}_{k}": v
                for arm in ("baseline", "pot")
                for k, v in zip(("q25", "q50", "q75"), quartiles(shift[arm]))
            }
            summary.update(baseline_mean=float(shift["baseline"].mean()), pot_mean=float(shift["pot"].mean()))
    _write_json(out / f"{study}_summary.json", summary)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_eval(args, exp, g):
    if g.labels is None:
        raise ConfigError("eval needs data.labels")
    enc, _ = _load_encoder(args, exp, g)
    opts = {k: exp.eval[k] for k in ("train_frac", "valid_frac") if k in exp.eval}
    seeds = tuple(exp.eval.get("seeds", (0, 1, 2, 3, 4)))
    res = evaluate_embeddings(embed(enc, g), g.labels, seeds=seeds, **opts)
    exp.output_dir.mkdir(parents=True, exist_ok=True)
    _write_json(exp.output_dir / "eval.json", res)
    print(f"micro-F1 {100 * res['micro_mean']:.1f} ± {100 * res['micro_std']:.1f}  "
          f"macro-F1 {100 * res['macro_mean']:.1f} ± {100 * res['macro_std']:.1f}")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "certify": cmd_certify, "analyze": cmd_analyze, "eval": cmd_eval}


def build_parser():
    parser = argparse.ArgumentParser(prog="potgcl", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="JSON experiment config")
        p.add_argument("--output-dir", default=None)
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", dest="overrides")
        if name != "train":
            p.add_argument("--checkpoint", default=None)
        if name == "certify":
            p.add_argument("--oracle", action="store_true", help="also run the brute-force enumeration")
        if name == "analyze":
            p.add_argument("--study", required=True, choices=STUDIES)
    return parser


def _thread_limit():
    raw = os.environ.get("POT_NUM_THREADS")
    if not raw:
        return nullcontext()
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"POT_NUM_THREADS must be an integer, got {raw!r}") from None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=max(n, 1))


def main(argv=None):
    args = build_parser().parse_args(argv)  # argparse exits with 2 on usage errors
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        exp = load_config(args.config, args.overrides, args.output_dir)
        with _thread_limit():
            g = load_graph(exp.edges, exp.features, exp.labels)
            return COMMANDS[args.command](args, exp, g)
    except (ConfigError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EnumerationGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except TrainingAbortedError as exc:
        print(f"training aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (PotError, ArithmeticError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
