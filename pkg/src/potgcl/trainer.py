"""Contrastive training loop with the optional compactness regularizer."""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import autodiff as ad
from .augment import STRATEGIES, budgets_from_rate, message_passing_bounds, sample_edge_drop
from .autodiff import Tape, Tensor
from .certify import NeighborhoodIndex, compactness_bounds, contrast_weight
from .encoder import gcn_forward, init_encoder, init_projector
from .errors import TrainingAbortedError, ValidationError
from .graph import normalized_message_passing
from .objectives import LossReport, infonce_loss, pot_loss, total_loss


@dataclass
class TrainConfig:
    epochs: int = 200
    learning_rate: float = 5e-4
    tau: float = 0.7
    kappa: float = 0.4
    drop_rate_view1: float = 0.4
    drop_rate_view2: float = 0.3
    strategy: str = "uniform"
    pot_batch: int | str = "full"
    seed: int = 0
    d1: int = 64
    d2: int = 32
    dp: int = 32
    gamma: float = 0.25
    layer2: str = "interval"
    relax_index: str = "neighbor"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        if self.tau <= 0:
            raise ValidationError("tau must be positive")
        if not 0.0 <= self.kappa <= 1.0:
            raise ValidationError("kappa must lie in [0, 1]")
        for r in (self.drop_rate_view1, self.drop_rate_view2):
            if not 0.0 <= r < 1.0:
                raise ValidationError(f"drop rate must lie in [0, 1), got {r}")
        if self.strategy not in STRATEGIES:
            raise ValidationError(f"unknown strategy {self.strategy!r}")
        if self.pot_batch in (-1, "-1"):
            self.pot_batch = "full"
        if self.pot_batch != "full" and (not isinstance(self.pot_batch, int) or self.pot_batch < 1):
            raise ValidationError(f"pot_batch must be a positive int or 'full', got {self.pot_batch!r}")
        if min(self.d1, self.d2, self.dp) < 1:
            raise ValidationError("embedding dimensions must be >= 1")
        if not 0.0 <= self.gamma < 1.0:
            raise ValidationError("gamma must lie in [0, 1)")

    @property
    def max_rate(self):
        return max(self.drop_rate_view1, self.drop_rate_view2)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown training options: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self):
        return asdict(self)


LOG_COLUMNS = ("epoch", "infonce", "pot", "total", "compactness_g1", "compactness_g2")


@dataclass
class TrainLog:
    rows: list = field(default_factory=list)
    checkpoint: str | None = None

    def append(self, epoch, report, comp_g1, comp_g2):
        self.rows.append(
            {
                "epoch": epoch,
                "infonce": report.infonce,
                "pot": report.pot,
                "total": report.total,
                "compactness_g1": comp_g1,
                "compactness_g2": comp_g2,
            }
        )

    def column(self, name):
        return np.array([r[name] for r in self.rows], dtype=np.float64)

    @property
    def mean_compactness(self):
        return 0.5 * (self.column("compactness_g1") + self.column("compactness_g2"))

    def to_csv(self, path=None):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(LOG_COLUMNS)
        for r in self.rows:
            writer.writerow([r["epoch"]] + [repr(float(r[c])) for c in LOG_COLUMNS[1:]])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path):
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(rows=[{k: (int(v) if k == "epoch" else float(v)) for k, v in r.items()} for r in rows])


class Adam:
    def __init__(self, params, lr=5e-4, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.values) for p in self.params]
        self.v = [np.zeros_like(p.values) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            m *= self.b1
            m += (1.0 - self.b1) * p.grad
            v *= self.b2
            v += (1.0 - self.b2) * p.grad**2
            p.values -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class StepContext:
    """Per-graph quantities reused by every step."""

    graph: object
    bounds: object
    hops: NeighborhoodIndex
    X: Tensor

    @classmethod
    def build(cls, g, cfg):
        mb = message_passing_bounds(g, budgets_from_rate(g, cfg.max_rate))
        return cls(graph=g, bounds=mb, hops=NeighborhoodIndex(g), X=Tensor(g.features))


def both_compactness(enc, ctx, Z1, Z2, A1, A2, cfg):
    """Bounds with anchors in view 1 (weights from view 2) and vice versa.

    Returns ``(f_G1, f_G2)`` where ``f_G2`` lets view 1 vary against the
    sampled view 2, matching the one-sided compactness definition.
    """
    opts = dict(hops=ctx.hops, layer2=cfg.layer2, relax_index=cfg.relax_index)
    f_g2 = compactness_bounds(enc, ctx.graph, ctx.bounds, contrast_weight(Z2), A_realized=A1, **opts)
    f_g1 = compactness_bounds(enc, ctx.graph, ctx.bounds, contrast_weight(Z1), A_realized=A2, **opts)
    return f_g1, f_g2


def forward_step(enc, proj, ctx, A1, A2, cfg, pot_nodes=None, track_compactness=True):
    """Losses for one pair of views; call inside an active tape to get gradients.

    With ``kappa == 0`` the regularizer is never put on the tape, so the
    update is exactly the plain InfoNCE one; compactness is then measured
    off-tape for logging only.
    """
    Z1 = gcn_forward(enc, ctx.X, A1)
    Z2 = gcn_forward(enc, ctx.X, A2)
    nce, per_node = infonce_loss(Z1, Z2, proj, cfg.tau)
    comp = (float("nan"), float("nan"))
    if cfg.kappa > 0:
        f_g1, f_g2 = both_compactness(enc, ctx, Z1, Z2, A1, A2, cfg)
        pot = pot_loss(f_g1, f_g2, pot_nodes)
        loss = total_loss(nce, pot, cfg.kappa)
        comp = (float(f_g1.values.mean()), float(f_g2.values.mean()))
        pot_value = pot.item()
    else:
        loss = nce
        pot_value = 0.0
        if track_compactness:
            with ad.no_grad():
                f_g1, f_g2 = both_compactness(enc, ctx, Z1, Z2, A1, A2, cfg)
            comp = (float(f_g1.values.mean()), float(f_g2.values.mean()))
    report = LossReport(infonce=nce.item(), pot=pot_value, total=loss.item(), per_node_infonce=per_node)
    return loss, report, comp


def _rngs(seed):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)]


def train(g, cfg, track_compactness=True, callback=None):
    """Run the training loop; returns ``(encoder, projector, log)``."""
    if g.num_nodes < 2:
        raise ValidationError("training needs at least two nodes")
    rng_init, rng_aug, rng_pot = _rngs(cfg.seed)
    enc = init_encoder(g.num_features, cfg.d1, cfg.d2, cfg.gamma, rng_init)
    proj = init_projector(cfg.d2, cfg.dp, rng_init)
    opt = Adam(enc.tensors() + proj.tensors(), lr=cfg.learning_rate)
    ctx = StepContext.build(g, cfg)
    log = TrainLog()
    batch = None if cfg.pot_batch == "full" or cfg.pot_batch >= g.num_nodes else cfg.pot_batch

    for epoch in range(1, cfg.epochs + 1):
        v1 = sample_edge_drop(g, cfg.drop_rate_view1, cfg.strategy, rng_aug)
        v2 = sample_edge_drop(g, cfg.drop_rate_view2, cfg.strategy, rng_aug)
        A1, A2 = normalized_message_passing(v1), normalized_message_passing(v2)
        pot_nodes = None if batch is None else np.sort(rng_pot.choice(g.num_nodes, batch, replace=False))

        opt.zero_grad()
        with Tape() as tape:
            loss, report, comp = forward_step(enc, proj, ctx, A1, A2, cfg, pot_nodes, track_compactness)
        if not np.isfinite([report.infonce, report.pot, report.total]).all():
            raise TrainingAbortedError(epoch, {"infonce": report.infonce, "pot": report.pot, "total": report.total})
        tape.backward(loss)
        opt.step()
        log.append(epoch, report, *comp)
        if callback is not None:
            callback(epoch, report, comp)
    return enc, proj, log


def embed(enc, g):
    """Embeddings of the unaugmented graph."""
    return gcn_forward(enc, g.features, normalized_message_passing(g)).values
