"""Edge-drop augmentation and the box of reachable message-passing matrices."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import InfeasibleBudgetError, ValidationError

Strategy = Literal["uniform", "degree_weighted"]
STRATEGIES = ("uniform", "degree_weighted")

# guards ceil() against products like 0.3 * 10 = 3.0000000000000004
_CEIL_SLACK = 1e-9


@dataclass(frozen=True)
class AugmentConfig:
    drop_rate_view1: float = 0.4
    drop_rate_view2: float = 0.3
    strategy: Strategy = "uniform"

    def __post_init__(self):
        for r in (self.drop_rate_view1, self.drop_rate_view2):
            _check_rate(r)
        if self.strategy not in STRATEGIES:
            raise ValidationError(f"unknown strategy {self.strategy!r}")

    @property
    def max_rate(self):
        return max(self.drop_rate_view1, self.drop_rate_view2)


@dataclass(frozen=True)
class BudgetSpec:
    """Global (``Q``) and per-node (``q``) limits on dropped edges."""

    Q: int
    q: np.ndarray


@dataclass(frozen=True)
class MessagePassingBounds:
    L: np.ndarray
    U: np.ndarray


def _check_rate(rate):
    if not 0.0 <= rate < 1.0:
        raise ValidationError(f"drop rate must lie in [0, 1), got {rate}")


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def drop_probabilities(g, rate, strategy="uniform"):
    """Per-edge drop probability used by :func:`sample_edge_drop`."""
    _check_rate(rate)
    if strategy == "uniform" or g.num_edges == 0:
        return np.full(g.num_edges, float(rate))
    if strategy != "degree_weighted":
        raise ValidationError(f"unknown strategy {strategy!r}")
    d = g.degrees.raw_degree.astype(np.float64)
    centrality = 0.5 * (d[g.edges[:, 0]] + d[g.edges[:, 1]])
    w = centrality / centrality.max()
    return np.clip(rate * w, 0.0, np.nextafter(1.0, 0.0))


def sample_edge_drop(g, rate, strategy="uniform", seed=None):
    """Drop each edge independently; returns a graph view with the kept edges.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    probs = drop_probabilities(g, rate, strategy)
    draws = _rng(seed).random(g.num_edges)
    return g.with_edges(g.edges[draws >= probs])


def budgets_from_rate(g, rate):
    _check_rate(rate)
    d = g.degrees.raw_degree
    q = np.minimum(np.ceil(rate * d - _CEIL_SLACK), d).astype(np.int64)
    q = np.maximum(q, 0)
    Q = max(int(math.ceil(rate * g.num_edges - _CEIL_SLACK)), 0)
    return BudgetSpec(Q=Q, q=q)


def zero_budget(g):
    return BudgetSpec(Q=0, q=np.zeros(g.num_nodes, dtype=np.int64))


def message_passing_bounds(g, b):
    """Entry-wise bounds of every message-passing matrix reachable within ``b``.

    Degrees are self-loop inclusive, so a node keeps at least its self-loop.
    """
    dhat = g.degrees.hat_degree
    q = np.asarray(b.q, dtype=np.int64)
    if q.shape != (g.num_nodes,):
        raise ValidationError(f"budget vector has shape {q.shape}, expected ({g.num_nodes},)")
    if (q < 0).any() or (q > g.degrees.raw_degree).any():
        raise InfeasibleBudgetError("per-node budgets must satisfy 0 <= q_i <= d_i")
    remaining = (dhat - q).astype(np.float64)
    if (remaining < 1).any():
        raise InfeasibleBudgetError("every node must keep its self-loop (d_hat - q >= 1)")

    n = g.num_nodes
    L = np.zeros((n, n))
    U = np.zeros((n, n))
    diag = np.arange(n)
    L[diag, diag] = 1.0 / dhat
    U[diag, diag] = 1.0 / remaining
    u, v = g.edges[:, 0], g.edges[:, 1]
    upper = np.minimum(1.0, 1.0 / np.sqrt(remaining[u] * remaining[v]))
    U[u, v] = upper
    U[v, u] = upper
    # an edge with a zero-budget endpoint always survives and its endpoints
    # can only lose degree, so it never drops below the unaugmented value
    fixed = (q[u] == 0) | (q[v] == 0) | (b.Q == 0)
    lower = np.where(fixed, 1.0 / np.sqrt(dhat[u] * dhat[v]), 0.0)
    L[u, v] = lower
    L[v, u] = lower
    return MessagePassingBounds(L=L, U=U)


def dropped_edges(g, view):
    """Boolean mask over ``g.edges`` marking edges absent from ``view``."""
    kept = {(int(u), int(v)) for u, v in view.edges}
    return np.array([(int(u), int(v)) not in kept for u, v in g.edges], dtype=bool)


def is_feasible(g, dropped, b):
    """Whether dropping the masked edges respects the global and local budgets."""
    dropped = np.asarray(dropped, dtype=bool)
    if dropped.sum() > b.Q:
        return False
    per_node = np.bincount(g.edges[dropped].ravel(), minlength=g.num_nodes)
    return bool((per_node <= b.q).all())


def bounds_to_csv(mb, path):
    n = mb.L.shape[0]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("row,col,lower,upper\n")
        for i in range(n):
            for j in np.flatnonzero(mb.U[i] > 0):
                fh.write(f"{i},{j},{float(mb.L[i, j])!r},{float(mb.U[i, j])!r}\n")
