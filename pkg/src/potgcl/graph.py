"""Undirected graphs, degree bookkeeping, message passing and data splits."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DimensionError, MalformedInputError, ValidationError


def _canonical_edges(edges, num_nodes):
    arr = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if arr.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if (arr < 0).any() or (arr >= num_nodes).any():
        raise ValidationError(f"edge endpoint outside [0, {num_nodes})")
    if (arr[:, 0] == arr[:, 1]).any():
        raise ValidationError("self-loops are not stored as edges")
    arr = np.sort(arr, axis=1)
    return np.unique(arr, axis=0)


@dataclass(frozen=True)
class DegreeInfo:
    raw_degree: np.ndarray
    hat_degree: np.ndarray


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph with node features.

    ``edges`` is canonicalised to a sorted (E, 2) array with ``u < v`` and
    no duplicates, so two graphs with the same edge set compare bitwise.
    """

    num_nodes: int
    edges: np.ndarray
    features: np.ndarray
    labels: np.ndarray | None = None
    class_count: int | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] != self.num_nodes:
            raise DimensionError(
                f"features must have {self.num_nodes} rows, got shape {feats.shape}"
            )
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "edges", _canonical_edges(self.edges, self.num_nodes))
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64)
            if labels.shape != (self.num_nodes,):
                raise DimensionError(f"expected {self.num_nodes} labels, got {labels.shape}")
            if (labels < 0).any():
                raise ValidationError("labels must be non-negative")
            object.__setattr__(self, "labels", labels)
            if self.class_count is None:
                object.__setattr__(self, "class_count", int(labels.max()) + 1 if labels.size else 0)

    @property
    def num_edges(self):
        return len(self.edges)

    @property
    def num_features(self):
        return self.features.shape[1]

    @cached_property
    def degrees(self):
        d = np.bincount(self.edges.ravel(), minlength=self.num_nodes).astype(np.int64)
        return DegreeInfo(raw_degree=d, hat_degree=d + 1)

    @cached_property
    def adjacency(self):
        a = np.zeros((self.num_nodes, self.num_nodes))
        if self.num_edges:
            a[self.edges[:, 0], self.edges[:, 1]] = 1.0
            a[self.edges[:, 1], self.edges[:, 0]] = 1.0
        return a

    @cached_property
    def neighbors(self):
        """Closed neighbourhoods N(i) = {i} plus adjacent nodes, as sorted arrays."""
        adj = [[i] for i in range(self.num_nodes)]
        for u, v in self.edges:
            adj[u].append(int(v))
            adj[v].append(int(u))
        return [np.array(sorted(n), dtype=np.int64) for n in adj]

    def with_edges(self, edges):
        """A view sharing features/labels with a different edge set."""
        return Graph(self.num_nodes, edges, self.features, self.labels, self.class_count)

    def permuted(self, perm):
        """Relabel node ``i`` as ``perm[i]``."""
        perm = np.asarray(perm)
        inv = np.argsort(perm)
        labels = None if self.labels is None else self.labels[inv]
        return Graph(self.num_nodes, perm[self.edges], self.features[inv], labels, self.class_count)


def normalized_message_passing(g):
    """D^-1/2 (A + I) D^-1/2 with the self-loop-inclusive degree."""
    dhat = g.degrees.hat_degree.astype(np.float64)
    inv_sqrt = 1.0 / np.sqrt(dhat)
    out = np.zeros((g.num_nodes, g.num_nodes))
    u, v = g.edges[:, 0], g.edges[:, 1]
    w = inv_sqrt[u] * inv_sqrt[v]
    out[u, v] = w
    out[v, u] = w
    out[np.arange(g.num_nodes), np.arange(g.num_nodes)] = 1.0 / dhat
    return out


def _read_lines(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read().splitlines()


def load_graph(edge_path, feature_path, label_path=None):
    """Read an edge list, a headerless feature CSV and optionally a label file."""
    with open(feature_path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    try:
        features = np.array([[float(x) for x in r] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise MalformedInputError(f"{feature_path}: non-numeric feature value ({exc})") from None
    if len({len(r) for r in rows}) > 1:
        raise DimensionError(f"{feature_path}: rows have differing column counts")
    n = len(rows)
    if n == 0:
        raise DimensionError(f"{feature_path}: no feature rows")

    edges = []
    for lineno, line in enumerate(_read_lines(edge_path), start=1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 2:
            raise MalformedInputError(f"{edge_path}:{lineno}: expected two node ids, got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise MalformedInputError(f"{edge_path}:{lineno}: non-integer node id in {line!r}") from None
        if not (0 <= u < n and 0 <= v < n):
            raise MalformedInputError(f"{edge_path}:{lineno}: node id out of range [0, {n}) in {line!r}")
        if u == v:
            raise ValidationError(f"{edge_path}:{lineno}: self-loop {u} {v}")
        edges.append((u, v))

    labels = None
    if label_path is not None:
        vals = [ln.strip() for ln in _read_lines(label_path) if ln.strip()]
        if len(vals) != n:
            raise DimensionError(f"{label_path}: {len(vals)} labels for {n} feature rows")
        try:
            labels = np.array([int(v) for v in vals], dtype=np.int64)
        except ValueError:
            raise MalformedInputError(f"{label_path}: non-integer label") from None
    return Graph(n, np.array(edges, dtype=np.int64).reshape(-1, 2), features, labels)


def save_edges(g, path):
    with open(path, "w", encoding="utf-8") as fh:
        for u, v in g.edges:
            fh.write(f"{u} {v}\n")


def save_features(g, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        csv.writer(fh).writerows([[repr(float(x)) for x in row] for row in g.features])


def save_labels(g, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(f"{int(y)}\n" for y in g.labels)


@dataclass(frozen=True)
class SplitMasks:
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray

    def to_json(self):
        return json.dumps({k: np.flatnonzero(getattr(self, k)).tolist() for k in ("train", "valid", "test")})

    @classmethod
    def from_json(cls, text, num_nodes):
        data = json.loads(text)
        masks = {}
        for k in ("train", "valid", "test"):
            m = np.zeros(num_nodes, dtype=bool)
            m[np.asarray(data[k], dtype=np.int64)] = True
            masks[k] = m
        return cls(**masks)


def random_split(g, train_frac, valid_frac, seed):
    return split_masks(g.num_nodes, train_frac, valid_frac, seed)


def split_masks(n, train_frac, valid_frac, seed):
    """Disjoint random train/valid/test masks; the test set takes the remainder."""
    if train_frac <= 0 or valid_frac <= 0 or train_frac + valid_frac >= 1:
        raise ValidationError(f"invalid split fractions ({train_frac}, {valid_frac})")
    n_train = int(np.floor(train_frac * n + 0.5))
    n_valid = int(np.floor(valid_frac * n + 0.5))
    perm = np.random.default_rng(seed).permutation(n)
    masks = [np.zeros(n, dtype=bool) for _ in range(3)]
    masks[0][perm[:n_train]] = True
    masks[1][perm[n_train : n_train + n_valid]] = True
    masks[2][perm[n_train + n_valid :]] = True
    return SplitMasks(*masks)
