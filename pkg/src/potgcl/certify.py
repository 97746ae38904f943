"""Certified lower bounds on node compactness and the enumeration oracle.

For an anchor node ``i`` with fixed contrast weight ``w_i`` the quantity of
interest is ``min z_i . w_i`` over every message-passing matrix reachable by
dropping edges within budget.  The bound is obtained by

1. interval bounds on the pre-activations of both GCN layers,
2. linear relaxation of the PReLU between those bounds,
3. back-substitution of the relaxations from the output inwards, which
   leaves a two-hop bilinear form in the message-passing entries whose
   minimum over the entry-wise box is closed-form.

Relaxation coefficients, sign selections and the contrast weight are
constants; gradients reach the encoder weights through the
back-substituted weights and biases.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .encoder import gcn_forward
from .errors import ContractError, DegenerateEmbeddingError, EnumerationGuardError

MAX_ORACLE_EDGES = 20
DEGENERATE_WIDTH = 1e-9

Layer2Source = Literal["interval", "realized"]
RelaxIndex = Literal["neighbor", "anchor"]


def _pos(x):
    return np.maximum(x, 0.0)


def _neg(x):
    return np.minimum(x, 0.0)


def _prelu(x, gamma):
    return np.where(x >= 0, x, gamma * x)


def _values(x):
    return x.values if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


@dataclass(frozen=True)
class ContrastWeight:
    W: np.ndarray


def contrast_weight(Z_fixed):
    """Row i: normalized z_i minus the mean of the other normalized rows."""
    z = _values(Z_fixed)
    n = z.shape[0]
    if n < 2:
        raise ContractError("contrast weight needs at least two nodes")
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    bad = np.flatnonzero(norms[:, 0] < ad.NORM_EPS)
    if bad.size:
        raise DegenerateEmbeddingError(f"rows with zero norm: {bad[:10].tolist()}")
    zbar = z / norms
    total = zbar.sum(axis=0, keepdims=True)
    return ContrastWeight(W=zbar - (total - zbar) / (n - 1))


@dataclass(frozen=True)
class PreActivationBounds:
    lower: tuple  # (P1_L, P2_L)
    upper: tuple  # (P1_U, P2_U)


@dataclass(frozen=True)
class RelaxationParams:
    alpha_L: tuple
    alpha_U: tuple
    beta_L: tuple
    beta_U: tuple


def _box_product(L, U, V_lo, V_hi):
    """Bounds of A @ V for A in [L, U] (entry-wise, A >= 0) and V in [V_lo, V_hi]."""
    lo = L @ _pos(V_lo) + U @ _neg(V_lo)
    hi = U @ _pos(V_hi) + L @ _neg(V_hi)
    return lo, hi


def preactivation_bounds(p, X, mb, A_realized=None, layer2: Layer2Source = "interval"):
    """Interval bounds of both layers' pre-activations over the box ``mb``.

    ``layer2="interval"`` feeds the layer-1 output interval into layer 2,
    which is valid for every matrix in the box.  ``layer2="realized"``
    evaluates layer 2 on the layer-1 output under ``A_realized`` only.
    """
    X = _values(X)
    W1, b1, W2, b2 = (t.values for t in p.tensors())
    XW = X @ W1
    P1_L, P1_U = _box_product(mb.L, mb.U, XW, XW)
    P1_L, P1_U = P1_L + b1, P1_U + b1
    if layer2 == "realized":
        if A_realized is None:
            raise ContractError("layer2='realized' requires A_realized")
        H = _prelu(_values(A_realized) @ XW + b1, p.gamma)
        V_lo = V_hi = H @ W2
    elif layer2 == "interval":
        H_lo, H_hi = _prelu(P1_L, p.gamma), _prelu(P1_U, p.gamma)
        V_lo = H_lo @ _pos(W2) + H_hi @ _neg(W2)
        V_hi = H_hi @ _pos(W2) + H_lo @ _neg(W2)
    else:
        raise ValueError(f"unknown layer2 source {layer2!r}")
    P2_L, P2_U = _box_product(mb.L, mb.U, V_lo, V_hi)
    return PreActivationBounds(lower=(P1_L, P2_L + b2), upper=(P1_U, P2_U + b2))


def relax_prelu(l, u, gamma):
    """Linear bounds alpha_L (p + beta_L) <= prelu(p) <= alpha_U (p + beta_U) on [l, u]."""
    l = np.asarray(l, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    alpha_L = np.ones_like(l)
    alpha_U = np.ones_like(l)
    beta_L = np.zeros_like(l)
    beta_U = np.zeros_like(l)

    inactive = u <= 0
    alpha_L[inactive] = gamma
    alpha_U[inactive] = gamma

    crossing = (l < 0) & (u > 0)
    narrow = crossing & (u - l < DEGENERATE_WIDTH)
    # a vanishing interval is treated as a fixed input: u > 0 here, so slope 1
    cross = crossing & ~narrow
    lc, uc = l[cross], u[cross]
    slope = (uc - gamma * lc) / (uc - lc)
    alpha_L[cross] = slope
    alpha_U[cross] = slope
    beta_U[cross] = (gamma - 1.0) * uc * lc / (uc - gamma * lc)
    return alpha_L, alpha_U, beta_L, beta_U


def relaxation_params(pb, gamma):
    per_layer = [relax_prelu(l, u, gamma) for l, u in zip(pb.lower, pb.upper)]
    return RelaxationParams(*(tuple(layer[k] for layer in per_layer) for k in range(4)))


class NeighborhoodIndex:
    """Flat index arrays over 1-hop pairs (i, j1) and 2-hop triples (i, j1, j2).

    Neighbourhoods are closed (a node is its own neighbour).
    """

    def __init__(self, g):
        n = g.num_nodes
        adj = g.adjacency + np.eye(n)
        counts = adj.sum(axis=1).astype(np.int64)
        indptr = np.concatenate([[0], np.cumsum(counts)])
        indices = np.nonzero(adj)[1]
        self.num_nodes = n
        self.pair_anchor = np.repeat(np.arange(n), counts)
        self.pair_mid = indices
        mid_counts = counts[self.pair_mid]
        total = int(mid_counts.sum())
        self.trip_pair = np.repeat(np.arange(len(self.pair_mid)), mid_counts)
        offsets = np.arange(total) - np.repeat(np.cumsum(mid_counts) - mid_counts, mid_counts)
        self.trip_mid = self.pair_mid[self.trip_pair]
        self.trip_far = indices[np.repeat(indptr[self.pair_mid], mid_counts) + offsets]

    @property
    def num_pairs(self):
        return len(self.pair_mid)

    @property
    def num_triples(self):
        return len(self.trip_far)


def _select(mask, a, b):
    return np.where(mask, a, b)


def node_compactness(p, g, mb, rp, w, hops=None, relax_index: RelaxIndex = "neighbor"):
    """Differentiable per-node lower bounds (an N x 1 tensor).

    ``relax_index="neighbor"`` relaxes the layer-1 neuron of neighbour j1
    with j1's own pre-activation bounds; ``"anchor"`` reuses the anchor's.
    """
    hops = hops if hops is not None else NeighborhoodIndex(g)
    W_cl = w.W if isinstance(w, ContrastWeight) else np.asarray(w)
    n = g.num_nodes
    d1, d2 = p.W1.shape[1], p.W2.shape[1]
    if W_cl.shape != (n, d2):
        raise ContractError(f"contrast weight shape {W_cl.shape} != {(n, d2)}")
    if rp.alpha_L[0].shape != (n, d1) or rp.alpha_L[1].shape != (n, d2):
        raise ContractError("relaxation parameters do not match encoder dimensions")

    # output layer
    up = W_cl >= 0
    Lam2 = W_cl * _select(up, rp.alpha_L[1], rp.alpha_U[1])
    Del2 = _select(up, rp.beta_L[1], rp.beta_U[1])
    W2_tilde = ad.matmul(Lam2, p.W2.T)  # N x d1
    b2_tilde = ad.matmul(Lam2, p.b2.T) + np.sum(Lam2 * Del2, axis=1, keepdims=True)

    # hidden layer, one coefficient row per (anchor, neighbour) pair
    anchor, mid = hops.pair_anchor, hops.pair_mid
    relax_rows = mid if relax_index == "neighbor" else anchor
    W2_pair = ad.take_rows(W2_tilde, anchor)
    up1 = W2_pair.values >= 0
    lam1 = _select(up1, rp.alpha_L[0][relax_rows], rp.alpha_U[0][relax_rows])
    del1 = _select(up1, rp.beta_L[0][relax_rows], rp.beta_U[0][relax_rows])
    Lam1 = ad.mul(W2_pair, lam1)  # P x d1
    b1_tilde = ad.matmul(Lam1, p.b1.T) + ad.rowsum(ad.mul(Lam1, del1))

    # inner sums over j2 in N(j1): coefficient of A[j1, j2] is x_j2 . W1 . Lam1
    XW1 = ad.matmul(g.features, p.W1)
    coef = ad.rowsum(ad.mul(ad.take_rows(XW1, hops.trip_far), ad.take_rows(Lam1, hops.trip_pair)))
    a_inner = _select(coef.values[:, 0] > 0, mb.L[hops.trip_mid, hops.trip_far], mb.U[hops.trip_mid, hops.trip_far])
    inner = ad.segment_sum(ad.mul(coef, a_inner[:, None]), hops.trip_pair, hops.num_pairs) + b1_tilde

    # outer sums over j1 in N(i)
    a_outer = _select(inner.values[:, 0] >= 0, mb.L[anchor, mid], mb.U[anchor, mid])
    return ad.segment_sum(ad.mul(inner, a_outer[:, None]), anchor, n) + b2_tilde


def compactness_bounds(
    p,
    g,
    mb,
    w,
    A_realized=None,
    hops=None,
    layer2: Layer2Source = "interval",
    relax_index: RelaxIndex = "neighbor",
):
    """Bounds, relaxation and back-substitution in one call."""
    pb = preactivation_bounds(p, g.features, mb, A_realized, layer2)
    rp = relaxation_params(pb, p.gamma)
    return node_compactness(p, g, mb, rp, w, hops=hops, relax_index=relax_index)


def realized_compactness(p, X, A_hat, w):
    """z_i . w_i under one concrete message-passing matrix."""
    W_cl = w.W if isinstance(w, ContrastWeight) else np.asarray(w)
    z = gcn_forward(p, X, A_hat).values
    return np.sum(z * W_cl, axis=1)


def _batched_message_passing(g, dropped):
    """Normalized message-passing matrices for a batch of dropped-edge masks."""
    s = dropped.shape[0]
    n = g.num_nodes
    u, v = g.edges[:, 0], g.edges[:, 1]
    inc = np.zeros((g.num_edges, n))
    inc[np.arange(g.num_edges), u] = 1.0
    inc[np.arange(g.num_edges), v] = 1.0
    dhat = g.degrees.hat_degree[None, :] - dropped.astype(np.float64) @ inc
    inv_sqrt = 1.0 / np.sqrt(dhat)
    A = np.zeros((s, n, n))
    A[:, np.arange(n), np.arange(n)] = 1.0 / dhat
    kept = ~dropped
    vals = inv_sqrt[:, u] * inv_sqrt[:, v] * kept
    A[:, u, v] = vals
    A[:, v, u] = vals
    return A


def enumerate_feasible_drops(g, b):
    """Every dropped-edge mask (as an S x E bool array) allowed by the budgets."""
    m = g.num_edges
    if m > MAX_ORACLE_EDGES:
        raise EnumerationGuardError(
            f"{m} edges exceeds the enumeration guard of {MAX_ORACLE_EDGES}"
        )
    codes = np.arange(2**m, dtype=np.int64)
    bits = ((codes[:, None] >> np.arange(m)) & 1).astype(bool)
    inc = np.zeros((m, g.num_nodes), dtype=np.int64)
    inc[np.arange(m), g.edges[:, 0]] = 1
    inc[np.arange(m), g.edges[:, 1]] = 1
    per_node = bits.astype(np.int64) @ inc
    ok = (bits.sum(axis=1) <= b.Q) & (per_node <= np.asarray(b.q)[None, :]).all(axis=1)
    return bits[ok]


def brute_force_compactness(p, g, b, w, chunk=4096):
    """Exact per-node minimum of z_i . w_i over all budget-feasible edge drops."""
    W_cl = w.W if isinstance(w, ContrastWeight) else np.asarray(w)
    masks = enumerate_feasible_drops(g, b)
    W1, b1, W2, b2 = (t.values for t in p.tensors())
    XW = g.features @ W1
    best = np.full(g.num_nodes, np.inf)
    for start in range(0, len(masks), chunk):
        A = _batched_message_passing(g, masks[start : start + chunk])
        H = _prelu(A @ XW + b1, p.gamma)
        Z = _prelu(A @ (H @ W2) + b2, p.gamma)
        best = np.minimum(best, np.einsum("snd,nd->sn", Z, W_cl).min(axis=0))
    return best
