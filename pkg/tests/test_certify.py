import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from potgcl import autodiff as ad
from potgcl.augment import (
    BudgetSpec,
    budgets_from_rate,
    dropped_edges,
    is_feasible,
    message_passing_bounds,
    sample_edge_drop,
    zero_budget,
)
from potgcl.autodiff import Tensor
from potgcl.certify import (
    MAX_ORACLE_EDGES,
    NeighborhoodIndex,
    brute_force_compactness,
    compactness_bounds,
    contrast_weight,
    enumerate_feasible_drops,
    node_compactness,
    preactivation_bounds,
    realized_compactness,
    relax_prelu,
    relaxation_params,
)
from potgcl.encoder import EncoderParams, gcn_forward, init_encoder
from potgcl.errors import ContractError, DegenerateEmbeddingError, EnumerationGuardError
from potgcl.graph import Graph, normalized_message_passing
from potgcl.synthetic import random_graph

from conftest import analytic_grad, numeric_grad, random_encoder, random_graph_instance, rel_error


def prelu(x, gamma):
    return np.where(x >= 0, x, gamma * x)


# -- contrast weight -------------------------------------------------------


def test_contrast_weight_two_nodes():
    W = contrast_weight(np.eye(2)).W
    assert np.allclose(W[0], [1, -1]) and np.allclose(W[1], [-1, 1])


def test_contrast_weight_identical_rows():
    assert np.allclose(contrast_weight(np.tile([[0.3, -2.0, 1.0]], (4, 1))).W, 0)


def test_contrast_weight_direct_formula():
    rng = np.random.default_rng(0)
    Z = rng.normal(size=(3, 4))
    zb = Z / np.linalg.norm(Z, axis=1, keepdims=True)
    expected = [zb[i] - sum(zb[j] for j in range(3) if j != i) / 2 for i in range(3)]
    assert np.allclose(contrast_weight(Z).W, expected)


def test_contrast_weight_errors():
    with pytest.raises(DegenerateEmbeddingError):
        contrast_weight([[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(ContractError):
        contrast_weight([[1.0, 0.0]])


# -- pre-activation bounds ---------------------------------------------------


def test_collapsed_box_gives_realized_preactivations(path4):
    p = init_encoder(3, 4, 2, rng=0)
    A = normalized_message_passing(path4)
    pb = preactivation_bounds(p, path4.features, message_passing_bounds(path4, zero_budget(path4)))
    W1, b1, W2, b2 = (t.values for t in p.tensors())
    P1 = A @ path4.features @ W1 + b1
    P2 = A @ prelu(P1, p.gamma) @ W2 + b2
    for k, P in enumerate((P1, P2)):
        assert np.allclose(pb.lower[k], P) and np.allclose(pb.upper[k], P)


def test_single_node_hand_bounds():
    one = Tensor([[1.0]])
    p = EncoderParams(one, Tensor([[0.0]]), one, Tensor([[0.0]]), gamma=0.0)
    mb = type("Box", (), {"L": np.array([[0.5]]), "U": np.array([[1.0]])})
    pb = preactivation_bounds(p, [[1.0]], mb)
    assert pb.lower[0].item() == 0.5 and pb.upper[0].item() == 1.0


def test_sign_symmetry(path4):
    rng = np.random.default_rng(2)
    p = init_encoder(3, 4, 2, rng=rng)
    p.b1.values[:] = rng.normal(size=p.b1.shape)
    q = EncoderParams(Tensor(-p.W1.values), p.b1, p.W2, p.b2, p.gamma)
    mb = message_passing_bounds(path4, budgets_from_rate(path4, 0.5))
    lo = preactivation_bounds(p, path4.features, mb).lower[0]
    hi_neg = preactivation_bounds(q, path4.features, mb).upper[0]
    assert np.allclose(lo, -hi_neg + 2 * p.b1.values)


def test_preactivation_bounds_contain_every_feasible_view():
    rng = np.random.default_rng(3)
    for _ in range(30):
        g = random_graph_instance(rng)
        p = random_encoder(rng, g.num_features)
        b = budgets_from_rate(g, float(rng.uniform(0, 0.6)))
        pb = preactivation_bounds(p, g.features, message_passing_bounds(g, b))
        W1, b1, W2, b2 = (t.values for t in p.tensors())
        for mask in enumerate_feasible_drops(g, b):
            A = normalized_message_passing(g.with_edges(g.edges[~mask]))
            P1 = A @ g.features @ W1 + b1
            P2 = A @ prelu(P1, p.gamma) @ W2 + b2
            assert (pb.lower[0] <= P1 + 1e-9).all() and (P1 <= pb.upper[0] + 1e-9).all()
            assert (pb.lower[1] <= P2 + 1e-9).all() and (P2 <= pb.upper[1] + 1e-9).all()


# -- relaxation ---------------------------------------------------------------


def test_relaxation_table_values():
    assert [float(x) for x in relax_prelu(0.3, 0.8, 0.25)] == [1, 1, 0, 0]
    assert [float(x) for x in relax_prelu(-2.0, -1.0, 0.25)] == [0.25, 0.25, 0, 0]
    aL, aU, bL, bU = (float(x) for x in relax_prelu(-1.0, 1.0, 0.0))
    assert (aL, aU, bL) == (0.5, 0.5, 0.0) and bU == pytest.approx(1.0)


def test_relaxation_degenerate_width():
    aL, aU, bL, bU = relax_prelu(np.array([-1e-12]), np.array([1e-12]), 0.25)
    assert aL[0] == aU[0] == 1.0 and bL[0] == bU[0] == 0.0


@settings(max_examples=200, deadline=None)
@given(
    st.floats(-50, 50),
    st.floats(1e-6, 100),
    st.sampled_from([0.0, 0.01, 0.25, 0.5, 0.9]),
)
def test_relaxation_sandwiches_prelu(l, width, gamma):
    u = l + width
    aL, aU, bL, bU = relax_prelu(np.array([l]), np.array([u]), gamma)
    x = np.linspace(l, u, 101)
    y = prelu(x, gamma)
    tol = 1e-9 * (1 + abs(l) + abs(u))
    assert (aL * (x + bL) <= y + tol).all()
    assert (y <= aU * (x + bU) + tol).all()


# -- oracle -------------------------------------------------------------------


def test_oracle_zero_budget_is_realized(path4):
    p = init_encoder(3, 4, 2, rng=0)
    A = normalized_message_passing(path4)
    w = contrast_weight(gcn_forward(p, path4.features, A))
    assert np.allclose(brute_force_compactness(p, path4, zero_budget(path4), w), realized_compactness(p, path4.features, A, w))


def test_oracle_single_edge_two_augmentations():
    g = Graph(2, [(0, 1)], np.array([[1.0], [-1.0]]))
    masks = enumerate_feasible_drops(g, BudgetSpec(Q=1, q=np.array([1, 1])))
    assert len(masks) == 2
    p = init_encoder(1, 3, 2, rng=1)
    w = contrast_weight(np.array([[1.0, 0.2], [0.1, 1.0]]))
    vals = [realized_compactness(p, g.features, normalized_message_passing(g.with_edges(e)), w) for e in ([(0, 1)], [])]
    assert np.allclose(brute_force_compactness(p, g, BudgetSpec(1, np.array([1, 1])), w), np.minimum(*vals))


def test_oracle_triangle_all_subsets():
    g = Graph(3, [(0, 1), (1, 2), (0, 2)], np.eye(3))
    assert len(enumerate_feasible_drops(g, BudgetSpec(Q=3, q=np.array([2, 2, 2])))) == 8


def test_oracle_matches_loop_over_subsets():
    rng = np.random.default_rng(4)
    for _ in range(10):
        g = random_graph_instance(rng, max_nodes=6, max_edges=7)
        p = random_encoder(rng, g.num_features)
        b = budgets_from_rate(g, 0.5)
        w = contrast_weight(rng.normal(size=(g.num_nodes, p.W2.shape[1])))
        best = np.full(g.num_nodes, np.inf)
        for bits in itertools.product([False, True], repeat=g.num_edges):
            mask = np.array(bits, dtype=bool)
            if is_feasible(g, mask, b):
                A = normalized_message_passing(g.with_edges(g.edges[~mask]))
                best = np.minimum(best, realized_compactness(p, g.features, A, w))
        assert np.allclose(brute_force_compactness(p, g, b, w), best)


def test_oracle_guard():
    g = random_graph(12, MAX_ORACLE_EDGES + 1, 2, seed=0)
    with pytest.raises(EnumerationGuardError):
        enumerate_feasible_drops(g, budgets_from_rate(g, 0.2))


# -- certified bounds ---------------------------------------------------------


def test_neighborhood_index_counts(path4):
    hops = NeighborhoodIndex(path4)
    closed = [2, 3, 3, 2]
    assert hops.num_pairs == sum(closed)
    assert hops.num_triples == sum(closed[j] for i in range(4) for j in path4.neighbors[i])


def test_zero_budget_bounds_are_exact():
    rng = np.random.default_rng(5)
    for _ in range(25):
        g = random_graph_instance(rng)
        p = random_encoder(rng, g.num_features)
        A = normalized_message_passing(g)
        w = contrast_weight(gcn_forward(p, g.features, A).values + 1e-3)
        f = compactness_bounds(p, g, message_passing_bounds(g, zero_budget(g)), w, A_realized=A)
        assert np.allclose(f.values[:, 0], realized_compactness(p, g.features, A, w), atol=1e-6)


def test_path_bound_below_oracle(path4):
    p = init_encoder(3, 4, 2, rng=0)
    b = budgets_from_rate(path4, 0.4)
    w = contrast_weight(gcn_forward(p, path4.features, normalized_message_passing(path4)))
    f = compactness_bounds(p, path4, message_passing_bounds(path4, b), w)
    assert (f.values[:, 0] <= brute_force_compactness(p, path4, b, w) + 1e-9).all()


def test_zero_contrast_weight_gives_zero(path4):
    p = init_encoder(3, 4, 2, rng=0)
    p.b2.values[:] = 0.7
    mb = message_passing_bounds(path4, budgets_from_rate(path4, 0.5))
    f = compactness_bounds(p, path4, mb, np.zeros((4, 2)))
    assert not f.values.any()


def test_shape_contract(path4):
    p = init_encoder(3, 4, 2, rng=0)
    mb = message_passing_bounds(path4, zero_budget(path4))
    rp = relaxation_params(preactivation_bounds(p, path4.features, mb), p.gamma)
    with pytest.raises(ContractError):
        node_compactness(p, path4, mb, rp, np.zeros((4, 3)))


def test_bound_below_every_feasible_sampled_view():
    rng = np.random.default_rng(6)
    checked = 0
    for t in range(40):
        g = random_graph_instance(rng)
        p = random_encoder(rng, g.num_features)
        rate = float(rng.uniform(0.1, 0.6))
        b = budgets_from_rate(g, rate)
        mb = message_passing_bounds(g, b)
        w = contrast_weight(gcn_forward(p, g.features, normalized_message_passing(g)).values + 1e-3)
        f = compactness_bounds(p, g, mb, w).values[:, 0]
        for s in range(10):
            view = sample_edge_drop(g, rate, seed=rng)
            # the independent sampler can overshoot the budgets; only feasible views are covered
            if not is_feasible(g, dropped_edges(g, view), b):
                continue
            checked += 1
            real = realized_compactness(p, g.features, normalized_message_passing(view), w)
            assert (f <= real + 1e-9).all()
    assert checked > 100


def test_oracle_minimum_shrinks_with_budget():
    rng = np.random.default_rng(7)
    for _ in range(20):
        g = random_graph_instance(rng)
        p = random_encoder(rng, g.num_features)
        w = contrast_weight(rng.normal(size=(g.num_nodes, p.W2.shape[1])))
        oracle_lo = brute_force_compactness(p, g, budgets_from_rate(g, 0.2), w)
        oracle_hi = brute_force_compactness(p, g, budgets_from_rate(g, 0.5), w)
        assert (oracle_hi <= oracle_lo + 1e-12).all()


def test_bound_gradient_matches_finite_differences():
    rng = np.random.default_rng(8)
    g = random_graph_instance(rng, max_nodes=6, max_edges=8)
    p = random_encoder(rng, g.num_features, gamma=0.25)
    mb = message_passing_bounds(g, budgets_from_rate(g, 0.4))
    w = contrast_weight(rng.normal(size=(g.num_nodes, p.W2.shape[1])))
    probe = rng.normal(size=(g.num_nodes, 1))
    # relaxation coefficients and sign selections are frozen at the base point
    rp = relaxation_params(preactivation_bounds(p, g.features, mb), p.gamma)
    hops = NeighborhoodIndex(g)

    def loss():
        return ad.sum(ad.mul(node_compactness(p, g, mb, rp, w, hops=hops), probe))

    grads = analytic_grad(loss, p.tensors())
    for t, gr in zip(p.tensors(), grads):
        num = numeric_grad(lambda: loss().item(), t.values, h=1e-6)
        assert rel_error(gr, num) < 1e-4
