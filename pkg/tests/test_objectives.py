import math

import numpy as np
import pytest

from potgcl import autodiff as ad
from potgcl.autodiff import Tensor
from potgcl.encoder import ProjectorParams, init_projector, project
from potgcl.errors import ContractError, DegenerateEmbeddingError, ValidationError
from potgcl.objectives import bce_with_ones, infonce_loss, pot_loss, total_loss


def identity_projector(d):
    I, z = Tensor(np.eye(d)), Tensor(np.zeros((1, d)))
    return ProjectorParams(I, z, I, z)


def naive_infonce(Z1, Z2, pp, tau):
    """Double loop over anchors and candidates: -log(pos / (between + intra))."""
    h1 = project(pp, Z1).values
    h2 = project(pp, Z2).values
    h1 = h1 / np.linalg.norm(h1, axis=1, keepdims=True)
    h2 = h2 / np.linalg.norm(h2, axis=1, keepdims=True)
    n = len(h1)

    def one(a, b):
        out = []
        for i in range(n):
            pos = math.exp(float(a[i] @ b[i]) / tau)
            denom = sum(math.exp(float(a[i] @ b[k]) / tau) for k in range(n))
            denom += sum(math.exp(float(a[i] @ a[k]) / tau) for k in range(n) if k != i)
            out.append(-math.log(pos / denom))
        return np.array(out)

    l1, l2 = one(h1, h2), one(h2, h1)
    return (l1.sum() + l2.sum()) / (2 * n), 0.5 * (l1 + l2)


@pytest.mark.parametrize("n", [2, 3, 5, 16])
def test_matches_double_loop(n):
    rng = np.random.default_rng(n)
    Z1, Z2 = rng.normal(size=(n, 4)), rng.normal(size=(n, 4))
    pp = init_projector(4, 6, rng=rng)
    loss, per_node = infonce_loss(Z1, Z2, pp, 0.7)
    ref, ref_nodes = naive_infonce(Z1, Z2, pp, 0.7)
    assert abs(loss.item() - ref) < 1e-9
    assert np.allclose(per_node, ref_nodes, atol=1e-9)


def test_two_orthonormal_nodes_closed_form():
    Z = np.eye(2)
    loss, per_node = infonce_loss(Z, Z, identity_projector(2), 1.0)
    assert loss.item() == pytest.approx(math.log(1 + 2 / math.e), abs=1e-12)
    assert loss.item() == pytest.approx(naive_infonce(Z, Z, identity_projector(2), 1.0)[0], abs=1e-12)
    assert np.allclose(per_node, -math.log(math.e / (math.e + 2)))


def test_small_temperature_limit():
    Z = np.eye(4)
    loss, _ = infonce_loss(Z, Z, identity_projector(4), 0.01)
    assert loss.item() < 1e-12


def test_infonce_errors():
    pp = identity_projector(2)
    with pytest.raises(ContractError):
        infonce_loss(np.eye(2)[:1], np.eye(2)[:1], pp, 0.5)
    with pytest.raises(ValidationError):
        infonce_loss(np.eye(2), np.eye(2), pp, 0.0)
    with pytest.raises(DegenerateEmbeddingError):
        infonce_loss(np.array([[1.0, 0.0], [0.0, 0.0]]), np.eye(2), pp, 0.5)


def test_pot_zero_bounds_gives_n_log2():
    assert pot_loss(np.zeros((7, 1)), np.zeros((7, 1))).item() == pytest.approx(7 * math.log(2))


def test_pot_large_bounds_vanish():
    assert pot_loss(np.full((3, 1), 1e6), np.full((3, 1), 1e6)).item() == pytest.approx(0.0, abs=1e-300)


def test_pot_single_node():
    assert pot_loss([[1.0]], [[1.0]]).item() == pytest.approx(0.3133, abs=5e-5)
    assert pot_loss([[1.0]], [[1.0]]).item() == pytest.approx(math.log1p(math.exp(-1.0)), abs=1e-15)


def test_pot_subset_is_rescaled():
    f = np.array([[0.0], [1.0], [-2.0], [3.0]])
    sub = bce_with_ones(f, nodes=[1, 2]).item()
    expected = 2.0 * (math.log1p(math.exp(-1.0)) + math.log1p(math.exp(2.0)))
    assert sub == pytest.approx(expected)


def test_total_loss_mixing():
    one, half = Tensor([[1.0]]), Tensor([[0.5]])
    assert total_loss(one, half, 0.0).item() == 1.0
    assert total_loss(one, half, 1.0).item() == 0.5
    assert total_loss(one, half, 0.4).item() == pytest.approx(0.8)
    with pytest.raises(ValidationError):
        total_loss(one, half, 1.2)


def test_infonce_gradient_finite_differences():
    from conftest import analytic_grad, numeric_grad, rel_error

    rng = np.random.default_rng(9)
    Z1 = Tensor(rng.normal(size=(5, 3)), requires_grad=True)
    Z2 = Tensor(rng.normal(size=(5, 3)), requires_grad=True)
    pp = init_projector(3, 4, rng=rng)

    def f():
        return infonce_loss(Z1, Z2, pp, 0.5)[0]

    g1, gW = analytic_grad(f, [Z1, pp.Wp1])
    assert rel_error(g1, numeric_grad(lambda: f().item(), Z1.values)) < 1e-5
    assert rel_error(gW, numeric_grad(lambda: f().item(), pp.Wp1.values)) < 1e-5
    assert ad.active_tape() is None
