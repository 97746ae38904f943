"""InfoNCE, the compactness BCE regularizer, and their convex combination."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .encoder import project
from .errors import ContractError, ValidationError


@dataclass
class LossReport:
    infonce: float
    pot: float
    total: float
    per_node_infonce: np.ndarray


def _anchor_losses(between, refl, tau, n):
    """-log of the InfoNCE ratio for every anchor row of ``between``.

    Cosine similarities are at most 1, so exponentiating (s - 1)/tau keeps
    every term in (0, 1]; the shift cancels between numerator and denominator.
    """
    offdiag = 1.0 - np.eye(n)
    e_between = ad.exp(ad.scale(between - 1.0, 1.0 / tau))
    e_refl = ad.mul(ad.exp(ad.scale(refl - 1.0, 1.0 / tau)), offdiag)
    denom = ad.rowsum(e_between) + ad.rowsum(e_refl)
    pos = ad.rowsum(ad.mul(between, np.eye(n)))
    return ad.log(denom) - ad.scale(pos - 1.0, 1.0 / tau)


def infonce_loss(Z1, Z2, pp, tau):
    """Symmetrised InfoNCE over two views.

    Returns the scalar loss tensor and the per-node vector
    ``(l(z1_i, z2_i) + l(z2_i, z1_i)) / 2``.
    """
    if tau <= 0:
        raise ValidationError(f"temperature must be positive, got {tau}")
    Z1, Z2 = ad.as_tensor(Z1), ad.as_tensor(Z2)
    n = Z1.shape[0]
    if n < 2:
        raise ContractError("InfoNCE needs at least two nodes to form negatives")
    h1 = ad.l2_normalize_rows(project(pp, Z1))
    h2 = ad.l2_normalize_rows(project(pp, Z2))
    between = ad.matmul(h1, h2.T)
    l1 = _anchor_losses(between, ad.matmul(h1, h1.T), tau, n)
    l2 = _anchor_losses(between.T, ad.matmul(h2, h2.T), tau, n)
    loss = ad.scale(ad.sum(l1) + ad.sum(l2), 1.0 / (2 * n))
    per_node = 0.5 * (l1.values[:, 0] + l2.values[:, 0])
    return loss, per_node


def bce_with_ones(f, nodes=None):
    """-sum_i log sigmoid(f_i), optionally over a node subset rescaled to N."""
    f = ad.as_tensor(f)
    n = f.shape[0]
    if nodes is not None and len(nodes) < n:
        f = ad.take_rows(f, nodes)
        return ad.scale(ad.sum(ad.softplus(-f)), n / len(nodes))
    return ad.sum(ad.softplus(-f))


def pot_loss(fG1, fG2, nodes=None):
    """Half the sum of the two views' BCE-against-ones on compactness bounds."""
    return ad.scale(bce_with_ones(fG1, nodes) + bce_with_ones(fG2, nodes), 0.5)


def total_loss(infonce, pot, kappa):
    if not 0.0 <= kappa <= 1.0:
        raise ValidationError(f"kappa must lie in [0, 1], got {kappa}")
    return ad.scale(infonce, 1.0 - kappa) + ad.scale(pot, kappa)
