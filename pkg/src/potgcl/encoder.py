"""Two-layer GCN encoder and the affine-ELU-affine projector."""
from __future__ import annotations

import json
from dataclasses import dataclass, fields

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import DimensionError, ValidationError


@dataclass
class EncoderParams:
    W1: Tensor
    b1: Tensor
    W2: Tensor
    b2: Tensor
    gamma: float = 0.25

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValidationError(f"PReLU slope must lie in [0, 1), got {self.gamma}")
        f, d1 = self.W1.shape
        if self.W2.shape[0] != d1 or self.b1.shape != (1, d1) or self.b2.shape != (1, self.W2.shape[1]):
            raise DimensionError("inconsistent encoder parameter shapes")

    @property
    def dims(self):
        return self.W1.shape[0], self.W1.shape[1], self.W2.shape[1]

    def tensors(self):
        return [self.W1, self.b1, self.W2, self.b2]


@dataclass
class ProjectorParams:
    Wp1: Tensor
    bp1: Tensor
    Wp2: Tensor
    bp2: Tensor

    def tensors(self):
        return [self.Wp1, self.bp1, self.Wp2, self.bp2]


def glorot(rng, fan_in, fan_out, name=None):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=(fan_in, fan_out)), requires_grad=True, name=name)


def _zeros(n, name):
    return Tensor(np.zeros((1, n)), requires_grad=True, name=name)


def init_encoder(num_features, d1, d2, gamma=0.25, rng=None):
    rng = np.random.default_rng(rng)
    return EncoderParams(
        W1=glorot(rng, num_features, d1, "W1"),
        b1=_zeros(d1, "b1"),
        W2=glorot(rng, d1, d2, "W2"),
        b2=_zeros(d2, "b2"),
        gamma=gamma,
    )


def init_projector(d2, dp, rng=None):
    rng = np.random.default_rng(rng)
    return ProjectorParams(
        Wp1=glorot(rng, d2, dp, "Wp1"),
        bp1=_zeros(dp, "bp1"),
        Wp2=glorot(rng, dp, d2, "Wp2"),
        bp2=_zeros(d2, "bp2"),
    )


def gcn_layer(p, H, A_hat, W, b):
    return ad.prelu(ad.matmul(A_hat, ad.matmul(H, W)) + b, p.gamma)


def gcn_forward(p, X, A_hat):
    """sigma(A sigma(A X W1 + b1) W2 + b2) with sigma = PReLU(gamma)."""
    X, A_hat = ad.as_tensor(X), ad.as_tensor(A_hat)
    n = X.shape[0]
    if A_hat.shape != (n, n):
        raise DimensionError(f"message-passing matrix {A_hat.shape} does not match {n} nodes")
    if X.shape[1] != p.W1.shape[0]:
        raise DimensionError(f"features have {X.shape[1]} columns, encoder expects {p.W1.shape[0]}")
    H = gcn_layer(p, X, A_hat, p.W1, p.b1)
    return gcn_layer(p, H, A_hat, p.W2, p.b2)


def project(pp, z):
    z = ad.as_tensor(z)
    if z.shape[1] != pp.Wp1.shape[0]:
        raise DimensionError(f"projector expects {pp.Wp1.shape[0]} columns, got {z.shape[1]}")
    h = ad.elu(ad.matmul(z, pp.Wp1) + pp.bp1)
    return ad.matmul(h, pp.Wp2) + pp.bp2


def _dump(obj):
    out = {}
    for f in fields(obj):
        val = getattr(obj, f.name)
        if isinstance(val, Tensor):
            out[f.name] = {"shape": list(val.shape), "values": val.values.ravel().tolist()}
        else:
            out[f.name] = val
    return out


def _load(cls, data):
    kwargs = {}
    for f in fields(cls):
        if f.name not in data:
            continue
        val = data[f.name]
        if isinstance(val, dict):
            arr = np.asarray(val["values"], dtype=np.float64).reshape(val["shape"])
            kwargs[f.name] = Tensor(arr, requires_grad=True, name=f.name)
        else:
            kwargs[f.name] = val
    return cls(**kwargs)


def save_checkpoint(path, encoder, projector=None):
    payload = {"encoder": _dump(encoder)}
    if projector is not None:
        payload["projector"] = _dump(projector)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_checkpoint(path):
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    enc = _load(EncoderParams, payload["encoder"])
    proj = _load(ProjectorParams, payload["projector"]) if "projector" in payload else None
    return enc, proj
