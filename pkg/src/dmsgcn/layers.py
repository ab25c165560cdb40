"""Masked spatial GCN, temporal GCN, STGCN block, scale fusion and TCN decoder.

All layers take batched activations laid out as ``(..., T, V, C)``:
frames, joints, feature channels.
"""

from __future__ import annotations

import numpy as np

from . import functional as F
from .errors import ConfigError, DimensionError
from .nn import Module, Parameter, uniform_fan_in
from .skeleton import SpatialGraph, TemporalGraph, init_temporal_adjacency
from .tensor import Tensor, matmul, reshape

PRELU_INIT = 0.25


class SGCNLayer(Module):
    """``prelu(T_s (A_s * M) H_t W_s)`` for every frame ``t``, then dropout."""

    def __init__(self, graph: SpatialGraph, c_in: int, c_out: int, rng, dropout=0.0,
                 dtype=np.float32):
        V = graph.A_s.shape[0]
        self.graph = graph
        self.T_s = Parameter(np.eye(V), dtype=dtype)
        self.W_s = Parameter(uniform_fan_in(rng, (c_in, c_out), c_in, dtype))
        self.slope = Parameter(np.full(1, PRELU_INIT), dtype=dtype)
        self.dropout = dropout
        self.rng = rng
        self.mask = Tensor(graph.mask, dtype=dtype)

    @property
    def V(self) -> int:
        return self.T_s.shape[0]

    def forward(self, H: Tensor) -> Tensor:
        return sgcn_forward(H, self)


def sgcn_forward(H: Tensor, layer: SGCNLayer) -> Tensor:
    if H.ndim < 3 or H.shape[-2] != layer.V or H.shape[-1] != layer.W_s.shape[0]:
        raise DimensionError(
            f"SGCN expects (..., T, {layer.V}, {layer.W_s.shape[0]}), got {H.shape}"
        )
    G = matmul(layer.T_s, F.hadamard(layer.graph.A_s, layer.mask))
    out = F.prelu(matmul(matmul(G, H), layer.W_s), layer.slope)
    return F.dropout(out, layer.dropout, layer.training, layer.rng)


class TGCNLayer(Module):
    """``prelu(T_t A_t H_v W_t)`` for every joint ``v``."""

    def __init__(self, T: int, c_in: int, c_out: int, rng, dtype=np.float32):
        self.graph: TemporalGraph = init_temporal_adjacency(T, dtype=dtype)
        self.T_t = Parameter(np.eye(T), dtype=dtype)
        self.W_t = Parameter(uniform_fan_in(rng, (c_in, c_out), c_in, dtype))
        self.slope = Parameter(np.full(1, PRELU_INIT), dtype=dtype)

    @property
    def T(self) -> int:
        return self.T_t.shape[0]

    def forward(self, H: Tensor) -> Tensor:
        return tgcn_forward(H, self)


def tgcn_forward(H: Tensor, layer: TGCNLayer) -> Tensor:
    if H.ndim < 3 or H.shape[-3] != layer.T or H.shape[-1] != layer.W_t.shape[0]:
        raise DimensionError(
            f"TGCN expects (..., {layer.T}, V, {layer.W_t.shape[0]}), got {H.shape}"
        )
    lead, (T, V, C) = H.shape[:-3], H.shape[-3:]
    G = matmul(layer.T_t, layer.graph.A_t)
    # frames become the row axis; joints and channels ride along as columns
    mixed = reshape(matmul(G, reshape(H, lead + (T, V * C))), lead + (T, V, C))
    return F.prelu(matmul(mixed, layer.W_t), layer.slope)


class STGCNBlock(Module):
    """Residual ``H + dropout(TGCN(SGCN(H)))``; TGCN may be switched off."""

    def __init__(self, sgcn: SGCNLayer, tgcn: TGCNLayer | None, dropout=0.0, rng=None):
        if sgcn.W_s.shape[0] != sgcn.W_s.shape[1]:
            raise ConfigError("STGCN block needs equal input and output widths")
        if tgcn is not None and tgcn.W_t.shape != sgcn.W_s.shape:
            raise ConfigError("SGCN and TGCN widths differ")
        self.sgcn = sgcn
        self.tgcn = tgcn
        self.dropout = dropout
        self.rng = rng

    def forward(self, H: Tensor) -> Tensor:
        return stgcn_block(H, self)


def stgcn_block(H: Tensor, block: STGCNBlock) -> Tensor:
    width = block.sgcn.W_s.shape[0]
    if H.shape[-1] != width:
        raise ConfigError(f"block width {width} does not match input width {H.shape[-1]}")
    out = block.sgcn(H)
    if block.tgcn is not None:
        out = block.tgcn(out)
    return H + F.dropout(out, block.dropout, block.training, block.rng)


class FusionUnit(Module):
    """Blend coarse-scale features into finer ones through learned joint up-maps.

    ``W_32`` maps part joints onto bone joints and ``W_21`` bone joints onto
    body joints; both act on the joint axis only.  With ``learn_alpha`` the
    coefficient is ``sigmoid(alpha_logit)`` and trains with the rest.
    """

    def __init__(self, W_32, W_21, alpha=0.5, learn_alpha=False, dtype=np.float32):
        if not 0.0 <= alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {alpha}")
        self.W_32 = None if W_32 is None else Parameter(W_32, dtype=dtype)
        self.W_21 = None if W_21 is None else Parameter(W_21, dtype=dtype)
        self.alpha = float(alpha)
        self.learn_alpha = learn_alpha
        if learn_alpha:
            a = min(max(alpha, 1e-6), 1 - 1e-6)
            self.alpha_logit = Parameter(np.full(1, np.log(a / (1 - a))), dtype=dtype)

    def coefficient(self):
        if self.learn_alpha:
            return F.sigmoid(self.alpha_logit)
        return self.alpha

    def forward(self, X3, X2, X1):
        return fuse(X3, X2, X1, self)


def fuse(X3: Tensor | None, X2: Tensor | None, X1: Tensor, unit: FusionUnit) -> Tensor:
    """``X2+ = a W_32 X3 + (1-a) X2`` then ``X+ = a W_21 X2+ + (1-a) X1``.

    Missing coarse inputs (``None``) drop the corresponding stage, so a
    single-scale model returns ``X1`` unchanged.
    """
    a = unit.coefficient()
    if X2 is None:
        return X1
    for X, V in ((X1, unit.W_21.shape[0]), (X2, unit.W_21.shape[1])):
        if X.shape[-2] != V:
            raise DimensionError(f"fuse: expected {V} joints, got shape {X.shape}")
    if X2.shape[-1] != X1.shape[-1]:
        raise DimensionError(f"fuse: widths differ {X2.shape} vs {X1.shape}")
    if X3 is not None:
        if X3.shape[-2] != unit.W_32.shape[1] or X3.shape[-1] != X2.shape[-1]:
            raise DimensionError(f"fuse: part features have shape {X3.shape}")
        X2 = a * matmul(unit.W_32, X3) + (1 - a) * X2
    return a * matmul(unit.W_21, X2) + (1 - a) * X1


class TCNLayer(Module):
    """Time-as-channel mixing ``W h + b`` shared by every joint and coordinate."""

    def __init__(self, t_in: int, t_out: int, rng, activation=True, dtype=np.float32):
        self.weight = Parameter(uniform_fan_in(rng, (t_out, t_in), t_in, dtype))
        self.bias = Parameter(uniform_fan_in(rng, (t_out, 1), t_in, dtype))
        self.slope = Parameter(np.full(1, PRELU_INIT), dtype=dtype) if activation else None

    def forward(self, h: Tensor) -> Tensor:
        if self.slope is not None:
            h = F.prelu(h, self.slope)
        return matmul(self.weight, h) + self.bias


class TCNDecoder(Module):
    """``T`` observed-frame channels to ``K`` predicted frames, per joint.

    The first layer maps ``T -> K``; each later layer adds
    ``W prelu(h) + b`` to its input.  With ``residual`` the last observed pose
    is added to every predicted frame.
    """

    def __init__(self, T: int, K: int, n_layers: int, rng, residual=True, dtype=np.float32):
        if n_layers < 1:
            raise ConfigError("decoder needs at least one layer")
        self.layers = [TCNLayer(T, K, rng, activation=False, dtype=dtype)]
        self.layers += [TCNLayer(K, K, rng, dtype=dtype) for _ in range(n_layers - 1)]
        self.residual = residual

    @property
    def T(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def K(self) -> int:
        return self.layers[0].weight.shape[0]

    def forward(self, features: Tensor, last_observed=None) -> Tensor:
        return tcn_decode(features, self, last_observed)


def tcn_decode(features: Tensor, decoder: TCNDecoder, last_observed=None) -> Tensor:
    """``(..., T, V, 3) -> (..., K, V, 3)``."""
    if features.ndim < 3 or features.shape[-3] != decoder.T:
        raise DimensionError(f"decoder expects {decoder.T} frames, got shape {features.shape}")
    lead, (T, V, C) = features.shape[:-3], features.shape[-3:]
    h = reshape(features, lead + (T, V * C))
    h = decoder.layers[0](h)
    for layer in decoder.layers[1:]:
        h = h + layer(h)
    out = reshape(h, lead + (decoder.K, V, C))
    if decoder.residual and last_observed is not None:
        last = last_observed if isinstance(last_observed, Tensor) else Tensor(
            last_observed, dtype=out.dtype)
        out = out + reshape(last, lead + (1, V, C))
    return out
