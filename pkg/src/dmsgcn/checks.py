"""Finite-difference gradient suite over every layer type and a tiny full model.

Each check builds float64 inputs from a fixed seed, runs
:func:`finite_diff_check` and reports the worst relative error against its
tolerance.  Entries whose finite-difference step straddles a PReLU kink are
retried with smaller steps (see :func:`finite_diff_check`).
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import functional as F
from .functional import make_rng
from .gradcheck import finite_diff_check
from .layers import (
    FusionUnit,
    SGCNLayer,
    STGCNBlock,
    TCNDecoder,
    TGCNLayer,
    fuse,
    sgcn_forward,
    stgcn_block,
    tcn_decode,
    tgcn_forward,
)
from .model import DMSGCNModel, ModelConfig
from .nn import Parameter
from .skeleton import default_hierarchy, downsample, init_spatial_adjacency
from .tensor import Tensor, matmul

LAYER_TOL = 1e-5
MODEL_TOL = 1e-4
f64 = np.float64


@dataclass
class CheckResult:
    name: str
    error: float
    tol: float
    seconds: float
    checked: int = 0
    kinks: int = 0

    @property
    def ok(self) -> bool:
        return bool(np.isfinite(self.error) and self.error <= self.tol)

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        return (f"{status}  {self.name:<22s} max rel err {self.error:.3e}  (tol {self.tol:.0e})"
                f"  entries {self.checked}, skipped at kinks {self.kinks}")


def _away_from_zero(rng, shape, lo=1e-3, hi=2.0):
    return rng.uniform(lo, hi, size=shape) * rng.choice([-1.0, 1.0], size=shape)


def _perturb_params(layer, rng, scale=0.3):
    """Move parameters off their structured init so every path carries gradient."""
    for p in layer.parameters():
        noise = rng.uniform(-scale, scale, size=p.shape)
        if p.freeze_mask is not None:
            noise = noise * p.freeze_mask
        p.data += noise


def check_matmul(seed=0, report=None):
    rng = make_rng(seed)
    a = Tensor(rng.uniform(-2, 2, (3, 3)), dtype=f64)
    b = Tensor(rng.uniform(-2, 2, (3, 3)), dtype=f64)
    return finite_diff_check(matmul, [a, b], report=report)


def check_hadamard(seed=1, report=None):
    rng = make_rng(seed)
    a = Tensor(rng.uniform(-2, 2, (4, 4)), dtype=f64)
    b = Tensor(rng.uniform(-2, 2, (4, 4)), dtype=f64)
    return finite_diff_check(F.hadamard, [a, b], report=report)


def check_prelu(seed=2, report=None):
    rng = make_rng(seed)
    x = Tensor(_away_from_zero(rng, (5, 6)), dtype=f64)
    w = Tensor(rng.uniform(-1, 1, (6, 6)), dtype=f64)
    s1 = Parameter(np.array([0.25]), dtype=f64)
    s2 = Parameter(np.full(6, 0.1), dtype=f64)
    return finite_diff_check(lambda x, w, s1, s2: F.prelu(matmul(F.prelu(x, s1), w), s2),
                             [x, w, s1, s2], report=report)


def check_l1_loss(seed=3, report=None):
    rng = make_rng(seed)
    pred = Tensor(rng.uniform(-2, 2, (4, 5, 3)), dtype=f64)
    target = Tensor(rng.uniform(-2, 2, (4, 5, 3)), dtype=f64)
    return finite_diff_check(F.l1_loss, [pred, target], report=report)


def check_downsample(seed=4, report=None):
    h = default_hierarchy()
    rng = make_rng(seed)
    pose = Tensor(rng.uniform(-2, 2, (2, 22, 3)), dtype=f64)
    return finite_diff_check(lambda p: downsample(downsample(p, h.pool_ops[0]), h.pool_ops[1]),
                             [pose], report=report)


def _sgcn_layer(rng, V=None, C=4, dropout=0.0):
    h = default_hierarchy()
    skel = h.skeletons[0]
    graph = init_spatial_adjacency(skel, h.masks([2, 2, 2])[0], dtype=f64)
    layer = SGCNLayer(graph, C, C, rng, dropout=dropout, dtype=f64)
    _perturb_params(layer, rng)
    return layer


def check_sgcn(seed=5, report=None):
    rng = make_rng(seed)
    layer = _sgcn_layer(rng)
    H = Tensor(rng.uniform(-2, 2, (3, 22, 4)), dtype=f64)
    params = [layer.graph.A_s, layer.T_s, layer.W_s, layer.slope]
    return finite_diff_check(lambda H, *_: sgcn_forward(H, layer), [H, *params], report=report)


def check_tgcn(seed=6, report=None):
    rng = make_rng(seed)
    layer = TGCNLayer(5, 4, 4, rng, dtype=f64)
    _perturb_params(layer, rng)
    H = Tensor(rng.uniform(-2, 2, (5, 6, 4)), dtype=f64)
    params = [layer.graph.A_t, layer.T_t, layer.W_t, layer.slope]
    return finite_diff_check(lambda H, *_: tgcn_forward(H, layer), [H, *params], report=report)


def check_stgcn_block(seed=7, report=None):
    rng = make_rng(seed)
    block = STGCNBlock(_sgcn_layer(rng), TGCNLayer(3, 4, 4, rng, dtype=f64))
    _perturb_params(block.tgcn, rng)
    block.eval()
    H = Tensor(rng.uniform(-2, 2, (3, 22, 4)), dtype=f64)
    return finite_diff_check(lambda H, *_: stgcn_block(H, block), [H, *block.parameters()],
                             report=report)


def check_fuse(seed=8, learn_alpha=False, report=None):
    rng = make_rng(seed)
    unit = FusionUnit(rng.uniform(-1, 1, (10, 5)), rng.uniform(-1, 1, (22, 10)), alpha=0.3,
                      learn_alpha=learn_alpha, dtype=f64)
    X3 = Tensor(rng.uniform(-2, 2, (2, 5, 3)), dtype=f64)
    X2 = Tensor(rng.uniform(-2, 2, (2, 10, 3)), dtype=f64)
    X1 = Tensor(rng.uniform(-2, 2, (2, 22, 3)), dtype=f64)
    return finite_diff_check(lambda X3, X2, X1, *_: fuse(X3, X2, X1, unit),
                             [X3, X2, X1, *unit.parameters()], report=report)


def check_tcn(seed=9, report=None):
    rng = make_rng(seed)
    dec = TCNDecoder(4, 5, 4, rng, residual=True, dtype=f64)
    feats = Tensor(rng.uniform(-2, 2, (2, 4, 6, 3)), dtype=f64)
    last = Tensor(rng.uniform(-2, 2, (2, 6, 3)), dtype=f64)
    return finite_diff_check(lambda f, l, *_: tcn_decode(f, dec, l),
                             [feats, last, *dec.parameters()], report=report)


def tiny_config(**kw) -> ModelConfig:
    base = dict(T=4, K=5, hidden_width=8, dtype="float64", dropout=0.1, seed=11)
    base.update(kw)
    return ModelConfig(**base)


def check_end_to_end(seed=12, max_entries=6, report=None):
    rng = make_rng(seed)
    model = DMSGCNModel(tiny_config(learn_alpha=True))
    for p in model.parameters():
        noise = rng.uniform(-0.2, 0.2, size=p.shape)
        if p.freeze_mask is not None:
            noise = noise * p.freeze_mask
        p.data += noise
    model.eval()
    x = Tensor(rng.uniform(-2, 2, (2, 3, 4, 22)), dtype=f64)
    return finite_diff_check(lambda x, *_: model(x), [x, *model.parameters()],
                             max_entries=max_entries, report=report)


LAYER_CHECKS: dict[str, Callable[..., float]] = {
    "matmul": check_matmul,
    "hadamard": check_hadamard,
    "prelu": check_prelu,
    "l1_loss": check_l1_loss,
    "downsample": check_downsample,
    "sgcn": check_sgcn,
    "tgcn": check_tgcn,
    "stgcn_block": check_stgcn_block,
    "fuse": check_fuse,
    "fuse_learned_alpha": lambda report=None: check_fuse(learn_alpha=True, report=report),
    "tcn_decode": check_tcn,
}


def run_suite(include_model: bool = True) -> list[CheckResult]:
    results = []
    checks = [(name, fn, LAYER_TOL) for name, fn in LAYER_CHECKS.items()]
    if include_model:
        checks.append(("end_to_end_tiny", check_end_to_end, MODEL_TOL))
    for name, fn, tol in checks:
        t0 = time.perf_counter()
        info: dict = {}
        err = fn(report=info)
        results.append(CheckResult(name, err, tol, time.perf_counter() - t0,
                                   info.get("checked", 0), info.get("kinks", 0)))
    return results
