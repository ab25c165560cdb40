"""The full multi-scale model, its configuration, parameter counting and checkpoints.

Checkpoint layout (a directory)::

    manifest.json       format tag/version, config snapshot and its SHA-256,
                        skeleton definition, one entry per parameter
                        (name, shape, file, byte length, SHA-256)
    params/<name>.f32   raw little-endian float32 values in row-major order

A 64-bit model is stored through float32 and therefore only round-trips
exactly when its values are representable in float32.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    CheckpointError,
    CheckpointVersionError,
    ChecksumError,
    ConfigError,
    ConfigMismatchError,
    DimensionError,
    TruncatedCheckpointError,
)
from .functional import make_rng
from .layers import FusionUnit, SGCNLayer, STGCNBlock, TCNDecoder, TGCNLayer
from .nn import Module, Parameter, uniform_fan_in
from .skeleton import (
    ScaleHierarchy,
    build_mask,
    default_hierarchy,
    hierarchy_to_config_text,
    init_spatial_adjacency,
    parse_skeleton_config,
)
from .tensor import Tensor, as_tensor, matmul, permute, reshape

CHECKPOINT_FORMAT = "dmsgcn-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class ModelConfig:
    T: int = 10
    K: int = 25
    hidden_width: int = 80
    blocks_per_scale: int = 7
    tcn_layers: int = 4
    dropout: float = 0.1
    alpha: float = 0.5
    learn_alpha: bool = False
    max_hop_joint: int = 2
    max_hop_bone: int = 2
    max_hop_part: int = 2
    residual_decoder: bool = True
    relative_input: bool = True
    scales_enabled: int = 3
    mask_enabled: bool = True
    tgcn_enabled: bool = True
    share_adjacency: bool = False
    fusion_space: str = "pose"
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.T < 1 or self.K < 1:
            raise ConfigError("T and K must be >= 1")
        if self.T < 2:
            raise ConfigError("the temporal graph needs T >= 2")
        if self.scales_enabled not in (1, 2, 3):
            raise ConfigError(f"scales_enabled must be 1, 2 or 3, got {self.scales_enabled}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.relative_input and not self.residual_decoder:
            raise ConfigError("relative_input needs residual_decoder")
        if self.fusion_space not in ("pose", "hidden"):
            raise ConfigError(f"fusion_space must be 'pose' or 'hidden', got {self.fusion_space!r}")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"dtype must be float32 or float64, got {self.dtype!r}")
        if self.hidden_width < 1 or self.blocks_per_scale < 0 or self.tcn_layers < 1:
            raise ConfigError("hidden_width, blocks_per_scale and tcn_layers out of range")

    @property
    def max_hops(self) -> tuple:
        return (self.max_hop_joint, self.max_hop_bone, self.max_hop_part)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


class ScaleStream(Module):
    """Lift poses to ``hidden_width`` channels, run the STGCN stack, project back."""

    def __init__(self, skel, mask, cfg: ModelConfig, rng, dtype):
        C = cfg.hidden_width
        self.lift_W = Parameter(uniform_fan_in(rng, (3, C), 3, dtype))
        self.lift_b = Parameter(uniform_fan_in(rng, (C,), 3, dtype))
        shared = init_spatial_adjacency(skel, mask, dtype=dtype) if cfg.share_adjacency else None
        self.blocks = []
        for _ in range(cfg.blocks_per_scale):
            graph = shared or init_spatial_adjacency(skel, mask, dtype=dtype)
            sgcn = SGCNLayer(graph, C, C, rng, dropout=cfg.dropout, dtype=dtype)
            tgcn = TGCNLayer(cfg.T, C, C, rng, dtype=dtype) if cfg.tgcn_enabled else None
            self.blocks.append(STGCNBlock(sgcn, tgcn, dropout=cfg.dropout, rng=rng))
        self.out_W = Parameter(uniform_fan_in(rng, (C, 3), C, dtype))
        self.out_b = Parameter(uniform_fan_in(rng, (3,), C, dtype))

    def encode(self, x: Tensor) -> Tensor:
        h = matmul(x, self.lift_W) + self.lift_b
        for block in self.blocks:
            h = block(h)
        return h

    def project(self, h: Tensor, x: Tensor) -> Tensor:
        return x + (matmul(h, self.out_W) + self.out_b)


class DMSGCNModel(Module):
    """Joint/bone/part encoder streams, linear scale fusion and a TCN decoder.

    ``forward`` maps a ``B x 3 x T x V`` batch of observed poses to a
    ``B x 3 x K x V`` batch of predicted poses.
    """

    def __init__(self, config: ModelConfig | None = None, hierarchy: ScaleHierarchy | None = None):
        self.config = cfg = config or ModelConfig()
        self.hierarchy = hierarchy or default_hierarchy()
        dtype = np.dtype(cfg.dtype).type
        self.rng = rng = make_rng(cfg.seed)

        skels = self.hierarchy.skeletons[: cfg.scales_enabled]
        self.masks = [
            build_mask(skel, hop) if cfg.mask_enabled else np.ones((skel.V, skel.V))
            for skel, hop in zip(skels, cfg.max_hops)
        ]
        self.streams = [ScaleStream(s, m, cfg, rng, dtype) for s, m in zip(skels, self.masks)]

        up21, up32 = self.hierarchy.upsample_init()
        self.fusion = FusionUnit(
            up32 if cfg.scales_enabled >= 3 else None,
            up21 if cfg.scales_enabled >= 2 else None,
            alpha=cfg.alpha,
            learn_alpha=cfg.learn_alpha and cfg.scales_enabled > 1,
            dtype=dtype,
        )
        self.decoder = TCNDecoder(cfg.T, cfg.K, cfg.tcn_layers, rng,
                                  residual=cfg.residual_decoder, dtype=dtype)
        for name, p in self.named_parameters():
            p.name = name

    # -- registry -----------------------------------------------------------
    def state_dict(self) -> dict:
        return {p.name: p.data.copy() for p in self.parameters()}

    def load_state_dict(self, state: dict) -> None:
        params = {p.name: p for p in self.parameters()}
        if set(params) != set(state):
            raise ConfigMismatchError("parameter names differ from the model's")
        for name, p in params.items():
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise ConfigMismatchError(f"{name}: shape {value.shape} != {p.shape}")
            p.data[...] = value

    def zero_weights(self) -> "DMSGCNModel":
        """Set every parameter to zero (the copy-last-frame fixed point)."""
        for p in self.parameters():
            p.data[...] = 0
        return self

    @property
    def dtype(self):
        return np.dtype(self.config.dtype)

    # -- forward --------------------------------------------------------------
    def forward(self, batch) -> Tensor:
        return forward(batch, self)

    def forward_frames(self, x) -> Tensor:
        return forward_frames(x, self)


def forward(batch, model: DMSGCNModel) -> Tensor:
    """``B x 3 x T x V`` observed poses to ``B x 3 x K x V`` predictions."""
    cfg = model.config
    batch = as_tensor(batch, dtype=model.dtype)
    V = model.hierarchy.skeletons[0].V
    if batch.ndim != 4 or batch.shape[1] != 3 or batch.shape[2] != cfg.T or batch.shape[3] != V:
        raise DimensionError(f"expected (B, 3, {cfg.T}, {V}), got {batch.shape}")
    out = forward_frames(permute(batch, (0, 2, 3, 1)), model)
    return permute(out, (0, 3, 1, 2))


def forward_frames(x, model: DMSGCNModel) -> Tensor:
    """Same model on the frame-major layout: ``B x T x V x 3 -> B x K x V x 3``."""
    cfg = model.config
    x = as_tensor(x, dtype=model.dtype)
    V = model.hierarchy.skeletons[0].V
    if x.ndim != 4 or x.shape[1] != cfg.T or x.shape[2] != V or x.shape[3] != 3:
        raise DimensionError(f"expected (B, {cfg.T}, {V}, 3), got {x.shape}")
    last = x[:, -1]
    if cfg.relative_input:
        # displacements from the last observed pose; the decoder adds it back
        x = x - reshape(last, (x.shape[0], 1) + last.shape[1:])
    poses = model.hierarchy.pyramid(x)[: cfg.scales_enabled]
    hidden = [s.encode(p) for s, p in zip(model.streams, poses)]
    feats = [None, None, None]
    if cfg.fusion_space == "pose":
        for k, (s, h, p) in enumerate(zip(model.streams, hidden, poses)):
            feats[k] = s.project(h, p)
        fused = model.fusion(feats[2], feats[1], feats[0])
    else:
        feats[: len(hidden)] = hidden
        fused = model.streams[0].project(model.fusion(feats[2], feats[1], feats[0]), poses[0])
    return model.decoder(fused, last)


def param_count(model: DMSGCNModel) -> int:
    """Trainable entries; adjacency entries outside the mask do not count."""
    return sum(p.trainable_count for p in model.parameters())


def mask_zero_count(model: DMSGCNModel) -> int:
    """Masked-out adjacency entries summed over every distinct adjacency parameter."""
    return sum(int(p.freeze_mask.size - p.freeze_mask.sum())
               for p in model.parameters() if p.freeze_mask is not None)


# -- checkpoints --------------------------------------------------------------

def _config_payload(model: DMSGCNModel) -> dict:
    return {
        "model": model.config.to_dict(),
        "skeleton": hierarchy_to_config_text(model.hierarchy),
    }


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def _param_file(name: str) -> str:
    return f"params/{name}.f32"


def save(model: DMSGCNModel, path) -> Path:
    root = Path(path)
    (root / "params").mkdir(parents=True, exist_ok=True)
    payload = _config_payload(model)
    entries = []
    for p in model.parameters():
        raw = np.ascontiguousarray(p.data, dtype="<f4").tobytes()
        (root / _param_file(p.name)).write_bytes(raw)
        entries.append({
            "name": p.name,
            "shape": list(p.shape),
            "file": _param_file(p.name),
            "bytes": len(raw),
            "sha256": hashlib.sha256(raw).hexdigest(),
        })
    manifest = {
        "format": CHECKPOINT_FORMAT,
        "format_version": CHECKPOINT_VERSION,
        "config": payload,
        "config_sha256": _digest(payload),
        "parameters": entries,
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return root


def read_manifest(path) -> dict:
    mpath = Path(path) / "manifest.json"
    if not mpath.exists():
        raise CheckpointError(f"no manifest.json in {path}")
    try:
        manifest = json.loads(mpath.read_text())
    except json.JSONDecodeError as exc:
        raise ChecksumError(f"manifest is not valid JSON: {exc}") from exc
    if manifest.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointVersionError(f"not a {CHECKPOINT_FORMAT} directory")
    if manifest.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"checkpoint version {manifest.get('format_version')} != {CHECKPOINT_VERSION}"
        )
    if _digest(manifest["config"]) != manifest.get("config_sha256"):
        raise ChecksumError("config snapshot does not match its checksum")
    return manifest


def load(path, config: ModelConfig | None = None,
         hierarchy: ScaleHierarchy | None = None) -> DMSGCNModel:
    """Rebuild a model from a checkpoint directory.

    When ``config`` (and optionally ``hierarchy``) is given it must match the
    snapshot stored in the checkpoint, otherwise :class:`ConfigMismatchError`.
    """
    root = Path(path)
    manifest = read_manifest(root)
    stored = manifest["config"]
    stored_cfg = ModelConfig.from_dict(stored["model"])
    stored_h = parse_skeleton_config(stored["skeleton"])
    if config is not None:
        probe = {"model": config.to_dict(),
                 "skeleton": hierarchy_to_config_text(hierarchy or stored_h)}
        if _digest(probe) != manifest["config_sha256"]:
            diff = {k: (v, stored["model"].get(k)) for k, v in config.to_dict().items()
                    if stored["model"].get(k) != v}
            raise ConfigMismatchError(f"config differs from checkpoint: {diff or 'skeleton'}")

    model = DMSGCNModel(stored_cfg, stored_h)
    params = {p.name: p for p in model.parameters()}
    listed = {e["name"] for e in manifest["parameters"]}
    if listed != set(params):
        raise ConfigMismatchError("checkpoint parameters do not match the model structure")
    for entry in manifest["parameters"]:
        p = params[entry["name"]]
        if tuple(entry["shape"]) != p.shape:
            raise ConfigMismatchError(f"{p.name}: stored shape {entry['shape']} != {p.shape}")
        fpath = root / entry["file"]
        if not fpath.exists():
            raise TruncatedCheckpointError(f"missing parameter file {entry['file']}")
        raw = fpath.read_bytes()
        expected = int(np.prod(p.shape)) * 4
        if len(raw) != expected or entry["bytes"] != expected:
            raise TruncatedCheckpointError(
                f"{entry['file']}: {len(raw)} bytes, expected {expected}"
            )
        if hashlib.sha256(raw).hexdigest() != entry["sha256"]:
            raise ChecksumError(f"{entry['file']}: checksum mismatch")
        p.data[...] = np.frombuffer(raw, dtype="<f4").reshape(p.shape)
    return model
