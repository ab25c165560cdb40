"""scikit-learn compatible wrappers around the model and the scale pooling."""

from __future__ import annotations

import dataclasses

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .data import WindowSample
from .errors import DimensionError
from .metrics import mpjpe
from .model import DMSGCNModel, ModelConfig
from .skeleton import ScaleHierarchy, default_hierarchy
from .training import TrainSettings, predict, train

_MODEL_KEYS = [f.name for f in dataclasses.fields(ModelConfig)]
_TRAIN_KEYS = [f.name for f in dataclasses.fields(TrainSettings)]


def _check_poses(X, n_frames=None, n_joints=None, name="X") -> np.ndarray:
    X = check_array(X, allow_nd=True, ensure_2d=False, dtype=np.float64,
                    ensure_all_finite=True, input_name=name)
    if X.ndim != 4 or X.shape[-1] != 3:
        raise DimensionError(f"{name} must have shape (n_samples, frames, joints, 3), got {X.shape}")
    if n_frames is not None and X.shape[1] != n_frames:
        raise DimensionError(f"{name} has {X.shape[1]} frames, expected {n_frames}")
    if n_joints is not None and X.shape[2] != n_joints:
        raise DimensionError(f"{name} has {X.shape[2]} joints, expected {n_joints}")
    return X


class MotionForecaster(RegressorMixin, BaseEstimator):
    """Predict the next ``K`` poses from ``T`` observed ones.

    ``X`` is ``(n_samples, T, 22, 3)`` observed poses, ``y`` is
    ``(n_samples, K, 22, 3)`` future poses, both in millimetres.
    :meth:`score` is the negative MPJPE over all predicted frames, so that
    greater is better as scikit-learn expects.
    """

    def __init__(self, T=10, K=25, hidden_width=80, blocks_per_scale=7, tcn_layers=4,
                 dropout=0.1, alpha=0.5, learn_alpha=False, max_hop_joint=2, max_hop_bone=2,
                 max_hop_part=2, residual_decoder=True, relative_input=True, scales_enabled=3,
                 mask_enabled=True, tgcn_enabled=True, share_adjacency=False,
                 fusion_space="pose", seed=0, dtype="float32", epochs=50, batch_size=32,
                 lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, lr_decay_every=10,
                 lr_decay_factor=0.5, shuffle_seed=0, checkpoint_every=0, hierarchy=None):
        self.T = T
        self.K = K
        self.hidden_width = hidden_width
        self.blocks_per_scale = blocks_per_scale
        self.tcn_layers = tcn_layers
        self.dropout = dropout
        self.alpha = alpha
        self.learn_alpha = learn_alpha
        self.max_hop_joint = max_hop_joint
        self.max_hop_bone = max_hop_bone
        self.max_hop_part = max_hop_part
        self.residual_decoder = residual_decoder
        self.relative_input = relative_input
        self.scales_enabled = scales_enabled
        self.mask_enabled = mask_enabled
        self.tgcn_enabled = tgcn_enabled
        self.share_adjacency = share_adjacency
        self.fusion_space = fusion_space
        self.seed = seed
        self.dtype = dtype
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.lr_decay_every = lr_decay_every
        self.lr_decay_factor = lr_decay_factor
        self.shuffle_seed = shuffle_seed
        self.checkpoint_every = checkpoint_every
        self.hierarchy = hierarchy

    def model_config(self) -> ModelConfig:
        return ModelConfig(**{k: getattr(self, k) for k in _MODEL_KEYS})

    def train_settings(self) -> TrainSettings:
        return TrainSettings(**{k: getattr(self, k) for k in _TRAIN_KEYS})

    def _hierarchy(self) -> ScaleHierarchy:
        return self.hierarchy if self.hierarchy is not None else default_hierarchy()

    def fit(self, X, y, X_val=None, y_val=None):
        h = self._hierarchy()
        V = h.skeletons[0].V
        X = _check_poses(X, self.T, V)
        y = _check_poses(y, self.K, V, name="y")
        if len(X) != len(y):
            raise DimensionError(f"X has {len(X)} samples but y has {len(y)}")
        self.model_ = DMSGCNModel(self.model_config(), h)
        val = ()
        if X_val is not None:
            X_val = _check_poses(X_val, self.T, V, name="X_val")
            y_val = _check_poses(y_val, self.K, V, name="y_val")
            val = [WindowSample(o, t) for o, t in zip(X_val, y_val)]
        samples = [WindowSample(o, t) for o, t in zip(X, y)]
        self.history_ = train(self.model_, samples, val, self.train_settings())
        self.n_features_in_ = V * 3
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        X = _check_poses(X, self.T, self.model_.hierarchy.skeletons[0].V)
        return predict(self.model_, X)

    def score(self, X, y, sample_weight=None) -> float:
        y = _check_poses(y, self.K, name="y")
        return -mpjpe(self.predict(X), y)


class ScalePooler(TransformerMixin, BaseEstimator):
    """Average joints into a coarser scale: ``(n, F, 22, 3) -> (n, F, 10 or 5, 3)``.

    Stateless apart from validating the joint count seen in :meth:`fit`.
    """

    def __init__(self, scale="bone", hierarchy=None):
        self.scale = scale
        self.hierarchy = hierarchy

    def fit(self, X, y=None):
        h = self.hierarchy if self.hierarchy is not None else default_hierarchy()
        if self.scale not in ("joint", "bone", "part"):
            raise ValueError(f"scale must be joint, bone or part, got {self.scale!r}")
        X = _check_poses(X, n_joints=h.skeletons[0].V)
        P = np.eye(h.skeletons[0].V)
        if self.scale in ("bone", "part"):
            P = h.pool_ops[0] @ P
        if self.scale == "part":
            P = h.pool_ops[1] @ P
        self.pooling_ = P
        self.n_joints_in_ = X.shape[2]
        return self

    def transform(self, X):
        check_is_fitted(self, "pooling_")
        X = _check_poses(X, n_joints=self.n_joints_in_)
        return np.einsum("rv,nfvc->nfrc", self.pooling_, X)
