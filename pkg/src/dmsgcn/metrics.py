"""Mean per-joint position error and the millisecond horizons it is reported at."""

from __future__ import annotations

import numpy as np

from .errors import ContractError, DimensionError

HORIZONS_MS = (80, 160, 320, 400, 560, 1000)


def horizon_frames(fps: float = 25.0, horizons_ms=HORIZONS_MS) -> tuple[int, ...]:
    """1-based predicted-frame index of each horizon (80 ms -> frame 2 at 25 fps)."""
    return tuple(int(round(ms * fps / 1000.0)) for ms in horizons_ms)


def mpjpe(pred, target, frames=None) -> float:
    """Average Euclidean joint error over the selected (0-based) frames.

    ``pred`` and ``target`` are ``(..., K, V, 3)``; leading axes are averaged too.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(f"mpjpe: shapes {pred.shape} and {target.shape} differ")
    if frames is not None:
        frames = list(frames)
        if not frames:
            raise ContractError("mpjpe needs at least one frame")
        pred = pred[..., frames, :, :]
        target = target[..., frames, :, :]
    return float(np.linalg.norm(pred - target, axis=-1).mean())


def mpjpe_per_frame(pred, target) -> np.ndarray:
    """One MPJPE value per predicted frame: shape ``(K,)``."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(f"mpjpe: shapes {pred.shape} and {target.shape} differ")
    err = np.linalg.norm(pred - target, axis=-1)  # ..., K, V
    err = err.mean(axis=-1)
    return err.reshape(-1, err.shape[-1]).mean(axis=0)
