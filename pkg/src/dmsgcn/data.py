"""Motion sequences: CSV I/O, joint selection, windowing, synthetic motion, batching.

CSV schema: one row per frame, ``3 * V`` numeric columns holding
``x, y, z`` of joint 0, then joint 1, and so on, in millimetres.  An optional
header row is allowed when its first cell is not a number.  Example with
two joints::

    j0_x,j0_y,j0_z,j1_x,j1_y,j1_z
    0.0,0.0,0.0,10.5,-3.25,400.0
    0.5,0.0,0.1,10.7,-3.20,401.5
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    ColumnCountError,
    ConfigError,
    EmptyFileError,
    MissingDataError,
    NonNumericError,
    ValidationError,
)
from .functional import make_rng


@dataclass
class MotionSequence:
    frames: np.ndarray  # F x V x 3, millimetres
    fps: float = 25.0
    source: str = ""
    action: str = "all"

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 3 or self.frames.shape[2] != 3:
            raise ValidationError(f"frames must be F x V x 3, got {self.frames.shape}")

    @property
    def F(self) -> int:
        return self.frames.shape[0]

    @property
    def V(self) -> int:
        return self.frames.shape[1]


@dataclass
class WindowSample:
    observed: np.ndarray  # T x V x 3
    target: np.ndarray  # K x V x 3
    source: str = ""
    offset: int = 0
    action: str = "all"


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_csv(path, n_joints: int | None = None, header: str = "auto", fps: float = 25.0,
             action: str = "all") -> list[MotionSequence]:
    """Read one motion sequence from a CSV file.

    ``header`` is ``"auto"`` (skip a first row that is not numeric), ``"yes"``
    or ``"no"``.  With ``n_joints`` every row must have exactly ``3 * n_joints``
    columns; otherwise the first data row fixes the width, which must be a
    multiple of three.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [(i + 1, row) for i, row in enumerate(csv.reader(fh)) if any(c.strip() for c in row)]
    if rows and (header == "yes" or (header == "auto" and not _is_number(rows[0][1][0]))):
        rows = rows[1:]
    if not rows:
        raise EmptyFileError(f"{path}: no data rows")
    width = 3 * n_joints if n_joints is not None else len(rows[0][1])
    if width % 3:
        raise ColumnCountError(f"{path}:{rows[0][0]}: {width} columns is not a multiple of 3")
    values = np.empty((len(rows), width))
    for r, (lineno, row) in enumerate(rows):
        if len(row) != width:
            raise ColumnCountError(f"{path}:{lineno}: expected {width} columns, found {len(row)}")
        for c, cell in enumerate(row):
            try:
                values[r, c] = float(cell)
            except ValueError:
                raise NonNumericError(
                    f"{path}:{lineno}: column {c + 1} is not numeric: {cell!r}"
                ) from None
    if not np.all(np.isfinite(values)):
        raise NonNumericError(f"{path}: non-finite coordinate")
    frames = values.reshape(len(rows), width // 3, 3)
    return [MotionSequence(frames, fps=fps, source=path.stem, action=action)]


def write_csv(seq_or_frames, path, header: bool = True, precision: int = 9) -> None:
    """Write ``F x V x 3`` frames; ``precision`` significant digits per value."""
    frames = seq_or_frames.frames if isinstance(seq_or_frames, MotionSequence) else seq_or_frames
    frames = np.asarray(frames)
    F, V, _ = frames.shape
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow([f"j{v}_{a}" for v in range(V) for a in "xyz"])
        for f in range(F):
            w.writerow([f"{x:.{precision}g}" for x in frames[f].reshape(-1)])


def select_joints(seq: MotionSequence, indices: Sequence[int]) -> MotionSequence:
    indices = list(indices)
    if len(set(indices)) != len(indices):
        raise ValidationError("joint indices must be distinct")
    bad = [i for i in indices if not 0 <= i < seq.V]
    if bad:
        raise ValidationError(f"joint indices {bad} out of range for V={seq.V}")
    return MotionSequence(seq.frames[:, indices], fps=seq.fps, source=seq.source, action=seq.action)


def window_count(F: int, T: int, K: int, stride: int) -> int:
    return (F - T - K) // stride + 1 if F >= T + K else 0


def windows(seq: MotionSequence, T: int, K: int, stride: int = 1) -> list[WindowSample]:
    """Every ``T + K`` frame window starting at multiples of ``stride``."""
    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride}")
    out = []
    for i in range(window_count(seq.F, T, K, stride)):
        s = i * stride
        out.append(WindowSample(
            observed=seq.frames[s:s + T].copy(),
            target=seq.frames[s + T:s + T + K].copy(),
            source=seq.source,
            offset=s,
            action=seq.action,
        ))
    return out


@dataclass
class SyntheticSpec:
    """Per-joint sinusoids around a random rest pose.

    Coordinate ``c`` of joint ``v`` at frame ``f`` is
    ``A[v,c] * sin(2 pi w[v,c] f / fps + phi[v,c]) + offset[v,c]`` with
    amplitude, frequency (Hz) and phase drawn uniformly from the given ranges.
    """

    seed: int = 0
    V: int = 22
    F: int = 100
    fps: float = 25.0
    amplitude: tuple = (20.0, 120.0)
    frequency: tuple = (0.3, 1.2)
    phase: tuple = (0.0, 2 * math.pi)
    offset: tuple = (-400.0, 400.0)
    action: str = "synthetic"


def _uniform(rng, bounds, shape):
    lo, hi = bounds
    return lo + rng.random(shape) * (hi - lo)


def synth_generate(spec: SyntheticSpec) -> MotionSequence:
    rng = make_rng(spec.seed)
    shape = (spec.V, 3)
    amp = _uniform(rng, spec.amplitude, shape)
    freq = _uniform(rng, spec.frequency, shape)
    phase = _uniform(rng, spec.phase, shape)
    offset = _uniform(rng, spec.offset, shape)
    f = np.arange(spec.F, dtype=np.float64)[:, None, None]
    frames = amp * np.sin(2 * np.pi * freq * f / spec.fps + phase) + offset
    return MotionSequence(frames, fps=spec.fps, source=f"synth-{spec.seed}", action=spec.action)


def synth_windows(n_windows: int, seed: int, T: int = 10, K: int = 25, V: int = 22,
                  per_sequence: int = 4, stride: int = 5, **spec_kw) -> list[WindowSample]:
    """``n_windows`` windows cut from as many synthetic sequences as needed."""
    out: list[WindowSample] = []
    k = 0
    F = T + K + (per_sequence - 1) * stride
    while len(out) < n_windows:
        seq = synth_generate(SyntheticSpec(seed=seed * 100_003 + k, V=V, F=F, **spec_kw))
        out.extend(windows(seq, T, K, stride))
        k += 1
    return out[:n_windows]


def stack_samples(samples: Sequence[WindowSample]) -> tuple[np.ndarray, np.ndarray]:
    """``(n, T, V, 3)`` observed and ``(n, K, V, 3)`` targets."""
    return (np.stack([s.observed for s in samples]), np.stack([s.target for s in samples]))


def batch_iter(samples: Sequence, batch_size: int, shuffle_seed=None) -> Iterator[list]:
    """Yield lists of samples; the last batch may be short.

    ``shuffle_seed=None`` keeps source order.
    """
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    order = np.arange(len(samples))
    if shuffle_seed is not None:
        order = make_rng(shuffle_seed).permutation(len(samples))
    for start in range(0, len(samples), batch_size):
        yield [samples[i] for i in order[start:start + batch_size]]


def load_actions_manifest(path) -> dict[str, str]:
    """``source,action`` pairs, one per line; maps a CSV stem to its action label."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2:
            raise ValidationError(f"{path}:{lineno}: expected 'source,action'")
        out[parts[0]] = parts[1]
    return out


def load_motion(path, n_joints=None, joint_indices=None, fps: float = 25.0,
                actions: dict | None = None, center: bool = False) -> list[MotionSequence]:
    """Load a CSV file or every ``*.csv`` in a directory, then select joints."""
    path = Path(path)
    if not path.exists():
        raise MissingDataError(f"data path {path} does not exist")
    files = sorted(path.glob("*.csv")) if path.is_dir() else [path]
    if not files:
        raise EmptyFileError(f"no CSV files in {path}")
    seqs = []
    for f in files:
        action = (actions or {}).get(f.stem, "all")
        for seq in load_csv(f, n_joints=n_joints, fps=fps, action=action):
            if joint_indices and seq.V != len(joint_indices):
                seq = select_joints(seq, joint_indices)
            if center:
                seq = MotionSequence(seq.frames - seq.frames.mean(axis=(0, 1)), fps=seq.fps,
                                     source=seq.source, action=seq.action)
            seqs.append(seq)
    return seqs

