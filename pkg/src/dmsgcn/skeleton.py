"""Skeleton trees, the joint/bone/part scale hierarchy, hop masks and graph init.

Skeleton definitions live in a small INI-style file (``key = value`` lines
grouped under ``[joint]``, ``[bone]``, ``[part]`` and ``[select]``)::

    [joint]
    names = RKnee, RAnkle, ...
    parents = 8, 0, ...          # -1 marks the root

    [bone]
    names = ...
    parents = ...
    groups = 0 1 | 2 3 | ...     # joint-scale members of each bone

    [part]
    names = ...
    parents = ...
    groups = 0 1 | 2 3 | ...     # bone-scale members of each part

    [select]
    raw_joints = 32
    indices = 2, 3, 4, ...       # raw columns kept for the joint scale

The default file for the 32-joint Human3.6M convention ships in
:data:`DEFAULT_CONFIG_TEXT`.
"""

from __future__ import annotations

import configparser
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionError, ValidationError
from .nn import Module, Parameter
from .tensor import Tensor, as_tensor, matmul

SCALE_NAMES = ("joint", "bone", "part")


@dataclass(frozen=True)
class Skeleton:
    parents: tuple
    names: tuple = ()

    def __post_init__(self):
        parents = tuple(int(p) for p in self.parents)
        object.__setattr__(self, "parents", parents)
        if not self.names:
            object.__setattr__(self, "names", tuple(f"j{i}" for i in range(len(parents))))
        else:
            object.__setattr__(self, "names", tuple(self.names))
        self.validate()

    @property
    def V(self) -> int:
        return len(self.parents)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(p, i) for i, p in enumerate(self.parents) if p >= 0]

    def validate(self) -> None:
        V = self.V
        if V == 0:
            raise ValidationError("skeleton has no joints")
        if len(self.names) != V:
            raise ValidationError(f"{len(self.names)} names for {V} joints")
        if any(p < -1 or p >= V for p in self.parents):
            raise ValidationError(f"parent index out of range [0, {V})")
        roots = [i for i, p in enumerate(self.parents) if p < 0]
        if len(roots) != 1:
            raise ValidationError(f"skeleton must have exactly one root, found {len(roots)}")
        # every joint must reach the root without revisiting a joint
        for i in range(V):
            seen = set()
            j = i
            while j >= 0:
                if j in seen:
                    raise ValidationError(f"cycle through joint {j}")
                seen.add(j)
                j = self.parents[j]

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.V, self.V))
        for i, j in self.edges:
            A[i, j] = A[j, i] = 1.0
        return A


def hop_distance(skel: Skeleton) -> np.ndarray:
    """All-pairs shortest path lengths along skeleton edges (BFS per joint)."""
    V = skel.V
    nbrs = [[] for _ in range(V)]
    for i, j in skel.edges:
        nbrs[i].append(j)
        nbrs[j].append(i)
    dist = np.full((V, V), -1, dtype=np.int64)
    for src in range(V):
        dist[src, src] = 0
        queue = deque([src])
        while queue:
            u = queue.popleft()
            for w in nbrs[u]:
                if dist[src, w] < 0:
                    dist[src, w] = dist[src, u] + 1
                    queue.append(w)
    if (dist < 0).any():
        raise ValidationError("skeleton is disconnected")
    return dist


def build_mask(skel: Skeleton, max_hop: int) -> np.ndarray:
    """Binary ``V x V`` mask with ones where the hop distance is at most ``max_hop``."""
    if max_hop < 0:
        raise ConfigError(f"max_hop must be >= 0, got {max_hop}")
    return (hop_distance(skel) <= max_hop).astype(np.float64)


def pooling_matrix(groups, n_fine: int) -> np.ndarray:
    """Row ``r`` averages the fine joints listed in ``groups[r]``."""
    members = [i for g in groups for i in g]
    if sorted(members) != list(range(n_fine)):
        raise ValidationError(f"groups do not partition {n_fine} fine joints: {groups}")
    P = np.zeros((len(groups), n_fine))
    for r, g in enumerate(groups):
        P[r, list(g)] = 1.0 / len(g)
    return P


def membership_matrix(groups, n_fine: int) -> np.ndarray:
    """``n_fine x n_coarse`` 0/1 matrix copying each coarse joint to its members."""
    U = np.zeros((n_fine, len(groups)))
    for r, g in enumerate(groups):
        U[list(g), r] = 1.0
    return U


def downsample(pose, P) -> Tensor:
    """Average grouped joints: ``(..., V_fine, 3) -> (..., V_coarse, 3)``."""
    pose = as_tensor(pose)
    P = as_tensor(P, dtype=pose.dtype)
    if pose.ndim < 2 or P.shape[1] != pose.shape[-2]:
        raise DimensionError(f"downsample: pooling {P.shape} does not fit pose {pose.shape}")
    return matmul(P, pose)


@dataclass
class ScaleHierarchy:
    """Skeletons of the three scales and the groupings that link them.

    ``groupings[0]`` lists joint-scale members of each bone, ``groupings[1]``
    bone-scale members of each part.
    """

    skeletons: list
    groupings: list
    joint_indices: tuple = ()
    raw_joints: int = 0
    pool_ops: list = field(init=False)

    def __post_init__(self):
        if len(self.skeletons) != 3 or len(self.groupings) != 2:
            raise ValidationError("hierarchy needs three skeletons and two groupings")
        self.pool_ops = []
        for k, groups in enumerate(self.groupings):
            fine, coarse = self.skeletons[k], self.skeletons[k + 1]
            if len(groups) != coarse.V:
                raise ValidationError(
                    f"{SCALE_NAMES[k + 1]} scale has {coarse.V} joints but {len(groups)} groups"
                )
            self.pool_ops.append(pooling_matrix(groups, fine.V))

    @property
    def sizes(self) -> tuple:
        return tuple(s.V for s in self.skeletons)

    def masks(self, max_hops) -> list[np.ndarray]:
        return [build_mask(s, h) for s, h in zip(self.skeletons, max_hops)]

    def pyramid(self, pose) -> list[Tensor]:
        """Joint, bone and part versions of a ``(..., 22, 3)`` pose."""
        x1 = as_tensor(pose)
        x2 = downsample(x1, self.pool_ops[0])
        x3 = downsample(x2, self.pool_ops[1])
        return [x1, x2, x3]

    def upsample_init(self) -> tuple[np.ndarray, np.ndarray]:
        """Membership matrices bone->joint (22x10) and part->bone (10x5)."""
        return (
            membership_matrix(self.groupings[0], self.skeletons[0].V),
            membership_matrix(self.groupings[1], self.skeletons[1].V),
        )


# -- graph initialisation ----------------------------------------------------

def normalized_adjacency(skel: Skeleton) -> np.ndarray:
    """``D^-1/2 (A + I) D^-1/2`` of the kinematic tree."""
    A = skel.adjacency() + np.eye(skel.V)
    d = 1.0 / np.sqrt(A.sum(axis=1))
    return A * d[:, None] * d[None, :]


@dataclass(eq=False)
class SpatialGraph(Module):
    A_s: Parameter
    mask: np.ndarray


@dataclass(eq=False)
class TemporalGraph(Module):
    A_t: Parameter


def init_spatial_adjacency(skel: Skeleton, mask, name="A_s", dtype=np.float32) -> SpatialGraph:
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != (skel.V, skel.V):
        raise DimensionError(f"mask {mask.shape} does not match skeleton of {skel.V} joints")
    A = normalized_adjacency(skel) * mask
    return SpatialGraph(Parameter(A, name=name, freeze_mask=mask > 0, dtype=dtype), mask)


def init_temporal_adjacency(T: int, name="A_t", dtype=np.float32) -> TemporalGraph:
    """Row-normalised chain over frames: each frame links to itself and its neighbours."""
    if T < 2:
        raise ConfigError(f"temporal graph needs T >= 2, got {T}")
    A = np.eye(T) + np.eye(T, k=1) + np.eye(T, k=-1)
    A /= A.sum(axis=1, keepdims=True)
    return TemporalGraph(Parameter(A, name=name, dtype=dtype))


# -- configuration files -----------------------------------------------------

DEFAULT_CONFIG_TEXT = """\
# 22-joint skeleton cut from the 32-joint Human3.6M layout, with the
# bone (10) and part (5) groupings used by the multi-scale encoder.
# The pelvis/hip joints are dropped, so both thighs hang off the spine.

[joint]
names = RKnee, RAnkle, RFoot, RToe, LKnee, LAnkle, LFoot, LToe,
        Spine, Neck, Head, HeadTop,
        LShoulder, LElbow, LWrist, LHand, LThumb,
        RShoulder, RElbow, RWrist, RHand, RThumb
parents = 8, 0, 1, 2, 8, 4, 5, 6, -1, 8, 9, 10, 8, 12, 13, 14, 14, 8, 17, 18, 19, 19

[bone]
names = RThigh, RFoot, LThigh, LFoot, Torso, Head, LUpperArm, LForearm, RUpperArm, RForearm
parents = 4, 0, 4, 2, -1, 4, 4, 6, 4, 8
groups = 0 1 | 2 3 | 4 5 | 6 7 | 8 9 | 10 11 | 12 13 | 14 15 16 | 17 18 | 19 20 21

[part]
names = RLeg, LLeg, Trunk, LArm, RArm
parents = 2, 2, -1, 2, 2
groups = 0 1 | 2 3 | 4 5 | 6 7 | 8 9

[select]
raw_joints = 32
indices = 2, 3, 4, 5, 7, 8, 9, 10, 12, 13, 14, 15, 17, 18, 19, 21, 22, 25, 26, 27, 29, 30
"""


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.replace(",", " ").split()]


def _groups(text: str) -> list[list[int]]:
    return [_ints(chunk) for chunk in text.split("|")]


def _names(text: str) -> list[str]:
    return [t.strip() for t in text.replace("\n", " ").split(",") if t.strip()]


def parse_skeleton_config(text: str) -> ScaleHierarchy:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        cp.read_string(text)
        skels, groupings = [], []
        for scale in SCALE_NAMES:
            sec = cp[scale]
            skels.append(Skeleton(_ints(sec["parents"]), _names(sec.get("names", ""))))
            if scale != "joint":
                groupings.append(_groups(sec["groups"]))
        sel = cp["select"] if cp.has_section("select") else {}
        indices = tuple(_ints(sel.get("indices", "")))
        raw = int(sel.get("raw_joints", len(indices) or skels[0].V))
    except (KeyError, ValueError, configparser.Error) as exc:
        raise ConfigError(f"bad skeleton config: {exc}") from exc
    if indices and len(indices) != skels[0].V:
        raise ConfigError(f"{len(indices)} selected indices for a {skels[0].V}-joint skeleton")
    return ScaleHierarchy(skels, groupings, joint_indices=indices, raw_joints=raw)


def load_skeleton_config(path=None) -> ScaleHierarchy:
    if path is None or str(path) == "":
        return parse_skeleton_config(DEFAULT_CONFIG_TEXT)
    if not Path(path).is_file():
        raise ConfigError(f"skeleton config {path} not found")
    return parse_skeleton_config(Path(path).read_text())


def default_hierarchy() -> ScaleHierarchy:
    return parse_skeleton_config(DEFAULT_CONFIG_TEXT)


def export_matrix_csv(matrix: np.ndarray, path) -> None:
    np.savetxt(path, np.asarray(matrix), delimiter=",", fmt="%.10g")


def hierarchy_to_config_text(h: ScaleHierarchy) -> str:
    """Inverse of :func:`parse_skeleton_config` (comments are not preserved)."""
    lines = []
    for k, (scale, skel) in enumerate(zip(SCALE_NAMES, h.skeletons)):
        lines += [f"[{scale}]", "names = " + ", ".join(skel.names),
                  "parents = " + ", ".join(str(p) for p in skel.parents)]
        if k > 0:
            lines.append("groups = " + " | ".join(" ".join(map(str, g)) for g in h.groupings[k - 1]))
        lines.append("")
    if h.joint_indices:
        lines += ["[select]", f"raw_joints = {h.raw_joints}",
                  "indices = " + ", ".join(map(str, h.joint_indices)), ""]
    return "\n".join(lines)
