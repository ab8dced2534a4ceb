"""Skeleton data types, weak-perspective projection, alignment, and error metrics.

Depth convention used throughout the toolkit: larger z means farther from the
camera, so "joint i closer than joint j" means z_i < z_j.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateGeometryError,
    DimensionMismatchError,
    InvalidInputError,
)


@dataclass(frozen=True)
class Skeleton:
    """Kinematic tree over N named joints.

    ``parent[j]`` is the parent joint index; the root points to itself.
    ``bone_lengths`` holds one length (mm) per non-root joint, ordered by
    joint index.
    """

    joint_names: list[str]
    parent: list[int]
    bone_lengths: list[float]

    def __post_init__(self):
        n = len(self.joint_names)
        if len(self.parent) != n:
            raise DimensionMismatchError("parent array must have one entry per joint")
        roots = [j for j, p in enumerate(self.parent) if p == j]
        if len(roots) != 1:
            raise InvalidInputError(f"expected exactly one root joint, found {len(roots)}")
        if len(self.bone_lengths) != n - 1:
            raise DimensionMismatchError("need one bone length per non-root joint")
        if any(length <= 0 for length in self.bone_lengths):
            raise InvalidInputError("all bone lengths must be positive")
        # connectivity: every joint must reach the root
        root = roots[0]
        for j in range(n):
            seen, cur = set(), j
            while cur != root:
                if cur in seen or not (0 <= self.parent[cur] < n):
                    raise InvalidInputError("parent array does not encode a tree")
                seen.add(cur)
                cur = self.parent[cur]

    @property
    def joint_count(self) -> int:
        return len(self.joint_names)

    @property
    def root(self) -> int:
        return next(j for j, p in enumerate(self.parent) if p == j)

    def non_root_joints(self) -> list[int]:
        return [j for j in range(self.joint_count) if j != self.root]

    def bone_length_of(self, joint: int) -> float:
        """Length of the bone connecting ``joint`` to its parent."""
        return self.bone_lengths[self.non_root_joints().index(joint)]

    def edges(self) -> list[tuple[int, int]]:
        """(parent, child) pairs, one per bone."""
        return [(self.parent[j], j) for j in self.non_root_joints()]


@dataclass(frozen=True)
class WeakPerspectiveCamera:
    """Uniform scale (pixels per mm) plus image-plane offset; depth discarded."""

    scale: float = 1.0
    principal_offset: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not (self.scale > 0):
            raise InvalidInputError("camera scale must be positive")


def _as_pose(coords, dim: int) -> np.ndarray:
    arr = np.asarray(coords, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise DimensionMismatchError(f"expected (N, {dim}) coordinates, got {arr.shape}")
    return arr


def project(pose, cam: WeakPerspectiveCamera) -> np.ndarray:
    """Weak-perspective projection of an (N, 3) pose to (N, 2) pixels."""
    pose = _as_pose(pose, 3)
    if not np.all(np.isfinite(pose)):
        raise InvalidInputError("pose contains non-finite coordinates")
    return cam.scale * pose[:, :2] + np.asarray(cam.principal_offset, dtype=float)


def mpjpe(pred, gt) -> float:
    """Mean per-joint Euclidean distance (mm)."""
    pred = _as_pose(pred, 3)
    gt = _as_pose(gt, 3)
    if pred.shape[0] != gt.shape[0]:
        raise DimensionMismatchError("poses have different joint counts")
    return float(np.mean(np.linalg.norm(pred - gt, axis=1)))


def procrustes_align(pred, gt, with_scale: bool = True) -> tuple[np.ndarray, float]:
    """Optimal similarity alignment of pred onto gt.

    Returns the aligned copy of pred and its MPJPE against gt. The rotation is
    constrained to det = +1 (no reflections). Set ``with_scale=False`` for a
    rigid-only alignment.
    """
    pred = _as_pose(pred, 3)
    gt = _as_pose(gt, 3)
    n = pred.shape[0]
    if n != gt.shape[0]:
        raise DimensionMismatchError("poses have different joint counts")
    if n < 3:
        raise DegenerateGeometryError("need at least 3 joints for alignment")

    mu_p = pred.mean(axis=0)
    mu_g = gt.mean(axis=0)
    pc = pred - mu_p
    gc = gt - mu_g

    # rotation is ill-defined when the target collapses to a point or a line
    if np.linalg.matrix_rank(gc, tol=1e-9 * max(1.0, float(np.abs(gc).max(initial=0.0)))) < 2:
        raise DegenerateGeometryError("ground-truth joints are coincident or collinear")

    cov = gc.T @ pc / n
    u, d, vt = np.linalg.svd(cov)
    sign = np.sign(np.linalg.det(u @ vt))
    s_fix = np.ones(3)
    s_fix[-1] = sign if sign != 0 else 1.0
    rot = u @ np.diag(s_fix) @ vt

    if with_scale:
        var_p = float(np.sum(pc**2)) / n
        if var_p == 0.0:
            raise DegenerateGeometryError("prediction joints are all coincident")
        scale = float(np.sum(d * s_fix)) / var_p
    else:
        scale = 1.0

    aligned = scale * pc @ rot.T + mu_g
    return aligned, mpjpe(aligned, gt)


def pose_to_json(coords, skeleton_id: str) -> dict:
    """Pose JSON schema: {"joints": [[x, y(, z)], ...], "skeleton": id}."""
    arr = np.asarray(coords, dtype=float)
    return {"joints": arr.tolist(), "skeleton": skeleton_id}


def pose_from_json(obj: dict) -> np.ndarray:
    joints = np.asarray(obj["joints"], dtype=float)
    if joints.ndim != 2 or joints.shape[1] not in (2, 3):
        raise InvalidInputError("pose JSON must hold (N, 2) or (N, 3) joints")
    return joints


def pose_bone_lengths(coords, skeleton: Skeleton) -> np.ndarray:
    """Bone lengths realized by a pose, ordered like ``skeleton.bone_lengths``."""
    coords = _as_pose(coords, 3)
    return np.array(
        [np.linalg.norm(coords[j] - coords[skeleton.parent[j]]) for j in skeleton.non_root_joints()]
    )
