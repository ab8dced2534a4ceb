"""Synthetic articulated-skeleton data and the simulated annotator.

Poses are sampled from a small set of template postures via forward kinematics:
per-joint angular jitter propagates down the kinematic tree (bone lengths are
preserved by construction), followed by a global yaw rotation. Templates are
deliberately depth-asymmetric so the 2D projection of a sample has a unique
in-distribution depth explanation.
"""
from __future__ import annotations

import json
import zlib
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import ContractViolationError, InvalidInputError
from .geometry import Skeleton, WeakPerspectiveCamera

JOINT_NAMES = [
    "head", "neck",
    "r_shoulder", "r_elbow", "r_wrist",
    "l_shoulder", "l_elbow", "l_wrist",
    "r_hip", "r_knee", "r_ankle",
    "l_hip", "l_knee", "l_ankle",
]
PARENTS = [1, 1, 1, 2, 3, 1, 5, 6, 1, 8, 9, 1, 11, 12]

# anthropometric-ish bone lengths (mm), one per non-root joint in joint order
BONE_MM = {
    "head": 180.0,
    "r_shoulder": 160.0, "r_elbow": 280.0, "r_wrist": 250.0,
    "l_shoulder": 160.0, "l_elbow": 280.0, "l_wrist": 250.0,
    "r_hip": 530.0, "r_knee": 440.0, "r_ankle": 430.0,
    "l_hip": 530.0, "l_knee": 440.0, "l_ankle": 430.0,
}

DEFAULT_DEPTH_OFFSET_MM = 3000.0


def default_skeleton() -> Skeleton:
    """14-joint skeleton (head, neck, 2x shoulder/elbow/wrist/hip/knee/ankle)."""
    lengths = [BONE_MM[JOINT_NAMES[j]] for j in range(len(JOINT_NAMES)) if PARENTS[j] != j]
    return Skeleton(joint_names=list(JOINT_NAMES), parent=list(PARENTS), bone_lengths=lengths)


def default_camera() -> WeakPerspectiveCamera:
    """~0.12 px/mm so a 1700 mm figure spans roughly 200 px."""
    return WeakPerspectiveCamera(scale=0.12, principal_offset=(128.0, 128.0))


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


# Bone directions (parent -> joint unit vectors), keyed by joint name.
# Frame: x right, y up, z depth (larger = farther from camera).
_TEMPLATE_DIRS = {
    # relaxed stand: left arm forward, right arm back, slight forward head lean
    "stand": {
        "head": (0.0, 0.98, -0.2),
        "r_shoulder": (1.0, 0.0, 0.05), "r_elbow": (0.15, -0.95, 0.3), "r_wrist": (0.1, -0.9, 0.42),
        "l_shoulder": (-1.0, 0.0, -0.05), "l_elbow": (-0.15, -0.95, -0.3), "l_wrist": (-0.1, -0.9, -0.42),
        "r_hip": (0.17, -0.98, 0.03), "r_knee": (0.0, -1.0, 0.08), "r_ankle": (0.0, -1.0, -0.05),
        "l_hip": (-0.17, -0.98, -0.03), "l_knee": (0.02, -1.0, -0.12), "l_ankle": (0.0, -1.0, -0.03),
    },
    # walking stride: left leg and right arm forward
    "walk": {
        "head": (0.0, 0.99, -0.12),
        "r_shoulder": (1.0, 0.0, 0.05), "r_elbow": (0.1, -0.8, -0.58), "r_wrist": (0.1, -0.72, -0.68),
        "l_shoulder": (-1.0, 0.0, -0.05), "l_elbow": (-0.1, -0.8, 0.58), "l_wrist": (-0.1, -0.72, 0.68),
        "r_hip": (0.17, -0.97, 0.15), "r_knee": (0.0, -0.85, 0.52), "r_ankle": (0.0, -0.96, 0.28),
        "l_hip": (-0.17, -0.97, -0.15), "l_knee": (0.0, -0.85, -0.52), "l_ankle": (0.0, -0.92, -0.1),
    },
    # seated: thighs toward the camera, shins down, hands on knees
    "sit": {
        "head": (0.0, 0.97, -0.25),
        "r_shoulder": (1.0, 0.0, 0.05), "r_elbow": (0.12, -0.9, -0.42), "r_wrist": (0.05, -0.5, -0.86),
        "l_shoulder": (-1.0, 0.0, -0.02), "l_elbow": (-0.12, -0.88, -0.48), "l_wrist": (-0.05, -0.45, -0.9),
        "r_hip": (0.17, -0.93, 0.32), "r_knee": (0.05, -0.12, -0.99), "r_ankle": (0.0, -1.0, 0.06),
        "l_hip": (-0.17, -0.93, 0.32), "l_knee": (-0.05, -0.18, -0.98), "l_ankle": (0.0, -1.0, 0.1),
    },
    # arms raised overhead with a forward lean, left arm higher/more forward
    "reach": {
        "head": (0.0, 0.96, -0.28),
        "r_shoulder": (1.0, 0.0, 0.06), "r_elbow": (0.5, 0.85, -0.12), "r_wrist": (0.3, 0.95, -0.08),
        "l_shoulder": (-1.0, 0.0, -0.06), "l_elbow": (-0.4, 0.88, -0.28), "l_wrist": (-0.2, 0.92, -0.35),
        "r_hip": (0.17, -0.98, 0.08), "r_knee": (0.0, -1.0, 0.1), "r_ankle": (0.0, -1.0, -0.04),
        "l_hip": (-0.17, -0.98, 0.02), "l_knee": (0.0, -0.99, -0.16), "l_ankle": (0.0, -1.0, 0.02),
    },
}


def _pose_from_dirs(skeleton: Skeleton, dirs: dict) -> np.ndarray:
    coords = np.zeros((skeleton.joint_count, 3))
    order = _topological_order(skeleton)
    for j in order:
        if j == skeleton.root:
            continue
        direction = _unit(dirs[skeleton.joint_names[j]])
        coords[j] = coords[skeleton.parent[j]] + skeleton.bone_length_of(j) * direction
    coords[:, 2] += DEFAULT_DEPTH_OFFSET_MM
    return coords


def _topological_order(skeleton: Skeleton) -> list[int]:
    order, placed = [skeleton.root], {skeleton.root}
    pending = [j for j in range(skeleton.joint_count) if j != skeleton.root]
    while pending:
        for j in list(pending):
            if skeleton.parent[j] in placed:
                order.append(j)
                placed.add(j)
                pending.remove(j)
    return order


def template_poses(skeleton: Skeleton | None = None) -> list[np.ndarray]:
    skeleton = skeleton or default_skeleton()
    return [_pose_from_dirs(skeleton, d) for d in _TEMPLATE_DIRS.values()]


@dataclass
class PoseDistribution:
    """Template poses plus per-joint angular jitter and a global yaw range."""

    skeleton: Skeleton
    template_poses: list[np.ndarray]
    perturbation_sigma_deg: float = 6.0
    global_rotation_range: tuple[float, float] = (-75.0, 75.0)

    def __post_init__(self):
        from .geometry import pose_bone_lengths

        for pose in self.template_poses:
            realized = pose_bone_lengths(pose, self.skeleton)
            expected = np.asarray(self.skeleton.bone_lengths)
            if not np.allclose(realized, expected, rtol=1e-6):
                raise InvalidInputError("template pose violates skeleton bone lengths")


def default_distribution() -> PoseDistribution:
    skeleton = default_skeleton()
    return PoseDistribution(skeleton=skeleton, template_poses=template_poses(skeleton))


def sample_pose(dist: PoseDistribution, seed: int) -> np.ndarray:
    """One pose: template + per-joint jitter down the tree + global yaw.

    Bone lengths are preserved exactly (all maps are rotations).
    """
    rng = np.random.default_rng(seed)
    skeleton = dist.skeleton
    template = dist.template_poses[rng.integers(len(dist.template_poses))]
    root = skeleton.root
    sigma = np.deg2rad(dist.perturbation_sigma_deg)

    coords = np.zeros_like(template)
    coords[root] = template[root]
    global_rot = {root: np.eye(3)}
    for j in _topological_order(skeleton):
        if j == root:
            continue
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        angle = rng.normal(0.0, sigma)
        local = Rotation.from_rotvec(angle * axis).as_matrix()
        p = skeleton.parent[j]
        global_rot[j] = global_rot[p] @ local
        bone_vec = template[j] - template[p]
        coords[j] = coords[p] + global_rot[j] @ bone_vec

    lo, hi = np.deg2rad(dist.global_rotation_range)
    yaw = rng.uniform(lo, hi)
    yaw_mat = Rotation.from_euler("y", yaw).as_matrix()
    centroid = coords.mean(axis=0)
    return (coords - centroid) @ yaw_mat.T + centroid


@dataclass(frozen=True)
class SimulatedAnnotator:
    """Stand-in for a human answering closer/farther/same/ambiguous."""

    tie_threshold_mm: float = 100.0
    error_rate: float = 0.0
    ambiguous_rate: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.error_rate < 0.5):
            raise ContractViolationError("error_rate must be in [0, 0.5)")
        if not (0.0 <= self.ambiguous_rate < 1.0):
            raise ContractViolationError("ambiguous_rate must be in [0, 1)")


def _pair_rng(seed: int, pose: np.ndarray, i: int, j: int) -> np.random.Generator:
    fingerprint = zlib.crc32(np.ascontiguousarray(pose, dtype=float).tobytes())
    return np.random.default_rng([seed, fingerprint, i, j])


def annotate(annotator: SimulatedAnnotator, pose, i: int, j: int, seed: int = 0) -> str:
    """Answer whether joint i is closer/farther/same relative to joint j.

    Deterministic per (seed, pose, i, j). Strict answers flip with probability
    error_rate; any answer is replaced by "ambiguous" with probability
    ambiguous_rate.
    """
    if i == j:
        raise ContractViolationError("cannot compare a joint with itself")
    pose = np.asarray(pose, dtype=float)
    gap = pose[i, 2] - pose[j, 2]
    if abs(gap) < annotator.tie_threshold_mm or gap == 0.0:
        answer = "same"
    else:
        answer = "closer" if gap < 0 else "farther"

    rng = _pair_rng(seed, pose, i, j)
    u_flip, u_amb = rng.random(2)
    if answer in ("closer", "farther") and u_flip < annotator.error_rate:
        answer = "farther" if answer == "closer" else "closer"
    if u_amb < annotator.ambiguous_rate:
        answer = "ambiguous"
    return answer


def save_poses_jsonl(path, poses, skeleton_id: str = "ordpose-14"):
    """MoCap-style dataset file: one Pose3D JSON object per line."""
    with open(path, "w", encoding="utf-8") as f:
        for pose in poses:
            f.write(json.dumps({"joints": np.asarray(pose, dtype=float).tolist(), "skeleton": skeleton_id}))
            f.write("\n")


def load_poses_jsonl(path) -> list[np.ndarray]:
    poses = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                poses.append(np.asarray(json.loads(line)["joints"], dtype=float))
    return poses


def generate_dataset(dist: PoseDistribution, count: int, seed: int = 0) -> list[np.ndarray]:
    """Deterministic pose set; sample k uses seed sequence (seed, k)."""
    ss = np.random.SeedSequence(seed)
    child_seeds = ss.generate_state(count)
    return [sample_pose(dist, int(s)) for s in child_seeds]
