"""Reconstruction component: maps 2D keypoints plus ordinal-quality depths to a
coherent metric 3D pose (root-relative). Trained purely on MoCap-style 3D
poses by projecting them and feeding back a noisy version of their depths that
keeps most ordinal relations intact.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolationError, InvalidInputError, TrainingDivergenceError
from .geometry import WeakPerspectiveCamera, project
from .network import (
    DEFAULT_LEARNING_RATE,
    LayerSpec,
    NetworkParams,
    OptimizerState,
    backward,
    forward,
    init_params,
    rmsprop_step,
)

OUTPUT_SCALE_MM = 1000.0  # network regresses root-relative coords in meters


@dataclass(frozen=True)
class NoiseConfig:
    """Affine depth corruption plus Gaussian jitter.

    Offset and jitter are expressed as fractions of the pose's depth range
    (max z - min z); the scale factor is dimensionless.
    """

    global_scale_range: tuple[float, float] = (0.8, 1.2)
    global_offset_range: tuple[float, float] = (-0.2, 0.2)
    jitter_sigma_frac: float = 0.1

    def __post_init__(self):
        if self.global_scale_range[0] > self.global_scale_range[1] or self.global_scale_range[0] <= 0:
            raise ContractViolationError("scale range must be a nonempty positive interval")
        if self.global_offset_range[0] > self.global_offset_range[1]:
            raise ContractViolationError("offset range must be nonempty")
        if not (0.0 <= self.jitter_sigma_frac < 1.0):
            raise ContractViolationError("jitter_sigma_frac must be in [0, 1)")


@dataclass
class ReconInput:
    """2D keypoints + depths for the reconstruction net; flags record whether
    the values are already in normalized form."""

    keypoints: np.ndarray
    depths: np.ndarray
    normalized: bool = False


def simulate_noisy_depths(gt_depths, cfg: NoiseConfig, seed: int) -> np.ndarray:
    """z~ = a*z + b + eta, deterministic per seed.

    a ~ U(scale range); b ~ U(offset range) * depth range; eta i.i.d. Gaussian
    with sigma = jitter_sigma_frac * depth range.
    """
    z = np.asarray(gt_depths, dtype=float)
    rng = np.random.default_rng(seed)
    depth_range = float(z.max() - z.min())
    a = rng.uniform(*cfg.global_scale_range)
    b = rng.uniform(*cfg.global_offset_range) * depth_range
    eta = rng.normal(0.0, cfg.jitter_sigma_frac * depth_range, size=z.shape) if cfg.jitter_sigma_frac > 0 else 0.0
    return a * z + b + eta


def preserved_strict_fraction(gt_depths, noisy_depths) -> float:
    """Fraction of strictly ordered pairs whose order survives the noise."""
    z = np.asarray(gt_depths, dtype=float)
    zn = np.asarray(noisy_depths, dtype=float)
    n = z.shape[0]
    kept = total = 0
    for i in range(n):
        for j in range(i + 1, n):
            if z[i] == z[j]:
                continue
            total += 1
            if np.sign(zn[i] - zn[j]) == np.sign(z[i] - z[j]):
                kept += 1
    return kept / total if total else 1.0


def l3d_loss(pred, gt) -> tuple[float, np.ndarray]:
    """Sum of squared per-joint 3D distances; grad = 2(pred - gt)."""
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape:
        raise InvalidInputError(f"pose shapes disagree: {pred.shape} vs {gt.shape}")
    diff = pred - gt
    return float(np.sum(diff**2)), 2.0 * diff


def normalize_keypoints(k2d) -> tuple[np.ndarray, np.ndarray, float]:
    """Center on the mean, scale by the bounding-box diagonal.

    Returns (normalized (N,2), center, diagonal) so the map can be inverted.
    """
    k2d = np.asarray(k2d, dtype=float)
    center = k2d.mean(axis=0)
    extent = k2d.max(axis=0) - k2d.min(axis=0)
    diag = float(np.hypot(*extent))
    if diag == 0.0:
        raise InvalidInputError("keypoints are all coincident")
    return (k2d - center) / diag, center, diag


def denormalize_keypoints(norm, center, diag) -> np.ndarray:
    return np.asarray(norm, dtype=float) * diag + np.asarray(center, dtype=float)


def normalize_depths(z) -> tuple[np.ndarray, float, float]:
    """Standardize to zero mean / unit variance per sample."""
    z = np.asarray(z, dtype=float)
    mu = float(z.mean())
    sd = float(z.std())
    if sd == 0.0:
        raise InvalidInputError("depths are all identical; cannot standardize")
    return (z - mu) / sd, mu, sd


def normalize_input(inp: ReconInput) -> np.ndarray:
    """Flat network input vector [x0 y0 x1 y1 ... z0 z1 ...]."""
    if inp.normalized:
        return np.concatenate([np.asarray(inp.keypoints, dtype=float).ravel(),
                               np.asarray(inp.depths, dtype=float).ravel()])
    k_norm, _, _ = normalize_keypoints(inp.keypoints)
    z_norm, _, _ = normalize_depths(inp.depths)
    return np.concatenate([k_norm.ravel(), z_norm])


def root_relative(pose, root: int = 1) -> np.ndarray:
    pose = np.asarray(pose, dtype=float)
    return pose - pose[root]


def recon_specs(joint_count: int, hidden: int = 128, dropout: float = 0.0) -> list[LayerSpec]:
    """Input linear -> two residual blocks -> output linear (Martinez-style)."""
    return [
        LayerSpec("linear", 3 * joint_count, hidden),
        LayerSpec("relu", hidden, hidden),
        LayerSpec("residual", hidden, hidden, hidden_dim=hidden, dropout_rate=dropout),
        LayerSpec("residual", hidden, hidden, hidden_dim=hidden, dropout_rate=dropout),
        LayerSpec("linear", hidden, 3 * joint_count),
    ]


@dataclass
class ReconHyper:
    iterations: int = 20_000
    batch_size: int = 64
    learning_rate: float = DEFAULT_LEARNING_RATE
    hidden: int = 128
    dropout: float = 0.0
    seed: int = 0
    root_joint: int = 1
    log_every: int = 100


def train_reconstruction(poses, cam: WeakPerspectiveCamera, cfg: NoiseConfig,
                         hyper: ReconHyper | None = None) -> tuple[NetworkParams, list[float]]:
    """Train the reconstruction net on (projected 2D, noisy depths) -> 3D.

    Fully deterministic per hyper.seed. Returns the trained parameters and the
    logged training losses.
    """
    hyper = hyper or ReconHyper()
    poses = [np.asarray(p, dtype=float) for p in poses]
    if not poses:
        raise InvalidInputError("no training poses supplied")
    n_joints = poses[0].shape[0]

    params = init_params(recon_specs(n_joints, hyper.hidden, hyper.dropout), seed=hyper.seed)
    state = OptimizerState(learning_rate=hyper.learning_rate)
    rng = np.random.default_rng(hyper.seed + 1)
    noise_seeds = np.random.SeedSequence(hyper.seed + 2)

    keypoints = [project(p, cam) for p in poses]
    losses = []
    for step in range(hyper.iterations):
        idx = rng.integers(0, len(poses), size=hyper.batch_size)
        batch_in = np.empty((hyper.batch_size, 3 * n_joints))
        batch_tgt = np.empty((hyper.batch_size, 3 * n_joints))
        seeds = noise_seeds.spawn(1)[0].generate_state(hyper.batch_size)
        for b, (k, s) in enumerate(zip(idx, seeds)):
            pose = poses[k]
            noisy = simulate_noisy_depths(pose[:, 2], cfg, seed=int(s))
            batch_in[b] = normalize_input(ReconInput(keypoints[k], noisy))
            batch_tgt[b] = (root_relative(pose, hyper.root_joint) / OUTPUT_SCALE_MM).ravel()

        out, cache = forward(params, batch_in, train=True, rng=rng)
        diff = out - batch_tgt
        loss = float(np.sum(diff**2)) / hyper.batch_size
        if not np.isfinite(loss):
            raise TrainingDivergenceError("training loss diverged", step=step)
        if step % hyper.log_every == 0:
            losses.append(loss)
        grads, _ = backward(params, cache, 2.0 * diff / hyper.batch_size)
        rmsprop_step(state, params, grads)
    return params, losses


def reconstruct(params: NetworkParams, inp: ReconInput, root: int = 1) -> np.ndarray:
    """Forward pass; output denormalized to root-relative mm."""
    vec = normalize_input(inp)
    if vec.shape[0] != params.in_dim:
        raise ContractViolationError(f"input dim {vec.shape[0]} does not match network ({params.in_dim})")
    out, _ = forward(params, vec)
    pose = out.reshape(-1, 3) * OUTPUT_SCALE_MM
    return pose - pose[root]


def input_as_answer_baseline(keypoints2d, noisy_depths, cam: WeakPerspectiveCamera,
                             root: int = 1) -> np.ndarray:
    """Back-project 2D with the true camera scale and take noisy depths as z."""
    k = np.asarray(keypoints2d, dtype=float)
    xy = (k - np.asarray(cam.principal_offset)) / cam.scale
    pose = np.column_stack([xy, np.asarray(noisy_depths, dtype=float)])
    return root_relative(pose, root)
