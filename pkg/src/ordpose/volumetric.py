"""Volumetric output representation: per-joint score grids, softmax probability
volumes, 2D/depth marginals by sum-pooling, soft expected depth, and the
decomposed weak loss L = L_rank + lambda * L_heat with gradients back to the
raw scores.

Grids are indexed (x, y, z) = (W, H, D).
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError, DimensionMismatchError, InvalidInputError
from .supervision import DEFAULT_LAMBDA, RelationSet, rank_loss


@dataclass
class VolumeScores:
    """Raw per-joint score grids, shape (N, W, H, D), plus depth-bin centers."""

    grid: np.ndarray
    axis_coords: np.ndarray

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.axis_coords = np.asarray(self.axis_coords, dtype=float)
        if self.grid.ndim != 4:
            raise DimensionMismatchError(f"expected (N, W, H, D) grid, got {self.grid.shape}")
        if not np.all(np.isfinite(self.grid)):
            raise InvalidInputError("scores contain non-finite values")
        if self.axis_coords.shape != (self.grid.shape[3],):
            raise DimensionMismatchError("axis_coords must have one entry per depth bin")
        if not np.all(np.diff(self.axis_coords) > 0):
            raise InvalidInputError("axis_coords must be strictly increasing")

    @property
    def joint_count(self) -> int:
        return self.grid.shape[0]


def volume_softmax(scores: np.ndarray) -> np.ndarray:
    """Softmax over each joint's full W*H*D grid; rows sum to 1."""
    scores = np.asarray(scores, dtype=float)
    if not np.all(np.isfinite(scores)):
        raise InvalidInputError("scores contain non-finite values")
    flat = scores.reshape(scores.shape[0], -1)
    flat = flat - flat.max(axis=1, keepdims=True)
    e = np.exp(flat)
    p = e / e.sum(axis=1, keepdims=True)
    return p.reshape(scores.shape)


def marginal_2d(p: np.ndarray) -> np.ndarray:
    """Sum-pool over depth slices: p(x, y | n)."""
    return np.asarray(p, dtype=float).sum(axis=-1)


def marginal_depth(p: np.ndarray) -> np.ndarray:
    """Sum-pool over all pixels of each slice: p(z | n)."""
    p = np.asarray(p, dtype=float)
    return p.sum(axis=(-3, -2))


def soft_depth(p_z, axis_coords) -> float:
    """Mean of the soft depth distribution: z = sum_z z * p(z)."""
    p_z = np.asarray(p_z, dtype=float)
    axis_coords = np.asarray(axis_coords, dtype=float)
    if p_z.shape != axis_coords.shape:
        raise DimensionMismatchError("depth distribution and axis_coords disagree")
    if np.any(p_z < 0) or abs(p_z.sum() - 1.0) > 1e-6:
        raise ContractViolationError("p_z must be a probability distribution (within 1e-6)")
    return float(np.dot(p_z, axis_coords))


def gaussian_heatmap_target(w: int, h: int, center_xy, sigma_px: float = 1.0) -> np.ndarray:
    """Peak-1 Gaussian heatmap at a ground-truth pixel (grid-bin units)."""
    if sigma_px <= 0:
        raise ContractViolationError("sigma must be positive")
    cx, cy = float(center_xy[0]), float(center_xy[1])
    xs = np.arange(w)[:, None]
    ys = np.arange(h)[None, :]
    return np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2.0 * sigma_px**2))


def heatmap_loss(pred_maps: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """L2 between predicted 2D marginals and target heatmaps.

    Returns the summed squared error and its gradient with respect to the
    predicted maps; composition back to raw scores happens in
    :func:`volumetric_weak_loss`.
    """
    pred_maps = np.asarray(pred_maps, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if pred_maps.shape != targets.shape:
        raise DimensionMismatchError(f"heatmap shapes disagree: {pred_maps.shape} vs {targets.shape}")
    diff = pred_maps - targets
    return float(np.sum(diff**2)), 2.0 * diff


def _softmax_backward(p: np.ndarray, grad_p: np.ndarray) -> np.ndarray:
    """Jacobian-vector product of a full-grid softmax, per joint."""
    n = p.shape[0]
    pf = p.reshape(n, -1)
    gf = grad_p.reshape(n, -1)
    inner = np.sum(pf * gf, axis=1, keepdims=True)
    return (pf * (gf - inner)).reshape(p.shape)


def volumetric_weak_loss(
    scores: VolumeScores,
    relations: RelationSet,
    targets: np.ndarray,
    lam: float = DEFAULT_LAMBDA,
) -> tuple[float, np.ndarray]:
    """Decomposed volumetric objective L = L_rank + lam * L_heat.

    The rank term acts on the soft depth of each joint's depth marginal; the
    heat term on the 2D marginals. Returns the loss and its full gradient with
    respect to the raw scores (N, W, H, D).
    """
    p = volume_softmax(scores.grid)
    maps = marginal_2d(p)
    p_z = marginal_depth(p)
    z = p_z @ scores.axis_coords

    l_rank, g_z = rank_loss(z, relations)
    l_heat, g_maps = heatmap_loss(maps, np.asarray(targets, dtype=float))
    loss = l_rank + lam * l_heat

    # chain rule into the probability volume:
    #   d/dp[x,y,z] of heat term  = g_maps[x,y]       (sum-pool over z)
    #   d/dp[x,y,z] of rank term  = g_z[n] * coord[z]  (soft depth is linear in p_z)
    grad_p = lam * g_maps[..., None] + (g_z[:, None] * scores.axis_coords[None, :])[:, None, None, :]
    return loss, _softmax_backward(p, grad_p)


def dump_volume(path, scores: VolumeScores):
    """Debug dump: JSON header line + flat binary float64 in x-fastest order."""
    n, w, h, d = scores.grid.shape
    header = {"W": w, "H": h, "D": d, "N": n, "axis_coords": scores.axis_coords.tolist()}
    with open(path, "wb") as f:
        f.write((json.dumps(header) + "\n").encode("utf-8"))
        # x-fastest: iterate z, then y, then x fastest
        f.write(np.ascontiguousarray(scores.grid.transpose(0, 3, 2, 1)).tobytes())


def load_volume(path) -> VolumeScores:
    with open(path, "rb") as f:
        header = json.loads(f.readline().decode("utf-8"))
        raw = np.frombuffer(f.read(), dtype=np.float64)
    n, w, h, d = header["N"], header["W"], header["H"], header["D"]
    grid = raw.reshape(n, d, h, w).transpose(0, 3, 2, 1)
    return VolumeScores(grid=grid.copy(), axis_coords=np.asarray(header["axis_coords"]))
