"""Ordinal relations and the ranking / keypoint / combined losses with analytic gradients.

The pairwise ranking loss on predicted depths z_i, z_j for a relation r:

    r = +1 (i closer):  log(1 + exp(z_i - z_j))
    r = -1 (j closer):  log(1 + exp(z_j - z_i))
    r =  0 (same):      (z_i - z_j)^2

Evaluated with the stable softplus form so large margins never overflow.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError, DimensionMismatchError, InvalidInputError

DEFAULT_TIE_THRESHOLD_MM = 100.0
DEFAULT_LAMBDA = 100.0


@dataclass(frozen=True)
class OrdinalRelation:
    """Annotated pair (i, j, r) with r in {+1, -1, 0}; +1 means i closer."""

    i: int
    j: int
    r: int

    def __post_init__(self):
        if self.i == self.j:
            raise ContractViolationError("relation needs two distinct joints")
        if self.r not in (+1, -1, 0):
            raise ContractViolationError(f"relation value must be +1, -1 or 0, got {self.r}")


class RelationSet:
    """The annotated subset of joint pairs; no duplicate unordered pairs."""

    def __init__(self, relations: list[OrdinalRelation] | None = None):
        self.relations: list[OrdinalRelation] = []
        self._pairs: set[frozenset] = set()
        for rel in relations or []:
            self.add(rel)

    def add(self, rel: OrdinalRelation):
        key = frozenset((rel.i, rel.j))
        if key in self._pairs:
            raise ContractViolationError(f"duplicate unordered pair ({rel.i}, {rel.j})")
        self._pairs.add(key)
        self.relations.append(rel)

    def __len__(self) -> int:
        return len(self.relations)

    def __iter__(self):
        return iter(self.relations)

    def to_json(self) -> dict:
        return {"pairs": [{"i": r.i, "j": r.j, "r": r.r} for r in self.relations]}

    @classmethod
    def from_json(cls, obj: dict) -> "RelationSet":
        return cls([OrdinalRelation(p["i"], p["j"], p["r"]) for p in obj["pairs"]])

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def relations_from_depths(z, threshold_mm: float = DEFAULT_TIE_THRESHOLD_MM) -> RelationSet:
    """All C(N,2) relations implied by true depths with a tie threshold.

    Pairs whose depths differ by less than ``threshold_mm`` get r = 0;
    otherwise r = +1 when z_i < z_j (i closer) and -1 otherwise.
    """
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("depth vector contains non-finite values")
    if threshold_mm < 0:
        raise ContractViolationError("tie threshold must be nonnegative")
    out = RelationSet()
    n = z.shape[0]
    for i in range(n):
        for j in range(i + 1, n):
            gap = z[i] - z[j]
            if abs(gap) < threshold_mm or gap == 0.0:
                r = 0
            else:
                r = +1 if gap < 0 else -1
            out.add(OrdinalRelation(i, j, r))
    return out


def _softplus(t: float) -> float:
    # stable: max(t, 0) + log1p(exp(-|t|))
    return max(t, 0.0) + np.log1p(np.exp(-abs(t)))


def _sigmoid(t: float) -> float:
    if t >= 0:
        return 1.0 / (1.0 + np.exp(-t))
    e = np.exp(t)
    return e / (1.0 + e)


def pair_rank_loss(z_i: float, z_j: float, r: int) -> tuple[float, float, float]:
    """Per-pair ranking loss and its exact gradients (dL/dz_i, dL/dz_j)."""
    if r not in (+1, -1, 0):
        raise ContractViolationError(f"relation value must be +1, -1 or 0, got {r}")
    diff = float(z_i) - float(z_j)
    if r == 0:
        return diff * diff, 2.0 * diff, -2.0 * diff
    # r = +1 penalizes z_i > z_j, r = -1 the reverse
    t = diff if r == +1 else -diff
    loss = _softplus(t)
    g = _sigmoid(t)
    if r == +1:
        return loss, g, -g
    return loss, -g, g


def rank_loss(z, relations, reduction: str = "sum") -> tuple[float, np.ndarray]:
    """Sum of pair_rank_loss over the annotated set; gradient wrt each depth.

    ``relations`` is any iterable of OrdinalRelation (typically a RelationSet).
    ``reduction`` is "sum" (default, the literal per-pair sum) or "mean"
    (divide by the number of relations).
    """
    if reduction not in ("sum", "mean"):
        raise ContractViolationError(f"reduction must be 'sum' or 'mean', got {reduction!r}")
    z = np.asarray(z, dtype=float)
    grad = np.zeros_like(z)
    total = 0.0
    count = 0
    n = z.shape[0]
    for rel in relations:
        if not (0 <= rel.i < n and 0 <= rel.j < n):
            raise IndexError(f"relation ({rel.i}, {rel.j}) out of range for {n} joints")
        loss, gi, gj = pair_rank_loss(z[rel.i], z[rel.j], rel.r)
        total += loss
        grad[rel.i] += gi
        grad[rel.j] += gj
        count += 1
    if reduction == "mean" and count:
        total /= count
        grad /= count
    return total, grad


def keypoint_loss(pred2d, gt2d, visibility=None) -> tuple[float, np.ndarray]:
    """Sum of squared 2D distances over visible joints; grad = 2(pred - gt)."""
    pred2d = np.asarray(pred2d, dtype=float)
    gt2d = np.asarray(gt2d, dtype=float)
    if pred2d.shape != gt2d.shape or pred2d.ndim != 2 or pred2d.shape[1] != 2:
        raise DimensionMismatchError(f"2D poses must share shape (N, 2), got {pred2d.shape} vs {gt2d.shape}")
    if visibility is None:
        vis = np.ones(pred2d.shape[0], dtype=bool)
    else:
        vis = np.asarray(visibility, dtype=bool)
        if vis.shape != (pred2d.shape[0],):
            raise DimensionMismatchError("visibility must have one flag per joint")
    diff = (pred2d - gt2d) * vis[:, None]
    loss = float(np.sum(diff**2))
    return loss, 2.0 * diff


def combined_weak_loss(
    z,
    relations: RelationSet,
    pred2d,
    gt2d,
    visibility=None,
    lam: float = DEFAULT_LAMBDA,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Weakly supervised objective: rank_loss + lam * keypoint_loss.

    Returns (loss, grad wrt depths, grad wrt 2D predictions).
    """
    l_rank, g_z = rank_loss(z, relations)
    l_keyp, g_2d = keypoint_loss(pred2d, gt2d, visibility)
    return l_rank + lam * l_keyp, g_z, lam * g_2d
