"""Experiment harness: ordinal vs. full supervision on synthetic skeletons,
mixed-supervision training, and end-to-end integration with the reconstruction
component.

Fully-ordinal training cannot recover metric depth (the ranking loss only sees
depth differences), so the ordinal-vs-full comparison is reported as held-out
ordinal accuracy and Spearman rank correlation; mm errors (MPJPE, Procrustes)
are reported only for tasks with a metric supervision signal.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import spearmanr

from .errors import ContractViolationError, DataError, TrainingDivergenceError
from .geometry import mpjpe, procrustes_align, project
from .network import (
    LayerSpec,
    NetworkParams,
    OptimizerState,
    backward,
    forward,
    init_params,
    rmsprop_step,
)
from .reconstruction import (
    ReconInput,
    denormalize_keypoints,
    normalize_keypoints,
    reconstruct,
    root_relative,
)
from .supervision import (
    DEFAULT_LAMBDA,
    DEFAULT_TIE_THRESHOLD_MM,
    RelationSet,
    combined_weak_loss,
    relations_from_depths,
)
from .synth import default_camera, default_distribution, generate_dataset

TASKS = (
    "depth-ordinal",
    "depth-regression",
    "coords-weak",
    "coords-full",
    "volume-weak",
    "volume-full",
    "mixed",
)


@dataclass
class ExperimentConfig:
    task: str = "depth-ordinal"
    n_poses: int = 2000
    holdout_frac: float = 0.2
    iterations: int = 4000
    batch_size: int = 64
    learning_rate: float = 2.5e-4
    hidden: int = 128
    tie_threshold_mm: float = DEFAULT_TIE_THRESHOLD_MM
    lam: float = DEFAULT_LAMBDA
    full_fraction: float = 0.3
    volume_grid: tuple[int, int, int] = (6, 6, 6)
    seed: int = 0
    log_every: int = 100

    def __post_init__(self):
        if self.task not in TASKS:
            raise ContractViolationError(f"unknown task {self.task!r}")
        if self.iterations <= 0 or self.n_poses < 2 or self.batch_size <= 0:
            raise ContractViolationError("budgets and dataset sizes must be positive")


@dataclass
class EvalReport:
    task: str
    seed: int
    ordinal_accuracy: float
    spearman_rho: float
    mpjpe: float
    procrustes_error: float
    train_losses: list[float] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)
    params: object = field(default=None, repr=False)  # trained net, not serialized

    def to_json(self) -> dict:
        return {
            "task": self.task,
            "seed": self.seed,
            "ordinal_accuracy": self.ordinal_accuracy,
            "spearman_rho": self.spearman_rho,
            "mpjpe_mm": self.mpjpe,
            "procrustes_error_mm": self.procrustes_error,
            "train_losses": self.train_losses,
            "provenance": self.provenance,
        }


# ---------------------------------------------------------------------------
# vectorized batch losses (checked against the per-sample reference routines)

def pair_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """All C(n,2) (i, j) index pairs with i < j."""
    i, j = np.triu_indices(n, k=1)
    return i, j


def relation_matrix(depths: np.ndarray, threshold: float) -> np.ndarray:
    """Per-sample relation values (+1/-1/0) for all pairs; shape (B, P)."""
    idx_i, idx_j = pair_indices(depths.shape[1])
    gap = depths[:, idx_i] - depths[:, idx_j]
    r = np.where(gap < 0, 1, -1)
    r[np.abs(gap) < threshold] = 0
    r[gap == 0] = 0
    return r


def batch_rank_loss(z: np.ndarray, r: np.ndarray) -> tuple[float, np.ndarray]:
    """Vectorized ranking loss over all C(N,2) pairs for a batch.

    Matches summing supervision.pair_rank_loss over the same relations
    (verified by test); r = 0 pairs contribute the squared difference.
    """
    idx_i, idx_j = pair_indices(z.shape[1])
    diff = z[:, idx_i] - z[:, idx_j]
    strict = r != 0
    t = np.where(strict, r * diff, 0.0)
    softplus = np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(t)))
    sq = diff**2
    loss_terms = np.where(strict, softplus, sq)
    loss = float(np.sum(loss_terms))

    # stable sigmoid(t): exp(-|t|) never overflows
    e = np.exp(-np.abs(t))
    sig = np.where(t >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    d_diff = np.where(strict, r * sig, 2.0 * diff)

    grad = np.zeros_like(z)
    np.add.at(grad, (slice(None), idx_i), d_diff)
    np.subtract.at(grad, (slice(None), idx_j), d_diff)
    return loss, grad


# ---------------------------------------------------------------------------
# samples and dispatch

@dataclass
class TrainSample:
    """One pose prepared for training: normalized inputs plus both annotation
    forms (ordinal relations and, when available, the full normalized target)."""

    input_vec: np.ndarray
    gt2d_norm: np.ndarray
    relations: RelationSet | None
    full_target: np.ndarray | None  # (N, 3) normalized coords
    center: np.ndarray
    diag: float
    gt_pose: np.ndarray


def mixed_batch_loss(output_vec: np.ndarray, sample: TrainSample, mode: str,
                     lam: float = DEFAULT_LAMBDA) -> tuple[float, np.ndarray]:
    """Dispatch one sample to full or weak supervision.

    ``output_vec`` is the coords-net output [2D-norm (2N) | depth-norm (N)].
    Gradient shape is identical in both modes.
    """
    n = sample.gt2d_norm.shape[0]
    pred2d = output_vec[: 2 * n].reshape(n, 2)
    pred_z = output_vec[2 * n :]
    if mode == "full":
        if sample.full_target is None:
            raise DataError("sample carries no full 3D target")
        from .reconstruction import l3d_loss

        pred = np.column_stack([pred2d, pred_z])
        loss, g = l3d_loss(pred, sample.full_target)
        return loss, np.concatenate([g[:, :2].ravel(), g[:, 2]])
    if mode == "weak":
        if sample.relations is None:
            raise DataError("sample carries no ordinal relations")
        loss, g_z, g_2d = combined_weak_loss(pred_z, sample.relations, pred2d, sample.gt2d_norm, lam=lam)
        return loss, np.concatenate([g_2d.ravel(), g_z])
    raise ContractViolationError(f"unknown mode {mode!r}")


def _depth_specs(n: int, hidden: int) -> list[LayerSpec]:
    return [
        LayerSpec("linear", 2 * n, hidden),
        LayerSpec("relu", hidden, hidden),
        LayerSpec("residual", hidden, hidden, hidden_dim=hidden),
        LayerSpec("residual", hidden, hidden, hidden_dim=hidden),
        LayerSpec("linear", hidden, n),
    ]


def _coords_specs(n: int, hidden: int) -> list[LayerSpec]:
    specs = _depth_specs(n, hidden)
    specs[-1] = LayerSpec("linear", hidden, 3 * n)
    return specs


@dataclass
class PreparedData:
    train: list[TrainSample]
    test: list[TrainSample]
    z_std: float  # global std of root-centered depths (mm), for metric denorm
    joint_count: int


def prepare_data(cfg: ExperimentConfig) -> PreparedData:
    dist = default_distribution()
    cam = default_camera()
    poses = generate_dataset(dist, cfg.n_poses, seed=cfg.seed)
    n_test = max(1, int(round(cfg.n_poses * cfg.holdout_frac)))
    train_poses, test_poses = poses[:-n_test], poses[-n_test:]

    centered = np.concatenate([p[:, 2] - p[:, 2].mean() for p in train_poses])
    z_std = float(centered.std())

    def build(pose):
        k2d = project(pose, cam)
        k_norm, center, diag = normalize_keypoints(k2d)
        z = pose[:, 2]
        z_norm = (z - z.mean()) / z_std
        rel = relations_from_depths(z, cfg.tie_threshold_mm)
        full = np.column_stack([k_norm, z_norm])
        return TrainSample(
            input_vec=k_norm.ravel(),
            gt2d_norm=k_norm,
            relations=rel,
            full_target=full,
            center=center,
            diag=diag,
            gt_pose=pose,
        )

    return PreparedData(
        train=[build(p) for p in train_poses],
        test=[build(p) for p in test_poses],
        z_std=z_std,
        joint_count=train_poses[0].shape[0],
    )


def _train_net(cfg: ExperimentConfig, data: PreparedData, specs: list[LayerSpec],
               loss_fn) -> tuple[NetworkParams, list[float]]:
    """Generic seeded training loop; loss_fn(outputs, batch_indices) -> (loss, grad)."""
    params = init_params(specs, seed=cfg.seed)
    state = OptimizerState(learning_rate=cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed + 10)
    inputs = np.stack([s.input_vec for s in data.train])
    losses = []
    for step in range(cfg.iterations):
        idx = rng.integers(0, len(data.train), size=cfg.batch_size)
        out, cache = forward(params, inputs[idx], train=True, rng=rng)
        loss, grad = loss_fn(out, idx)
        if not np.isfinite(loss):
            raise TrainingDivergenceError("training loss diverged", step=step)
        if step % cfg.log_every == 0:
            losses.append(loss)
        grads, _ = backward(params, cache, grad)
        rmsprop_step(state, params, grads)
    return params, losses


def _eval_rank_metrics(pred_z: np.ndarray, data: PreparedData, threshold: float) -> tuple[float, float]:
    """Held-out ordinal accuracy over strict pairs plus mean Spearman rho."""
    gt_z = np.stack([s.gt_pose[:, 2] for s in data.test])
    idx_i, idx_j = pair_indices(gt_z.shape[1])
    gt_gap = gt_z[:, idx_i] - gt_z[:, idx_j]
    strict = np.abs(gt_gap) >= threshold
    pred_gap = pred_z[:, idx_i] - pred_z[:, idx_j]
    correct = np.sign(pred_gap) == np.sign(gt_gap)
    accuracy = float(correct[strict].mean()) if strict.any() else 1.0
    rhos = [spearmanr(pred_z[b], gt_z[b]).statistic for b in range(gt_z.shape[0])]
    return accuracy, float(np.mean(rhos))


def _coords_metric_errors(outputs: np.ndarray, data: PreparedData) -> tuple[float, float]:
    """Root-relative MPJPE and Procrustes error from coords-net outputs."""
    cam = default_camera()
    n = data.joint_count
    mp, pr = [], []
    for out, sample in zip(outputs, data.test):
        pred2d_norm = out[: 2 * n].reshape(n, 2)
        pred_z = out[2 * n :] * data.z_std
        k_px = denormalize_keypoints(pred2d_norm, sample.center, sample.diag)
        xy = (k_px - np.asarray(cam.principal_offset)) / cam.scale
        pred = np.column_stack([xy, pred_z])
        gt = root_relative(sample.gt_pose)
        pred = root_relative(pred)
        mp.append(mpjpe(pred, gt))
        pr.append(procrustes_align(pred, gt)[1])
    return float(np.mean(mp)), float(np.mean(pr))


def run_experiment(cfg: ExperimentConfig) -> EvalReport:
    """Build data, train for the configured task, evaluate on the held-out split."""
    data = prepare_data(cfg)
    n = data.joint_count
    test_inputs = np.stack([s.input_vec for s in data.test])
    provenance = {"config": {**vars(cfg), "volume_grid": list(cfg.volume_grid)}}

    if cfg.task in ("depth-ordinal", "depth-regression"):
        rel_train = relation_matrix(
            np.stack([s.gt_pose[:, 2] for s in data.train]), cfg.tie_threshold_mm
        )
        z_targets = np.stack([s.full_target[:, 2] for s in data.train])

        if cfg.task == "depth-ordinal":
            def loss_fn(out, idx):
                loss, grad = batch_rank_loss(out, rel_train[idx])
                return loss / len(idx), grad / len(idx)
        else:
            def loss_fn(out, idx):
                diff = out - z_targets[idx]
                return float(np.sum(diff**2)) / len(idx), 2.0 * diff / len(idx)

        params, losses = _train_net(cfg, data, _depth_specs(n, cfg.hidden), loss_fn)
        return evaluate_params(cfg, params, data, losses, provenance)

    if cfg.task in ("coords-weak", "coords-full", "mixed"):
        rel_train = relation_matrix(
            np.stack([s.gt_pose[:, 2] for s in data.train]), cfg.tie_threshold_mm
        )
        gt2d = np.stack([s.gt2d_norm for s in data.train])
        full_tgt = np.stack([s.full_target for s in data.train])
        rng_assign = np.random.default_rng(cfg.seed + 20)
        if cfg.task == "coords-full":
            is_full = np.ones(len(data.train), dtype=bool)
        elif cfg.task == "coords-weak":
            is_full = np.zeros(len(data.train), dtype=bool)
        else:
            is_full = rng_assign.random(len(data.train)) < cfg.full_fraction

        def loss_fn(out, idx):
            pred2d = out[:, : 2 * n].reshape(-1, n, 2)
            pred_z = out[:, 2 * n :]
            fm = is_full[idx]
            grad = np.zeros_like(out)
            total = 0.0
            # full samples: plain L2 on the stacked normalized coords
            if fm.any():
                diff2d = pred2d[fm] - full_tgt[idx[fm]][:, :, :2]
                diffz = pred_z[fm] - full_tgt[idx[fm]][:, :, 2]
                total += float(np.sum(diff2d**2) + np.sum(diffz**2))
                grad[fm, : 2 * n] = 2.0 * diff2d.reshape(fm.sum(), -1)
                grad[fm, 2 * n :] = 2.0 * diffz
            # weak samples: rank loss on depths + lam * keypoint loss
            wm = ~fm
            if wm.any():
                l_rank, g_z = batch_rank_loss(pred_z[wm], rel_train[idx[wm]])
                diff2d = pred2d[wm] - gt2d[idx[wm]]
                total += l_rank + cfg.lam * float(np.sum(diff2d**2))
                grad[wm, : 2 * n] = 2.0 * cfg.lam * diff2d.reshape(wm.sum(), -1)
                grad[wm, 2 * n :] = g_z
            return total / len(idx), grad / len(idx)

        params, losses = _train_net(cfg, data, _coords_specs(n, cfg.hidden), loss_fn)
        return evaluate_params(cfg, params, data, losses, provenance)

    # volume tasks (toy scale): net predicts per-joint score grids
    return _run_volume_experiment(cfg, data, provenance)


def evaluate_params(cfg: ExperimentConfig, params: NetworkParams, data: PreparedData | None = None,
                    losses: list[float] | None = None, provenance: dict | None = None) -> EvalReport:
    """Evaluate trained parameters on the held-out split of cfg's dataset.

    Deterministic: two calls with the same (cfg, checkpoint) agree bitwise.
    """
    data = data or prepare_data(cfg)
    n = data.joint_count
    test_inputs = np.stack([s.input_vec for s in data.test])
    provenance = provenance or {"config": {**vars(cfg), "volume_grid": list(cfg.volume_grid)}}
    outputs, _ = forward(params, test_inputs)

    if cfg.task in ("depth-ordinal", "depth-regression"):
        acc, rho = _eval_rank_metrics(outputs, data, cfg.tie_threshold_mm)
        report = EvalReport(cfg.task, cfg.seed, acc, rho, float("nan"), float("nan"),
                            losses or [], provenance)
        report.provenance.setdefault(
            "note", "ordinal depth outputs are shift/scale free; mm errors reported only for metric tasks"
        )
    elif cfg.task in ("coords-weak", "coords-full", "mixed"):
        acc, rho = _eval_rank_metrics(outputs[:, 2 * n :], data, cfg.tie_threshold_mm)
        mp, pr = _coords_metric_errors(outputs, data)
        report = EvalReport(cfg.task, cfg.seed, acc, rho, mp, pr, losses or [], provenance)
    else:
        from .volumetric import marginal_depth, volume_softmax

        w, h, d = cfg.volume_grid
        axis_coords = _volume_axis_coords(cfg, data)
        pred_z = np.empty((len(data.test), n))
        for b in range(len(data.test)):
            p = volume_softmax(outputs[b].reshape(n, w, h, d))
            pred_z[b] = marginal_depth(p) @ axis_coords
        acc, rho = _eval_rank_metrics(pred_z, data, cfg.tie_threshold_mm)
        report = EvalReport(cfg.task, cfg.seed, acc, rho, float("nan"), float("nan"),
                            losses or [], provenance)
    report.params = params
    return report


def _volume_axis_coords(cfg: ExperimentConfig, data: PreparedData) -> np.ndarray:
    z_rel = np.concatenate([s.gt_pose[:, 2] - s.gt_pose[:, 2].mean() for s in data.train])
    lo, hi = z_rel.min(), z_rel.max()
    pad = 0.1 * (hi - lo)
    return np.linspace(lo - pad, hi + pad, cfg.volume_grid[2])


def _run_volume_experiment(cfg: ExperimentConfig, data: PreparedData, provenance: dict) -> EvalReport:
    from .volumetric import VolumeScores, gaussian_heatmap_target, volumetric_weak_loss

    n = data.joint_count
    w, h, d = cfg.volume_grid
    # depth bins span the root-centered depth range of the training data +/-10%
    axis_coords = _volume_axis_coords(cfg, data)
    lo, hi = axis_coords[0], axis_coords[-1]
    pad = 0.0

    def to_bins(k_norm):
        # normalized 2D (roughly +/-0.5) -> grid bin coordinates
        return (np.clip(k_norm + 0.6, 0.0, 1.2) / 1.2) * (np.array([w, h]) - 1)

    targets_train = []
    for s in data.train:
        bins = to_bins(s.gt2d_norm)
        targets_train.append(np.stack([gaussian_heatmap_target(w, h, b, 1.0) for b in bins]))
    targets_train = np.stack(targets_train)
    rel_train = relation_matrix(np.stack([s.gt_pose[:, 2] for s in data.train]), cfg.tie_threshold_mm)
    z_targets = np.stack([s.gt_pose[:, 2] - s.gt_pose[:, 2].mean() for s in data.train])

    specs = _depth_specs(n, cfg.hidden)
    specs[-1] = LayerSpec("linear", cfg.hidden, n * w * h * d)

    if cfg.task == "volume-weak":
        idx_i, idx_j = pair_indices(n)
        rel_sets = [
            RelationSet.from_json(
                {"pairs": [{"i": int(i), "j": int(j), "r": int(r)}
                           for i, j, r in zip(idx_i, idx_j, row)]}
            )
            for row in rel_train
        ]

        def loss_fn(out, idx):
            total = 0.0
            grad = np.zeros_like(out)
            for b, k in enumerate(idx):
                scores = VolumeScores(out[b].reshape(n, w, h, d), axis_coords)
                loss, g = volumetric_weak_loss(scores, rel_sets[k], targets_train[k], lam=cfg.lam)
                total += loss
                grad[b] = g.ravel()
            return total / len(idx), grad / len(idx)
    else:  # volume-full: L2 on scores against a 3D Gaussian target
        zi = np.clip(
            np.round((z_targets - (lo - pad)) / (hi - lo + 2 * pad) * (d - 1)).astype(int), 0, d - 1
        )
        full_targets = np.zeros((len(data.train), n, w, h, d))
        zz = np.arange(d)
        for k, s in enumerate(data.train):
            for jn in range(n):
                depth_prof = np.exp(-((zz - zi[k, jn]) ** 2) / 2.0)
                full_targets[k, jn] = targets_train[k, jn][:, :, None] * depth_prof[None, None, :]

        def loss_fn(out, idx):
            diff = out - full_targets[idx].reshape(len(idx), -1)
            return float(np.sum(diff**2)) / len(idx), 2.0 * diff / len(idx)

    params, losses = _train_net(cfg, data, specs, loss_fn)
    return evaluate_params(cfg, params, data, losses, provenance)


def end_to_end_eval(coords_params: NetworkParams, recon_params: NetworkParams,
                    data: PreparedData, seed: int = 0) -> EvalReport:
    """Pipe coords-net outputs through the reconstruction net on the held-out
    split; report Procrustes error with and without the reconstruction stage."""
    cam = default_camera()
    n = data.joint_count
    test_inputs = np.stack([s.input_vec for s in data.test])
    outputs, _ = forward(coords_params, test_inputs)

    pr_with, pr_without = [], []
    for out, sample in zip(outputs, data.test):
        pred2d_norm = out[: 2 * n].reshape(n, 2)
        pred_z = out[2 * n :]
        k_px = denormalize_keypoints(pred2d_norm, sample.center, sample.diag)
        gt = root_relative(sample.gt_pose)

        # without reconstruction: back-project 2D, use (rescaled) depths directly
        z_std = float(pred_z.std())
        z_mm = (pred_z - pred_z.mean()) / (z_std if z_std > 0 else 1.0) * data.z_std
        xy = (k_px - np.asarray(cam.principal_offset)) / cam.scale
        direct = root_relative(np.column_stack([xy, z_mm]))
        pr_without.append(procrustes_align(direct, gt)[1])

        recon = reconstruct(recon_params, ReconInput(k_px, pred_z))
        pr_with.append(procrustes_align(recon, gt)[1])

    report = EvalReport(
        task="end-to-end",
        seed=seed,
        ordinal_accuracy=float("nan"),
        spearman_rho=float("nan"),
        mpjpe=float("nan"),
        procrustes_error=float(np.mean(pr_with)),
        provenance={"procrustes_without_recon_mm": float(np.mean(pr_without))},
    )
    return report


def save_report(path, report: EvalReport):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report.to_json(), f, indent=2, sort_keys=True)
        f.write("\n")
