"""Central finite-difference verification of every analytic gradient in the
toolkit. Used by the `ordpose gradcheck` command and the test suite.
"""
from __future__ import annotations

import zlib

import numpy as np

from .network import LayerSpec, backward, flatten_params, forward, init_params, unflatten_params
from .reconstruction import l3d_loss
from .supervision import (
    OrdinalRelation,
    RelationSet,
    combined_weak_loss,
    keypoint_loss,
    pair_rank_loss,
    rank_loss,
)
from .volumetric import (
    VolumeScores,
    gaussian_heatmap_target,
    heatmap_loss,
    marginal_2d,
    volume_softmax,
    volumetric_weak_loss,
)

DEFAULT_STEP = 1e-5


def central_diff(f, x: np.ndarray, step: float = DEFAULT_STEP) -> np.ndarray:
    """Numeric gradient of scalar f at flat vector x by central differences."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for k in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[k] += step
        xm[k] -= step
        grad[k] = (f(xp) - f(xm)) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Worst per-component error relative to the gradient's overall magnitude."""
    analytic = np.asarray(analytic, dtype=float).ravel()
    numeric = np.asarray(numeric, dtype=float).ravel()
    scale = max(1.0, float(np.abs(numeric).max(initial=0.0)), float(np.abs(analytic).max(initial=0.0)))
    return float(np.abs(analytic - numeric).max(initial=0.0)) / scale


def _random_relations(rng, n: int, count: int | None = None) -> RelationSet:
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    rng.shuffle(pairs)
    if count is not None:
        pairs = pairs[:count]
    rels = RelationSet()
    for i, j in pairs:
        rels.add(OrdinalRelation(i, j, int(rng.choice([-1, 0, 1]))))
    return rels


def check_pair_rank(rng) -> float:
    z = rng.normal(0, 3, size=2)
    r = int(rng.choice([-1, 0, 1]))
    _, gi, gj = pair_rank_loss(z[0], z[1], r)
    num = central_diff(lambda v: pair_rank_loss(v[0], v[1], r)[0], z)
    return relative_error(np.array([gi, gj]), num)


def check_rank(rng) -> float:
    n = int(rng.integers(3, 9))
    z = rng.normal(0, 2, size=n)
    rels = _random_relations(rng, n, count=int(rng.integers(1, n * (n - 1) // 2 + 1)))
    _, grad = rank_loss(z, rels)
    num = central_diff(lambda v: rank_loss(v, rels)[0], z)
    return relative_error(grad, num)


def check_keypoint(rng) -> float:
    n = int(rng.integers(2, 8))
    pred = rng.normal(0, 2, size=(n, 2))
    gt = rng.normal(0, 2, size=(n, 2))
    vis = rng.random(n) > 0.2
    _, grad = keypoint_loss(pred, gt, vis)
    num = central_diff(lambda v: keypoint_loss(v.reshape(n, 2), gt, vis)[0], pred.ravel())
    return relative_error(grad.ravel(), num)


def check_combined(rng) -> float:
    n = int(rng.integers(3, 7))
    z = rng.normal(0, 2, size=n)
    pred = rng.normal(0, 1, size=(n, 2))
    gt = rng.normal(0, 1, size=(n, 2))
    rels = _random_relations(rng, n)
    _, g_z, g_2d = combined_weak_loss(z, rels, pred, gt)
    x = np.concatenate([z, pred.ravel()])

    def f(v):
        return combined_weak_loss(v[:n], rels, v[n:].reshape(n, 2), gt)[0]

    num = central_diff(f, x)
    return relative_error(np.concatenate([g_z, g_2d.ravel()]), num)


def check_heatmap(rng) -> float:
    n, w, h = 2, 4, 4
    maps = rng.random((n, w, h))
    targets = np.stack(
        [gaussian_heatmap_target(w, h, rng.uniform(0, w - 1, size=2)) for _ in range(n)]
    )
    _, grad = heatmap_loss(maps, targets)
    num = central_diff(lambda v: heatmap_loss(v.reshape(n, w, h), targets)[0], maps.ravel())
    return relative_error(grad.ravel(), num)


def check_volumetric_chain(rng) -> float:
    n = int(rng.integers(2, 4))
    w, h, d = 3, 3, 4
    scores = rng.normal(0, 1, size=(n, w, h, d))
    axis = np.sort(rng.normal(0, 2, size=d))
    while np.any(np.diff(axis) <= 0):
        axis = np.sort(rng.normal(0, 2, size=d))
    targets = rng.random((n, w, h))
    rels = _random_relations(rng, n)

    def f(v):
        vs = VolumeScores(v.reshape(n, w, h, d), axis)
        return volumetric_weak_loss(vs, rels, targets, lam=2.0)[0]

    _, grad = volumetric_weak_loss(VolumeScores(scores, axis), rels, targets, lam=2.0)
    num = central_diff(f, scores.ravel())
    return relative_error(grad.ravel(), num)


def check_l3d(rng) -> float:
    n = int(rng.integers(2, 8))
    pred = rng.normal(0, 2, size=(n, 3))
    gt = rng.normal(0, 2, size=(n, 3))
    _, grad = l3d_loss(pred, gt)
    num = central_diff(lambda v: l3d_loss(v.reshape(n, 3), gt)[0], pred.ravel())
    return relative_error(grad.ravel(), num)


def check_network(rng) -> float:
    """Random architecture up to 3 layers, dims <= 8, against finite differences."""
    dims = [int(rng.integers(2, 8))]
    specs = []
    for _ in range(int(rng.integers(1, 4))):
        kind = rng.choice(["linear", "relu", "residual"])
        if kind == "linear":
            out = int(rng.integers(2, 8))
            specs.append(LayerSpec("linear", dims[-1], out))
            dims.append(out)
        else:
            specs.append(LayerSpec(str(kind), dims[-1], dims[-1], hidden_dim=int(rng.integers(2, 8))))
            dims.append(dims[-1])
    params = init_params(specs, seed=int(rng.integers(1_000_000)))
    # randomize biases too: zero biases can park a dead layer exactly on the
    # relu kink, where finite differences disagree with any subgradient
    flat0 = flatten_params(params.layers)
    params.layers = unflatten_params(flat0 + rng.normal(0, 0.3, size=flat0.size), params.layers)
    x = rng.normal(0, 1, size=dims[0])
    target = rng.normal(0, 1, size=dims[-1])

    out, cache = forward(params, x)
    grads, _ = backward(params, cache, 2.0 * (out - target))
    flat = flatten_params(params.layers)

    def f(v):
        params.layers = unflatten_params(v, params.layers)
        y, _ = forward(params, x)
        return float(np.sum((y - target) ** 2))

    num = central_diff(f, flat)
    params.layers = unflatten_params(flat, params.layers)
    return relative_error(flatten_params(grads), num)


SUITES = {
    "pair_rank_loss": (check_pair_rank, 1e-6),
    "rank_loss": (check_rank, 1e-6),
    "keypoint_loss": (check_keypoint, 1e-6),
    "combined_weak_loss": (check_combined, 1e-6),
    "heatmap_loss": (check_heatmap, 1e-6),
    "l3d_loss": (check_l3d, 1e-6),
    "volumetric_chain": (check_volumetric_chain, 1e-5),
    "network_backward": (check_network, 1e-6),
}

SCOPES = {
    "all": list(SUITES),
    "supervision": ["pair_rank_loss", "rank_loss", "keypoint_loss", "combined_weak_loss"],
    "volumetric": ["heatmap_loss", "volumetric_chain"],
    "network": ["network_backward"],
    "reconstruction": ["l3d_loss"],
}


def run_suites(scope: str = "all", trials: int = 100, seed: int = 0) -> dict[str, dict]:
    """Run the finite-difference suites; returns per-suite worst error + pass flag."""
    results = {}
    for name in SCOPES[scope]:
        check, tol = SUITES[name]
        rng = np.random.default_rng([seed, zlib.crc32(name.encode())])
        worst = max(check(rng) for _ in range(trials))
        results[name] = {"worst_relative_error": worst, "tolerance": tol, "passed": worst <= tol}
    return results
