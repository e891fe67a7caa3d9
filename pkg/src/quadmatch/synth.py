"""Synthetic graph-pair generation for the desk-scale benchmark harness.

Pairs are permuted noisy copies: graph A samples keypoints uniformly in the
unit frame with features drawn around class prototypes; graph B permutes the
nodes, optionally rotates the point set, jitters the coordinates, and
re-noises the features from the same prototypes. Rotating graph B leaves the
Delaunay topology intact (triangulation is similarity-invariant) while
scrambling the normalized coordinates, so matching must come from structure
rather than from the coordinate prior. Outlier nodes (no counterpart in the
other graph) can be appended for robustness sweeps; their coordinates are
Gaussian in the pre-normalization frame so they break structure the way
far-off detections would.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .graphs import GraphPair, KeypointSet, make_pair

OUTLIER_SIGMA = 10.0
FEATURE_SCALE = 1.6  # prototype norm; keeps affinity exponents unsaturated


@dataclass(frozen=True)
class SynthConfig:
    n_inliers: int = 8
    d: int = 16
    classes: int = 8         # distinct feature prototypes; < n_inliers duplicates them
    feature_noise: float = 0.15
    coord_jitter: float = 0.005
    n_outliers: int = 0
    outlier_sigma: float = OUTLIER_SIGMA
    seed: int = 0
    rotate_b: bool = False   # apply a random rigid rotation to graph B's points
    feature_scale: float = FEATURE_SCALE

    def __post_init__(self):
        if self.n_inliers < 3:
            raise InvalidInputError("n_inliers must be >= 3")
        if self.d < 1 or self.classes < 1:
            raise InvalidInputError("d and classes must be >= 1")
        if min(self.feature_noise, self.coord_jitter, self.outlier_sigma) < 0:
            raise InvalidInputError("noise scales must be non-negative")
        if self.n_outliers < 0:
            raise InvalidInputError("n_outliers must be >= 0")
        if self.feature_scale <= 0:
            raise InvalidInputError("feature_scale must be positive")


def gen_synthetic_pair(cfg: SynthConfig, rng: np.random.Generator | None = None) -> GraphPair:
    """One ground-truthed pair; all randomness comes from ``rng`` (or cfg.seed)."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    n, d = cfg.n_inliers, cfg.d
    class_of = np.arange(n) % cfg.classes

    coords_a = rng.uniform(size=(n, 2))
    prototypes = rng.uniform(0.0, 1.0, size=(cfg.classes, d)) * (cfg.feature_scale / np.sqrt(d))
    features_a = prototypes[class_of] + cfg.feature_noise * rng.normal(size=(n, d))

    perm = rng.permutation(n)
    source = coords_a
    if cfg.rotate_b:
        theta = rng.uniform(0.0, 2.0 * np.pi)
        rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        source = coords_a @ rot.T
    coords_b = np.empty_like(coords_a)
    coords_b[perm] = source + cfg.coord_jitter * rng.normal(size=(n, 2))
    features_b = np.empty_like(features_a)
    features_b[perm] = prototypes[class_of] + cfg.feature_noise * rng.normal(size=(n, d))

    pair = make_pair(
        KeypointSet(coords_a, features_a, labels=tuple(int(c) for c in class_of)),
        KeypointSet(coords_b, features_b,
                    labels=tuple(int(c) for c in class_of[np.argsort(perm)])),
        perm)
    if cfg.n_outliers > 0:
        pair = inject_outliers(pair, cfg.n_outliers, cfg.outlier_sigma, rng=rng)
    return pair


def inject_outliers(pair: GraphPair, k: int, outlier_sigma: float = OUTLIER_SIGMA, *,
                    seed: int | None = None, rng: np.random.Generator | None = None) -> GraphPair:
    """Append k unmatched nodes to each graph and recompute the topology.

    Outlier coordinates are N(0, sigma^2) in raw coordinate units, features
    standard normal; inlier ground truth is untouched (new rows get -1).
    """
    if k < 0:
        raise InvalidInputError("outlier count must be >= 0")
    if k == 0:
        return pair
    if rng is None:
        rng = np.random.default_rng(seed)
    d = pair.a.keypoints.features.shape[1]

    def extend(kp: KeypointSet) -> KeypointSet:
        coords = np.vstack([kp.coords, rng.normal(0.0, outlier_sigma, size=(k, 2))])
        features = np.vstack([kp.features, rng.normal(size=(k, d))])
        return KeypointSet(coords, features)

    new_a = extend(pair.a.keypoints)
    new_b = extend(pair.b.keypoints)
    gt = np.concatenate([pair.gt, np.full(k, -1, dtype=int)])
    return make_pair(new_a, new_b, gt)


def gen_dataset(cfg: SynthConfig, n_pairs: int) -> list[GraphPair]:
    """Independent pairs with per-pair rngs spawned from the single seed."""
    if n_pairs < 1:
        raise InvalidInputError("n_pairs must be >= 1")
    children = np.random.SeedSequence(cfg.seed).spawn(n_pairs)
    return [gen_synthetic_pair(cfg, rng=np.random.default_rng(child)) for child in children]


def easy_config(seed: int = 0, **overrides) -> SynthConfig:
    """Near-copy pairs with distinct prototypes: solvable, mild feature noise."""
    base = dict(n_inliers=8, d=16, classes=8, feature_noise=0.15,
                coord_jitter=0.005, seed=seed)
    base.update(overrides)
    return SynthConfig(**base)


def ambiguous_config(seed: int = 0, **overrides) -> SynthConfig:
    """Duplicated prototypes and a rotated partner graph: features and
    coordinates cannot separate group members, Delaunay structure can."""
    base = dict(n_inliers=10, d=16, classes=2, feature_noise=0.05,
                coord_jitter=0.0, rotate_b=True, seed=seed)
    base.update(overrides)
    return SynthConfig(**base)
