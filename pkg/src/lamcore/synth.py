"""Deterministic synthetic scenes: axis-aligned class regions with prototype
features plus Gaussian noise, separable enough for a linear classifier."""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError
from .tensor_core import FeatureTensor, LabelMap

_MIN_SIDE = 2  # smallest region edge, so any present class covers >= 4 pixels


def _split_regions(rng: np.random.Generator, height: int, width: int) -> list[tuple[int, int, int, int]]:
    """Recursive random axis-aligned splits into rectangles of side >= 2."""
    leaves = []
    stack = [(0, height, 0, width)]
    while stack:
        r0, r1, c0, c1 = stack.pop()
        h, w = r1 - r0, c1 - c0
        can_h = h >= 2 * _MIN_SIDE
        can_w = w >= 2 * _MIN_SIDE
        if not (can_h or can_w):
            leaves.append((r0, r1, c0, c1))
            continue
        if max(h, w) < 8 and rng.random() < 0.5:
            leaves.append((r0, r1, c0, c1))
            continue
        if can_h and (not can_w or h >= w):
            s = int(rng.integers(r0 + _MIN_SIDE, r1 - _MIN_SIDE + 1))
            stack.append((r0, s, c0, c1))
            stack.append((s, r1, c0, c1))
        else:
            s = int(rng.integers(c0 + _MIN_SIDE, c1 - _MIN_SIDE + 1))
            stack.append((r0, r1, c0, s))
            stack.append((r0, r1, s, c1))
    # stack order depends only on the rng seed, but sort for a stable layout
    leaves.sort()
    return leaves


def prototype_vectors(class_count: int, n_channels: int, noise_sigma: float) -> np.ndarray:
    """(C, N) prototype matrix: scaled standard-basis directions.

    The scale is max(1, 4*sigma/sqrt(2)) so pairwise prototype distance is at
    least 4*sigma even for large noise.
    """
    margin = max(1.0, 4.0 * noise_sigma / np.sqrt(2.0))
    protos = np.zeros((class_count, n_channels))
    protos[np.arange(class_count), np.arange(class_count)] = margin
    return protos


def generate_scene(
    rng_seed: int,
    class_count: int,
    n_channels: int,
    height: int,
    width: int,
    noise_sigma: float = 0.1,
) -> tuple[FeatureTensor, LabelMap]:
    """One (features, labels) pair with the given seed.

    The image is partitioned into random rectangles; regions are assigned
    class ids cycling through a seeded permutation, so whenever there are at
    least C regions every class is present. Features are the per-class
    prototype vector plus iid Gaussian noise. Labels never contain the ignore
    sentinel.
    """
    if class_count < 2:
        raise InvalidInputError(f"need at least 2 classes, got {class_count}")
    if n_channels < class_count:
        raise InvalidInputError(
            f"prototype construction needs n_channels >= class_count "
            f"({n_channels} < {class_count})"
        )
    if noise_sigma < 0:
        raise InvalidInputError("noise_sigma must be non-negative")
    if height < 1 or width < 1:
        raise InvalidInputError("image dims must be positive")

    rng = np.random.default_rng(rng_seed)
    leaves = _split_regions(rng, height, width)
    perm = rng.permutation(class_count)
    ids = np.zeros((height, width), dtype=np.uint16)
    for i, (r0, r1, c0, c1) in enumerate(leaves):
        ids[r0:r1, c0:c1] = perm[i % class_count]

    protos = prototype_vectors(class_count, n_channels, noise_sigma)
    feats = protos[ids.reshape(-1).astype(np.intp)].T.reshape(n_channels, height, width)
    if noise_sigma > 0:
        feats = feats + rng.normal(0.0, noise_sigma, size=feats.shape)
    return FeatureTensor(feats), LabelMap(ids)
