"""Dense tensor containers and the softmax / cross-entropy math used everywhere else.

Feature data lives in channel-major ``(C, H, W)`` float64 arrays; label maps are
``(H, W)`` uint16 arrays where ``IGNORE_ID`` marks pixels excluded from losses,
gradients, and metrics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InvalidInputError, ShapeMismatchError

# Label id excluded from loss, gradient, and metrics.
IGNORE_ID = 0xFFFF


@dataclass(frozen=True, eq=False)
class FeatureTensor:
    """Immutable C x H x W real-valued image, float64, channel-major.

    The constructor copies its input; every public operation returns tensors
    whose values are finite.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, order="C", copy=True)
        if arr.ndim != 3:
            raise ShapeMismatchError(
                f"feature tensor must be (channels, height, width), got ndim={arr.ndim}"
            )
        if min(arr.shape) < 1:
            raise ShapeMismatchError(f"feature tensor dims must be positive, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise InvalidInputError("feature tensor contains non-finite values")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @classmethod
    def _from_owned(cls, arr: np.ndarray) -> "FeatureTensor":
        # Internal: adopt a freshly allocated float64 C-contiguous array without copying.
        if not np.isfinite(arr).all():
            raise InvalidInputError("operation produced non-finite values")
        obj = object.__new__(cls)
        arr.flags.writeable = False
        object.__setattr__(obj, "data", arr)
        return obj

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def pixels(self) -> np.ndarray:
        """Read-only (C, H*W) view of the data."""
        return self.data.reshape(self.channels, -1)


@dataclass(frozen=True, eq=False)
class LabelMap:
    """Immutable H x W map of class ids; ``IGNORE_ID`` (0xFFFF) marks void pixels."""

    ids: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.ids)
        if raw.ndim != 2:
            raise ShapeMismatchError(f"label map must be (height, width), got ndim={raw.ndim}")
        if min(raw.shape) < 1:
            raise ShapeMismatchError(f"label map dims must be positive, got {raw.shape}")
        if raw.dtype.kind not in "iu":
            raise InvalidInputError(f"label ids must be integers, got dtype {raw.dtype}")
        if raw.size and (raw.min() < 0 or raw.max() > IGNORE_ID):
            raise InvalidInputError("label ids must lie in [0, 0xFFFF]")
        arr = np.array(raw, dtype=np.uint16, order="C", copy=True)
        arr.flags.writeable = False
        object.__setattr__(self, "ids", arr)

    @property
    def height(self) -> int:
        return self.ids.shape[0]

    @property
    def width(self) -> int:
        return self.ids.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.ids.shape

    def valid_mask(self) -> np.ndarray:
        """Boolean (H, W) mask of non-ignore pixels."""
        return self.ids != IGNORE_ID

    def n_valid(self) -> int:
        return int(np.count_nonzero(self.ids != IGNORE_ID))

    def validate_for_classes(self, class_count: int) -> None:
        """Raise if any non-ignore id is outside [0, class_count)."""
        ids = self.ids[self.ids != IGNORE_ID]
        if ids.size and int(ids.max()) >= class_count:
            raise InvalidInputError(
                f"label id {int(ids.max())} out of range for {class_count} classes"
            )


def _softmax_raw(x: np.ndarray) -> np.ndarray:
    """Stabilized softmax along axis 0 of a raw float64 array."""
    m = x.max(axis=0, keepdims=True)
    e = np.exp(x - m)
    e /= e.sum(axis=0, keepdims=True)
    return e


def softmax_channels(logits: FeatureTensor) -> FeatureTensor:
    """Per-pixel softmax over the channel axis (max-shifted for stability)."""
    return FeatureTensor._from_owned(_softmax_raw(logits.data))


def _check_spatial(target: LabelMap, logits: FeatureTensor) -> None:
    if target.shape != (logits.height, logits.width):
        raise ShapeMismatchError(
            f"label map {target.shape} does not match logits {logits.shape[1:]}"
        )


def cross_entropy(target: LabelMap, logits: FeatureTensor) -> float:
    """Mean over non-ignore pixels of -log softmax(logits)[target id].

    Ignore pixels contribute nothing; an all-ignore target is degenerate.
    """
    _check_spatial(target, logits)
    target.validate_for_classes(logits.channels)
    ids = target.ids.reshape(-1)
    valid = ids != IGNORE_ID
    n = int(np.count_nonzero(valid))
    if n == 0:
        raise DegenerateInputError("cross entropy undefined: no non-ignore pixels")
    x = logits.pixels()[:, valid]
    m = x.max(axis=0)
    lse = m + np.log(np.exp(x - m).sum(axis=0))
    picked = x[ids[valid].astype(np.intp), np.arange(n)]
    return float(np.mean(lse - picked))


def ce_grad_logits(target: LabelMap, logits: FeatureTensor) -> FeatureTensor:
    """Exact gradient of :func:`cross_entropy` with respect to the logits.

    Per non-ignore pixel this is (softmax - onehot(target)) / P where P is the
    non-ignore pixel count; ignore pixels get a zero gradient.
    """
    _check_spatial(target, logits)
    target.validate_for_classes(logits.channels)
    ids = target.ids.reshape(-1)
    valid = ids != IGNORE_ID
    n = int(np.count_nonzero(valid))
    if n == 0:
        raise DegenerateInputError("cross entropy gradient undefined: no non-ignore pixels")
    g = _softmax_raw(logits.pixels())
    cols = np.flatnonzero(valid)
    g[ids[cols].astype(np.intp), cols] -= 1.0
    g[:, ~valid] = 0.0
    g /= n
    return FeatureTensor._from_owned(np.ascontiguousarray(g.reshape(logits.shape)))
