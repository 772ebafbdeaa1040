"""Per-pixel class adapter: a 1x1 affine map from N feature channels to C class
channels followed by ReLU, with its exact backward pass."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, ShapeMismatchError
from .tensor_core import FeatureTensor

# Half-width of the uniform weight init. Deliberately small: with the default
# Adam step size the total parameter movement over a few hundred iterations is
# O(0.1), so the initial scatter must not dominate the learned ordering.
INIT_WEIGHT_SCALE = 0.01
# Positive bias init keeps every ReLU gate open at the start; a class row whose
# preactivation goes negative everywhere would otherwise stop receiving
# gradient and stay dead for the rest of training.
INIT_BIAS = 0.1


@dataclass(frozen=True, eq=False)
class ScaParams:
    """Adapter parameters: weights (C, N) and bias (C,)."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64, order="C", copy=True)
        b = np.array(self.bias, dtype=np.float64, copy=True)
        if w.ndim != 2 or b.ndim != 1:
            raise ShapeMismatchError("weights must be (C, N) and bias (C,)")
        if w.shape[0] != b.shape[0]:
            raise ShapeMismatchError(
                f"bias length {b.shape[0]} does not match weight rows {w.shape[0]}"
            )
        if min(w.shape) < 1:
            raise ShapeMismatchError(f"weight dims must be positive, got {w.shape}")
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise InvalidInputError("adapter parameters contain non-finite values")
        w.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]

    @property
    def param_count(self) -> int:
        return sca_param_count(self.n_in, self.n_out)


def sca_param_count(n_in: int, n_out: int) -> int:
    """Learnable parameter count of the adapter: (n_in + 1) * n_out."""
    if n_in < 1 or n_out < 1:
        raise InvalidInputError(f"channel counts must be positive, got ({n_in}, {n_out})")
    return (n_in + 1) * n_out


def init_sca_params(n_in: int, n_out: int, rng: np.random.Generator) -> ScaParams:
    """Seeded init: weights uniform in +-INIT_WEIGHT_SCALE, bias INIT_BIAS."""
    w = rng.uniform(-INIT_WEIGHT_SCALE, INIT_WEIGHT_SCALE, size=(n_out, n_in))
    return ScaParams(w, np.full(n_out, INIT_BIAS))


def sca_forward(
    features: FeatureTensor,
    params: ScaParams,
    return_preactivation: bool = False,
):
    """Apply the adapter per pixel: relu(W @ x + b).

    With ``return_preactivation`` the pre-ReLU activations are returned as a
    second tensor so the exact backward pass can gate on them.
    """
    if features.channels != params.n_in:
        raise ShapeMismatchError(
            f"adapter expects {params.n_in} input channels, got {features.channels}"
        )
    x = features.pixels()
    pre = params.weights @ x
    pre += params.bias[:, None]
    out = np.maximum(pre, 0.0)
    shape = (params.n_out, features.height, features.width)
    out_t = FeatureTensor._from_owned(out.reshape(shape))
    if not return_preactivation:
        return out_t
    return out_t, FeatureTensor._from_owned(np.ascontiguousarray(pre.reshape(shape)))


def sca_backward(
    grad_out: FeatureTensor,
    cached_input: FeatureTensor,
    cached_preactivation: FeatureTensor,
    params: ScaParams,
) -> tuple[np.ndarray, np.ndarray, FeatureTensor]:
    """Reverse-mode gradients of the forward map.

    Returns (grad_weights, grad_bias, grad_input). The ReLU gate passes
    gradient only where the cached preactivation is strictly positive.
    """
    c, n = params.n_out, params.n_in
    if grad_out.channels != c or cached_preactivation.channels != c:
        raise ShapeMismatchError("cotangent/preactivation channels do not match adapter output")
    if cached_input.channels != n:
        raise ShapeMismatchError("cached input channels do not match adapter input")
    spatial = (grad_out.height, grad_out.width)
    if (cached_input.height, cached_input.width) != spatial or (
        cached_preactivation.height,
        cached_preactivation.width,
    ) != spatial:
        raise ShapeMismatchError("cached tensors do not share the cotangent's spatial size")

    g = grad_out.pixels() * (cached_preactivation.pixels() > 0.0)
    x = cached_input.pixels()
    grad_weights = g @ x.T
    grad_bias = g.sum(axis=1)
    grad_input = params.weights.T @ g
    shape_in = (n, cached_input.height, cached_input.width)
    return grad_weights, grad_bias, FeatureTensor._from_owned(grad_input.reshape(shape_in))
