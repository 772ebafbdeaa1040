"""Single-seed training: end-to-end backprop through the cascade and the
adapter, driven by a from-scratch Adam optimizer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InvalidInputError, ShapeMismatchError
from .optou import (
    CascadeTrace,
    GuidanceMode,
    OptouParams,
    cascade_backward,
    cascade_forward,
)
from .sca import ScaParams, init_sca_params, sca_backward, sca_forward, sca_param_count
from .tensor_core import FeatureTensor, LabelMap, ce_grad_logits, cross_entropy


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    learning_rate: float = 3e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 1e-4
    k_layers: int = 10
    alpha0: float = 1.0
    eta0: float = 0.1
    rng_seed: int = 0
    # Stored on the trained model as its default annotation mode; the training
    # loop itself always runs oracle-guided on the seed's ground truth.
    mode: GuidanceMode = GuidanceMode.SELF

    def __post_init__(self):
        if self.epochs < 1:
            raise InvalidInputError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise InvalidInputError("learning rate must be positive")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise InvalidInputError("Adam betas must lie in [0, 1)")
        if self.k_layers < 1:
            raise InvalidInputError("k_layers must be >= 1")


@dataclass(eq=False)
class AdamState:
    """First/second moment accumulators and the step counter."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0)


@dataclass(frozen=True, eq=False)
class LamModel:
    """Trained bundle: adapter + cascade parameters, class count, default mode."""

    sca: ScaParams
    optou: OptouParams
    class_count: int
    mode: GuidanceMode

    def __post_init__(self):
        if self.sca.n_out != self.class_count:
            raise ShapeMismatchError(
                f"adapter emits {self.sca.n_out} channels but model declares "
                f"{self.class_count} classes"
            )

    @property
    def param_count(self) -> int:
        return self.sca.param_count + self.optou.param_count


def adam_step(
    params: np.ndarray,
    grads: np.ndarray,
    state: AdamState,
    config: TrainConfig,
    decay_mask: np.ndarray | None = None,
) -> tuple[np.ndarray, AdamState]:
    """Bias-corrected Adam update with decoupled weight decay.

    theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * theta),
    where the decay term applies only where ``decay_mask`` is true (everywhere
    when no mask is given). Returns new parameters and state.
    """
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ShapeMismatchError("parameter, gradient, and state shapes must match")
    t = state.step + 1
    m = config.adam_beta1 * state.m + (1.0 - config.adam_beta1) * grads
    v = config.adam_beta2 * state.v + (1.0 - config.adam_beta2) * grads * grads
    m_hat = m / (1.0 - config.adam_beta1**t)
    v_hat = v / (1.0 - config.adam_beta2**t)
    update = m_hat / (np.sqrt(v_hat) + config.adam_eps)
    if config.weight_decay != 0.0:
        decayed = params if decay_mask is None else params * decay_mask
        update = update + config.weight_decay * decayed
    return params - config.learning_rate * update, AdamState(m, v, t)


def _flatten(sca: ScaParams, optou: OptouParams) -> np.ndarray:
    return np.concatenate([sca.weights.ravel(), sca.bias, optou.alphas, optou.etas])


def _unflatten(vec: np.ndarray, n_in: int, n_out: int, k: int) -> tuple[ScaParams, OptouParams]:
    w_end = n_out * n_in
    b_end = w_end + n_out
    a_end = b_end + k
    return (
        ScaParams(vec[:w_end].reshape(n_out, n_in), vec[w_end:b_end]),
        OptouParams(vec[b_end:a_end], vec[a_end:]),
    )


def _decay_mask(n_in: int, n_out: int, k: int) -> np.ndarray:
    # Decay regularizes the adapter weights only; biases and the cascade's
    # scale/step parameters are left free.
    mask = np.zeros(n_out * n_in + n_out + 2 * k)
    mask[: n_out * n_in] = 1.0
    return mask


def _seed_forward(
    sca: ScaParams,
    optou: OptouParams,
    features: FeatureTensor,
    gt: LabelMap,
) -> tuple[float, FeatureTensor, FeatureTensor, CascadeTrace]:
    f_sca, pre = sca_forward(features, sca, return_preactivation=True)
    out, trace = cascade_forward(f_sca, optou, guidance=gt, mode=GuidanceMode.ORACLE)
    loss = cross_entropy(gt, out)
    return loss, out, pre, trace


def train_from_seed(
    seed_features: FeatureTensor,
    seed_gt: LabelMap,
    config: TrainConfig,
    class_count: int | None = None,
) -> tuple[LamModel, list[float]]:
    """Fit adapter and cascade parameters to one annotated seed image.

    Every epoch runs the full forward pass, backpropagates the cross entropy
    against the seed's ground truth, and applies one Adam step to the
    concatenated parameter vector. The returned history holds the seed loss
    after each epoch's update, so its last entry equals
    ``loss_eval(model, seed_features, seed_gt)``.
    """
    if seed_gt.shape != (seed_features.height, seed_features.width):
        raise ShapeMismatchError(
            f"seed labels {seed_gt.shape} do not match features "
            f"{(seed_features.height, seed_features.width)}"
        )
    if seed_gt.n_valid() == 0:
        raise DegenerateInputError("seed ground truth is entirely ignore-labeled")
    if class_count is None:
        class_count = int(seed_gt.ids[seed_gt.valid_mask()].max()) + 1
    if class_count < 2:
        raise InvalidInputError(f"need at least 2 classes, got {class_count}")
    seed_gt.validate_for_classes(class_count)

    n_in = seed_features.channels
    rng = np.random.default_rng(config.rng_seed)
    sca = init_sca_params(n_in, class_count, rng)
    optou = OptouParams.constant(config.k_layers, config.alpha0, config.eta0)

    theta = _flatten(sca, optou)
    state = AdamState.zeros(theta.size)
    mask = _decay_mask(n_in, class_count, config.k_layers)

    losses: list[float] = []
    loss, out, pre, trace = _seed_forward(sca, optou, seed_features, seed_gt)
    for epoch in range(config.epochs):
        grad_out = ce_grad_logits(seed_gt, out)
        grad_alphas, grad_etas, grad_f_sca = cascade_backward(
            trace, optou, grad_out, GuidanceMode.ORACLE
        )
        grad_w, grad_b, _ = sca_backward(grad_f_sca, seed_features, pre, sca)
        grads = np.concatenate([grad_w.ravel(), grad_b, grad_alphas, grad_etas])
        theta, state = adam_step(theta, grads, state, config, decay_mask=mask)
        sca, optou = _unflatten(theta, n_in, class_count, config.k_layers)
        loss, out, pre, trace = _seed_forward(sca, optou, seed_features, seed_gt)
        if not np.isfinite(loss):
            raise InvalidInputError(f"training diverged: non-finite loss after epoch {epoch + 1}")
        losses.append(loss)

    model = LamModel(sca=sca, optou=optou, class_count=class_count, mode=config.mode)
    assert model.param_count == sca_param_count(n_in, class_count) + 2 * config.k_layers
    return model, losses


def loss_eval(model: LamModel, features: FeatureTensor, gt: LabelMap) -> float:
    """Seed-style objective at the model's current parameters (forward only)."""
    f_sca = sca_forward(features, model.sca)
    out, _ = cascade_forward(
        f_sca, model.optou, guidance=gt, mode=GuidanceMode.ORACLE, want_trace=False
    )
    return cross_entropy(gt, out)
