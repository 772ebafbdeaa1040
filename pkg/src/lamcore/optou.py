"""K-layer unrolled gradient-descent cascade over per-pixel class logits.

Each layer scales the previous output by ``alpha_k`` and then takes a gradient
step of size ``eta_k`` on the per-pixel cross entropy against a guidance label:

    out_k = alpha_k * out_{k-1} - eta_k * (softmax(alpha_k * out_{k-1}) - onehot(g))

The guidance ``g`` comes from ground truth (ORACLE), from the layer's own
argmax pseudo-label (SELF), or is omitted entirely (SCALE_ONLY). The gradient
term is per pixel, without the 1/P mean factor used by training losses, so the
layer behaves identically at any resolution. Pixels marked ignore in oracle
guidance pass through the scaling untouched.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, ShapeMismatchError
from .tensor_core import IGNORE_ID, FeatureTensor, LabelMap, _softmax_raw


class GuidanceMode(enum.Enum):
    """Source of the label inside each layer's gradient term."""

    ORACLE = "oracle"
    SELF = "self"
    SCALE_ONLY = "scale-only"

    @classmethod
    def from_string(cls, name: str) -> "GuidanceMode":
        for mode in cls:
            if mode.value == name:
                return mode
        raise InvalidInputError(f"unknown guidance mode {name!r}")


@dataclass(frozen=True, eq=False)
class OptouParams:
    """Per-layer scale factors and step sizes, k = 1..K."""

    alphas: np.ndarray
    etas: np.ndarray

    def __post_init__(self):
        a = np.array(self.alphas, dtype=np.float64, copy=True)
        e = np.array(self.etas, dtype=np.float64, copy=True)
        if a.ndim != 1 or e.ndim != 1 or a.shape != e.shape:
            raise ShapeMismatchError("alphas and etas must be 1-D vectors of equal length")
        if a.shape[0] < 1:
            raise InvalidInputError("cascade needs at least one layer")
        if not (np.isfinite(a).all() and np.isfinite(e).all()):
            raise InvalidInputError("cascade parameters contain non-finite values")
        a.flags.writeable = False
        e.flags.writeable = False
        object.__setattr__(self, "alphas", a)
        object.__setattr__(self, "etas", e)

    @classmethod
    def constant(cls, k_layers: int, alpha0: float, eta0: float) -> "OptouParams":
        if k_layers < 1:
            raise InvalidInputError(f"k_layers must be >= 1, got {k_layers}")
        return cls(np.full(k_layers, alpha0), np.full(k_layers, eta0))

    @property
    def k_layers(self) -> int:
        return self.alphas.shape[0]

    @property
    def param_count(self) -> int:
        return 2 * self.k_layers


@dataclass(eq=False)
class CascadeTrace:
    """Per-layer caches from a cascade forward pass (reverse-mode plumbing).

    All arrays are raw ``(C, H*W)`` float64 except the id vectors. For
    SCALE_ONLY layers the softmax/guidance entries are ``None``.
    """

    mode: GuidanceMode
    shape: tuple[int, int, int]
    prevs: list = field(default_factory=list)  # layer inputs out_{k-1}
    scaled: list = field(default_factory=list)  # alpha_k * out_{k-1}
    softmaxes: list = field(default_factory=list)
    guidance_ids: list = field(default_factory=list)  # flat (H*W,) per layer
    valid: np.ndarray | None = None  # flat non-ignore mask (oracle mode)
    final: np.ndarray | None = None  # out_K, (C, H*W)

    @property
    def k_layers(self) -> int:
        return len(self.prevs)


def _guidance_ids(guidance, spatial) -> tuple[np.ndarray, np.ndarray]:
    """Flat oracle ids and their non-ignore mask."""
    if isinstance(guidance, LabelMap):
        ids = guidance.ids
    else:
        ids = np.asarray(guidance)
    if ids.shape != spatial:
        raise ShapeMismatchError(f"guidance shape {ids.shape} does not match image {spatial}")
    flat = ids.reshape(-1).astype(np.intp)
    return flat, flat != IGNORE_ID


def _check_guidance_presence(mode: GuidanceMode, guidance) -> None:
    if mode is GuidanceMode.ORACLE and guidance is None:
        raise InvalidInputError("oracle guidance mode requires a ground-truth label map")
    if mode is not GuidanceMode.ORACLE and guidance is not None:
        raise InvalidInputError(f"guidance labels are not accepted in {mode.value} mode")


def _gradient_term(u: np.ndarray, ids: np.ndarray, valid: np.ndarray | None) -> np.ndarray:
    """(softmax(u) - onehot(ids)) with ignored columns zeroed. u is (C, P)."""
    d = _softmax_raw(u)
    if valid is None:
        d[ids, np.arange(u.shape[1])] -= 1.0
    else:
        cols = np.flatnonzero(valid)
        d[ids[cols], cols] -= 1.0
        d[:, ~valid] = 0.0
    return d


def layer_forward(
    prev: FeatureTensor,
    alpha_k: float,
    eta_k: float,
    guidance: LabelMap | None,
    mode: GuidanceMode,
) -> FeatureTensor:
    """One cascade layer applied to the previous output."""
    _check_guidance_presence(mode, guidance)
    u = alpha_k * prev.pixels()
    if mode is GuidanceMode.SCALE_ONLY:
        out = u
    else:
        if mode is GuidanceMode.ORACLE:
            ids, valid = _guidance_ids(guidance, (prev.height, prev.width))
            if int(ids[valid].max(initial=-1)) >= prev.channels:
                raise InvalidInputError("guidance id out of range for channel count")
        else:
            ids, valid = np.argmax(u, axis=0), None
        out = u - eta_k * _gradient_term(u, ids, valid)
    return FeatureTensor._from_owned(np.ascontiguousarray(out.reshape(prev.shape)))


def cascade_forward(
    f_sca: FeatureTensor,
    params: OptouParams,
    guidance: LabelMap | None = None,
    mode: GuidanceMode = GuidanceMode.ORACLE,
    want_trace: bool = True,
) -> tuple[FeatureTensor, CascadeTrace | None]:
    """Run all K layers starting from the adapter output.

    Returns the final output and, unless ``want_trace`` is disabled, the
    per-layer caches needed by :func:`cascade_backward` and
    :func:`closed_form_output`. The trace-free path performs bitwise
    identical arithmetic with preallocated buffers.
    """
    _check_guidance_presence(mode, guidance)
    spatial = (f_sca.height, f_sca.width)
    ids = valid = None
    if mode is GuidanceMode.ORACLE:
        ids, valid = _guidance_ids(guidance, spatial)
        if int(ids[valid].max(initial=-1)) >= f_sca.channels:
            raise InvalidInputError("guidance id out of range for channel count")
    if not want_trace:
        out = _cascade_fast(f_sca.pixels(), params, mode, ids, valid)
        return FeatureTensor._from_owned(np.ascontiguousarray(out.reshape(f_sca.shape))), None

    trace = CascadeTrace(mode=mode, shape=f_sca.shape)
    if mode is GuidanceMode.ORACLE:
        trace.valid = valid
    prev = f_sca.pixels()
    for k in range(params.k_layers):
        u = params.alphas[k] * prev
        if mode is GuidanceMode.SCALE_ONLY:
            layer_ids, p, d = None, None, None
            out = u
        else:
            if mode is GuidanceMode.ORACLE:
                layer_ids, layer_valid = ids, (None if valid.all() else valid)
            else:
                layer_ids, layer_valid = np.argmax(u, axis=0), None
            p = _softmax_raw(u)
            d = p.copy()
            if layer_valid is None:
                d[layer_ids, np.arange(u.shape[1])] -= 1.0
            else:
                cols = np.flatnonzero(layer_valid)
                d[layer_ids[cols], cols] -= 1.0
                d[:, ~layer_valid] = 0.0
            out = u - params.etas[k] * d
        trace.prevs.append(prev)
        trace.scaled.append(u)
        trace.softmaxes.append(p)
        trace.guidance_ids.append(layer_ids)
        prev = out
    trace.final = prev
    final = FeatureTensor._from_owned(np.ascontiguousarray(prev.reshape(f_sca.shape)))
    return final, trace


def _cascade_fast(
    f_sca: np.ndarray,
    params: OptouParams,
    mode: GuidanceMode,
    ids: np.ndarray | None,
    valid: np.ndarray | None,
) -> np.ndarray:
    """Trace-free forward with two reusable (C, P) buffers."""
    c, p = f_sca.shape
    u = np.empty((c, p))
    scratch = np.empty((c, p))
    cols = np.arange(p)
    mask_cols = None
    if valid is not None and not valid.all():
        mask_cols = np.flatnonzero(valid)
    elif valid is not None:
        valid = None
    np.multiply(f_sca, params.alphas[0], out=u)
    for k in range(params.k_layers):
        if k > 0:
            np.multiply(u, params.alphas[k], out=u)
        if mode is not GuidanceMode.SCALE_ONLY:
            layer_ids = ids if mode is GuidanceMode.ORACLE else np.argmax(u, axis=0)
            m = u.max(axis=0, keepdims=True)
            np.subtract(u, m, out=scratch)
            np.exp(scratch, out=scratch)
            scratch /= scratch.sum(axis=0, keepdims=True)
            if mask_cols is None:
                scratch[layer_ids, cols] -= 1.0
            else:
                scratch[layer_ids[mask_cols], mask_cols] -= 1.0
                scratch[:, ~valid] = 0.0
            np.multiply(scratch, params.etas[k], out=scratch)
            np.subtract(u, scratch, out=u)
    return u


def closed_form_output(
    f_sca: FeatureTensor,
    params: OptouParams,
    trace: CascadeTrace,
) -> FeatureTensor:
    """Telescoped form of the cascade output, evaluated from the trace caches.

    out_K = (prod_k alpha_k) * f_sca
            - sum_k eta_k * (prod_{i>k} alpha_i) * (softmax(alpha_k out_{k-1}) - onehot(g_k))

    Accumulation order differs from the layer recurrence, so agreement with
    :func:`cascade_forward` bounds floating-point accumulation error only.
    """
    if trace.shape != f_sca.shape:
        raise ShapeMismatchError(
            f"trace shape {trace.shape} does not match input shape {f_sca.shape}"
        )
    if trace.k_layers != params.k_layers:
        raise ShapeMismatchError(
            f"trace has {trace.k_layers} layers, parameters have {params.k_layers}"
        )
    alphas = params.alphas
    acc = np.prod(alphas) * f_sca.pixels()
    if trace.mode is not GuidanceMode.SCALE_ONLY:
        p_count = acc.shape[1]
        tail = np.concatenate([np.cumprod(alphas[::-1])[::-1][1:], [1.0]])
        for k in range(params.k_layers):
            d = trace.softmaxes[k].copy()
            ids = trace.guidance_ids[k]
            if trace.valid is None or trace.valid.all():
                d[ids, np.arange(p_count)] -= 1.0
            else:
                cols = np.flatnonzero(trace.valid)
                d[ids[cols], cols] -= 1.0
                d[:, ~trace.valid] = 0.0
            acc -= (params.etas[k] * tail[k]) * d
    return FeatureTensor._from_owned(np.ascontiguousarray(acc.reshape(f_sca.shape)))


def cascade_backward(
    trace: CascadeTrace,
    params: OptouParams,
    grad_out: FeatureTensor,
    mode: GuidanceMode,
) -> tuple[np.ndarray, np.ndarray, FeatureTensor]:
    """Exact reverse-mode gradients through the cascade.

    Contracts ``grad_out`` with the Jacobians of out_K with respect to each
    alpha_k, eta_k and the cascade input. The softmax Jacobian per pixel is
    diag(p) - p p^T; in SELF mode the argmax pseudo-label is a constant of the
    differentiation. Returns (grad_alphas, grad_etas, grad_input).
    """
    if mode is not trace.mode:
        raise InvalidInputError(
            f"backward mode {mode.value} does not match trace mode {trace.mode.value}"
        )
    if trace.k_layers != params.k_layers:
        raise ShapeMismatchError(
            f"trace has {trace.k_layers} layers, parameters have {params.k_layers}"
        )
    if grad_out.shape != trace.shape:
        raise ShapeMismatchError(
            f"cotangent shape {grad_out.shape} does not match trace shape {trace.shape}"
        )
    k_layers = params.k_layers
    grad_alphas = np.zeros(k_layers)
    grad_etas = np.zeros(k_layers)
    g = grad_out.pixels().copy()
    masked = trace.valid is not None and not trace.valid.all()
    for k in reversed(range(k_layers)):
        if trace.mode is GuidanceMode.SCALE_ONLY:
            v = g
        else:
            p = trace.softmaxes[k]
            ids = trace.guidance_ids[k]
            d = p.copy()
            if masked:
                cols = np.flatnonzero(trace.valid)
                d[ids[cols], cols] -= 1.0
                d[:, ~trace.valid] = 0.0
            else:
                d[ids, np.arange(p.shape[1])] -= 1.0
            grad_etas[k] = -float(np.vdot(g, d))
            # cotangent through u -> u - eta * (softmax(u) - g): (I - eta J_p)^T g
            jg = p * g - p * (p * g).sum(axis=0, keepdims=True)
            if masked:
                jg[:, ~trace.valid] = 0.0
            v = g - params.etas[k] * jg
        grad_alphas[k] = float(np.vdot(v, trace.prevs[k]))
        g = params.alphas[k] * v
    grad_input = FeatureTensor._from_owned(np.ascontiguousarray(g.reshape(trace.shape)))
    return grad_alphas, grad_etas, grad_input
