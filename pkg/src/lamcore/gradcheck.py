"""Finite-difference verification of every backward pass in the package.

Central differences with a 1e-5 step are the independent oracle; each suite
draws seeded random instances, compares analytic gradients elementwise, and
reports the worst relative error. Instances whose forward pass sits within a
hair of a kink (ReLU zero crossings, argmax ties) are re-drawn, since the
one-sided derivative there is not what either side computes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .optou import GuidanceMode, OptouParams, cascade_backward, cascade_forward
from .sca import ScaParams, sca_backward, sca_forward
from .tensor_core import IGNORE_ID, FeatureTensor, LabelMap, ce_grad_logits, cross_entropy
from .trainer import LamModel, loss_eval

FD_STEP = 1e-5
TOLERANCE = 1e-4
_REL_FLOOR = 1e-6
_KINK_MARGIN = 1e-3


def central_difference(f, x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Elementwise central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = f(x)
        flat[i] = orig - step
        lo = f(x)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * step)
    return grad


def max_relative_error(analytic: np.ndarray, fd: np.ndarray) -> float:
    a = np.asarray(analytic, dtype=np.float64).reshape(-1)
    b = np.asarray(fd, dtype=np.float64).reshape(-1)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), _REL_FLOOR)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


@dataclass
class SuiteResult:
    name: str
    instances: int
    max_rel_err: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= TOLERANCE


def _random_labels(rng, c, h, w, ignore_fraction=0.0) -> LabelMap:
    ids = rng.integers(0, c, size=(h, w)).astype(np.uint16)
    if ignore_fraction > 0:
        ids[rng.random((h, w)) < ignore_fraction] = IGNORE_ID
    if (ids == IGNORE_ID).all():
        ids[0, 0] = 0
    return LabelMap(ids)


def check_ce_grad(rng: np.random.Generator, instances: int = 30) -> SuiteResult:
    worst = 0.0
    for _ in range(instances):
        c = int(rng.integers(2, 7))
        h, w = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        target = _random_labels(rng, c, h, w, ignore_fraction=0.2)
        x = rng.normal(0.0, 2.0, size=(c, h, w))
        analytic = ce_grad_logits(target, FeatureTensor(x)).data
        fd = central_difference(lambda v: cross_entropy(target, FeatureTensor(v)), x)
        worst = max(worst, max_relative_error(analytic, fd))
    return SuiteResult("ce_grad_logits", instances, worst)


def check_sca_backward(rng: np.random.Generator, instances: int = 25) -> SuiteResult:
    worst = 0.0
    done = 0
    while done < instances:
        n, c = int(rng.integers(1, 9)), int(rng.integers(1, 9))
        h, w = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        x = rng.normal(size=(n, h, w))
        params = ScaParams(rng.normal(size=(c, n)), rng.normal(size=c))
        out, pre = sca_forward(FeatureTensor(x), params, return_preactivation=True)
        if np.abs(pre.data).min() < _KINK_MARGIN:
            continue  # too close to the ReLU kink for central differences
        cot = rng.normal(size=out.shape)

        def scalar(weights, bias, feats):
            p = ScaParams(weights, bias)
            return float(np.vdot(cot, sca_forward(FeatureTensor(feats), p).data))

        gw, gb, gx = sca_backward(FeatureTensor(cot), FeatureTensor(x), pre, params)
        fd_w = central_difference(lambda v: scalar(v, params.bias, x), params.weights.copy())
        fd_b = central_difference(lambda v: scalar(params.weights, v, x), params.bias.copy())
        fd_x = central_difference(lambda v: scalar(params.weights, params.bias, v), x.copy())
        worst = max(
            worst,
            max_relative_error(gw, fd_w),
            max_relative_error(gb, fd_b),
            max_relative_error(gx.data, fd_x),
        )
        done += 1
    return SuiteResult("sca_backward", instances, worst)


def _argmax_margins_ok(f_sca, params, mode) -> bool:
    """Reject SELF-mode instances whose per-layer argmax sits near a tie."""
    if mode is not GuidanceMode.SELF:
        return True
    _, trace = cascade_forward(f_sca, params, mode=mode)
    for u in trace.scaled:
        if u.shape[0] < 2:
            return False
        part = np.partition(u, -2, axis=0)
        if (part[-1] - part[-2]).min() < _KINK_MARGIN:
            return False
    return True


def check_cascade_backward(
    rng: np.random.Generator, mode: GuidanceMode, instances: int = 15
) -> SuiteResult:
    worst = 0.0
    done = 0
    while done < instances:
        k = int(rng.integers(1, 6))
        c = int(rng.integers(2, 7))
        h, w = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        f = FeatureTensor(rng.normal(0.0, 1.5, size=(c, h, w)))
        params = OptouParams(rng.uniform(0.5, 1.5, size=k), rng.uniform(0.0, 0.5, size=k))
        guidance = (
            _random_labels(rng, c, h, w, ignore_fraction=0.15)
            if mode is GuidanceMode.ORACLE
            else None
        )
        if not _argmax_margins_ok(f, params, mode):
            continue
        cot = rng.normal(size=f.shape)

        def scalar(alphas, etas, feats):
            p = OptouParams(alphas, etas)
            out, _ = cascade_forward(
                FeatureTensor(feats), p, guidance=guidance, mode=mode, want_trace=False
            )
            return float(np.vdot(cot, out.data))

        _, trace = cascade_forward(f, params, guidance=guidance, mode=mode)
        ga, ge, gf = cascade_backward(trace, params, FeatureTensor(cot), mode)
        fd_a = central_difference(lambda v: scalar(v, params.etas, f.data), params.alphas.copy())
        fd_e = central_difference(lambda v: scalar(params.alphas, v, f.data), params.etas.copy())
        fd_f = central_difference(lambda v: scalar(params.alphas, params.etas, v), f.data.copy())
        worst = max(
            worst,
            max_relative_error(ga, fd_a),
            max_relative_error(ge, fd_e),
            max_relative_error(gf.data, fd_f),
        )
        done += 1
    return SuiteResult(f"cascade_backward[{mode.value}]", instances, worst)


def check_end_to_end(rng: np.random.Generator, instances: int = 20) -> SuiteResult:
    """Gradient of the full training objective w.r.t. every learnable parameter."""
    from .trainer import _flatten, _unflatten

    worst = 0.0
    done = 0
    while done < instances:
        n = int(rng.integers(1, 5))
        c = int(rng.integers(2, 4))
        k = int(rng.integers(1, 4))
        h, w = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        feats = FeatureTensor(rng.normal(size=(n, h, w)))
        gt = _random_labels(rng, c, h, w, ignore_fraction=0.1)
        sca = ScaParams(rng.normal(size=(c, n)), rng.normal(size=c))
        optou = OptouParams(rng.uniform(0.5, 1.5, size=k), rng.uniform(0.0, 0.5, size=k))

        f_sca, pre = sca_forward(feats, sca, return_preactivation=True)
        if np.abs(pre.data).min() < _KINK_MARGIN:
            continue
        out, trace = cascade_forward(f_sca, optou, guidance=gt, mode=GuidanceMode.ORACLE)
        grad_out = ce_grad_logits(gt, out)
        ga, ge, gf = cascade_backward(trace, optou, grad_out, GuidanceMode.ORACLE)
        gw, gb, _ = sca_backward(gf, feats, pre, sca)
        analytic = np.concatenate([gw.ravel(), gb, ga, ge])

        def objective(theta):
            s, o = _unflatten(theta, n, c, k)
            model = LamModel(sca=s, optou=o, class_count=c, mode=GuidanceMode.ORACLE)
            return loss_eval(model, feats, gt)

        fd = central_difference(objective, _flatten(sca, optou))
        worst = max(worst, max_relative_error(analytic, fd))
        done += 1
    return SuiteResult("loss_eval_end_to_end", instances, worst)


def run_all(rng_seed: int = 0) -> list[SuiteResult]:
    """Every suite on fresh seeded generators; >= 100 instances in total."""
    results = [
        check_ce_grad(np.random.default_rng(rng_seed)),
        check_sca_backward(np.random.default_rng(rng_seed + 1)),
        check_cascade_backward(np.random.default_rng(rng_seed + 2), GuidanceMode.ORACLE),
        check_cascade_backward(np.random.default_rng(rng_seed + 3), GuidanceMode.SELF),
        check_cascade_backward(np.random.default_rng(rng_seed + 4), GuidanceMode.SCALE_ONLY),
        check_end_to_end(np.random.default_rng(rng_seed + 5)),
    ]
    return results
