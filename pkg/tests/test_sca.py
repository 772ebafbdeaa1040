"""Adapter forward/backward against naive per-pixel oracles and finite differences."""

import numpy as np
import pytest

from lamcore import (
    FeatureTensor,
    InvalidInputError,
    ScaParams,
    ShapeMismatchError,
    init_sca_params,
    sca_backward,
    sca_forward,
    sca_param_count,
)


def naive_forward(x, weights, bias):
    """Independent per-pixel dot-product loop."""
    n, h, w = x.shape
    c = weights.shape[0]
    out = np.zeros((c, h, w))
    for i in range(h):
        for j in range(w):
            for k in range(c):
                acc = bias[k]
                for m in range(n):
                    acc += weights[k, m] * x[m, i, j]
                out[k, i, j] = max(0.0, acc)
    return out


class TestForward:
    def test_identity_weights_clamp_negatives(self):
        params = ScaParams(np.eye(3), np.zeros(3))
        x = np.array([1.0, -2.0, 3.0]).reshape(3, 1, 1)
        out = sca_forward(FeatureTensor(x), params).data.ravel()
        np.testing.assert_array_equal(out, [1.0, 0.0, 3.0])

    def test_bias_only(self):
        params = ScaParams(np.zeros((2, 3)), np.array([0.5, -0.5]))
        out = sca_forward(FeatureTensor(np.ones((3, 2, 2))), params).data
        assert np.all(out[0] == 0.5) and np.all(out[1] == 0.0)

    def test_matches_naive_oracle(self, rng):
        x = rng.normal(size=(5, 2, 2))
        params = ScaParams(rng.normal(size=(3, 5)), rng.normal(size=3))
        got = sca_forward(FeatureTensor(x), params).data
        np.testing.assert_allclose(got, naive_forward(x, params.weights, params.bias), rtol=1e-12)

    def test_positive_homogeneity(self, rng):
        x = rng.normal(size=(4, 3, 3))
        w, b = rng.normal(size=(3, 4)), rng.normal(size=3)
        for t in (0.0, 0.5, 2.0):
            a = sca_forward(FeatureTensor(x), ScaParams(t * w, t * b)).data
            bsc = t * sca_forward(FeatureTensor(x), ScaParams(w, b)).data
            np.testing.assert_allclose(a, bsc, atol=1e-12)

    def test_channel_mismatch(self):
        params = ScaParams(np.zeros((2, 3)), np.zeros(2))
        with pytest.raises(ShapeMismatchError):
            sca_forward(FeatureTensor(np.zeros((4, 1, 1))), params)


class TestParamCount:
    @pytest.mark.parametrize(
        "n,c,expected_total",
        [(256, 12, 3104), (256, 19, 4903), (256, 23, 5931), (256, 23, 5931)],
    )
    def test_published_totals_with_ten_layers(self, n, c, expected_total):
        assert sca_param_count(n, c) + 2 * 10 == expected_total

    def test_minimal(self):
        assert sca_param_count(1, 1) == 2

    def test_rejects_non_positive(self):
        with pytest.raises(InvalidInputError):
            sca_param_count(0, 3)
        with pytest.raises(InvalidInputError):
            sca_param_count(3, -1)

    def test_params_object_count(self, rng):
        p = init_sca_params(7, 4, rng)
        assert p.param_count == (7 + 1) * 4


class TestBackward:
    def _setup(self, rng, n=5, c=3, h=2, w=2):
        x = FeatureTensor(rng.normal(size=(n, h, w)))
        params = ScaParams(rng.normal(size=(c, n)), rng.normal(size=c))
        out, pre = sca_forward(x, params, return_preactivation=True)
        return x, params, out, pre

    def test_zero_cotangent(self, rng):
        x, params, out, pre = self._setup(rng)
        gw, gb, gx = sca_backward(FeatureTensor(np.zeros(out.shape)), x, pre, params)
        assert np.all(gw == 0) and np.all(gb == 0) and np.all(gx.data == 0)

    def test_dead_relu_row_gets_no_gradient(self):
        # single pixel, channel 1 preactivation below zero
        params = ScaParams(np.array([[1.0], [-1.0]]), np.zeros(2))
        x = FeatureTensor(np.full((1, 1, 1), 2.0))
        out, pre = sca_forward(x, params, return_preactivation=True)
        gw, gb, _ = sca_backward(FeatureTensor(np.ones((2, 1, 1))), x, pre, params)
        assert np.all(gw[1] == 0) and gb[1] == 0
        assert gw[0, 0] == 2.0  # live row: grad_out * input

    def test_matches_finite_differences(self, rng):
        step = 1e-5
        checked = 0
        while checked < 5:
            n, c = int(rng.integers(1, 9)), int(rng.integers(1, 9))
            h, w = int(rng.integers(1, 5)), int(rng.integers(1, 5))
            x = rng.normal(size=(n, h, w))
            weights, bias = rng.normal(size=(c, n)), rng.normal(size=c)
            pre_raw = weights @ x.reshape(n, -1) + bias[:, None]
            if np.abs(pre_raw).min() < 1e-3:
                continue  # keep clear of the ReLU kink
            params = ScaParams(weights, bias)
            cot = rng.normal(size=(c, h, w))
            out, pre = sca_forward(FeatureTensor(x), params, return_preactivation=True)
            gw, gb, gx = sca_backward(FeatureTensor(cot), FeatureTensor(x), pre, params)

            def scalar(w_, b_, x_):
                return float(
                    np.vdot(cot, sca_forward(FeatureTensor(x_), ScaParams(w_, b_)).data)
                )

            for analytic, base, apply in (
                (gw, weights, lambda v: scalar(v, bias, x)),
                (gb, bias, lambda v: scalar(weights, v, x)),
                (gx.data, x, lambda v: scalar(weights, bias, v)),
            ):
                fd = np.zeros_like(base)
                it = np.nditer(base, flags=["multi_index"])
                for _ in it:
                    idx = it.multi_index
                    hi, lo = base.copy(), base.copy()
                    hi[idx] += step
                    lo[idx] -= step
                    fd[idx] = (apply(hi) - apply(lo)) / (2 * step)
                denom = np.maximum(np.maximum(np.abs(analytic), np.abs(fd)), 1e-6)
                assert (np.abs(analytic - fd) / denom).max() <= 1e-5
            checked += 1

    def test_shape_mismatch(self, rng):
        x, params, out, pre = self._setup(rng)
        bad = FeatureTensor(np.zeros((params.n_out, 5, 5)))
        with pytest.raises(ShapeMismatchError):
            sca_backward(bad, x, pre, params)


class TestInit:
    def test_seeded_and_deterministic(self):
        a = init_sca_params(6, 3, np.random.default_rng(5))
        b = init_sca_params(6, 3, np.random.default_rng(5))
        np.testing.assert_array_equal(a.weights, b.weights)
        np.testing.assert_array_equal(a.bias, b.bias)
        assert np.all(a.bias > 0)  # gates start open
