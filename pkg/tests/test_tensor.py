import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import conv_oracle
from hcnet.errors import ConfigError, DimensionError, NumericError
from hcnet.gradcheck import gradcheck, relative_error
from hcnet.tensor import (conv2d_dilated, conv2d_dilated_backward, count_macs, make_rng,
                          matmul, softmax_axis, softmax_backward)


class TestMatmul:
    def test_identity(self):
        m = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(matmul(np.eye(2), m), m)

    def test_hand_product(self):
        out = matmul([[1.0, 2.0], [3.0, 4.0]], [[5.0], [6.0]])
        np.testing.assert_array_equal(out, [[17.0], [39.0]])

    def test_zero_annihilates(self, rng):
        np.testing.assert_array_equal(matmul(np.zeros((3, 4)), rng.standard_normal((4, 2))), 0.0)

    def test_float32_accumulates_in_float64(self):
        a = np.full((1, 3), 1e8, np.float32)
        b = np.array([[1.0], [1.0], [1e-8]], np.float32)
        out = matmul(a, b)
        assert out.dtype == np.float64
        assert out[0, 0] == pytest.approx(2e8 + 1.0, abs=1e-6)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            matmul(np.ones((2, 3)), np.ones((2, 3)))

    def test_rejects_integer_dtype(self):
        with pytest.raises(ValueError):
            matmul(np.ones((2, 2), np.uint16), np.ones((2, 2)))

    def test_identity_associativity_bitwise(self, rng):
        a = rng.standard_normal((5, 4))
        b = rng.standard_normal((4, 3))
        assert np.array_equal(matmul(matmul(a, np.eye(4)), b), matmul(a, b))

    def test_mac_counter(self):
        with count_macs() as macs:
            matmul(np.ones((2, 3)), np.ones((3, 4)), tag="x")
            matmul(np.ones((1, 1)), np.ones((1, 1)))
        assert macs.total == 25
        assert macs.by_tag == {"x": 24}


class TestSoftmax:
    def test_uniform(self):
        np.testing.assert_allclose(softmax_axis(np.zeros(3)), [1 / 3] * 3, atol=1e-15)

    def test_closed_form(self):
        np.testing.assert_allclose(softmax_axis(np.array([0.0, np.log(2.0)])), [1 / 3, 2 / 3], atol=1e-15)

    def test_no_overflow(self):
        out = softmax_axis(np.array([1000.0, 1000.0]))
        np.testing.assert_allclose(out, [0.5, 0.5])

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, (3, 4), elements=st.floats(-50, 50)), st.floats(-100, 100))
    def test_shift_invariance_and_simplex(self, x, c):
        y = softmax_axis(x, axis=0)
        np.testing.assert_allclose(softmax_axis(x + c, axis=0), y, atol=1e-12)
        assert np.all(y >= 0)
        np.testing.assert_allclose(y.sum(axis=0), 1.0, atol=1e-6)

    def test_gradcheck(self, rng):
        x = rng.standard_normal((4, 3))

        def fwd(x):
            y = softmax_axis(x, axis=0)
            return y, y

        rep = gradcheck(fwd, lambda y, d: [softmax_backward(y, d, axis=0)], [x], eps=1e-5)
        assert rep.max_error < 1e-6


class TestConv:
    def test_identity_kernel(self, rng):
        x = rng.standard_normal((2, 7, 6))
        k = np.zeros((2, 2, 3, 3))
        k[0, 0, 1, 1] = k[1, 1, 1, 1] = 1.0
        for d in (1, 3, 5):
            np.testing.assert_array_equal(conv2d_dilated(x, k, d), x)

    def test_center_sum(self, rng):
        x = rng.standard_normal((1, 3, 3))
        out = conv2d_dilated(x, np.ones((1, 1, 3, 3)), 1)
        assert out[0, 1, 1] == pytest.approx(x.sum(), abs=1e-12)

    def test_zero_kernel(self, rng):
        assert not conv2d_dilated(rng.standard_normal((2, 4, 4)), np.zeros((3, 2, 3, 3)), 3).any()

    @pytest.mark.parametrize("dilation", [1, 2, 3, 5])
    def test_matches_scalar_loops(self, rng, dilation):
        x = rng.standard_normal((3, 7, 8))
        k = rng.standard_normal((2, 3, 3, 3))
        np.testing.assert_allclose(conv2d_dilated(x, k, dilation), conv_oracle(x, k, dilation), atol=1e-12)

    def test_five_tap_kernel(self, rng):
        x = rng.standard_normal((1, 9, 9))
        k = rng.standard_normal((1, 1, 5, 5))
        np.testing.assert_allclose(conv2d_dilated(x, k, 2), conv_oracle(x, k, 2), atol=1e-12)

    def test_even_kernel_rejected(self):
        with pytest.raises(ConfigError):
            conv2d_dilated(np.ones((1, 4, 4)), np.ones((1, 1, 2, 2)))

    def test_linearity(self, rng):
        x, y = rng.standard_normal((2, 2, 6, 6))
        k = rng.standard_normal((3, 2, 3, 3))
        np.testing.assert_allclose(conv2d_dilated(x + y, k, 3),
                                   conv2d_dilated(x, k, 3) + conv2d_dilated(y, k, 3), atol=1e-6)

    @pytest.mark.parametrize("dilation", [1, 3, 5])
    def test_gradcheck(self, rng, dilation):
        x = rng.standard_normal((2, 6, 5))
        k = rng.standard_normal((3, 2, 3, 3))

        def fwd(x, k):
            return conv2d_dilated(x, k, dilation), (x, k)

        def bwd(cache, d):
            return list(conv2d_dilated_backward(*cache, dilation, d))

        assert gradcheck(fwd, bwd, [x, k]).max_error < 1e-7


class TestGradcheck:
    def test_linear_exact(self):
        rep = gradcheck(lambda x: (3 * x, None), lambda _, d: [3 * d], [np.array([0.5, -2.0])])
        assert rep.max_error < 1e-9
        assert rep.passed

    def test_matmul_both_operands(self, rng):
        a = rng.standard_normal((3, 4))
        b = rng.standard_normal((4, 2))
        rep = gradcheck(lambda a, b: (matmul(a, b), (a, b)),
                        lambda c, d: [d @ c[1].T, c[0].T @ d], [a, b])
        assert rep.max_error < 1e-7

    def test_detects_wrong_gradient(self):
        rep = gradcheck(lambda x: (x ** 2, x), lambda x, d: [x * d], [np.array([1.0, 2.0])])
        assert not rep.passed

    def test_plain_sum_scalarization(self):
        rep = gradcheck(lambda x: (x ** 2, x), lambda x, d: [2 * x * d], [np.array([1.0, 2.0])],
                        cotangent="ones")
        assert rep.passed

    def test_non_finite_input(self):
        with pytest.raises(NumericError):
            gradcheck(lambda x: (x, None), lambda _, d: [d], [np.array([np.nan])])

    def test_non_finite_output(self):
        with pytest.raises(NumericError), np.errstate(invalid="ignore"):
            gradcheck(lambda x: (np.log(x), None), lambda _, d: [d], [np.array([-1.0])])

    def test_sampled_coordinates(self, rng):
        x = rng.standard_normal(500)
        rep = gradcheck(lambda x: (np.sin(x), x), lambda x, d: [np.cos(x) * d], [x], max_coords=20)
        assert rep.passed

    def test_relative_error_floor(self):
        assert relative_error(np.zeros(3), np.full(3, 1e-14)) < 1e-5


def test_rng_is_reproducible():
    assert np.array_equal(make_rng(7).standard_normal(5), make_rng(7).standard_normal(5))
    # PCG64 stream is fixed by numpy's stability policy
    assert make_rng(0).integers(0, 2**32) == make_rng(0).integers(0, 2**32)
