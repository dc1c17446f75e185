"""Tests for the differentiable operators."""
import numpy as np
import pytest

from app.exceptions import ConfigurationError, DimensionError
from app.tensor import (
    Tensor,
    activation,
    backward,
    conv1d,
    depthwise_conv1d,
    l2_normalize,
    layer_norm,
    log_softmax,
    matmul,
    mean_axis,
    reverse_time,
    softmax,
    softplus,
    silu,
    stack,
    where,
)


class TestMatmul:
    """Test matrix products."""

    def test_identity(self, rng):
        """Test I x A == A."""
        a = rng.normal(size=(2, 3))
        out = matmul(Tensor(np.eye(2)), Tensor(a))
        np.testing.assert_allclose(out.data, a, rtol=1e-6)

    def test_hand_arithmetic(self):
        """Test a small product by hand."""
        out = matmul(Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([[1.0], [1.0]]))
        np.testing.assert_array_equal(out.data, [[3.0], [7.0]])

    def test_sum_gradient(self, rng):
        """Test d sum(ab) / da == ones @ b^T."""
        a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        b = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
        backward(matmul(a, b).sum())
        np.testing.assert_allclose(a.grad, np.ones((3, 2)) @ b.data.T, rtol=1e-5)

    def test_inner_dimension_mismatch(self):
        """Test mismatched inner dimensions raise."""
        with pytest.raises(DimensionError):
            matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


class TestConvolution:
    """Test depthwise and full convolutions."""

    def test_delta_kernel_is_identity(self, rng):
        """Test a centred delta kernel reproduces its input."""
        x = rng.normal(size=(5, 3))
        kernel = np.zeros((3, 3))
        kernel[1] = 1.0
        out = depthwise_conv1d(Tensor(x), Tensor(kernel), Tensor(np.zeros(3)))
        np.testing.assert_allclose(out.data, x, rtol=1e-6)

    def test_ones_hand_arithmetic(self):
        """Test zero padding at both edges."""
        out = depthwise_conv1d(Tensor(np.ones((4, 1))), Tensor(np.ones((3, 1))), Tensor(np.zeros(1)))
        np.testing.assert_array_equal(out.data[:, 0], [2.0, 3.0, 3.0, 2.0])

    def test_even_width_rejected(self):
        """Test even kernels are rejected for same padding."""
        with pytest.raises(ConfigurationError):
            depthwise_conv1d(Tensor(np.ones((4, 1))), Tensor(np.ones((2, 1))), Tensor(np.zeros(1)))

    def test_causal_ignores_future(self, rng):
        """Test changing later steps leaves earlier causal outputs unchanged."""
        x = rng.normal(size=(6, 2))
        kernel, bias = Tensor(rng.normal(size=(4, 2))), Tensor(np.zeros(2))
        before = depthwise_conv1d(Tensor(x), kernel, bias, causal=True).data
        x[4:] += 10.0
        after = depthwise_conv1d(Tensor(x), kernel, bias, causal=True).data
        np.testing.assert_array_equal(before[:4], after[:4])
        assert not np.allclose(before[4:], after[4:])

    def test_width_one_conv_is_linear_map(self, rng):
        """Test a width-1 conv1d equals a token-wise matrix product."""
        x = rng.normal(size=(2, 5, 3))
        w = rng.normal(size=(1, 3, 4))
        out = conv1d(Tensor(x), Tensor(w), Tensor(np.zeros(4)))
        np.testing.assert_allclose(out.data, x @ w[0], rtol=1e-5, atol=1e-6)

    def test_conv1d_channel_mismatch(self):
        """Test the input width must match the weight."""
        with pytest.raises(ConfigurationError):
            conv1d(Tensor(np.ones((4, 2))), Tensor(np.ones((1, 3, 4))), Tensor(np.zeros(4)))


class TestLayerNorm:
    """Test layer normalization."""

    def test_constant_row_is_zero(self):
        """Test zero variance maps to zeros."""
        out = layer_norm(Tensor(np.full((1, 4), 3.0)), Tensor(np.ones(4)), Tensor(np.zeros(4)))
        np.testing.assert_allclose(out.data, 0.0, atol=1e-6)

    def test_two_values(self, float64):
        """Test [1, 3] normalizes to [-1, 1]."""
        out = layer_norm(Tensor([[1.0, 3.0]]), Tensor(np.ones(2)), Tensor(np.zeros(2)), eps=1e-12)
        np.testing.assert_allclose(out.data, [[-1.0, 1.0]], atol=1e-9)

    def test_row_statistics(self, rng):
        """Test rows have zero mean and unit deviation."""
        out = layer_norm(Tensor(rng.normal(2.0, 5.0, size=(6, 16))), Tensor(np.ones(16)), Tensor(np.zeros(16))).data
        assert np.all(np.abs(out.mean(axis=-1)) < 1e-6)
        assert np.all(np.abs(out.std(axis=-1) - 1.0) < 1e-3)

    def test_empty_axis(self):
        """Test an empty feature axis raises."""
        with pytest.raises(DimensionError):
            layer_norm(Tensor(np.ones((2, 0))), Tensor(np.ones(0)), Tensor(np.zeros(0)))


class TestActivations:
    """Test elementwise nonlinearities."""

    def test_softplus_zero(self):
        """Test softplus(0) == ln 2."""
        assert softplus(Tensor([0.0])).data[0] == pytest.approx(np.log(2.0), abs=1e-6)

    def test_silu_zero(self):
        """Test silu(0) == 0."""
        assert silu(Tensor([0.0])).data[0] == 0.0

    def test_exp_gradient_equals_output(self, float64):
        """Test d exp(x)/dx == exp(x)."""
        x = Tensor([-1.0, 0.5, 2.0], requires_grad=True)
        out = activation(x, "exp")
        backward(out.sum())
        np.testing.assert_allclose(x.grad, out.data)

    def test_exp_is_clamped(self):
        """Test large arguments stay finite."""
        assert np.isfinite(activation(Tensor([500.0]), "exp").data).all()

    def test_unknown_kind(self):
        """Test unknown activations are configuration errors."""
        with pytest.raises(ConfigurationError):
            activation(Tensor([0.0]), "relu6")


class TestReductions:
    """Test softmax, means and normalization."""

    def test_uniform_softmax(self):
        """Test equal logits give a uniform distribution."""
        np.testing.assert_allclose(softmax(Tensor(np.zeros((1, 4)))).data, 0.25)

    def test_softmax_limit(self):
        """Test a large gap saturates."""
        out = softmax(Tensor([[50.0, -50.0]])).data
        np.testing.assert_allclose(out, [[1.0, 0.0]], atol=1e-6)

    def test_softmax_shift_invariance(self, rng):
        """Test adding a constant leaves softmax unchanged."""
        x = rng.normal(size=(3, 5))
        np.testing.assert_allclose(softmax(Tensor(x)).data, softmax(Tensor(x + 7.0)).data, atol=1e-6)

    def test_rows_sum_to_one(self, rng):
        """Test every row sums to one."""
        out = softmax(Tensor(rng.normal(size=(4, 6)) * 10)).data
        np.testing.assert_allclose(out.sum(axis=-1), 1.0, atol=1e-6)
        assert np.all(out >= 0)

    def test_log_softmax_matches_log_of_softmax(self, rng, float64):
        """Test log_softmax agrees with log(softmax)."""
        x = Tensor(rng.normal(size=(3, 5)))
        np.testing.assert_allclose(log_softmax(x).data, np.log(softmax(x).data), atol=1e-12)

    def test_mean_gradient(self):
        """Test the mean distributes 1/n."""
        x = Tensor(np.ones((2, 4)), requires_grad=True)
        backward(mean_axis(x, axis=1).sum())
        np.testing.assert_allclose(x.grad, 0.25)

    def test_mean_empty_axis(self):
        """Test an empty axis raises."""
        with pytest.raises(DimensionError):
            mean_axis(Tensor(np.ones((2, 0))), axis=1)

    def test_l2_normalize_zero_vector(self):
        """Test zero vectors stay zero."""
        out = l2_normalize(Tensor([[0.0, 0.0], [3.0, 4.0]])).data
        np.testing.assert_allclose(out, [[0.0, 0.0], [0.6, 0.8]], atol=1e-6)


class TestStructural:
    """Test reversal, stacking and selection."""

    def test_reverse_time(self):
        """Test the time axis is flipped and the gradient flipped back."""
        x = Tensor(np.arange(6.0).reshape(3, 2), requires_grad=True)
        out = reverse_time(x)
        np.testing.assert_array_equal(out.data, [[4, 5], [2, 3], [0, 1]])
        backward((out * np.array([[1.0, 1.0], [0.0, 0.0], [0.0, 0.0]])).sum())
        np.testing.assert_array_equal(x.grad, [[0, 0], [0, 0], [1, 1]])

    def test_stack_shape_mismatch(self):
        """Test stacking unequal shapes raises."""
        with pytest.raises(DimensionError):
            stack([Tensor(np.ones(2)), Tensor(np.ones(3))], axis=0)

    def test_where_routes_gradient(self):
        """Test where sends each gradient to the selected source only."""
        a = Tensor([1.0, 2.0], requires_grad=True)
        b = Tensor([3.0, 4.0], requires_grad=True)
        out = where(np.array([True, False]), a, b)
        np.testing.assert_array_equal(out.data, [1.0, 4.0])
        backward(out.sum())
        np.testing.assert_array_equal(a.grad, [1.0, 0.0])
        np.testing.assert_array_equal(b.grad, [0.0, 1.0])
