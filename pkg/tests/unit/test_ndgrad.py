"""
Unit-тесты для ndgrad: операции, градиенты, граф, оптимизатор.
"""

import numpy as np
import pytest

from core.exceptions import GraphError, ShapeError
from ndgrad import AdamW, Graph, Tensor, grad_check, nn, ops, resample, warmup_cosine_lr

TOL = 1e-5


def _away_from_zero(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.uniform(0.2, 1.0, size=shape) * rng.choice([-1.0, 1.0], size=shape)


class TestElementwise:
    """Поэлементные операции и бродкастинг."""

    def test_add_mul_broadcast_gradients(self, rng: np.random.Generator) -> None:
        a = rng.standard_normal((2, 3))
        b = rng.standard_normal(3)
        assert grad_check(lambda x, y: x * y + x - y, [a, b]) < TOL

    @pytest.mark.parametrize(
        "op",
        [ops.relu, ops.sigmoid, ops.tanh, ops.square, lambda t: ops.leaky_relu(t, 0.2)],
    )
    def test_unary_gradients(self, op, rng: np.random.Generator) -> None:
        assert grad_check(op, _away_from_zero(rng, (3, 4))) < TOL

    def test_log_gradient(self, rng: np.random.Generator) -> None:
        assert grad_check(ops.log, rng.uniform(0.5, 2.0, size=(5,))) < TOL

    def test_log_rejects_non_positive(self) -> None:
        with pytest.raises(ShapeError):
            ops.log(Tensor([1.0, 0.0]))

    def test_clamp_forward_and_mask(self) -> None:
        x = Tensor([-1.0, 0.5, 2.0], requires_grad=True)
        y = ops.clamp(x, 0.0, 1.0)
        y.backward(np.ones(3))

        assert np.array_equal(y.data, [0.0, 0.5, 1.0])
        assert np.array_equal(x.grad, [0.0, 1.0, 0.0])

    def test_ndarray_on_left_yields_tensor(self) -> None:
        result = np.full(3, 2.0) * Tensor([1.0, 2.0, 3.0])

        assert isinstance(result, Tensor)
        assert np.array_equal(result.data, [2.0, 4.0, 6.0])

    def test_sigmoid_at_zero_is_exact_half(self) -> None:
        assert ops.sigmoid(Tensor(np.zeros(4))).data.tolist() == [0.5] * 4


class TestReductionsAndShape:
    def test_mean_sum_gradients(self, rng: np.random.Generator) -> None:
        x = rng.standard_normal((2, 3, 4))
        assert grad_check(lambda t: ops.mean(t, axis=(1, 2)), x) < TOL
        assert grad_check(lambda t: ops.sum(t, axis=0, keepdims=True), x) < TOL

    def test_concat_and_getitem_gradients(self, rng: np.random.Generator) -> None:
        a = rng.standard_normal((2, 2, 3))
        b = rng.standard_normal((2, 1, 3))
        assert grad_check(lambda x, y: ops.concat([x, y], axis=1)[:, 1:], [a, b]) < TOL

    def test_take_accumulates_repeated_indices(self) -> None:
        x = Tensor(np.arange(3.0), requires_grad=True)
        ops.take(x, np.array([0, 0, 2]), axis=0).backward(np.ones(3))

        assert np.array_equal(x.grad, [2.0, 0.0, 1.0])

    def test_reshape_rejects_incompatible_shape(self) -> None:
        with pytest.raises(ShapeError):
            ops.reshape(Tensor(np.zeros(6)), (4, 2))

    def test_matmul_gradient(self, rng: np.random.Generator) -> None:
        point = [rng.standard_normal((3, 4)), rng.standard_normal((4, 2))]
        assert grad_check(lambda a, b: a @ b, point) < TOL


class TestLayers:
    """Свёртка, нормализация, пулинги."""

    @pytest.mark.parametrize("stride,padding", [(1, "same"), (2, 1), (1, "valid")])
    def test_conv2d_gradients(self, stride: int, padding, rng: np.random.Generator) -> None:
        x = rng.standard_normal((2, 2, 6, 6))
        w = rng.standard_normal((3, 2, 3, 3))
        b = rng.standard_normal(3)

        def conv(a, k, c):
            return nn.conv2d(a, k, c, stride=stride, padding=padding)

        assert grad_check(conv, [x, w, b]) < TOL

    def test_conv2d_result_independent_of_batch(self, rng: np.random.Generator) -> None:
        x = rng.standard_normal((4, 2, 5, 5))
        w = Tensor(rng.standard_normal((3, 2, 3, 3)))
        full = nn.conv2d(Tensor(x), w).data
        single = nn.conv2d(Tensor(x[2:3]), w).data

        assert np.array_equal(full[2:3], single)

    def test_conv2d_channel_mismatch_raises(self) -> None:
        with pytest.raises(ShapeError):
            nn.conv2d(Tensor(np.zeros((1, 2, 4, 4))), Tensor(np.zeros((1, 3, 3, 3))))

    def test_group_norm_gradients(self, rng: np.random.Generator) -> None:
        x = rng.standard_normal((2, 4, 3, 3))
        gamma = rng.uniform(0.5, 1.5, size=4)
        beta = rng.standard_normal(4)
        assert grad_check(lambda a, g, b: nn.group_norm(a, g, b, groups=2), [x, gamma, beta]) < TOL

    def test_group_norm_normalizes_groups(self, rng: np.random.Generator) -> None:
        x = Tensor(rng.standard_normal((1, 4, 5, 5)) * 3.0 + 2.0)
        y = nn.group_norm(x, Tensor(np.ones(4)), Tensor(np.zeros(4)), groups=2)
        y = y.data.reshape(1, 2, -1)

        assert np.allclose(y.mean(axis=2), 0.0, atol=1e-12)
        assert np.allclose(y.std(axis=2), 1.0, atol=1e-3)

    def test_avg_pool_and_upsample_gradients(self, rng: np.random.Generator) -> None:
        x = rng.standard_normal((1, 2, 4, 4))
        assert grad_check(lambda t: nn.avg_pool2d(t, 2), x) < TOL
        assert grad_check(lambda t: nn.upsample_nearest(t, 2), x) < TOL

    def test_reflect_pad_matches_numpy(self, rng: np.random.Generator) -> None:
        x = rng.standard_normal((1, 1, 4, 5))
        padded = nn.pad2d(Tensor(x), 2, 1).data

        assert np.array_equal(padded, np.pad(x, ((0, 0), (0, 0), (2, 2), (1, 1)), mode="reflect"))


class TestTemporalPooling:
    def test_constant_frames_pool_to_the_frame_exactly(self, rng: np.random.Generator) -> None:
        frame = rng.standard_normal((1, 3, 4, 4))
        x = Tensor(np.repeat(frame, 5, axis=0))
        pooled = nn.temporal_avg_pool(x, 4).data

        assert pooled.shape[0] == 2
        assert np.array_equal(pooled, np.repeat(frame, 2, axis=0))

    def test_short_last_group_divides_by_its_size(self) -> None:
        x = Tensor(np.arange(5.0).reshape(5, 1, 1, 1))
        pooled = nn.temporal_avg_pool(x, 2).data.ravel()

        assert np.allclose(pooled, [0.5, 2.5, 4.0])

    def test_pool_and_repeat_gradients(self, rng: np.random.Generator) -> None:
        x = rng.standard_normal((5, 2, 2, 2))
        assert grad_check(lambda t: nn.temporal_repeat(nn.temporal_avg_pool(t, 2), 2, 5), x) < TOL

    def test_repeat_checks_group_count(self) -> None:
        with pytest.raises(ShapeError):
            nn.temporal_repeat(Tensor(np.zeros((3, 1, 1, 1))), 2, 8)


class TestResample:
    def test_same_size_resize_is_identity(self, rng: np.random.Generator) -> None:
        x = rng.random((1, 3, 7, 9))
        assert np.array_equal(resample.bilinear_resize(Tensor(x), 7, 9).data, x)

    def test_resize_preserves_constant(self) -> None:
        x = Tensor(np.full((1, 3, 5, 5), 0.3))
        assert np.allclose(resample.bilinear_resize(x, 13, 8).data, 0.3, atol=1e-12)

    def test_upscale_interpolates_between_half_pixel_centres(self) -> None:
        """Тест: 2×2 → 4×4, столбцы [0, 1] переходят в [0, 0.25, 0.75, 1]."""
        x = Tensor(np.array([[0.0, 1.0], [0.0, 1.0]]).reshape(1, 1, 2, 2))
        out = resample.bilinear_resize(x, 4, 4).data[0, 0]

        def sample(j: int) -> float:
            src = min(max((j + 0.5) * 2 / 4 - 0.5, 0.0), 1.0)
            return 0.0 * (1.0 - src) + 1.0 * src

        expected = [sample(j) for j in range(4)]
        assert np.allclose(expected, [0.0, 0.25, 0.75, 1.0])
        assert np.allclose(out, np.tile(expected, (4, 1)), atol=1e-12)

    @pytest.mark.parametrize("size", [(3, 4), (11, 9)])
    def test_resize_gradient(self, size, rng: np.random.Generator) -> None:
        x = rng.random((1, 2, 6, 5))
        assert grad_check(lambda t: resample.bilinear_resize(t, *size), x) < TOL

    def test_warp_gradient(self, rng: np.random.Generator) -> None:
        h = resample.rotation_homography(17.0, 6, 6)
        assert grad_check(lambda t: resample.warp(t, h), rng.random((1, 1, 6, 6))) < TOL

    def test_identity_homography_is_exact(self, rng: np.random.Generator) -> None:
        x = rng.random((1, 3, 5, 5))
        assert np.array_equal(resample.warp(Tensor(x), np.eye(3)).data, x)

    def test_warp_fills_outside_with_gray(self) -> None:
        shift = np.array([[1.0, 0.0, 100.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        out = resample.warp(Tensor(np.zeros((1, 1, 4, 4))), shift).data

        assert np.allclose(out, 0.5)

    def test_rot90_four_turns_is_identity(self, rng: np.random.Generator) -> None:
        x = Tensor(rng.random((1, 3, 4, 6)))
        out = x
        for _ in range(4):
            out = resample.rot90(out, 1)

        assert np.array_equal(out.data, x.data)

    def test_homography_maps_points(self) -> None:
        src = np.array([[0, 0], [4, 0], [4, 4], [0, 4]], dtype=float)
        dst = np.array([[1, 0], [3, 0], [4, 4], [0, 4]], dtype=float)
        h = resample.homography_from_points(src, dst)
        mapped = h @ np.array([4.0, 0.0, 1.0])

        assert np.allclose(mapped[:2] / mapped[2], [3.0, 0.0])

    def test_crop_out_of_bounds_raises(self) -> None:
        with pytest.raises(ShapeError):
            resample.crop(Tensor(np.zeros((1, 1, 4, 4))), 2, 2, 3, 3)


class TestStraightThrough:
    def test_forward_exact_backward_identity(self, rng: np.random.Generator) -> None:
        x = Tensor(rng.random((2, 3)), requires_grad=True)
        quantize = lambda a: np.round(a * 4.0) / 4.0  # noqa: E731
        y = ops.straight_through(quantize, x)
        seed = rng.standard_normal((2, 3))
        y.backward(seed)

        assert np.array_equal(y.data, quantize(x.data))
        assert np.array_equal(x.grad, seed)

    def test_shape_change_rejected(self) -> None:
        with pytest.raises(ShapeError):
            ops.straight_through(lambda a: a[:1], Tensor(np.zeros((2, 2))))


class TestGraph:
    def test_gradients_only_for_trainable_leaves(self) -> None:
        graph = Graph(lambda x, w: ops.sum(x * w), leaves=["x", "w"], trainable=["w"])
        graph.forward({"x": np.array([1.0, 2.0]), "w": np.array([3.0, 4.0])})
        grads = graph.backward()

        assert set(grads) == {"w"}
        assert np.array_equal(grads["w"], [1.0, 2.0])

    def test_forward_does_not_alias_bindings(self) -> None:
        w = np.array([1.0])
        graph = Graph(lambda w: ops.sum(w * 2.0), leaves=["w"])
        graph.forward({"w": w})
        graph.backward()

        assert w.tolist() == [1.0]

    def test_missing_leaf_raises(self) -> None:
        graph = Graph(lambda x: x, leaves=["x"])
        with pytest.raises(GraphError):
            graph.forward({})

    def test_backward_before_forward_raises(self) -> None:
        with pytest.raises(GraphError):
            Graph(lambda x: x, leaves=["x"]).backward()

    def test_unknown_trainable_raises(self) -> None:
        with pytest.raises(GraphError):
            Graph(lambda x: x, leaves=["x"], trainable=["y"])

    def test_backward_without_grad_raises(self) -> None:
        with pytest.raises(GraphError):
            Tensor([1.0]).backward()

    def test_backward_linear_in_seed(self, rng: np.random.Generator) -> None:
        """Тест: backward(2g) = 2·backward(g) на цепочке conv → norm → resize → sigmoid."""

        def net(x, w, b, gamma, beta):
            y = nn.group_norm(nn.conv2d(x, w, b), gamma, beta, groups=2)
            return ops.sigmoid(resample.bilinear_resize(y, 5, 7))

        graph = Graph(net, leaves=["x", "w", "b", "gamma", "beta"])
        graph.forward(
            {
                "x": rng.standard_normal((2, 2, 6, 6)),
                "w": rng.standard_normal((4, 2, 3, 3)),
                "b": rng.standard_normal(4),
                "gamma": rng.uniform(0.5, 1.5, size=4),
                "beta": rng.standard_normal(4),
            }
        )
        seed = rng.standard_normal((2, 4, 5, 7))
        single = graph.backward(seed)
        double = graph.backward(2.0 * seed)

        for name, grad in single.items():
            assert np.allclose(double[name], 2.0 * grad, rtol=1e-6, atol=1e-12), name

    def test_shared_subexpression_accumulates(self) -> None:
        x = Tensor([3.0], requires_grad=True)
        y = x * x + x
        y.backward()

        assert x.grad.tolist() == [7.0]


class TestOptimizer:
    def test_zero_lr_leaves_params_bit_identical(self, rng: np.random.Generator) -> None:
        params = {"w": rng.standard_normal(5)}
        before = params["w"].copy()
        opt = AdamW(weight_decay=0.01)
        opt.step(params, {"w": rng.standard_normal(5)}, lr=0.0)

        assert np.array_equal(params["w"], before)
        assert opt.step_count == 1

    def test_step_moves_against_gradient(self) -> None:
        params = {"w": np.zeros(2)}
        AdamW(weight_decay=0.0).step(params, {"w": np.array([1.0, -1.0])}, lr=0.1)

        assert params["w"][0] < 0 < params["w"][1]

    def test_state_round_trip(self, rng: np.random.Generator) -> None:
        params = {"w": rng.standard_normal(3)}
        opt = AdamW()
        opt.step(params, {"w": rng.standard_normal(3)}, lr=0.01)
        restored = AdamW()
        restored.load_state_arrays("gen", opt.state_arrays("gen"), opt.step_count)

        assert restored.step_count == 1
        assert np.array_equal(restored.exp_avg["w"], opt.exp_avg["w"])
        assert np.array_equal(restored.exp_avg_sq["w"], opt.exp_avg_sq["w"])

    @pytest.mark.parametrize(
        "step,expected",
        [(0, 0.1), (9, 1.0), (10, 1.0), (110, 0.0)],
    )
    def test_warmup_cosine(self, step: int, expected: float) -> None:
        assert warmup_cosine_lr(step, 1.0, 10, 110) == pytest.approx(expected)

    def test_cosine_midpoint(self) -> None:
        assert warmup_cosine_lr(60, 1.0, 10, 110) == pytest.approx(0.5)
