"""
Unit tests for the toy network and its optimizer in `src.toynet`.

Tests:
- Output shapes for even and odd input sizes and the minimum-size check.
- Zero parameters give an all-zero feature map.
- End-to-end gradient check on a 16x16 image in double precision.
- He initialisation scale and linearity of backward in the upstream gradient.
- Momentum SGD recurrence, bias decay exemption and the non-finite gradient check.
"""

import numpy as np
import pytest
from src.lib.core import Dims, FeatureMap
from src.losses.functional import pixel_loss
from src.losses.labels import PixelLabelMap
from src.toynet.network import (
    Architecture,
    NetParams,
    argmax_labels,
    backward,
    forward,
    init_params,
    predict,
    to_network_input,
)
from src.toynet.optimizer import OptimizerState, momentum_update, sgd_step
from src.lib.exceptions import (
    CacheMismatchError,
    ImageTooSmallError,
    InvalidArchitectureError,
    NonFiniteGradientError,
)


@pytest.fixture
def small_arch():
    return Architecture(num_classes=3, widths=(4, 6), dtype="float64")


@pytest.mark.parametrize("h, w", [(8, 8), (16, 16), (9, 13), (24, 11)])
def test_forward_keeps_spatial_size(small_arch, h, w):
    params = init_params(small_arch, 0)
    image = np.random.default_rng(1).uniform(-0.5, 0.5, size=(h, w, 3))
    f, cache = forward(params, image)
    assert f.dims == Dims(h, w)
    assert f.channels == 4
    grads = backward(params, cache, FeatureMap(f.dims, np.ones_like(f.values)))
    assert {name: g.shape for name, g in grads.items()} == small_arch.tensor_shapes()


@pytest.mark.parametrize("shape", [(7, 16, 3), (16, 4, 3), (16, 16), (16, 16, 4)])
def test_forward_rejects_bad_input(small_arch, shape):
    with pytest.raises(ImageTooSmallError):
        forward(init_params(small_arch, 0), np.zeros(shape))


def test_zero_parameters_give_zero_scores(small_arch):
    zeros = {name: np.zeros(shape) for name, shape in small_arch.tensor_shapes().items()}
    f, _ = forward(NetParams(small_arch, zeros), np.random.default_rng(2).uniform(-0.5, 0.5, (10, 10, 3)))
    assert not f.values.any()


def test_init_is_deterministic(small_arch):
    first, second = init_params(small_arch, 42), init_params(small_arch, 42)
    for name in first.names():
        np.testing.assert_array_equal(first.tensors[name], second.tensors[name])
        if name.endswith(".bias"):
            assert not first.tensors[name].any()


def test_end_to_end_gradient_check(small_arch):
    """
    Sampled parameter gradients of pixel_loss(forward(image)) against central differences.
    """
    rng = np.random.default_rng(3)
    params = init_params(small_arch, 4)
    image = rng.uniform(-0.5, 0.5, size=(16, 16, 3))
    labels = PixelLabelMap(Dims(16, 16), rng.integers(0, 4, size=256))

    def loss_of(p):
        f, cache = forward(p, image)
        return pixel_loss(f, labels), cache

    result, cache = loss_of(params)
    grads = backward(params, cache, result.grad)
    step = 1e-6
    for name in params.names():
        tensor = params.tensors[name]
        for flat in rng.choice(tensor.size, size=min(5, tensor.size), replace=False):
            index = np.unravel_index(flat, tensor.shape)
            up, down = params.copy(), params.copy()
            up.tensors[name][index] += step
            down.tensors[name][index] -= step
            numeric = (loss_of(up)[0].value - loss_of(down)[0].value) / (2 * step)
            analytic = grads[name][index]
            scale = max(abs(numeric), abs(analytic), 1e-3)
            assert abs(numeric - analytic) / scale < 1e-3, name


def test_backward_rejects_foreign_cache(small_arch):
    params = init_params(small_arch, 0)
    f, cache = forward(params, np.zeros((8, 8, 3)))
    other = init_params(Architecture(num_classes=2, widths=(4, 6), dtype="float64"), 0)
    with pytest.raises(CacheMismatchError):
        backward(other, cache, FeatureMap.zeros(f.dims, 3))
    with pytest.raises(CacheMismatchError):
        backward(params, cache, FeatureMap.zeros(Dims(10, 8), 4))


def test_argmax_ties_go_to_lowest_channel():
    f = FeatureMap(Dims(1, 3), np.array([[1.0, 1.0, 0.0], [0.0, 2.0, 2.0], [0.0, 0.0, 0.0]]))
    assert argmax_labels(f).values.tolist() == [0, 1, 0]


def test_predict_labels_are_in_range(small_arch):
    image = np.random.default_rng(5).integers(0, 256, size=(12, 12, 3), dtype=np.uint8)
    labels = predict(init_params(small_arch, 1), to_network_input(image))
    assert labels.values.min() >= 0 and labels.values.max() <= 3


def test_network_input_scaling():
    scaled = to_network_input(np.array([[[0, 255, 51]]], dtype=np.uint8))
    np.testing.assert_allclose(scaled, [[[-0.5, 0.5, -0.3]]])


@pytest.mark.parametrize("kwargs", [
    {"num_classes": 0},
    {"num_classes": 2, "widths": (4,)},
    {"num_classes": 2, "dtype": "float16"},
])
def test_architecture_validation(kwargs):
    with pytest.raises(InvalidArchitectureError):
        Architecture(**kwargs)


def test_architecture_round_trips_through_dict(small_arch):
    assert Architecture.from_dict(small_arch.to_dict()) == small_arch


def test_momentum_recurrence():
    w, buf = momentum_update(np.array(1.0), np.array(1.0), np.array(0.0), lr=0.1, momentum=0.9, weight_decay=0.0)
    assert float(buf) == pytest.approx(1.0) and float(w) == pytest.approx(0.9)
    w, buf = momentum_update(w, np.array(1.0), buf, lr=0.1, momentum=0.9, weight_decay=0.0)
    assert float(buf) == pytest.approx(1.9) and float(w) == pytest.approx(0.71)


def test_sgd_step_decays_weights_only(small_arch):
    params = init_params(small_arch, 0)
    params.tensors["conv1.bias"][:] = 1.0
    grads = {name: np.zeros_like(t) for name, t in params.tensors.items()}
    opt = OptimizerState.for_params(params, lr=0.1, momentum=0.9, weight_decay=0.5)
    new_params, new_opt = sgd_step(params, grads, opt)
    np.testing.assert_allclose(new_params.tensors["conv1.bias"], 1.0)
    np.testing.assert_allclose(new_params.tensors["conv1.weight"], params.tensors["conv1.weight"] * 0.95)
    np.testing.assert_allclose(new_opt.buffers["conv1.weight"], 0.5 * params.tensors["conv1.weight"])


def test_sgd_step_rejects_non_finite_gradient(small_arch):
    params = init_params(small_arch, 0)
    grads = {name: np.zeros_like(t) for name, t in params.tensors.items()}
    grads["conv2.weight"][0, 0, 0, 0] = np.nan
    with pytest.raises(NonFiniteGradientError, match="conv2.weight"):
        sgd_step(params, grads, OptimizerState.for_params(params))


def test_he_init_scale():
    """
    Every default layer with at least 1000 weights has a sample std within 20% of
    sqrt(2 / fan_in).
    """
    arch = Architecture(num_classes=4)
    params = init_params(arch, 8)
    checked = 0
    for layer in arch.layers():
        weight = params.weight(layer.name)
        if weight.size < 1000:
            continue
        expected = np.sqrt(2.0 / layer.fan_in)
        assert abs(float(np.std(weight)) / expected - 1.0) < 0.2, layer.name
        checked += 1
    assert checked >= 2


def test_backward_is_linear_in_the_upstream_gradient(small_arch):
    """
    Asserts:
        - A zero upstream gradient gives zero gradients everywhere.
        - backward(a * g1 + b * g2) equals a * backward(g1) + b * backward(g2).
    """
    rng = np.random.default_rng(12)
    params = init_params(small_arch, 5)
    f, cache = forward(params, rng.uniform(-0.5, 0.5, size=(10, 12, 3)))
    zero = backward(params, cache, FeatureMap.zeros(f.dims, f.channels))
    assert all(not g.any() for g in zero.values())

    g1, g2 = rng.normal(size=f.values.shape), rng.normal(size=f.values.shape)
    a, b = 0.7, -2.5
    combined = backward(params, cache, FeatureMap(f.dims, a * g1 + b * g2))
    first = backward(params, cache, FeatureMap(f.dims, g1))
    second = backward(params, cache, FeatureMap(f.dims, g2))
    for name in params.names():
        np.testing.assert_allclose(combined[name], a * first[name] + b * second[name], rtol=1e-9, atol=1e-12)
