import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgesync.nnkernels import (
    FCLayer,
    fc_backprop_step,
    fc_forward,
    fc_gradients,
    fc_layer_forward,
    fc_max_parallelism,
    fc_neuron,
    fc_schedule,
    fc_subtasks,
)

from gradcheck import max_relative_error, numeric_gradients, random_two_layer


def test_neuron_examples():
    assert fc_neuron([1, 2], [0.5, 0.5], 1.0) == 2.5
    assert fc_neuron([3.0, -7.0], [0.0, 0.0], 0.0, "sigmoid") == 0.5
    assert fc_neuron([-1.0], [1.0], 0.0, "relu") == 0.0


def test_neuron_length_mismatch():
    with pytest.raises(ValueError):
        fc_neuron([1, 2], [1], 0.0)


def test_identity_layer_adds_bias(backend):
    x = np.array([1.5, -2.0, 4.0])
    b = np.array([0.25, 0.5, -1.0])
    out = fc_layer_forward(FCLayer(np.eye(3), b), x)
    assert np.array_equal(out, x + b)


def test_layer_matches_neuron(backend, rng):
    layer = FCLayer(rng.normal(size=(5, 4)), rng.normal(size=5), "sigmoid")
    x = rng.normal(size=4)
    out = fc_layer_forward(layer, x)
    ref = [fc_neuron(x, layer.weights[i], layer.bias[i], "sigmoid") for i in range(5)]
    np.testing.assert_allclose(out, ref, rtol=1e-15)


def test_zero_size_input():
    with pytest.raises(ValueError):
        fc_layer_forward(FCLayer(np.zeros((2, 0)), np.zeros(2)), np.zeros(0))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40), st.sampled_from(["identity", "sigmoid", "relu"]),
       st.integers(0, 2**32 - 1))
def test_layer_parallel_bitwise(n_in, n_out, act, seed):
    rng = np.random.default_rng(seed)
    layer = FCLayer(rng.normal(size=(n_out, n_in)), rng.normal(size=n_out), act)
    x = rng.normal(size=n_in)
    ref = fc_layer_forward(layer, x, 1)
    for w in (2, 4, 8, 16):
        assert fc_layer_forward(layer, x, w).tobytes() == ref.tobytes()


def test_max_parallelism():
    assert fc_max_parallelism([4, 8, 3]) == 8
    assert fc_max_parallelism([1]) == 1
    assert fc_max_parallelism([5, 5, 5]) == 5
    with pytest.raises(ValueError):
        fc_max_parallelism([])


@given(st.lists(st.integers(1, 30), min_size=1, max_size=5))
def test_max_parallelism_is_widest_task_count(sizes):
    rng = np.random.default_rng(0)
    layers, fan_in = [], 3
    for n in sizes:
        layers.append(FCLayer(rng.normal(size=(n, fan_in)), np.zeros(n)))
        fan_in = n
    assert max(len(fc_subtasks(l)) for l in layers) == fc_max_parallelism(sizes)
    # with one worker per neuron every sub-task runs on its own chunk
    widest = fc_max_parallelism(sizes)
    plan = fc_schedule(layers, widest)
    assert max(len(chunks) for chunks in plan) == widest


def test_backprop_exact_fit_is_fixed_point(rng):
    layer = FCLayer(rng.normal(size=(3, 4)), rng.normal(size=3))
    x = rng.normal(size=4)
    target = fc_forward([layer], x)[-1]
    (new,) = fc_backprop_step([layer], x, target, lr=0.5)
    assert np.array_equal(new.weights, layer.weights)
    assert np.array_equal(new.bias, layer.bias)


def test_backprop_single_identity_layer_by_hand():
    w = np.array([[1.0, 2.0], [0.0, -1.0]])
    b = np.array([0.5, 0.0])
    x = np.array([3.0, 1.0])
    t = np.array([4.0, 1.0])
    # y = [5.5, -1.0]; error = y - t = [1.5, -2.0]
    (gw, gb), = fc_gradients([FCLayer(w, b)], x, t)
    assert np.array_equal(gw, np.outer([1.5, -2.0], x))
    assert np.array_equal(gb, [1.5, -2.0])
    (new,) = fc_backprop_step([FCLayer(w, b)], x, t, lr=0.1)
    np.testing.assert_allclose(new.weights, w - 0.1 * np.outer([1.5, -2.0], x), rtol=0, atol=1e-15)


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        params, acts, x, t = random_two_layer(rng)
        layers = [FCLayer(w, b, a) for (w, b), a in zip(params, acts)]
        worst = max(worst, max_relative_error(fc_gradients(layers, x, t),
                                              numeric_gradients(params, acts, x, t)))
    assert worst < 1e-4


def test_relu_gradient_away_from_kink():
    w1 = np.array([[1.0, -1.0], [2.0, 0.5]])
    b1 = np.array([0.3, -5.0])  # second neuron is dead
    w2 = np.array([[0.7, 1.3]])
    b2 = np.array([0.1])
    x, t = np.array([1.0, 0.2]), np.array([0.0])
    params = [(w1, b1), (w2, b2)]
    acts = ["relu", "identity"]
    layers = [FCLayer(w, b, a) for (w, b), a in zip(params, acts)]
    err = max_relative_error(fc_gradients(layers, x, t), numeric_gradients(params, acts, x, t))
    assert err < 1e-6
    assert math.isclose(fc_gradients(layers, x, t)[0][1][1], 0.0)
