import io

import numpy as np
import pytest

from classbench.benchmark.logic import ConfigurationError, DatasetError, DatasetParseError, TrainingError
from classbench.benchmark.logic.data import normalize
from classbench.benchmark.logic.mlp import (MlpConfig, Network, backprop_step, forward, gradients, init_network,
                                            load_network, loss, mean_squared_error, predict_proba, save_network,
                                            train, train_many)
from classbench.benchmark.tests.common import gaussian_blobs, make_dataset

XOR = make_dataset([[0, 0, 0], [0, 1, 1], [1, 0, 1], [1, 1, 0]], 'nnc')


def test_config_validation():
    assert MlpConfig().label == 'MLP'
    assert MlpConfig(learning_rate=0.5, momentum=0.5, hidden_units=4, epochs=10).parameters() == \
        'learning_rate=0.5 momentum=0.5 hidden_units=4 epochs=10'

    for arguments in [{'learning_rate': 0}, {'learning_rate': 1.5}, {'momentum': 1}, {'momentum': -0.1},
                      {'hidden_units': -1}, {'epochs': 0}]:
        with pytest.raises(ConfigurationError):
            MlpConfig(**arguments)

    # the limits themselves are fine
    MlpConfig(learning_rate=1, momentum=0, hidden_units=0)


def test_init_network():
    cfg = MlpConfig(hidden_units=3, seed=4)
    net = init_network(5, 2, cfg)

    assert [w.shape for w in net.weights] == [(5, 3), (3, 2)]
    assert [b.shape for b in net.biases] == [(3,), (2,)]
    assert net.inputs == 5 and net.hidden_units == 3 and net.classes == 2
    assert np.abs(net.parameters()).max() <= 0.5
    assert all(not d.any() for d in net.weight_deltas)

    np.testing.assert_array_equal(net.parameters(), init_network(5, 2, cfg).parameters())
    assert not np.array_equal(net.parameters(), init_network(5, 2, MlpConfig(hidden_units=3, seed=5)).parameters())

    direct = init_network(5, 2, MlpConfig(hidden_units=0))
    assert len(direct.weights) == 1
    assert direct.hidden_units == 0

    with pytest.raises(ConfigurationError):
        init_network(0, 2, cfg)
    with pytest.raises(ConfigurationError):
        init_network(3, 1, cfg)


def numeric_gradient(net: Network, x, target, layer, position, bias, h=1e-5):
    def shifted(amount):
        moved = net.copy()
        (moved.biases if bias else moved.weights)[layer][position] += amount
        return loss(moved, x, target)

    return (shifted(h) - shifted(-h)) / (2 * h)


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(2024)
    for case in range(100):
        inputs, hidden, classes = int(rng.integers(1, 7)), int(rng.integers(0, 6)), int(rng.integers(2, 5))
        net = init_network(inputs, classes, MlpConfig(hidden_units=hidden, seed=case))
        # move away from the small initial weights so every layer matters
        net = Network(weights=[w * 4 for w in net.weights], biases=[b * 4 for b in net.biases])
        x = rng.random(inputs)
        target = np.eye(classes)[rng.integers(classes)]

        weight_gradients, bias_gradients = gradients(net, x, target)
        for layer, (wg, bg) in enumerate(zip(weight_gradients, bias_gradients)):
            for analytic, bias in [(wg, False), (bg, True)]:
                for position in np.ndindex(analytic.shape):
                    numeric = numeric_gradient(net, x, target, layer, position, bias)
                    difference = abs(analytic[position] - numeric)
                    assert difference <= 1e-6 * max(abs(analytic[position]), abs(numeric)) + 1e-10, \
                        f"case {case}, layer {layer}, {'bias' if bias else 'weight'} {position}"


def test_backprop_step_uses_momentum():
    net = init_network(3, 2, MlpConfig(hidden_units=2, seed=1))
    x, target = np.array([0.2, 0.7, 0.1]), np.array([0.0, 1.0])
    alpha, beta = 0.3, 0.2

    first_gradients, _ = gradients(net, x, target)
    first = backprop_step(net, x, target, alpha, beta)
    # no previous update yet: a plain gradient step
    np.testing.assert_allclose(first.weight_deltas[0], -alpha * first_gradients[0])
    np.testing.assert_allclose(first.weights[0], net.weights[0] - alpha * first_gradients[0])

    second_gradients, second_bias_gradients = gradients(first, x, target)
    second = backprop_step(first, x, target, alpha, beta)
    for layer in range(2):
        expected = -alpha * second_gradients[layer] + beta * first.weight_deltas[layer]
        np.testing.assert_allclose(second.weight_deltas[layer], expected)
        np.testing.assert_allclose(second.weights[layer], first.weights[layer] + expected)
        expected_bias = -alpha * second_bias_gradients[layer] + beta * first.bias_deltas[layer]
        np.testing.assert_allclose(second.biases[layer], first.biases[layer] + expected_bias)

    # the step does not touch its input
    assert not net.weight_deltas[0].any()


def test_backprop_step_lowers_the_error():
    net = init_network(2, 2, MlpConfig(hidden_units=2, seed=3))
    x, target = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    before = loss(net, x, target)
    for _ in range(20):
        net = backprop_step(net, x, target, 0.3, 0.0)
    assert loss(net, x, target) < before


def test_all_zero_weights_give_one_half():
    for hidden in [0, 3]:
        net = init_network(4, 3, MlpConfig(hidden_units=hidden))
        net = Network(weights=[np.zeros_like(w) for w in net.weights], biases=[np.zeros_like(b) for b in net.biases])
        np.testing.assert_array_equal(forward(net, [0.3, -2.0, 7.5, 1.0]).weights, [0.5, 0.5, 0.5])


def test_forward_matches_plain_numpy():
    def sigmoid(z):
        return 1 / (1 + np.exp(-z))

    rng = np.random.default_rng(5)
    for hidden in [0, 1, 4]:
        net = init_network(3, 4, MlpConfig(hidden_units=hidden, seed=hidden))
        net = Network(weights=[w * 3 for w in net.weights], biases=[b * 3 for b in net.biases])
        for x in rng.normal(size=(10, 3)):
            expected = x
            for w, b in zip(net.weights, net.biases):
                expected = sigmoid(expected @ w + b)
            np.testing.assert_allclose(forward(net, x).weights, expected, rtol=0, atol=1e-12)


def test_target_equal_to_the_output_changes_nothing():
    net = init_network(3, 2, MlpConfig(hidden_units=2, seed=8))
    x = np.array([0.4, 0.1, 0.9])
    target = np.array(forward(net, x).weights)

    stepped = backprop_step(net, x, target, 0.3, 0.2)
    np.testing.assert_array_equal(stepped.parameters(), net.parameters())
    assert not any(d.any() for d in stepped.weight_deltas + stepped.bias_deltas)


def test_small_steps_without_hidden_units_never_raise_the_error():
    d = normalize(gaussian_blobs(n_per_class=15, classes=2, spread=0.2, seed=4))
    cfg = MlpConfig(learning_rate=0.01, momentum=0, hidden_units=0, epochs=60, seed=2)

    errors = [mean_squared_error(init_network(2, 2, cfg), d)]
    train_many([d], [cfg], on_epoch=lambda epoch, networks: errors.append(mean_squared_error(networks[0], d)))
    assert all(later <= earlier + 1e-12 for earlier, later in zip(errors, errors[1:]))
    assert errors[-1] < errors[0]


def test_separable_classes_are_learned_without_hidden_units():
    d = normalize(gaussian_blobs(n_per_class=20, classes=2, spread=0.1, seed=6))
    net = train(d, MlpConfig(learning_rate=0.3, momentum=0.2, hidden_units=0, epochs=200, seed=1))
    predictions = np.argmax(predict_proba(net, d.predictors()), axis=1)
    np.testing.assert_array_equal(predictions, d.labels())


def test_xor_is_learned():
    cfgs = [MlpConfig(learning_rate=0.3, momentum=0.2, hidden_units=2, epochs=5000, seed=seed) for seed in range(10)]
    networks = train_many([XOR] * 10, cfgs)

    solved = 0
    for net in networks:
        predictions = np.argmax(predict_proba(net, XOR.predictors()), axis=1)
        solved += int(np.array_equal(predictions, XOR.labels()))
    assert solved >= 8


def test_train_many_matches_train():
    blobs = normalize(gaussian_blobs(n_per_class=10))
    shorter = normalize(gaussian_blobs(n_per_class=7, seed=1))
    cfgs = [MlpConfig(hidden_units=3, epochs=15, seed=11), MlpConfig(learning_rate=0.5, momentum=0.4,
                                                                     hidden_units=3, epochs=15, seed=12)]

    together = train_many([blobs, shorter], cfgs)
    alone = [train(blobs, cfgs[0]), train(shorter, cfgs[1])]
    for a, b in zip(together, alone):
        np.testing.assert_allclose(a.parameters(), b.parameters(), rtol=1e-12, atol=1e-15)

    with pytest.raises(ConfigurationError):
        train_many([blobs, shorter], [cfgs[0], MlpConfig(hidden_units=2, epochs=15)])
    with pytest.raises(ConfigurationError):
        train_many([blobs], cfgs)


def test_training_is_deterministic_and_learns():
    d = normalize(gaussian_blobs())
    cfg = MlpConfig(learning_rate=0.3, momentum=0.2, hidden_units=3, epochs=100, seed=7)

    epochs_seen = []
    net = train_many([d], [cfg], on_epoch=lambda epoch, networks: epochs_seen.append(epoch))[0]
    assert epochs_seen == list(range(1, 101))
    np.testing.assert_array_equal(net.parameters(), train(d, cfg).parameters())

    probabilities = predict_proba(net, d.predictors())
    np.testing.assert_allclose(probabilities.sum(axis=1), 1)
    assert np.mean(np.argmax(probabilities, axis=1) == d.labels()) >= 0.9
    assert mean_squared_error(net, d) < mean_squared_error(init_network(2, 3, cfg), d)

    assert forward(net, d.predictors()[0]).predicted == int(np.argmax(probabilities[0]))


def test_training_preconditions():
    nominal = make_dataset([[0, 0.5, 0], [1, 0.2, 1]], 'cnc', names=['colour', 'size', 'class'])
    with pytest.raises(TrainingError, match='colour'):
        train(nominal, MlpConfig(epochs=1))

    missing = make_dataset([[np.nan, 0.5, 0], [1, 0.2, 1]], 'nnc', names=['weight', 'size', 'class'])
    with pytest.raises(TrainingError, match='weight'):
        train(missing, MlpConfig(epochs=1))

    net = init_network(2, 2, MlpConfig())
    with pytest.raises(DatasetError):
        forward(net, [0.1, np.nan])
    with pytest.raises(DatasetError):
        forward(net, [0.1, 0.2, 0.3])


def test_save_and_load_network():
    net = train(normalize(gaussian_blobs(n_per_class=5)), MlpConfig(hidden_units=2, epochs=5, seed=3))
    stream = io.StringIO()
    save_network(net, stream)

    text = stream.getvalue()
    assert text.startswith('classbench-network 1\nshape 2 2 3\n')

    loaded = load_network(io.StringIO(text))
    np.testing.assert_array_equal(loaded.parameters(), net.parameters())

    with pytest.raises(DatasetParseError) as e:
        load_network(io.StringIO('something else\n'))
    assert e.value.line == 1

    lines = text.splitlines()
    # truncated, the shape line is all there is
    with pytest.raises(DatasetParseError) as e:
        load_network(io.StringIO('\n'.join(lines[:2])))
    assert e.value.line == 2
    with pytest.raises(DatasetParseError) as e:
        load_network(io.StringIO(lines[0]))
    assert e.value.line == 1
    with pytest.raises(DatasetParseError, match='parameters'):
        load_network(io.StringIO('\n'.join(lines[:-1])))

    with pytest.raises(DatasetParseError) as e:
        load_network(io.StringIO('\n'.join(lines[:5] + ['abc'] + lines[6:])))
    assert e.value.line == 6
    assert 'abc' in str(e.value)

    with pytest.raises(DatasetParseError) as e:
        load_network(io.StringIO('\n'.join([lines[0], 'shape 2 two 3'] + lines[2:])))
    assert e.value.line == 2
