"""
Multilayer perceptron with at most one hidden layer of sigmoid units, trained per instance with
backpropagation and momentum (the generalized delta rule).

There is one sigmoid output unit per class. Training minimizes the squared error against the one-hot class
vector; at prediction time the outputs are divided by their sum to give class probabilities.

Networks of the same shape can be trained side by side (train_many): their parameters are stacked on a
leading axis and every step updates all of them at once. Cross-validation uses this to train the networks
of all folds together, each network sees exactly the updates it would get when trained on its own.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, TextIO, Tuple

import numpy as np
from scipy.special import expit

from classbench.benchmark.logic import ConfigurationError, DatasetError, DatasetParseError, TrainingError
from classbench.benchmark.logic.data import Dataset
from classbench.benchmark.logic.knn import ClassDistribution

log = logging.getLogger(__package__)

NETWORK_FORMAT = 'classbench-network 1'
INITIAL_WEIGHT_RANGE = 0.5
# second entry of the seed sequence for the shuffling stream, the first stream initializes weights
SHUFFLE_STREAM = 1


@dataclass(frozen=True)
class MlpConfig:
    learning_rate: float = 0.3
    momentum: float = 0.2
    hidden_units: int = 2
    epochs: int = 500
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.learning_rate <= 1:
            raise ConfigurationError(f"The learning rate must be in (0, 1], got {self.learning_rate}.")
        if not 0 <= self.momentum < 1:
            raise ConfigurationError(f"The momentum must be in [0, 1), got {self.momentum}.")
        if int(self.hidden_units) != self.hidden_units or self.hidden_units < 0:
            raise ConfigurationError(f"Hidden units must be 0 or more, got {self.hidden_units}.")
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ConfigurationError(f"Need at least one epoch, got {self.epochs}.")

    @property
    def label(self) -> str:
        return 'MLP'

    def parameters(self) -> str:
        return (f"learning_rate={self.learning_rate} momentum={self.momentum} hidden_units={self.hidden_units} "
                f"epochs={self.epochs}")


@dataclass
class Network:
    """
    Layer weights (inputs x outputs) and biases, input to hidden to output. Without hidden units there is a
    single input to output layer. The delta buffers hold the previous update of every parameter.
    """
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    weight_deltas: List[np.ndarray] = field(default_factory=list)
    bias_deltas: List[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if not self.weight_deltas:
            self.weight_deltas = [np.zeros_like(w) for w in self.weights]
        if not self.bias_deltas:
            self.bias_deltas = [np.zeros_like(b) for b in self.biases]

        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape[1] != b.shape[0] or self.weight_deltas[i].shape != w.shape \
                    or self.bias_deltas[i].shape != b.shape:
                raise TrainingError(f"Layer {i} has inconsistent weight, bias and delta shapes.")
            if i and self.weights[i - 1].shape[1] != w.shape[0]:
                raise TrainingError(f"Layer {i} does not connect to layer {i - 1}.")

    @property
    def inputs(self) -> int:
        return self.weights[0].shape[0]

    @property
    def classes(self) -> int:
        return self.weights[-1].shape[1]

    @property
    def hidden_units(self) -> int:
        return self.weights[0].shape[1] if len(self.weights) > 1 else 0

    def copy(self) -> 'Network':
        return Network(weights=[w.copy() for w in self.weights], biases=[b.copy() for b in self.biases],
                       weight_deltas=[d.copy() for d in self.weight_deltas],
                       bias_deltas=[d.copy() for d in self.bias_deltas])

    def parameters(self) -> np.ndarray:
        """All weights and biases as one flat vector, layer by layer: weights row-major, then biases."""
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(self.weights, self.biases)])


def _layer_sizes(inputs: int, classes: int, hidden_units: int) -> List[int]:
    return [inputs, hidden_units, classes] if hidden_units else [inputs, classes]


def init_network(inputs: int, classes: int, cfg: MlpConfig) -> Network:
    """Weights and biases uniform in [-0.5, 0.5], drawn layer by layer from a generator seeded with cfg.seed."""
    if inputs < 1:
        raise ConfigurationError(f"A network needs at least one input, got {inputs}.")
    if classes < 2:
        raise ConfigurationError(f"A network needs at least two classes, got {classes}.")

    rng = np.random.default_rng(cfg.seed)
    sizes = _layer_sizes(inputs, classes, cfg.hidden_units)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        weights.append(rng.uniform(-INITIAL_WEIGHT_RANGE, INITIAL_WEIGHT_RANGE, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-INITIAL_WEIGHT_RANGE, INITIAL_WEIGHT_RANGE, size=fan_out))
    return Network(weights=weights, biases=biases)


# --- stacked arithmetic, every array has a leading axis F over networks ---


def _activations(weights: Sequence[np.ndarray], biases: Sequence[np.ndarray], x: np.ndarray) -> List[np.ndarray]:
    activations = [x]
    for w, b in zip(weights, biases):
        activations.append(expit(np.einsum('fi,fio->fo', activations[-1], w) + b))
    return activations


def _gradients(weights, biases, x, target) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """dE/dw and dE/db of E = 1/2 sum (o - t)^2 for one instance per network."""
    activations = _activations(weights, biases, x)
    output = activations[-1]
    delta = (output - target) * output * (1 - output)

    weight_gradients: List[np.ndarray] = [np.empty(0)] * len(weights)
    bias_gradients: List[np.ndarray] = [np.empty(0)] * len(weights)
    for layer in reversed(range(len(weights))):
        below = activations[layer]
        weight_gradients[layer] = below[:, :, np.newaxis] * delta[:, np.newaxis, :]
        bias_gradients[layer] = delta
        if layer:
            delta = np.einsum('fio,fo->fi', weights[layer], delta) * below * (1 - below)

    return weight_gradients, bias_gradients


def _stack(networks: Sequence[Network]) -> Tuple[List[np.ndarray], ...]:
    layers = range(len(networks[0].weights))
    return (
        [np.stack([n.weights[i] for n in networks]) for i in layers],
        [np.stack([n.biases[i] for n in networks]) for i in layers],
        [np.stack([n.weight_deltas[i] for n in networks]) for i in layers],
        [np.stack([n.bias_deltas[i] for n in networks]) for i in layers],
    )


def _unstack(weights, biases, weight_deltas, bias_deltas) -> List[Network]:
    return [
        Network(weights=[w[f].copy() for w in weights], biases=[b[f].copy() for b in biases],
                weight_deltas=[d[f].copy() for d in weight_deltas], bias_deltas=[d[f].copy() for d in bias_deltas])
        for f in range(weights[0].shape[0])
    ]


def _check_input(net: Network, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (net.inputs,):
        raise DatasetError(f"The network expects {net.inputs} inputs, got shape {x.shape}.")
    if np.isnan(x).any():
        raise DatasetError("The network can not handle missing inputs, impute them first.")
    return x


# --- single network operations ---


def forward(net: Network, x: np.ndarray) -> ClassDistribution:
    x = _check_input(net, x)
    weights, biases, _, _ = _stack([net])
    output = _activations(weights, biases, x[np.newaxis, :])[-1][0]
    return ClassDistribution(weights=output)


def predict_proba(net: Network, inputs: np.ndarray) -> np.ndarray:
    """Normalized outputs for every row of an N x inputs matrix."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    if inputs.shape[1] != net.inputs:
        raise DatasetError(f"The network expects {net.inputs} inputs, got {inputs.shape[1]}.")
    output = inputs
    for w, b in zip(net.weights, net.biases):
        output = expit(output @ w + b)
    return output / output.sum(axis=1, keepdims=True)


def loss(net: Network, x: np.ndarray, target: np.ndarray) -> float:
    x = _check_input(net, x)
    weights, biases, _, _ = _stack([net])
    output = _activations(weights, biases, x[np.newaxis, :])[-1][0]
    return float(0.5 * np.sum((output - target) ** 2))


def gradients(net: Network, x: np.ndarray, target: np.ndarray) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    x = _check_input(net, x)
    weights, biases, _, _ = _stack([net])
    weight_gradients, bias_gradients = _gradients(weights, biases, x[np.newaxis, :],
                                                  np.asarray(target, dtype=float)[np.newaxis, :])
    return [g[0] for g in weight_gradients], [g[0] for g in bias_gradients]


def backprop_step(net: Network, x: np.ndarray, target: np.ndarray, learning_rate: float,
                  momentum: float) -> Network:
    """
    One generalized delta rule update: delta(t) = -learning_rate * dE/dw + momentum * delta(t-1) for every
    weight and bias. Returns a new network, the delta buffers of which hold delta(t).
    """
    weight_gradients, bias_gradients = gradients(net, x, target)
    updated = net.copy()
    for i, (wg, bg) in enumerate(zip(weight_gradients, bias_gradients)):
        updated.weight_deltas[i] = -learning_rate * wg + momentum * net.weight_deltas[i]
        updated.bias_deltas[i] = -learning_rate * bg + momentum * net.bias_deltas[i]
        updated.weights[i] = net.weights[i] + updated.weight_deltas[i]
        updated.biases[i] = net.biases[i] + updated.bias_deltas[i]
    return updated


def mean_squared_error(net: Network, d: Dataset) -> float:
    """Mean over instances of the squared error of the raw outputs against the one-hot classes."""
    inputs, targets = _training_matrices(d)
    output = inputs
    for w, b in zip(net.weights, net.biases):
        output = expit(output @ w + b)
    return float(np.mean(np.sum((output - targets) ** 2, axis=1)))


# --- training ---


def _training_matrices(d: Dataset) -> Tuple[np.ndarray, np.ndarray]:
    for attribute in d.predictive_schema():
        if attribute.is_nominal:
            raise TrainingError(f"Attribute {attribute.name} is nominal, apply nominal_to_binary first.")
        if np.isnan(d.values[:, attribute.index]).any():
            raise TrainingError(f"Attribute {attribute.name} has missing values, impute them first.")

    inputs = d.predictors()
    targets = np.eye(d.n_classes)[d.labels()]
    return inputs, targets


def train(d: Dataset, cfg: MlpConfig) -> Network:
    return train_many([d], [cfg])[0]


def train_many(datasets: Sequence[Dataset], cfgs: Sequence[MlpConfig],
               on_epoch: Optional[Callable[[int, List[Network]], None]] = None) -> List[Network]:
    """
    Train one network per (dataset, config) pair. All pairs must give the same network shape and epoch count;
    learning rate, momentum and seed may differ. Every epoch visits the instances of each training set in an
    order shuffled by that network's own generator. Networks with a shorter training set sit out the trailing
    steps of an epoch.

    :param on_epoch: called after every epoch with the epoch number (from 1) and the networks so far.
    """
    if len(datasets) != len(cfgs) or not datasets:
        raise ConfigurationError("Need one config per dataset and at least one dataset.")

    matrices = [_training_matrices(d) for d in datasets]
    inputs, classes = matrices[0][0].shape[1], matrices[0][1].shape[1]
    shapes = {(x.shape[1], t.shape[1], cfg.hidden_units, cfg.epochs) for (x, t), cfg in zip(matrices, cfgs)}
    if len(shapes) != 1:
        raise ConfigurationError(f"Networks trained together must share their shape and epochs, got {shapes}.")
    if inputs < 1:
        raise TrainingError("There are no input attributes to train on.")

    networks = [init_network(inputs, classes, cfg) for cfg in cfgs]
    weights, biases, weight_deltas, bias_deltas = _stack(networks)

    count = len(datasets)
    sizes = np.array([x.shape[0] for x, _ in matrices])
    longest = int(sizes.max())
    padded_inputs = np.zeros((count, longest, inputs))
    padded_targets = np.zeros((count, longest, classes))
    for f, (x, t) in enumerate(matrices):
        padded_inputs[f, :x.shape[0]] = x
        padded_targets[f, :t.shape[0]] = t

    learning_rate = np.array([cfg.learning_rate for cfg in cfgs])
    momentum = np.array([cfg.momentum for cfg in cfgs])
    shufflers = [np.random.default_rng([cfg.seed, SHUFFLE_STREAM]) for cfg in cfgs]
    networks_index = np.arange(count)

    for epoch in range(1, cfgs[0].epochs + 1):
        orders = np.full((count, longest), -1)
        for f, shuffler in enumerate(shufflers):
            orders[f, :sizes[f]] = shuffler.permutation(sizes[f])

        for step in range(longest):
            picked = orders[:, step]
            active = picked >= 0
            rows = np.where(active, picked, 0)
            weight_gradients, bias_gradients = _gradients(weights, biases, padded_inputs[networks_index, rows],
                                                          padded_targets[networks_index, rows])
            everyone = active.all()

            for layer in range(len(weights)):
                weight_change = (-learning_rate[:, None, None] * weight_gradients[layer]
                                 + momentum[:, None, None] * weight_deltas[layer])
                bias_change = -learning_rate[:, None] * bias_gradients[layer] + momentum[:, None] * bias_deltas[layer]
                if not everyone:
                    weight_change = np.where(active[:, None, None], weight_change, weight_deltas[layer])
                    bias_change = np.where(active[:, None], bias_change, bias_deltas[layer])
                    weights[layer] += np.where(active[:, None, None], weight_change, 0)
                    biases[layer] += np.where(active[:, None], bias_change, 0)
                else:
                    weights[layer] += weight_change
                    biases[layer] += bias_change
                weight_deltas[layer] = weight_change
                bias_deltas[layer] = bias_change

        if on_epoch:
            on_epoch(epoch, _unstack(weights, biases, weight_deltas, bias_deltas))

    log.debug(f"Trained {count} networks for {cfgs[0].epochs} epochs on up to {longest} instances.")
    return _unstack(weights, biases, weight_deltas, bias_deltas)


# --- persistence ---


def save_network(net: Network, stream: TextIO) -> None:
    """Versioned flat text: a format line, a shape line, then every parameter on its own line."""
    stream.write(f"{NETWORK_FORMAT}\n")
    stream.write(f"shape {net.inputs} {net.hidden_units} {net.classes}\n")
    for value in net.parameters():
        stream.write(f"{float(value)!r}\n")


def load_network(stream: TextIO) -> Network:
    numbered = [(number, line.strip()) for number, line in enumerate(stream.read().splitlines(), start=1)
                if line.strip()]
    if not numbered or numbered[0][1] != NETWORK_FORMAT:
        raise DatasetParseError(numbered[0][0] if numbered else 1,
                                f"not a network file, expected '{NETWORK_FORMAT}'.")
    if len(numbered) < 2:
        raise DatasetParseError(numbered[0][0], "the network file ends before its shape line.")

    number, line = numbered[1]
    shape = line.split()
    if len(shape) != 4 or shape[0] != 'shape' or not all(value.isdigit() for value in shape[1:]):
        raise DatasetParseError(number, "expected 'shape <inputs> <hidden> <classes>'.")
    inputs, hidden_units, classes = (int(value) for value in shape[1:])

    parameters = []
    for number, line in numbered[2:]:
        try:
            parameters.append(float(line))
        except ValueError:
            raise DatasetParseError(number, f"'{line}' is not a number.")
    values = np.array(parameters)

    sizes = _layer_sizes(inputs, classes, hidden_units)
    expected = sum(fan_in * fan_out + fan_out for fan_in, fan_out in zip(sizes, sizes[1:]))
    if values.size != expected:
        raise DatasetParseError(numbered[-1][0], f"a {inputs}-{hidden_units}-{classes} network has {expected} "
                                                 f"parameters, the file holds {values.size}.")

    weights, biases = [], []
    position = 0
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        weights.append(values[position:position + fan_in * fan_out].reshape(fan_in, fan_out))
        position += fan_in * fan_out
        biases.append(values[position:position + fan_out].copy())
        position += fan_out
    try:
        return Network(weights=weights, biases=biases)
    except TrainingError as e:
        raise DatasetParseError(number, str(e))
