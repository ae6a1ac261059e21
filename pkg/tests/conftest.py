import numpy as np
import pytest

from gossipmlp.mlp import LayerSpec, batch_forward, init_model


def random_small_model(rng, hidden_activation=None, max_layers=3, max_units=10):
    """A random model with <= max_layers layers and <= max_units per layer."""
    activations = ["sigmoid", "relu", "tanh", "linear"]
    n_layers = int(rng.integers(1, max_layers + 1))
    widths = [int(rng.integers(1, max_units + 1)) for _ in range(n_layers)]
    widths[-1] = 1
    spec = []
    in_units = int(rng.integers(1, max_units + 1))
    for k, out_units in enumerate(widths):
        if k == n_layers - 1:
            act = "sigmoid"
        elif hidden_activation is not None:
            act = hidden_activation
        else:
            act = activations[int(rng.integers(len(activations)))]
        spec.append(LayerSpec(in_units, out_units, act))
        in_units = out_units
    return init_model(spec, seed=rng.integers(2**31))


def relu_kink_safe(model, X, margin=1e-4):
    """True if no ReLU pre-activation sits close enough to 0 to break finite differences."""
    trace = batch_forward(model, X)
    for layer, a in zip(model.layers, trace.pre_activations):
        if layer.activation == "relu" and np.any(np.abs(a) < margin):
            return False
    return True


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
