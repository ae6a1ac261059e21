"""Dense multi-layer perceptron with explicit traces and residual-driven backprop.

The network always ends in a single sigmoid output unit, so predictions are
probabilities of the positive class.  Backpropagation is driven by an
externally supplied residual vector d(loss)/d(prediction), which lets callers
train against a loss evaluated on quantities the node never computed itself
(e.g. the mean of two peers' prediction vectors).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, TrainingDivergedError

PROB_EPS = 1e-7  # clamp for cross-entropy logs and their derivatives


# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------

def _sigmoid(a: np.ndarray) -> np.ndarray:
    # split by sign to avoid overflow in exp
    out = np.empty_like(a, dtype=np.float64)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ea = np.exp(a[~pos])
    out[~pos] = ea / (1.0 + ea)
    return out


def _sigmoid_deriv(a: np.ndarray, out: np.ndarray) -> np.ndarray:
    return out * (1.0 - out)


def _relu(a: np.ndarray) -> np.ndarray:
    return np.maximum(a, 0.0)


def _relu_deriv(a: np.ndarray, out: np.ndarray) -> np.ndarray:
    return (a > 0.0).astype(np.float64)


def _tanh(a: np.ndarray) -> np.ndarray:
    return np.tanh(a)


def _tanh_deriv(a: np.ndarray, out: np.ndarray) -> np.ndarray:
    return 1.0 - out * out


def _linear(a: np.ndarray) -> np.ndarray:
    return a


def _linear_deriv(a: np.ndarray, out: np.ndarray) -> np.ndarray:
    return np.ones_like(a)


# name -> (value fn, derivative fn taking (pre_activation, output))
ACTIVATIONS: dict[str, tuple[Callable, Callable]] = {
    "sigmoid": (_sigmoid, _sigmoid_deriv),
    "relu": (_relu, _relu_deriv),
    "tanh": (_tanh, _tanh_deriv),
    "linear": (_linear, _linear_deriv),
}

LOSSES = ("squared_error", "cross_entropy")


def _check_activation(name: str) -> str:
    if name not in ACTIVATIONS:
        raise ConfigurationError(
            f"unknown activation {name!r}; expected one of {sorted(ACTIVATIONS)}"
        )
    return name


def _check_loss(kind: str) -> str:
    if kind not in LOSSES:
        raise ConfigurationError(f"unknown loss {kind!r}; expected one of {LOSSES}")
    return kind


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LayerSpec:
    """Shape and activation of one dense layer."""

    in_units: int
    out_units: int
    activation: str

    def __post_init__(self) -> None:
        if self.in_units < 1 or self.out_units < 1:
            raise ConfigurationError(
                f"layer dimensions must be >= 1, got {self.in_units}x{self.out_units}"
            )
        _check_activation(self.activation)


@dataclass
class MlpModel:
    """Weights and biases for a stack of dense layers.

    ``weights[k]`` has shape ``(out_units, in_units)`` and ``biases[k]`` shape
    ``(out_units,)``.  The final layer is a single sigmoid unit.
    """

    layers: list[LayerSpec]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def input_width(self) -> int:
        return self.layers[0].in_units

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def flat_params(self) -> np.ndarray:
        """All parameters concatenated into one vector (weights then bias per layer)."""
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def copy(self) -> "MlpModel":
        return MlpModel(
            layers=list(self.layers),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )


def validate_layer_stack(spec: Sequence[LayerSpec]) -> None:
    if not spec:
        raise ConfigurationError("model needs at least one layer")
    for k in range(1, len(spec)):
        if spec[k].in_units != spec[k - 1].out_units:
            raise ConfigurationError(
                f"layer {k} expects {spec[k].in_units} inputs but layer {k - 1} "
                f"produces {spec[k - 1].out_units} outputs"
            )
    last = spec[-1]
    if last.out_units != 1 or last.activation != "sigmoid":
        raise ConfigurationError(
            "output layer must be a single sigmoid unit, got "
            f"{last.out_units} x {last.activation!r}"
        )


def init_model(spec: Sequence[LayerSpec], seed) -> MlpModel:
    """Build a model with weights uniform on [-1/sqrt(fan_in), +1/sqrt(fan_in)].

    Biases start at zero.  Deterministic given ``seed`` (anything accepted by
    ``np.random.default_rng``).
    """
    validate_layer_stack(spec)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for layer in spec:
        bound = 1.0 / np.sqrt(layer.in_units)
        weights.append(
            rng.uniform(-bound, bound, size=(layer.out_units, layer.in_units))
        )
        biases.append(np.zeros(layer.out_units))
    return MlpModel(layers=list(spec), weights=weights, biases=biases)


def mlp_spec(n_inputs: int, hidden_units: int, hidden_activation: str) -> list[LayerSpec]:
    """One hidden layer feeding a single sigmoid output unit."""
    return [
        LayerSpec(n_inputs, hidden_units, hidden_activation),
        LayerSpec(hidden_units, 1, "sigmoid"),
    ]


# ---------------------------------------------------------------------------
# forward
# ---------------------------------------------------------------------------

@dataclass
class ForwardTrace:
    """Per-layer pre-activations and outputs for a batch of examples.

    ``outputs[0]`` is the input batch; ``outputs[k]`` and
    ``pre_activations[k - 1]`` belong to layer ``k`` (1-based as usual for
    hidden/output layers).  ``predictions`` is the sigmoid output column.
    """

    pre_activations: list[np.ndarray]
    outputs: list[np.ndarray]

    @property
    def n_examples(self) -> int:
        return self.outputs[0].shape[0]

    @property
    def predictions(self) -> np.ndarray:
        return self.outputs[-1][:, 0]

    @property
    def prediction(self) -> float:
        if self.n_examples != 1:
            raise ValueError("trace holds a batch; use .predictions")
        return float(self.outputs[-1][0, 0])


def batch_forward(model: MlpModel, X: np.ndarray) -> ForwardTrace:
    """Run the feed-forward recurrence over a batch, keeping every intermediate."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-d batch, got shape {X.shape}")
    if X.shape[1] != model.input_width:
        raise ValueError(
            f"input has {X.shape[1]} features but model expects {model.input_width}"
        )
    outputs = [X]
    pre_activations = []
    for layer, w, b in zip(model.layers, model.weights, model.biases):
        a = outputs[-1] @ w.T + b
        fn, _ = ACTIVATIONS[layer.activation]
        pre_activations.append(a)
        outputs.append(fn(a))
    return ForwardTrace(pre_activations=pre_activations, outputs=outputs)


def forward(model: MlpModel, x: np.ndarray) -> ForwardTrace:
    """Forward pass for a single example (1-d feature vector)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-d feature vector, got shape {x.shape}")
    return batch_forward(model, x[None, :])


def batch_predict(model: MlpModel, X: np.ndarray) -> np.ndarray:
    """Predicted probabilities for each row of ``X``."""
    return batch_forward(model, X).predictions


# ---------------------------------------------------------------------------
# losses and residuals
# ---------------------------------------------------------------------------

def compute_loss(kind: str, y: np.ndarray, yhat: np.ndarray) -> float:
    """Summed loss over the batch.

    squared_error: 0.5 * sum (y - yhat)^2
    cross_entropy: -sum [y ln yhat + (1 - y) ln (1 - yhat)], with yhat clamped
    away from {0, 1}.
    """
    _check_loss(kind)
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.shape != yhat.shape:
        raise ValueError(f"length mismatch: y has shape {y.shape}, yhat {yhat.shape}")
    if kind == "squared_error":
        d = y - yhat
        return float(0.5 * np.dot(d, d))
    p = np.clip(yhat, PROB_EPS, 1.0 - PROB_EPS)
    return float(-np.sum(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


def loss_residual(kind: str, y: np.ndarray, yhat: np.ndarray) -> np.ndarray:
    """Elementwise d(loss)/d(yhat) for the summed loss."""
    _check_loss(kind)
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.shape != yhat.shape:
        raise ValueError(f"length mismatch: y has shape {y.shape}, yhat {yhat.shape}")
    if kind == "squared_error":
        return yhat - y
    p = np.clip(yhat, PROB_EPS, 1.0 - PROB_EPS)
    return (p - y) / (p * (1.0 - p))


# ---------------------------------------------------------------------------
# backward and updates
# ---------------------------------------------------------------------------

@dataclass
class Gradients:
    """Loss gradients, shaped exactly like the model parameters."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]


def backward(model: MlpModel, trace: ForwardTrace, output_residual: np.ndarray) -> Gradients:
    """Chain-rule gradients of the loss implied by ``output_residual``.

    ``output_residual[i]`` must equal d(loss)/d(prediction_i).  Gradients are
    summed over the batch.
    """
    residual = np.asarray(output_residual, dtype=np.float64)
    n_layers = len(model.layers)
    if len(trace.pre_activations) != n_layers or len(trace.outputs) != n_layers + 1:
        raise ValueError("trace does not match model depth")
    if residual.shape != (trace.n_examples,):
        raise ValueError(
            f"residual has shape {residual.shape}, expected ({trace.n_examples},)"
        )
    for k, layer in enumerate(model.layers):
        if trace.pre_activations[k].shape[1] != layer.out_units:
            raise ValueError(f"trace layer {k} width does not match model")

    grad_w = [np.empty(0)] * n_layers
    grad_b = [np.empty(0)] * n_layers
    # delta at the output unit: residual * sigma'(a_L)
    delta = residual[:, None]
    for k in range(n_layers - 1, -1, -1):
        _, deriv = ACTIVATIONS[model.layers[k].activation]
        delta = delta * deriv(trace.pre_activations[k], trace.outputs[k + 1])
        grad_w[k] = delta.T @ trace.outputs[k]
        grad_b[k] = delta.sum(axis=0)
        if k > 0:
            delta = delta @ model.weights[k]
    return Gradients(weights=grad_w, biases=grad_b)


def sgd_step(model: MlpModel, grads: Gradients, learning_rate: float) -> MlpModel:
    """In-place gradient-descent update: p <- p - learning_rate * grad(p)."""
    if learning_rate < 0:
        raise ConfigurationError(f"learning_rate must be >= 0, got {learning_rate}")
    for w, gw in zip(model.weights, grads.weights):
        if w.shape != gw.shape:
            raise ValueError(f"gradient shape {gw.shape} does not match weights {w.shape}")
        if not np.all(np.isfinite(gw)):
            raise TrainingDivergedError("non-finite weight gradient")
    for b, gb in zip(model.biases, grads.biases):
        if b.shape != gb.shape:
            raise ValueError(f"gradient shape {gb.shape} does not match biases {b.shape}")
        if not np.all(np.isfinite(gb)):
            raise TrainingDivergedError("non-finite bias gradient")
    for w, gw in zip(model.weights, grads.weights):
        w -= learning_rate * gw
    for b, gb in zip(model.biases, grads.biases):
        b -= learning_rate * gb
    return model


# ---------------------------------------------------------------------------
# single-model trainer (the centralized baseline loop)
# ---------------------------------------------------------------------------

@dataclass
class FitTrace:
    """Record of a full-batch gradient-descent fit."""

    n_rounds: int
    losses: list[float]        # loss at the start of each round
    rms_history: list[float]   # parameter RMS after each round
    stopped_early: bool


def weight_rms(model: MlpModel) -> float:
    """L2 norm of the flattened parameter vector divided by sqrt(dimension)."""
    flat = model.flat_params()
    return float(np.linalg.norm(flat) / np.sqrt(flat.size))


def fit_full_batch(
    model: MlpModel,
    X: np.ndarray,
    y: np.ndarray,
    *,
    loss: str,
    learning_rate: float,
    max_rounds: int,
    stop_tol: float,
    grad_reduction: str = "mean",
    minibatch: int | None = None,
    rng: np.random.Generator | None = None,
) -> FitTrace:
    """Train one model by gradient descent, stopping when weights stabilize.

    Stops after a round when the max absolute parameter change falls below
    ``stop_tol``, or after ``max_rounds``.  ``grad_reduction="mean"`` divides
    the gradient by the batch size; ``"sum"`` uses the raw summed gradient.
    The model is mutated in place.
    """
    if max_rounds < 1:
        raise ConfigurationError(f"max_rounds must be >= 1, got {max_rounds}")
    if grad_reduction not in ("mean", "sum"):
        raise ConfigurationError(f"grad_reduction must be 'mean' or 'sum', got {grad_reduction!r}")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if minibatch is not None and rng is None:
        rng = np.random.default_rng(0)

    losses: list[float] = []
    rms_history: list[float] = []
    stopped = False
    n_rounds = 0
    for t in range(1, max_rounds + 1):
        if minibatch is not None and minibatch < len(y):
            rows = rng.choice(len(y), size=minibatch, replace=False)
            Xb, yb = X[rows], y[rows]
        else:
            Xb, yb = X, y
        before = model.flat_params()
        trace = batch_forward(model, Xb)
        value = compute_loss(loss, yb, trace.predictions)
        if not np.isfinite(value):
            raise TrainingDivergedError(f"non-finite loss at round {t}")
        residual = loss_residual(loss, yb, trace.predictions)
        if grad_reduction == "mean" and len(yb) > 0:
            residual = residual / len(yb)
        sgd_step(model, backward(model, trace, residual), learning_rate)
        losses.append(value)
        rms_history.append(weight_rms(model))
        n_rounds = t
        delta = float(np.max(np.abs(model.flat_params() - before)))
        if delta < stop_tol:
            stopped = True
            break
    return FitTrace(n_rounds=n_rounds, losses=losses, rms_history=rms_history, stopped_early=stopped)
