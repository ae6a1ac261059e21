"""Scikit-learn compatible classifiers wrapping the training engines.

``MlpClassifier`` trains one network on the full feature matrix (the
centralized baseline).  ``GossipMlpClassifier`` partitions the columns over a
node graph at fit time, trains by gossip rounds, and predicts with the
per-node probability average.  Both follow the estimator contract
(``get_params``/``set_params``/``clone``), so they compose with pipelines,
grid search, and cross-validation.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .errors import ConfigurationError
from .gossip import (
    GossipTrainingParams,
    build_node_states,
    build_topology,
    distributed_predict,
    run_training,
)
from .mlp import batch_predict, fit_full_batch, init_model, mlp_spec
from .partition import make_partition, take_columns


def _binary_targets(y, classes):
    if len(classes) != 2:
        raise ValueError(f"expected exactly 2 classes, got {list(classes)}")
    return (y == classes[1]).astype(np.float64)


class MlpClassifier(ClassifierMixin, BaseEstimator):
    """Single-hidden-layer MLP trained by full-batch gradient descent.

    Training stops when the largest absolute weight change in a round drops
    below ``stop_tol``, or after ``max_rounds``.
    """

    def __init__(
        self,
        hidden_units=50,
        learning_rate=0.1,
        loss="cross_entropy",
        hidden_activation="relu",
        max_rounds=600,
        stop_tol=1e-5,
        grad_reduction="mean",
        minibatch=None,
        random_state=0,
    ):
        self.hidden_units = hidden_units
        self.learning_rate = learning_rate
        self.loss = loss
        self.hidden_activation = hidden_activation
        self.max_rounds = max_rounds
        self.stop_tol = stop_tol
        self.grad_reduction = grad_reduction
        self.minibatch = minibatch
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_ = np.unique(y)
        targets = _binary_targets(y, self.classes_)
        self.n_features_in_ = X.shape[1]
        model = init_model(
            mlp_spec(X.shape[1], self.hidden_units, self.hidden_activation),
            seed=[self.random_state, 0],
        )
        trace = fit_full_batch(
            model,
            X,
            targets,
            loss=self.loss,
            learning_rate=self.learning_rate,
            max_rounds=self.max_rounds,
            stop_tol=self.stop_tol,
            grad_reduction=self.grad_reduction,
            minibatch=self.minibatch,
            rng=np.random.default_rng([self.random_state, 1]),
        )
        self.model_ = model
        self.n_rounds_ = trace.n_rounds
        self.loss_curve_ = trace.losses
        self.rms_history_ = trace.rms_history
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        p = batch_predict(self.model_, X)
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        p = self.predict_proba(X)[:, 1]
        return self.classes_[(p >= 0.5).astype(int)]


class GossipMlpClassifier(ClassifierMixin, BaseEstimator):
    """Consensus MLP ensemble over a node graph with vertical feature shards.

    ``hidden_units`` is the *total* hidden budget; each of the ``n_nodes``
    local networks gets ``hidden_units // n_nodes`` units (at least one).
    Feature columns are split at fit time: a shared subset sized by
    ``overlap_ratio`` goes to every node and the rest is sharded evenly.
    Prediction averages the per-node probabilities.
    """

    def __init__(
        self,
        n_nodes=10,
        hidden_units=50,
        topology="complete",
        topology_degree=None,
        overlap_ratio=0.0,
        learning_rate=0.1,
        loss="cross_entropy",
        hidden_activation="relu",
        max_rounds=600,
        stop_tol=1e-5,
        gossip_grad_scale="half",
        grad_reduction="mean",
        minibatch=None,
        random_state=0,
    ):
        self.n_nodes = n_nodes
        self.hidden_units = hidden_units
        self.topology = topology
        self.topology_degree = topology_degree
        self.overlap_ratio = overlap_ratio
        self.learning_rate = learning_rate
        self.loss = loss
        self.hidden_activation = hidden_activation
        self.max_rounds = max_rounds
        self.stop_tol = stop_tol
        self.gossip_grad_scale = gossip_grad_scale
        self.grad_reduction = grad_reduction
        self.minibatch = minibatch
        self.random_state = random_state

    def _hidden_per_node(self):
        return max(1, int(self.hidden_units) // int(self.n_nodes))

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_ = np.unique(y)
        targets = _binary_targets(y, self.classes_)
        self.n_features_in_ = X.shape[1]
        if self.n_nodes < 1:
            raise ConfigurationError(f"n_nodes must be >= 1, got {self.n_nodes}")

        self.partition_ = make_partition(
            X.shape[1], self.n_nodes, self.overlap_ratio, seed=self.random_state
        )
        self.topology_ = build_topology(
            self.topology,
            self.n_nodes,
            seed=[self.random_state, self.n_nodes + 1],
            degree=self.topology_degree,
        )
        nodes = build_node_states(
            self.partition_.assignments,
            self._hidden_per_node(),
            self.hidden_activation,
            seed=self.random_state,
        )
        node_features = [
            take_columns(X, a) for a in self.partition_.assignments
        ]
        params = GossipTrainingParams(
            loss=self.loss,
            learning_rate=self.learning_rate,
            gossip_grad_scale=self.gossip_grad_scale,
            grad_reduction=self.grad_reduction,
            stop_tol=self.stop_tol,
            max_rounds=self.max_rounds,
            minibatch=self.minibatch,
        )
        scheduler = np.random.default_rng([self.random_state, self.n_nodes])
        self.nodes_, self.round_logs_ = run_training(
            nodes, self.topology_, node_features, targets, params, scheduler
        )
        self.n_rounds_ = len(self.round_logs_)
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "nodes_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        node_features = [take_columns(X, a) for a in self.partition_.assignments]
        p = distributed_predict(self.nodes_, node_features)
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        p = self.predict_proba(X)[:, 1]
        return self.classes_[(p >= 0.5).astype(int)]
