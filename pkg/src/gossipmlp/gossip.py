"""Synchronous-round gossip training of per-node MLPs.

Each round walks the nodes in id order.  An initiator refreshes its
predictions over its local feature columns, draws a responder uniformly from
its neighbors, and both peers average their prediction vectors.  The loss of
that averaged vector (the gossiped loss) drives backpropagation at *both*
peers, each against its own forward trace; updates apply sequentially, so
later events in a round see earlier updates.  Only prediction vectors and
scalar losses ever cross an edge; feature matrices stay put.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigurationError, TrainingDivergedError
from .mlp import (
    MlpModel,
    backward,
    batch_forward,
    compute_loss,
    init_model,
    loss_residual,
    mlp_spec,
    sgd_step,
    weight_rms,
)

GOSSIP_GRAD_SCALES = {"half": 0.5, "full": 1.0}


# ---------------------------------------------------------------------------
# topology
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Topology:
    """Undirected, connected communication graph over ``m`` nodes."""

    m: int
    adjacency: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if self.m < 1 or len(self.adjacency) != self.m:
            raise ConfigurationError("adjacency size does not match node count")
        for i, nbrs in enumerate(self.adjacency):
            for j in nbrs:
                if j == i:
                    raise ConfigurationError(f"self-loop at node {i}")
                if not 0 <= j < self.m:
                    raise ConfigurationError(f"neighbor {j} of node {i} out of range")
                if i not in self.adjacency[j]:
                    raise ConfigurationError(f"edge {i}-{j} is not symmetric")
        if not self._connected():
            raise ConfigurationError("topology is not connected")

    def _connected(self) -> bool:
        seen = {0}
        queue = deque([0])
        while queue:
            i = queue.popleft()
            for j in self.adjacency[i]:
                if j not in seen:
                    seen.add(j)
                    queue.append(j)
        return len(seen) == self.m

    @property
    def n_edges(self) -> int:
        return sum(len(nbrs) for nbrs in self.adjacency) // 2


def complete_topology(m: int) -> Topology:
    adj = tuple(tuple(j for j in range(m) if j != i) for i in range(m))
    return Topology(m=m, adjacency=adj)


def ring_topology(m: int) -> Topology:
    if m <= 2:
        return complete_topology(m)
    adj = tuple(tuple(sorted(((i - 1) % m, (i + 1) % m))) for i in range(m))
    return Topology(m=m, adjacency=adj)


def random_regular_topology(m: int, degree: int, seed, max_attempts: int = 500) -> Topology:
    """Seeded pairing-model sampler, rejecting loops, multi-edges, and disconnection."""
    if degree < 1 or degree >= m:
        raise ConfigurationError(f"degree must satisfy 1 <= d < m, got d={degree}, m={m}")
    if (degree * m) % 2 != 0:
        raise ConfigurationError(f"d*m must be even, got d={degree}, m={m}")
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        stubs = np.repeat(np.arange(m), degree)
        rng.shuffle(stubs)
        edges = set()
        ok = True
        for a, b in stubs.reshape(-1, 2):
            a, b = int(a), int(b)
            if a == b or (min(a, b), max(a, b)) in edges:
                ok = False
                break
            edges.add((min(a, b), max(a, b)))
        if not ok:
            continue
        adj_lists: list[list[int]] = [[] for _ in range(m)]
        for a, b in edges:
            adj_lists[a].append(b)
            adj_lists[b].append(a)
        try:
            return Topology(m=m, adjacency=tuple(tuple(sorted(x)) for x in adj_lists))
        except ConfigurationError:
            continue  # disconnected sample; retry
    raise ConfigurationError(
        f"failed to sample a connected {degree}-regular graph on {m} nodes"
    )


def build_topology(kind: str, m: int, seed=None, degree: int | None = None) -> Topology:
    if kind == "complete":
        return complete_topology(m)
    if kind == "ring":
        return ring_topology(m)
    if kind == "random_regular":
        if degree is None:
            raise ConfigurationError("random_regular topology needs topology_degree")
        return random_regular_topology(m, degree, seed)
    raise ConfigurationError(
        f"unknown topology {kind!r}; expected complete, ring, or random_regular"
    )


# ---------------------------------------------------------------------------
# node state and logs
# ---------------------------------------------------------------------------

@dataclass
class NodeState:
    """One node's model plus its latest predictions and loss."""

    node_id: int
    model: MlpModel
    feature_assignment: np.ndarray
    predictions: np.ndarray | None = None
    local_loss: float | None = None
    last_weight_snapshot: np.ndarray | None = None


class EventSummary(NamedTuple):
    initiator: int
    responder: int
    gossiped_loss: float      # loss of the elementwise-mean prediction vector
    avg_scalar_loss: float    # (L_initiator + L_responder) / 2, diagnostic only


@dataclass
class GossipEvent:
    """One pairwise exchange: averaged predictions and the loss they imply."""

    round: int
    initiator: int
    responder: int
    y_gossip: np.ndarray
    gossiped_loss: float
    avg_scalar_loss: float

    def summary(self) -> EventSummary:
        return EventSummary(self.initiator, self.responder, self.gossiped_loss, self.avg_scalar_loss)


@dataclass
class RoundLog:
    round: int
    events: list[EventSummary]
    node_losses: np.ndarray
    max_weight_delta: float
    mean_node_rms: float = 0.0
    convergence_metric: float | None = None

    @property
    def mean_local_loss(self) -> float:
        return float(np.mean(self.node_losses))


def round_logs_to_csv(logs: Sequence[RoundLog], path) -> None:
    """One line per round: round, mean_local_loss, max_weight_delta, convergence_metric."""
    with open(path, "w") as fh:
        fh.write("round,mean_local_loss,max_weight_delta,convergence_metric\n")
        for log in logs:
            conv = "" if log.convergence_metric is None else repr(log.convergence_metric)
            fh.write(
                f"{log.round},{log.mean_local_loss!r},{log.max_weight_delta!r},{conv}\n"
            )


# ---------------------------------------------------------------------------
# training parameters
# ---------------------------------------------------------------------------

@dataclass
class GossipTrainingParams:
    loss: str = "cross_entropy"
    learning_rate: float = 0.1
    gossip_grad_scale: str = "half"
    grad_reduction: str = "mean"
    stop_tol: float = 1e-5
    max_rounds: int = 600
    minibatch: int | None = None

    def __post_init__(self) -> None:
        if self.gossip_grad_scale not in GOSSIP_GRAD_SCALES:
            raise ConfigurationError(
                f"gossip_grad_scale must be one of {sorted(GOSSIP_GRAD_SCALES)}, "
                f"got {self.gossip_grad_scale!r}"
            )
        if self.grad_reduction not in ("mean", "sum"):
            raise ConfigurationError(
                f"grad_reduction must be 'mean' or 'sum', got {self.grad_reduction!r}"
            )
        if self.learning_rate < 0:
            raise ConfigurationError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.max_rounds < 1:
            raise ConfigurationError(f"max_rounds must be >= 1, got {self.max_rounds}")
        if self.minibatch is not None and self.minibatch < 1:
            raise ConfigurationError(f"minibatch must be >= 1, got {self.minibatch}")


def build_node_states(
    assignments: Sequence[np.ndarray],
    hidden_units: int,
    hidden_activation: str,
    seed: int,
) -> list[NodeState]:
    """One fresh model per node; node ``i`` is seeded by ``[seed, i]``."""
    nodes = []
    for i, assignment in enumerate(assignments):
        spec = mlp_spec(len(assignment), hidden_units, hidden_activation)
        nodes.append(
            NodeState(
                node_id=i,
                model=init_model(spec, seed=[seed, i]),
                feature_assignment=np.asarray(assignment),
            )
        )
    return nodes


# ---------------------------------------------------------------------------
# the round engine
# ---------------------------------------------------------------------------

def _refresh(node: NodeState, X: np.ndarray, y: np.ndarray, loss: str, round_index: int):
    trace = batch_forward(node.model, X)
    value = compute_loss(loss, y, trace.predictions)
    if not np.isfinite(value):
        raise TrainingDivergedError(
            f"non-finite loss at node {node.node_id} in round {round_index}"
        )
    node.predictions = trace.predictions
    node.local_loss = value
    return trace


def run_round(
    nodes: list[NodeState],
    topology: Topology,
    node_features: Sequence[np.ndarray],
    y: np.ndarray,
    params: GossipTrainingParams,
    rng: np.random.Generator,
    *,
    round_index: int = 1,
    baseline_rms: float | None = None,
) -> RoundLog:
    """One synchronous round: every node initiates one gossip exchange.

    Per initiator, the rng is consumed in a fixed order: responder draw, then
    (if configured) the shared minibatch row draw.
    """
    m = topology.m
    if len(nodes) != m or len(node_features) != m:
        raise ConfigurationError("nodes/features do not match topology size")
    y = np.asarray(y, dtype=np.float64)
    scale = GOSSIP_GRAD_SCALES[params.gossip_grad_scale]

    snapshots = [node.model.flat_params() for node in nodes]
    events: list[EventSummary] = []
    for i in range(m):
        neighbors = topology.adjacency[i]
        if neighbors:
            j = int(neighbors[rng.integers(len(neighbors))])
        else:
            j = None
        if params.minibatch is not None and params.minibatch < len(y):
            rows = rng.choice(len(y), size=params.minibatch, replace=False)
            yb = y[rows]
        else:
            rows = slice(None)
            yb = y

        initiator = nodes[i]
        trace_i = _refresh(initiator, node_features[i][rows], yb, params.loss, round_index)

        if j is None:
            # no peer: plain local backprop (the centralized-reduction mode)
            residual = loss_residual(params.loss, yb, trace_i.predictions)
            if params.grad_reduction == "mean":
                residual = residual / len(yb)
            sgd_step(initiator.model, backward(initiator.model, trace_i, residual),
                     params.learning_rate)
            continue

        responder = nodes[j]
        trace_j = _refresh(responder, node_features[j][rows], yb, params.loss, round_index)
        y_gossip = 0.5 * (trace_i.predictions + trace_j.predictions)
        event = GossipEvent(
            round=round_index,
            initiator=i,
            responder=j,
            y_gossip=y_gossip,
            gossiped_loss=compute_loss(params.loss, yb, y_gossip),
            avg_scalar_loss=0.5 * (initiator.local_loss + responder.local_loss),
        )
        residual = scale * loss_residual(params.loss, yb, y_gossip)
        if params.grad_reduction == "mean":
            residual = residual / len(yb)
        for node, trace in ((initiator, trace_i), (responder, trace_j)):
            sgd_step(node.model, backward(node.model, trace, residual), params.learning_rate)
        events.append(event.summary())

    node_losses = np.empty(m)
    for i in range(m):
        _refresh(nodes[i], node_features[i], y, params.loss, round_index)
        node_losses[i] = nodes[i].local_loss

    max_delta = 0.0
    for node, before in zip(nodes, snapshots):
        now = node.model.flat_params()
        node.last_weight_snapshot = now
        max_delta = max(max_delta, float(np.max(np.abs(now - before))))

    mean_rms = float(np.mean([weight_rms(n.model) for n in nodes]))
    metric = None if baseline_rms is None else abs(baseline_rms - mean_rms)
    return RoundLog(
        round=round_index,
        events=events,
        node_losses=node_losses,
        max_weight_delta=max_delta,
        mean_node_rms=mean_rms,
        convergence_metric=metric,
    )


def run_training(
    nodes: list[NodeState],
    topology: Topology,
    node_features: Sequence[np.ndarray],
    y: np.ndarray,
    params: GossipTrainingParams,
    rng: np.random.Generator,
    *,
    baseline_rms: float | None = None,
) -> tuple[list[NodeState], list[RoundLog]]:
    """Run rounds until the weight change stays below stop_tol, or max_rounds."""
    logs: list[RoundLog] = []
    for t in range(1, params.max_rounds + 1):
        log = run_round(
            nodes,
            topology,
            node_features,
            y,
            params,
            rng,
            round_index=t,
            baseline_rms=baseline_rms,
        )
        logs.append(log)
        if log.max_weight_delta < params.stop_tol:
            break
    return nodes, logs


def distributed_predict(nodes: Sequence[NodeState], node_test_features: Sequence[np.ndarray]) -> np.ndarray:
    """Elementwise mean of every node's predicted probabilities."""
    if len(nodes) != len(node_test_features):
        raise ConfigurationError("one test matrix per node required")
    n_rows = {X.shape[0] for X in node_test_features}
    if len(n_rows) > 1:
        raise ValueError(f"test row counts differ across nodes: {sorted(n_rows)}")
    preds = np.stack(
        [batch_forward(node.model, X).predictions for node, X in zip(nodes, node_test_features)]
    )
    return preds.mean(axis=0)
