"""From-scratch two-layer GCN: forward, analytic backprop, Adam training,
prediction and mid-inference retraining."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import Graph, normalize_adjacency

CHECKPOINT_MAGIC = "LINDT-GCN-1"

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    max_epochs: int = 200
    hidden_units: int = 200
    seed: int = 0

    def validate(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.hidden_units < 1:
            raise ValueError("hidden_units must be >= 1")


class GcnModel:
    """Two-layer GCN parameters plus Adam state.

    w1: d x h, w2: h x K, no biases (propagation re-adds self-loops).
    """

    def __init__(self, in_dim: int, hidden_units: int, num_classes: int,
                 seed: int = 0):
        rng = np.random.default_rng(seed)
        self.w1 = _glorot(rng, in_dim, hidden_units)
        self.w2 = _glorot(rng, hidden_units, num_classes)
        self.hidden_units = hidden_units
        self.in_dim = in_dim
        self.num_classes = num_classes
        self.adam_m = [np.zeros_like(self.w1), np.zeros_like(self.w2)]
        self.adam_v = [np.zeros_like(self.w1), np.zeros_like(self.w2)]
        self.adam_t = 0

    def adam_step(self, grads, learning_rate: float):
        self.adam_t += 1
        params = [self.w1, self.w2]
        for p, g, m, v in zip(params, grads, self.adam_m, self.adam_v):
            m *= ADAM_BETA1
            m += (1 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1 - ADAM_BETA2) * g * g
            m_hat = m / (1 - ADAM_BETA1 ** self.adam_t)
            v_hat = v / (1 - ADAM_BETA2 ** self.adam_t)
            p -= learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        if not (np.isfinite(self.w1).all() and np.isfinite(self.w2).all()):
            raise RuntimeError("non-finite weights after Adam update")


def _glorot(rng, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def forward(model: GcnModel, a_hat: sp.csr_matrix, x: np.ndarray):
    """Two propagation layers with ReLU in between.

    Returns (logits, probs) where probs is the row-softmax of the logits.
    """
    if x.shape[1] != model.w1.shape[0]:
        raise ValueError(
            f"feature dim {x.shape[1]} != model input dim {model.w1.shape[0]}")
    z1 = a_hat @ (x @ model.w1)
    h1 = np.maximum(z1, 0.0)
    logits = a_hat @ (h1 @ model.w2)
    return logits, softmax_rows(logits)


def loss_and_gradients(model: GcnModel, a_hat: sp.csr_matrix, x: np.ndarray,
                       labels: np.ndarray, mask: np.ndarray):
    """Mean cross-entropy over the masked nodes and its exact gradients.

    labels is a full-length class vector; mask is a node-index array.
    Returns (loss, [grad_w1, grad_w2]).
    """
    mask = np.asarray(mask)
    if len(mask) == 0:
        raise ValueError("empty mask")
    z1 = a_hat @ (x @ model.w1)
    h1 = np.maximum(z1, 0.0)
    logits = a_hat @ (h1 @ model.w2)
    probs = softmax_rows(logits)

    picked = probs[mask, labels[mask]]
    loss = float(-np.log(np.clip(picked, 1e-300, None)).mean())

    d_logits = np.zeros_like(probs)
    d_logits[mask] = probs[mask]
    d_logits[mask, labels[mask]] -= 1.0
    d_logits /= len(mask)

    back = a_hat.T @ d_logits
    grad_w2 = h1.T @ back
    d_h1 = back @ model.w2.T
    d_z1 = d_h1 * (z1 > 0)
    grad_w1 = (x.T @ (a_hat.T @ d_z1))
    return loss, [grad_w1, grad_w2]


def train(g: Graph, train_nodes: np.ndarray, noisy_labels: np.ndarray,
          cfg: TrainConfig) -> GcnModel:
    """Full-batch Adam training on train-node cross-entropy.

    noisy_labels is a full-length class vector; only entries at train_nodes
    are read. Deterministic given cfg.seed.
    """
    cfg.validate()
    model = GcnModel(g.features.shape[1], cfg.hidden_units, g.num_classes,
                     seed=cfg.seed)
    a_hat = normalize_adjacency(g)
    for epoch in range(cfg.max_epochs):
        loss, grads = loss_and_gradients(model, a_hat, g.features,
                                         noisy_labels, train_nodes)
        if not np.isfinite(loss):
            raise RuntimeError(f"non-finite training loss at epoch {epoch}")
        model.adam_step(grads, cfg.learning_rate)
    return model


def predict(model: GcnModel, g: Graph, node_set=None):
    """Class distributions and argmax labels, restricted to node_set
    (all nodes when None). Argmax ties break toward the lowest class."""
    a_hat = normalize_adjacency(g)
    _, probs = forward(model, a_hat, g.features)
    if node_set is not None:
        probs = probs[np.asarray(node_set)]
    return probs, np.argmax(probs, axis=1)


def retrain(model: GcnModel, g: Graph, inferred: np.ndarray, epochs: int,
            cfg: TrainConfig) -> GcnModel:
    """Continue Adam from the current state on cross-entropy against the
    inferred labels over all nodes of g. epochs=0 is a no-op."""
    inferred = np.asarray(inferred)
    if inferred.min(initial=0) < 0 or inferred.max(initial=0) >= model.num_classes:
        raise ValueError("inferred labels out of range [0, K)")
    a_hat = normalize_adjacency(g)
    nodes = np.arange(g.num_nodes)
    for epoch in range(epochs):
        loss, grads = loss_and_gradients(model, a_hat, g.features, inferred,
                                         nodes)
        if not np.isfinite(loss):
            raise RuntimeError(f"non-finite retraining loss at epoch {epoch}")
        model.adam_step(grads, cfg.learning_rate)
    return model


def feature_gradient(model: GcnModel, a_hat: sp.csr_matrix, x: np.ndarray,
                     node: int, target_class: int) -> np.ndarray:
    """Gradient of probs[node, target_class] w.r.t. the node's own feature
    row. Used by the greedy evasion attack to rank feature-bit flips."""
    z1 = a_hat @ (x @ model.w1)
    h1 = np.maximum(z1, 0.0)
    logits = a_hat @ (h1 @ model.w2)
    probs = softmax_rows(logits)

    p = probs[node]
    d_logits = np.zeros_like(probs)
    d_logits[node] = -p[target_class] * p
    d_logits[node, target_class] += p[target_class]

    d_h1 = (a_hat.T @ d_logits) @ model.w2.T
    d_z1 = d_h1 * (z1 > 0)
    d_x = a_hat.T @ (d_z1 @ model.w1.T)
    return d_x[node]


def save_model(path, model: GcnModel):
    """Write a text checkpoint: magic header, dims, then W1 and W2 rows."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(CHECKPOINT_MAGIC + "\n")
        f.write(f"{model.in_dim} {model.hidden_units} {model.num_classes}\n")
        for w in (model.w1, model.w2):
            for row in w:
                f.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_model(path) -> GcnModel:
    """Read a checkpoint written by save_model. Optimizer state resets."""
    with open(path, "r", encoding="utf-8") as f:
        magic = f.readline().strip()
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a {CHECKPOINT_MAGIC} checkpoint")
        d, h, k = (int(v) for v in f.readline().split())
        model = GcnModel(d, h, k, seed=0)
        for w in (model.w1, model.w2):
            for r in range(w.shape[0]):
                w[r] = [float(v) for v in f.readline().split()]
    return model
