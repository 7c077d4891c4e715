"""Sparse attributed graphs: construction, I/O, normalization, homophily,
synthetic generation, node splits and label noise."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)


class GraphParseError(ValueError):
    """Malformed input file; message carries the file name and line number."""


@dataclass
class Graph:
    """Undirected attributed graph.

    adjacency is a symmetric 0/1 CSR matrix with no stored self-loops.
    latent_labels are ground-truth classes when known (synthetic data or
    benchmark datasets), None otherwise.
    """

    num_nodes: int
    adjacency: sp.csr_matrix
    features: np.ndarray
    num_classes: int
    latent_labels: Optional[np.ndarray] = None

    @property
    def num_edges(self) -> int:
        """Number of undirected edges."""
        return self.adjacency.nnz // 2

    def degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr)

    def validate(self):
        a = self.adjacency
        if a.shape != (self.num_nodes, self.num_nodes):
            raise ValueError("adjacency shape does not match num_nodes")
        if (a != a.T).nnz != 0:
            raise ValueError("adjacency is not symmetric")
        if a.diagonal().sum() != 0:
            raise ValueError("adjacency stores self-loops")
        if a.nnz and not np.all(a.data == 1):
            raise ValueError("adjacency entries must all equal 1")
        if self.features.shape[0] != self.num_nodes:
            raise ValueError("feature matrix row count does not match num_nodes")
        if self.latent_labels is not None:
            if len(self.latent_labels) != self.num_nodes:
                raise ValueError("label vector length does not match num_nodes")
            if self.latent_labels.min(initial=0) < 0 or \
               self.latent_labels.max(initial=0) >= self.num_classes:
                raise ValueError("labels out of range [0, K)")


@dataclass
class NodeSplit:
    """Disjoint train/val/test node-index partition."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def all_nodes(self) -> np.ndarray:
        return np.sort(np.concatenate([self.train, self.val, self.test]))


def build_adjacency(pairs: np.ndarray, num_nodes: int) -> sp.csr_matrix:
    """Build a symmetric simple 0/1 CSR adjacency from an (m, 2) pair array.

    Duplicate edges collapse to one; pairs must not contain self-loops.
    """
    if len(pairs) == 0:
        return sp.csr_matrix((num_nodes, num_nodes), dtype=np.int8)
    pairs = np.asarray(pairs)
    rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
    cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
    data = np.ones(len(rows), dtype=np.int8)
    a = sp.coo_matrix((data, (rows, cols)), shape=(num_nodes, num_nodes)).tocsr()
    a.data[:] = 1  # collapse duplicates
    return a


def edge_pairs(g: Graph) -> np.ndarray:
    """Undirected edge list (i < j), one row per edge."""
    coo = sp.triu(g.adjacency, k=1).tocoo()
    return np.column_stack([coo.row, coo.col])


# ---------------------------------------------------------------------------
# file I/O
#
# edges file:    one edge per line, "i j" (0-based, undirected, listed once)
# features file: header "N d", then N rows of d decimals
# labels file:   header "N K", then N lines "node_id label"
# splits file:   N lines "node_id role", role in {train,val,test}
# ---------------------------------------------------------------------------

def _parse_error(path, lineno, msg) -> GraphParseError:
    return GraphParseError(f"{path}:{lineno}: {msg}")


def read_edges(path, num_nodes: int):
    """Read an edge file. Returns (pairs, num_self_loops_dropped)."""
    pairs = []
    dropped = 0
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 2:
                raise _parse_error(path, lineno, "expected two integers")
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError:
                raise _parse_error(path, lineno, "expected two integers") from None
            if i < 0 or j < 0 or i >= num_nodes or j >= num_nodes:
                raise _parse_error(path, lineno,
                                   f"node index out of range [0, {num_nodes})")
            if i == j:
                dropped += 1
                continue
            pairs.append((i, j))
    if dropped:
        logger.warning("%s: dropped %d self-loop(s)", path, dropped)
    return np.array(pairs, dtype=np.int64).reshape(-1, 2), dropped


def read_features(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 2:
            raise _parse_error(path, 1, "expected header 'N d'")
        try:
            n, d = int(header[0]), int(header[1])
        except ValueError:
            raise _parse_error(path, 1, "expected header 'N d'") from None
        rows = np.empty((n, d), dtype=np.float64)
        for r in range(n):
            line = f.readline()
            if not line:
                raise _parse_error(path, r + 2, f"expected {n} feature rows")
            parts = line.split()
            if len(parts) != d:
                raise _parse_error(path, r + 2, f"expected {d} values")
            try:
                rows[r] = [float(p) for p in parts]
            except ValueError:
                raise _parse_error(path, r + 2, "non-numeric value") from None
        if f.readline().strip():
            raise _parse_error(path, n + 2, "trailing data after feature rows")
    return rows


def read_labels(path):
    """Read a labels file. Returns (labels array, K)."""
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 2:
            raise _parse_error(path, 1, "expected header 'N K'")
        n, k = int(header[0]), int(header[1])
        labels = np.full(n, -1, dtype=np.int64)
        for r in range(n):
            line = f.readline()
            if not line:
                raise _parse_error(path, r + 2, f"expected {n} label lines")
            parts = line.split()
            if len(parts) != 2:
                raise _parse_error(path, r + 2, "expected 'node_id label'")
            node, lab = int(parts[0]), int(parts[1])
            if node < 0 or node >= n:
                raise _parse_error(path, r + 2, f"node index out of range [0, {n})")
            if lab < 0 or lab >= k:
                raise _parse_error(path, r + 2, f"label out of range [0, {k})")
            labels[node] = lab
    return labels, k


def read_splits(path, num_nodes: int) -> NodeSplit:
    roles = {"train": [], "val": [], "test": []}
    seen = np.zeros(num_nodes, dtype=bool)
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 2 or parts[1] not in roles:
                raise _parse_error(path, lineno, "expected 'node_id role'")
            node = int(parts[0])
            if node < 0 or node >= num_nodes or seen[node]:
                raise _parse_error(path, lineno, "bad or repeated node index")
            seen[node] = True
            roles[parts[1]].append(node)
    if not seen.all():
        raise GraphParseError(f"{path}: split does not cover all nodes")
    return NodeSplit(train=np.array(sorted(roles["train"]), dtype=np.int64),
                     val=np.array(sorted(roles["val"]), dtype=np.int64),
                     test=np.array(sorted(roles["test"]), dtype=np.int64))


def load_graph(edges_path, features_path, labels_path) -> Graph:
    """Load a graph from the three on-disk files.

    The adjacency is symmetrized (each input edge inserted in both
    directions), duplicates collapse, self-loops are dropped with a warning.
    """
    features = read_features(features_path)
    n = features.shape[0]
    labels, k = read_labels(labels_path)
    if len(labels) != n:
        raise GraphParseError(
            f"{labels_path}: label count {len(labels)} != feature rows {n}")
    pairs, _ = read_edges(edges_path, n)
    g = Graph(num_nodes=n, adjacency=build_adjacency(pairs, n),
              features=features, num_classes=k, latent_labels=labels)
    g.validate()
    return g


def write_edges(path, g: Graph):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for i, j in edge_pairs(g):
            f.write(f"{i} {j}\n")


def write_features(path, g: Graph):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{g.num_nodes} {g.features.shape[1]}\n")
        for row in g.features:
            f.write(" ".join(f"{v:.10g}" for v in row) + "\n")


def write_labels(path, labels: np.ndarray, num_classes: int):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{len(labels)} {num_classes}\n")
        for node, lab in enumerate(labels):
            f.write(f"{node} {lab}\n")


def write_splits(path, split: NodeSplit):
    role_of = {}
    for role, nodes in (("train", split.train), ("val", split.val),
                        ("test", split.test)):
        for node in nodes:
            role_of[int(node)] = role
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for node in sorted(role_of):
            f.write(f"{node} {role_of[node]}\n")


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def normalize_adjacency(g: Graph) -> sp.csr_matrix:
    """Symmetrically normalized adjacency with self-loops added:
    entry (i, j) of (A + I) scaled by 1/sqrt((d_i + 1)(d_j + 1))."""
    a_tilde = (g.adjacency + sp.eye(g.num_nodes, format="csr")).tocsr()
    inv_sqrt = 1.0 / np.sqrt(g.degrees() + 1.0)
    d = sp.diags(inv_sqrt)
    return (d @ a_tilde @ d).tocsr()


def edge_homophily_ratio(g: Graph, labels: np.ndarray) -> float:
    """Fraction of undirected edges whose endpoints share a label."""
    pairs = edge_pairs(g)
    if len(pairs) == 0:
        raise ValueError("empty edge set")
    labels = np.asarray(labels)
    same = labels[pairs[:, 0]] == labels[pairs[:, 1]]
    return float(same.mean())


def generate_sbm(n: int, k: int, p_intra: float, p_inter: float,
                 feat_dim: int, feat_signal: float, seed: int) -> Graph:
    """Stochastic block model with k equal blocks and class-band binary
    features.

    Each node's own-class feature band is set with probability feat_signal;
    bits in the other bands with probability (1 - feat_signal) / (k - 1).
    """
    if not (0.0 <= p_inter <= p_intra <= 1.0):
        raise ValueError("require 0 <= p_inter <= p_intra <= 1")
    if not (0.0 <= feat_signal <= 1.0):
        raise ValueError("feat_signal must lie in [0, 1]")
    if k < 2:
        raise ValueError("need at least 2 blocks")
    if n % k != 0:
        raise ValueError("n must be divisible by k")
    if feat_dim % k != 0:
        raise ValueError("feat_dim must be divisible by k")
    rng = np.random.default_rng(seed)
    block = n // k
    labels = np.repeat(np.arange(k), block)

    u = rng.random((n, n))
    same_block = labels[:, None] == labels[None, :]
    prob = np.where(same_block, p_intra, p_inter)
    upper = np.triu(u < prob, k=1)
    rows, cols = np.nonzero(upper)
    pairs = np.column_stack([rows, cols])

    band = feat_dim // k
    p_noise = (1.0 - feat_signal) / (k - 1)
    feat_prob = np.full((n, feat_dim), p_noise)
    for c in range(k):
        feat_prob[labels == c, c * band:(c + 1) * band] = feat_signal
    features = (rng.random((n, feat_dim)) < feat_prob).astype(np.float64)

    return Graph(num_nodes=n, adjacency=build_adjacency(pairs, n),
                 features=features, num_classes=k, latent_labels=labels)


def split_nodes(n: int, fractions, seed: int) -> NodeSplit:
    """Uniformly random disjoint train/val/test partition.

    Train and val sizes are round(fraction * n); the remainder goes to test.
    """
    f_train, f_val, f_test = fractions
    if min(f_train, f_val, f_test) <= 0:
        raise ValueError("fractions must be positive")
    if abs(f_train + f_val + f_test - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    n_train = int(round(f_train * n))
    n_val = int(round(f_val * n))
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) <= 0:
        raise ValueError("a split is empty at this n")
    perm = np.random.default_rng(seed).permutation(n)
    return NodeSplit(train=np.sort(perm[:n_train]),
                     val=np.sort(perm[n_train:n_train + n_val]),
                     test=np.sort(perm[n_train + n_val:]))


def inject_label_noise(labels: np.ndarray, noise_ratio: float, k: int,
                       node_set: np.ndarray, seed: int) -> np.ndarray:
    """Replace the labels of round(noise_ratio * |node_set|) nodes of
    node_set with a uniformly chosen different class."""
    if not (0.0 <= noise_ratio <= 1.0):
        raise ValueError("noise_ratio must lie in [0, 1]")
    node_set = np.asarray(node_set)
    out = np.array(labels, copy=True)
    num_noisy = int(round(noise_ratio * len(node_set)))
    if num_noisy == 0:
        return out
    if k < 2:
        raise ValueError("need k >= 2 to flip labels")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(node_set, size=num_noisy, replace=False)
    for node in chosen:
        # uniform over the k-1 classes different from the original
        shift = rng.integers(1, k)
        out[node] = (out[node] + shift) % k
    return out


def induced_subgraph(g: Graph, nodes: np.ndarray):
    """Subgraph induced on the given nodes.

    Returns (subgraph, node_map) where node_map[local] = global index;
    local order follows sorted global order.
    """
    nodes = np.sort(np.asarray(nodes))
    adj = g.adjacency[nodes][:, nodes].tocsr()
    labels = g.latent_labels[nodes] if g.latent_labels is not None else None
    sub = Graph(num_nodes=len(nodes), adjacency=adj,
                features=g.features[nodes], num_classes=g.num_classes,
                latent_labels=labels)
    return sub, nodes
