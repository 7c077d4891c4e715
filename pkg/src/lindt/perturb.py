"""Topological perturbation scenarios applied to validation/test subgraphs:
random hub connections, link/feature sparsification, and a greedy evasion
attack surrogate."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .graph import Graph, build_adjacency, edge_pairs, normalize_adjacency
from .gcn import GcnModel, forward, feature_gradient

logger = logging.getLogger(__name__)

SCENARIOS = ("rdmPert", "infoSparse", "advAttack")


@dataclass
class PerturbationSpec:
    scenario: str = "rdmPert"
    perturbator_fraction: float = 0.01
    connections_per_perturbator: int = 100
    link_sparsity: float = 0.9
    feature_sparsity: float = 1.0
    n_pert_links: int = 2
    n_pert_features: int = 20
    degree_window: Tuple[int, int] = (0, 10)
    candidate_pool: int = 200
    seed: int = 0

    def validate(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        for name in ("perturbator_fraction", "link_sparsity",
                     "feature_sparsity"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1]")
        for name in ("connections_per_perturbator", "n_pert_links",
                     "n_pert_features", "candidate_pool"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


def _edge_set(g: Graph):
    return {(int(i), int(j)) for i, j in edge_pairs(g)}


def _graph_from_edges(edges, g: Graph, features=None) -> Graph:
    pairs = np.array(sorted(edges), dtype=np.int64).reshape(-1, 2)
    return Graph(num_nodes=g.num_nodes,
                 adjacency=build_adjacency(pairs, g.num_nodes),
                 features=g.features if features is None else features,
                 num_classes=g.num_classes,
                 latent_labels=g.latent_labels)


def _key(i: int, j: int):
    return (i, j) if i < j else (j, i)


def random_perturbation(g: Graph, victims: np.ndarray,
                        spec: PerturbationSpec):
    """A small fraction of victims become perturbators, each gaining many
    edges to uniformly sampled other victims.

    Returns (perturbed graph, perturbator index array).
    """
    spec.validate()
    victims = np.sort(np.asarray(victims))
    rng = np.random.default_rng(spec.seed)
    num_pert = int(np.ceil(spec.perturbator_fraction * len(victims)))
    perturbators = np.sort(rng.choice(victims, size=num_pert, replace=False))

    edges = _edge_set(g)
    victim_set = set(int(v) for v in victims)
    for p in perturbators:
        p = int(p)
        available = [v for v in victim_set
                     if v != p and _key(p, v) not in edges]
        want = spec.connections_per_perturbator
        if len(available) < want:
            logger.warning("perturbator %d: only %d candidate victims for "
                           "%d requested connections", p, len(available), want)
            want = len(available)
        if want == 0:
            continue
        chosen = rng.choice(np.array(sorted(available)), size=want,
                            replace=False)
        for v in chosen:
            edges.add(_key(p, int(v)))
    return _graph_from_edges(edges, g), perturbators


def sparsify(g: Graph, victims: np.ndarray, spec: PerturbationSpec) -> Graph:
    """Remove a random link_sparsity share of each victim's incident edges
    and zero a random feature_sparsity share of its feature entries."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    edges = _edge_set(g)
    features = g.features.copy()
    d = features.shape[1]
    for v in np.sort(np.asarray(victims)):
        v = int(v)
        incident = sorted(e for e in edges if v in e)
        n_remove = int(round(spec.link_sparsity * len(incident)))
        if n_remove:
            idx = rng.choice(len(incident), size=n_remove, replace=False)
            for i in idx:
                edges.discard(incident[i])
        n_zero = int(round(spec.feature_sparsity * d))
        if n_zero:
            cols = rng.choice(d, size=n_zero, replace=False)
            features[v, cols] = 0.0
    return _graph_from_edges(edges, g, features=features)


def adversarial_attack(g: Graph, model: GcnModel, victims: np.ndarray,
                       spec: PerturbationSpec) -> Graph:
    """Greedy direct evasion attack on links and feature bits of victims
    within the degree window; model parameters are untouched.

    Candidate edge flips are the victim's neighbors (removals) plus a
    uniform sample of candidate_pool non-neighbors (additions), ranked by a
    single-forward-pass score; each applied flip is verified to not
    increase the probability of the victim's originally predicted class.
    """
    spec.validate()
    feats = g.features
    if not np.isin(feats, (0.0, 1.0)).all():
        raise ValueError("advAttack requires binary features")
    rng = np.random.default_rng(spec.seed)
    low, high = spec.degree_window
    deg = g.degrees()
    targets = [int(v) for v in np.sort(np.asarray(victims))
               if low < deg[v] < high]

    edges = _edge_set(g)
    features = feats.copy()
    eval_budget = 8  # forward passes per accepted link flip

    def current_probs():
        cur = _graph_from_edges(edges, g, features=features)
        a_hat = normalize_adjacency(cur)
        _, probs = forward(model, a_hat, features)
        return a_hat, probs

    for v in targets:
        a_hat, probs = current_probs()
        cls = int(np.argmax(probs[v]))
        p_cur = probs[v, cls]

        for _ in range(spec.n_pert_links):
            neighbors = [u for u in range(g.num_nodes)
                         if _key(v, u) in edges]
            non_neighbors = np.array(
                [u for u in range(g.num_nodes)
                 if u != v and _key(v, u) not in edges], dtype=np.int64)
            if len(non_neighbors) > spec.candidate_pool:
                non_neighbors = rng.choice(non_neighbors,
                                           size=spec.candidate_pool,
                                           replace=False)
            # higher score = expected to pull v away from cls
            cands = [(probs[u, cls], ("del", u)) for u in neighbors]
            cands += [(1.0 - probs[u, cls], ("add", int(u)))
                      for u in non_neighbors]
            cands.sort(key=lambda t: (-t[0], t[1][1]))

            best = None
            for _, (op, u) in cands[:eval_budget]:
                key = _key(v, u)
                if op == "del":
                    edges.discard(key)
                else:
                    edges.add(key)
                _, trial = current_probs()
                p_new = trial[v, cls]
                if op == "del":
                    edges.add(key)
                else:
                    edges.discard(key)
                if p_new <= p_cur and (best is None or p_new < best[0]):
                    best = (p_new, op, key)
            if best is None:
                break
            p_cur, op, key = best
            if op == "del":
                edges.discard(key)
            else:
                edges.add(key)
            _, probs = current_probs()

        if spec.n_pert_features == 0:
            continue
        a_hat, probs = current_probs()
        grad = feature_gradient(model, a_hat, features, v, cls)
        # first-order predicted change of p_cls when flipping each bit
        delta = (1.0 - 2.0 * features[v]) * grad
        order = np.argsort(delta, kind="stable")
        accepted = 0
        for f in order[:2 * spec.n_pert_features]:
            if accepted >= spec.n_pert_features:
                break
            features[v, f] = 1.0 - features[v, f]
            _, trial = current_probs()
            p_new = trial[v, cls]
            if p_new <= p_cur:
                p_cur = p_new
                accepted += 1
            else:
                features[v, f] = 1.0 - features[v, f]

    return _graph_from_edges(edges, g, features=features)


def apply_scenario(g: Graph, model, victims: np.ndarray,
                   spec: PerturbationSpec):
    """Dispatch a scenario. Returns (perturbed graph, reporting node set)."""
    spec.validate()
    victims = np.sort(np.asarray(victims))
    if spec.scenario == "rdmPert":
        out, _ = random_perturbation(g, victims, spec)
        return out, victims
    if spec.scenario == "infoSparse":
        return sparsify(g, victims, spec), victims
    low, high = spec.degree_window
    deg = g.degrees()
    attacked = victims[(deg[victims] > low) & (deg[victims] < high)]
    if model is None:
        raise ValueError("advAttack needs a trained model")
    return adversarial_attack(g, model, victims, spec), attacked


def change_counts(before: Graph, after: Graph) -> np.ndarray:
    """Per-node count of incident edge changes plus feature entry changes."""
    diff = (before.adjacency != after.adjacency).tocsr()
    edge_changes = np.diff(diff.indptr)
    feat_changes = (before.features != after.features).sum(axis=1)
    return edge_changes + feat_changes.astype(np.int64)


def write_manifest(path, spec: PerturbationSpec, victims: np.ndarray,
                   counts: np.ndarray):
    """Sidecar CSV: spec fields then per-victim change counts."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("record,key,value\n")
        f.write(f"spec,scenario,{spec.scenario}\n")
        for name in ("perturbator_fraction", "connections_per_perturbator",
                     "link_sparsity", "feature_sparsity", "n_pert_links",
                     "n_pert_features", "degree_window", "candidate_pool",
                     "seed"):
            value = getattr(spec, name)
            if name == "degree_window":
                value = f"{value[0]}:{value[1]}"
            f.write(f"spec,{name},{value}\n")
        for v in np.sort(np.asarray(victims)):
            f.write(f"victim,{int(v)},{int(counts[v])}\n")
