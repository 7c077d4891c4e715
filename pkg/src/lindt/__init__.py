"""Robust GNN node classification via Bayesian label transition combined
with topology-based label propagation."""

__version__ = "0.1.0"

from .graph import (Graph, NodeSplit, load_graph, normalize_adjacency,
                    edge_homophily_ratio, generate_sbm, split_nodes,
                    inject_label_noise, induced_subgraph)
from .gcn import GcnModel, TrainConfig, forward, loss_and_gradients, train, \
    predict, retrain, save_model, load_model
from .perturb import PerturbationSpec, random_perturbation, sparsify, \
    adversarial_attack, apply_scenario
from .inference import (TransitionMatrix, DirichletPrior, InferenceConfig,
                        estimate_transition_matrix, bayesian_step,
                        is_uncertain, sample_topology, transition_pass,
                        update_alpha, infer)
from .metrics import (EvalReport, accuracy, avg_normalized_entropy,
                      total_variation, label_distribution, confusion_matrix,
                      run_scenario)
