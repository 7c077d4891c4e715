import numpy as np
import pytest

import lindt
from lindt.gcn import TrainConfig, train
from lindt.graph import induced_subgraph, inject_label_noise


@pytest.fixture(scope="session")
def small_sbm():
    """Dense, well-separated 60-node block graph used across modules."""
    return lindt.generate_sbm(60, 3, 0.3, 0.02, 6, 0.9, seed=7)


@pytest.fixture(scope="session")
def trained_small(small_sbm):
    """A model trained on the train subgraph of small_sbm plus the pieces
    needed to exercise prediction and inference."""
    g = small_sbm
    split = lindt.split_nodes(g.num_nodes, (0.2, 0.2, 0.6), seed=3)
    noisy = inject_label_noise(g.latent_labels, 0.1, g.num_classes,
                               split.train, seed=3)
    g_train, train_map = induced_subgraph(g, split.train)
    cfg = TrainConfig(hidden_units=16, max_epochs=80, seed=3)
    model = train(g_train, np.arange(g_train.num_nodes), noisy[train_map], cfg)
    eval_nodes = np.sort(np.concatenate([split.val, split.test]))
    g_eval, _ = induced_subgraph(g, eval_nodes)
    return {"graph": g, "split": split, "noisy": noisy, "model": model,
            "g_train": g_train, "train_map": train_map, "g_eval": g_eval,
            "cfg": cfg}
