"""Command-line entry point: synth / train / perturb / infer / eval /
scenario subcommands with reproducible seeded configuration."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import graph as gr
from . import gcn
from . import inference as inf
from . import metrics as mt
from . import perturb as pt

SAMPLER_ALIASES = {"gibbs": "gibbs_vanilla", "gibbs_vanilla": "gibbs_vanilla",
                   "random": "random", "major": "major", "degree": "degree"}


def _print_config(args):
    """Every command prints its full resolved configuration up front."""
    skip = {"func", "config"}
    items = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    print("config: " + " ".join(f"{k}={v}" for k, v in items.items()))


def _load_data_dir(path):
    g = gr.load_graph(os.path.join(path, "edges.txt"),
                      os.path.join(path, "features.txt"),
                      os.path.join(path, "labels.txt"))
    split = gr.read_splits(os.path.join(path, "splits.txt"), g.num_nodes)
    return g, split


def _write_graph_dir(path, g, split=None):
    os.makedirs(path, exist_ok=True)
    gr.write_edges(os.path.join(path, "edges.txt"), g)
    gr.write_features(os.path.join(path, "features.txt"), g)
    gr.write_labels(os.path.join(path, "labels.txt"), g.latent_labels,
                    g.num_classes)
    if split is not None:
        gr.write_splits(os.path.join(path, "splits.txt"), split)


def _fractions(text):
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated "
                                         "fractions, e.g. 0.1,0.2,0.7")
    return tuple(parts)


def cmd_synth(args):
    _print_config(args)
    g = gr.generate_sbm(args.n, args.k, args.p_intra, args.p_inter,
                        args.feat_dim, args.feat_signal, args.seed)
    split = gr.split_nodes(args.n, args.fractions, args.seed)
    _write_graph_dir(args.out, g, split)
    if args.noise_ratio > 0:
        noisy = gr.inject_label_noise(g.latent_labels, args.noise_ratio,
                                      g.num_classes, split.train, args.seed)
        gr.write_labels(os.path.join(args.out, "noisy_labels.txt"), noisy,
                        g.num_classes)
    ehr = gr.edge_homophily_ratio(g, g.latent_labels)
    print(f"synth: n={g.num_nodes} edges={g.num_edges} EHR={ehr:.4f}")


def _manual_labels(g, split, noise_ratio, seed):
    return gr.inject_label_noise(g.latent_labels, noise_ratio, g.num_classes,
                                 split.train, seed)


def cmd_train(args):
    _print_config(args)
    g, split = _load_data_dir(args.data)
    noisy = _manual_labels(g, split, args.noise_ratio, args.seed)
    g_train, train_map = gr.induced_subgraph(g, split.train)
    cfg = gcn.TrainConfig(learning_rate=args.lr, max_epochs=args.epochs,
                          hidden_units=args.hidden, seed=args.seed)
    model = gcn.train(g_train, np.arange(g_train.num_nodes),
                      noisy[train_map], cfg)
    gcn.save_model(args.out, model)
    _, pred = gcn.predict(model, g_train)
    acc = mt.accuracy(pred, g_train.latent_labels,
                      np.arange(g_train.num_nodes))
    print(f"train: checkpoint={args.out} train_acc={acc:.4f}")


def _pert_spec(args):
    return pt.PerturbationSpec(
        scenario=args.scenario,
        perturbator_fraction=args.perturbator_fraction,
        connections_per_perturbator=args.connections,
        link_sparsity=args.link_sparsity,
        feature_sparsity=args.feature_sparsity,
        n_pert_links=args.n_pert_links,
        n_pert_features=args.n_pert_features,
        degree_window=(args.degree_low, args.degree_high),
        seed=args.seed)


def cmd_perturb(args):
    _print_config(args)
    g, split = _load_data_dir(args.data)
    eval_nodes = np.sort(np.concatenate([split.val, split.test]))
    g_eval, eval_map = gr.induced_subgraph(g, eval_nodes)
    model = gcn.load_model(args.checkpoint) if args.checkpoint else None
    spec = _pert_spec(args)
    perturbed, victims = pt.apply_scenario(
        g_eval, model, np.arange(g_eval.num_nodes), spec)

    local_val = np.searchsorted(eval_map, split.val)
    sub_split = gr.NodeSplit(
        train=np.array([], dtype=np.int64), val=local_val,
        test=np.setdiff1d(np.arange(g_eval.num_nodes), local_val))
    _write_graph_dir(args.out, perturbed, sub_split)
    counts = pt.change_counts(g_eval, perturbed)
    pt.write_manifest(os.path.join(args.out, "manifest.csv"), spec, victims,
                      counts)
    print(f"perturb: scenario={args.scenario} nodes={perturbed.num_nodes} "
          f"edges={perturbed.num_edges} changed={int((counts > 0).sum())}")


def cmd_infer(args):
    _print_config(args)
    g, split = _load_data_dir(args.data)
    noisy = _manual_labels(g, split, args.noise_ratio, args.seed)
    g_train, train_map = gr.induced_subgraph(g, split.train)

    g_test = gr.load_graph(os.path.join(args.test_data, "edges.txt"),
                           os.path.join(args.test_data, "features.txt"),
                           os.path.join(args.test_data, "labels.txt"))
    split_path = os.path.join(args.test_data, "splits.txt")
    val_nodes = test_nodes = None
    if os.path.exists(split_path):
        sub_split = gr.read_splits(split_path, g_test.num_nodes)
        val_nodes, test_nodes = sub_split.val, sub_split.test

    model = gcn.load_model(args.checkpoint)
    cfg = inf.InferenceConfig(
        warmup_steps=args.ws, num_transitions=args.t,
        retrain_interval=args.retrain_interval,
        retrain_epochs=args.retrain_epochs,
        sampler=SAMPLER_ALIASES[args.sampler],
        initial_alpha=args.alpha, dynamic_alpha=args.dynamic_alpha,
        estimator_mode=args.estimator_mode, seed=args.seed)
    train_cfg = gcn.TrainConfig(learning_rate=args.lr,
                                hidden_units=model.hidden_units,
                                seed=args.seed)
    result = inf.infer(g_train, g_test, model, noisy[train_map], cfg,
                       train_cfg=train_cfg, val_nodes=val_nodes,
                       test_nodes=test_nodes)
    os.makedirs(args.out, exist_ok=True)
    inf.write_trace(os.path.join(args.out, "trace.csv"), result.trace)
    gr.write_labels(os.path.join(args.out, "labels_inferred.txt"),
                    result.inferred, g_test.num_classes)
    last = result.trace[-1]
    print(f"infer: transitions={len(result.trace)} "
          f"uncertain_ratio={last.uncertain_ratio:.4f} "
          f"test_acc={last.test_acc:.4f}")


def cmd_eval(args):
    _print_config(args)
    pred, k = gr.read_labels(args.pred)
    truth, k2 = gr.read_labels(args.truth)
    if k != k2 or len(pred) != len(truth):
        raise ValueError("prediction and truth label files do not match")
    nodes = np.arange(len(pred))
    acc = mt.accuracy(pred, truth, nodes)
    report = mt.EvalReport(accuracy=acc, avg_norm_entropy=float("nan"),
                           node_set_size=len(nodes), scenario="eval",
                           seed=args.seed, phase="eval")
    if args.out:
        mt.write_report(args.out, [report])
    print(f"eval: acc={acc:.4f} n={len(nodes)}")


def cmd_scenario(args):
    _print_config(args)
    g, split = _load_data_dir(args.data)
    spec = _pert_spec(args) if args.scenario != "none" else None
    train_cfg = gcn.TrainConfig(learning_rate=args.lr, max_epochs=args.epochs,
                                hidden_units=args.hidden, seed=args.seed)
    infer_cfg = inf.InferenceConfig(
        warmup_steps=args.ws, num_transitions=args.t,
        retrain_interval=args.retrain_interval,
        retrain_epochs=args.retrain_epochs,
        sampler=SAMPLER_ALIASES[args.sampler],
        initial_alpha=args.alpha, dynamic_alpha=args.dynamic_alpha,
        estimator_mode=args.estimator_mode, seed=args.seed)
    out = mt.run_scenario(g, split, spec, train_cfg, infer_cfg, args.out,
                          noise_ratio=args.noise_ratio, seed=args.seed)
    print(f"scenario: {args.scenario} before_acc={out.before.accuracy:.4f} "
          f"after_acc={out.after.accuracy:.4f}")


def _add_pert_flags(p):
    p.add_argument("--perturbator-fraction", type=float, default=0.01)
    p.add_argument("--connections", type=int, default=100)
    p.add_argument("--link-sparsity", type=float, default=0.9)
    p.add_argument("--feature-sparsity", type=float, default=1.0)
    p.add_argument("--n-pert-links", type=int, default=2)
    p.add_argument("--n-pert-features", type=int, default=20)
    p.add_argument("--degree-low", type=int, default=0)
    p.add_argument("--degree-high", type=int, default=10)


def _add_infer_flags(p):
    p.add_argument("--sampler", choices=sorted(SAMPLER_ALIASES),
                   default="major")
    p.add_argument("--ws", type=int, default=40,
                   help="warm-up transitions using the train-graph phi")
    p.add_argument("--t", type=int, default=100,
                   help="total number of transitions")
    p.add_argument("--alpha", type=float, default=0.1,
                   help="initial Dirichlet concentration per class")
    p.add_argument("--dynamic-alpha", action=argparse.BooleanOptionalAction,
                   default=True)
    p.add_argument("--retrain-interval", type=int, default=10)
    p.add_argument("--retrain-epochs", type=int, default=6)
    p.add_argument("--estimator-mode", choices=inf.ESTIMATOR_MODES,
                   default="posterior_mean")
    p.add_argument("--lr", type=float, default=1e-3)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lindt",
        description="Robust GNN node classification via Bayesian label "
                    "transition and topology-based label propagation")
    parser.add_argument("--config", default=None,
                        help="key=value file pre-populating flags "
                             "(explicit flags win)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic block-model graph")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--p-intra", type=float, required=True)
    p.add_argument("--p-inter", type=float, required=True)
    p.add_argument("--feat-dim", type=int, default=30)
    p.add_argument("--feat-signal", type=float, default=0.9)
    p.add_argument("--noise-ratio", type=float, default=0.0)
    p.add_argument("--fractions", type=_fractions, default=(0.1, 0.2, 0.7))
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the GCN on the train subgraph")
    p.add_argument("--data", required=True)
    p.add_argument("--noise-ratio", type=float, default=0.1)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--hidden", type=int, default=200)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("perturb", help="perturb the val/test subgraph")
    p.add_argument("--data", required=True)
    p.add_argument("--scenario", choices=pt.SCENARIOS, required=True)
    p.add_argument("--checkpoint", default=None,
                   help="trained model (required for advAttack)")
    _add_pert_flags(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("infer", help="run label inference on a test graph")
    p.add_argument("--data", required=True,
                   help="original graph dir (train subgraph source)")
    p.add_argument("--test-data", required=True,
                   help="perturbed test graph dir")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--noise-ratio", type=float, default=0.1)
    _add_infer_flags(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="score a labels file against truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("scenario", help="full train/perturb/infer pipeline")
    p.add_argument("--data", required=True)
    p.add_argument("--scenario", choices=pt.SCENARIOS + ("none",),
                   required=True)
    p.add_argument("--noise-ratio", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--hidden", type=int, default=200)
    _add_pert_flags(p)
    _add_infer_flags(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_scenario)
    return parser


def _apply_config_file(parser, argv):
    """Pre-populate subcommand defaults from a key=value file; explicit
    flags win because defaults only fill unspecified options."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    path = argv[idx + 1]
    defaults = {}
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            defaults[key.strip().replace("-", "_")] = value.strip()
    for subparser in parser._subparsers._group_actions[0].choices.values():
        converted = {}
        for action in subparser._actions:
            if action.dest not in defaults:
                continue
            raw = defaults[action.dest]
            if isinstance(action, argparse.BooleanOptionalAction) or \
                    isinstance(action.const, bool):
                converted[action.dest] = raw.lower() in ("1", "true", "yes")
            elif action.type is not None:
                converted[action.dest] = action.type(raw)
            else:
                converted[action.dest] = raw
            action.required = False
        subparser.set_defaults(**converted)
    return argv


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(parser, argv)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
