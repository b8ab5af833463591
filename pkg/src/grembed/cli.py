"""Command line front end.

Each subcommand reads flags, optionally merges a JSON config file
(flags always win over the file), runs the corresponding library
routine, and emits a machine-readable report of key<TAB>value lines
behind a ``#version`` header on stdout, with a one-line human summary
on stderr. Exit codes: 0 on success, 2 on configuration or input
problems, 3 on runtime failures.

Seed resolution order: ``--seed`` flag, then the config file, then the
``GREMBED_SEED`` environment variable, then 42.
"""

import argparse
import json
import os
import sys
import time

import numpy as np

from . import autoenc, harness, multiscale, shallow, structural, subgraph, walks
from .errors import (
    ConfigError,
    ContractError,
    EdgeListParseError,
    GrembedError,
    ValidationError,
)
from .graph import load_edge_list, load_labels
from .harness import EvalReport, RunConfig
from .shallow import ShallowConfig, load_embedding
from .walks import WalkConfig

EMBED_METHODS = shallow.METHODS + ("sdne", "dngr")
WALK_KINDS = ("uniform", "node2vec", "metapath")


def _ints(value):
    """Comma-separated string or JSON list -> tuple of ints."""
    if value is None:
        return None
    if isinstance(value, str):
        parts = [p for p in value.split(",") if p.strip()]
    else:
        parts = list(value)
    try:
        return tuple(int(p) for p in parts)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a comma-separated int list, got {value!r}")


def _need(args, name):
    value = getattr(args, name.replace("-", "_"))
    if value is None:
        raise ConfigError(f"--{name} is required")
    return value


def _open_input(path):
    """Fail early with the offending path when an input is missing."""
    if not os.path.exists(path):
        raise ConfigError(f"input file not found: {path}")
    if os.path.isdir(path):
        raise ConfigError(f"input path is a directory: {path}")
    return path


def _labels_aligned(path, node_ids):
    """id<TAB>label file -> int labels aligned to the given id order."""
    _open_input(path)
    raw = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            toks = line.split("\t") if "\t" in line else line.split()
            if len(toks) != 2:
                raise EdgeListParseError("expected id<TAB>label", lineno)
            raw[toks[0]] = toks[1]
    missing = [i for i in node_ids if i not in raw]
    if missing:
        raise ValidationError(
            f"labels file is missing {len(missing)} node ids "
            f"(first: {missing[0]!r})")
    names = sorted(set(raw.values()))
    lut = {s: i for i, s in enumerate(names)}
    labels = np.array([lut[raw[i]] for i in node_ids], dtype=np.int64)
    return labels, names


def _shallow_config(args, dim_default=16):
    def pick(flag, fallback):
        return fallback if flag is None else flag

    return ShallowConfig(
        dim=pick(args.dim, dim_default),
        epochs=pick(args.epochs, 5),
        lr=pick(args.lr, 0.025),
        batch_size=pick(getattr(args, "batch_size", None), 256),
        walk_length=pick(args.walk_length, 10),
        walks_per_node=pick(args.walks_per_node, 10),
        window=pick(args.window, 5),
        p=pick(getattr(args, "p", None), 1.0),
        q=pick(getattr(args, "q", None), 1.0),
        negatives=pick(getattr(args, "negatives", None), 5),
        power_max=pick(getattr(args, "power_max", None), 4),
        offsets=_ints(getattr(args, "offsets", None)) or (1, 2),
        seed=args.seed,
    )


# ---------------------------------------------------------------------
# subcommand bodies; each returns an EvalReport
# ---------------------------------------------------------------------


def _cmd_embed(args):
    g = load_edge_list(_open_input(_need(args, "input")),
                       directed=args.directed)
    method = args.method
    if method in shallow.METHODS:
        cfg = _shallow_config(args)
        table = shallow.train_shallow(g, method, cfg)
        dim = cfg.dim
    elif method in ("sdne", "dngr"):
        acfg = autoenc.AutoencoderConfig(
            dim=args.dim if args.dim is not None else 16,
            hidden=_ints(args.hidden) or (32,),
            epochs=args.epochs if args.epochs is not None else 100,
            lr=args.lr if args.lr is not None else 0.01,
            seed=args.seed)
        table, _ = autoenc.train_autoencoder(g, method, acfg)
        dim = acfg.dim
    else:
        raise ConfigError(
            f"unknown method {method!r}; choose one of {EMBED_METHODS}")
    table.save(_need(args, "out"))
    return EvalReport(
        task="embed",
        metrics={"node_count": g.node_count, "edge_count": g.edge_count,
                 "dim": dim},
        config={"method": method, "seed": args.seed,
                "input": args.input, "out": args.out})


def _cmd_walk(args):
    g = load_edge_list(_open_input(_need(args, "input")),
                       directed=args.directed)
    kind = args.kind
    metapath = None
    if kind == "metapath":
        types_path = _need(args, "types")
        node_types, _ = load_labels(_open_input(types_path), g)
        g = g.with_types(node_types=node_types)
        metapath = _ints(_need(args, "metapath"))
    cfg = WalkConfig(length=args.length, walks_per_node=args.walks_per_node,
                     p=args.p, q=args.q, metapath=metapath, seed=args.seed)
    if kind == "uniform":
        corpus = walks.sample_uniform_walks(g, cfg)
    elif kind == "node2vec":
        corpus = walks.sample_node2vec_walks(g, cfg)
    elif kind == "metapath":
        corpus = walks.sample_metapath_walks(g, cfg)
    else:
        raise ConfigError(f"unknown walk kind {kind!r}")
    corpus.dump(_need(args, "out"))
    return EvalReport(
        task="walk",
        metrics={"walk_count": len(corpus),
                 "skipped_starts": corpus.skipped_starts,
                 "node_count": g.node_count},
        config={"kind": kind, "length": args.length,
                "walks_per_node": args.walks_per_node, "p": args.p,
                "q": args.q, "seed": args.seed, "input": args.input,
                "out": args.out})


def _cmd_roles(args):
    g = load_edge_list(_open_input(_need(args, "input")),
                       directed=args.directed)
    out = _need(args, "out")
    if args.mode == "graphwave":
        grid = np.linspace(0.0, args.t_max, args.t_points)
        sigs = structural.graphwave_signature(g, s=args.scale, t_grid=grid)
        structural.export_signatures(out, sigs, list(g.node_ids),
                                     include_psi=args.include_psi)
        width = sigs[0].char_samples.size
        if args.include_psi:
            width += sigs[0].psi.size
        return EvalReport(
            task="roles",
            metrics={"node_count": g.node_count, "signature_dim": width},
            config={"mode": "graphwave", "scale": args.scale,
                    "t_points": args.t_points, "t_max": args.t_max,
                    "input": args.input, "out": out})
    if args.mode == "struc2vec":
        table = structural.struc2vec_embed(
            g, k_max=args.k_max, dim=args.dim if args.dim is not None else 16,
            walk_length=args.walk_length if args.walk_length is not None else 20,
            walks_per_node=(args.walks_per_node
                            if args.walks_per_node is not None else 8),
            window=args.window if args.window is not None else 4,
            epochs=args.epochs if args.epochs is not None else 3,
            seed=args.seed)
        table.save(out)
        return EvalReport(
            task="roles",
            metrics={"node_count": g.node_count, "dim": table.dim},
            config={"mode": "struc2vec", "k_max": args.k_max,
                    "seed": args.seed, "input": args.input, "out": out})
    raise ConfigError(f"unknown roles mode {args.mode!r}")


def _cmd_subgraph(args):
    specs = subgraph.parse_multigraph_file(_open_input(_need(args, "dataset")))
    model, acc = subgraph.classify_subgraphs(
        specs, rounds=args.rounds, edge_dim=args.edge_dim,
        out_dim=args.out_dim, epochs=args.epochs, lr=args.lr,
        seed=args.seed, target_acc=args.target_acc)
    if args.out is not None:
        picked = model.predict(specs)
        with open(args.out, "w") as fh:
            fh.write("graph_id\tpredicted\tlabel\n")
            for spec, p in zip(specs, picked):
                fh.write(f"{spec.name}\t{p}\t{spec.label}\n")
    return EvalReport(
        task="subgraph",
        metrics={"train_accuracy": acc, "graph_count": len(specs),
                 "epochs_run": len(model.history)},
        config={"rounds": args.rounds, "edge_dim": args.edge_dim,
                "out_dim": args.out_dim, "seed": args.seed,
                "dataset": args.dataset})


def _cmd_eval_nodes(args):
    table = load_embedding(_open_input(_need(args, "embedding")))
    labels, _ = _labels_aligned(_need(args, "labels"), table.node_ids)
    report = harness.node_classification_eval(
        table.vectors, labels, train_fraction=args.train_fraction,
        seeds=range(args.eval_seeds), epochs=args.epochs, lr=args.lr)
    report.config.update({"embedding": args.embedding, "labels": args.labels,
                          "train_fraction": args.train_fraction})
    return report


def _cmd_eval_links(args):
    g = load_edge_list(_open_input(_need(args, "input")),
                       directed=args.directed)
    base_cfg = _shallow_config(args)
    method = args.method

    def embed_fn(residual, seed):
        parts = {f: getattr(base_cfg, f)
                 for f in base_cfg.__dataclass_fields__}
        parts["seed"] = args.seed + 7919 * seed
        return shallow.train_shallow(residual, method, ShallowConfig(**parts))

    report = harness.link_prediction_eval(
        g, embed_fn, holdout_fraction=args.holdout,
        seeds=range(args.eval_seeds))
    report.config.update({"method": method, "holdout": args.holdout,
                          "seed": args.seed, "input": args.input})
    return report


def _cmd_eval_cluster(args):
    table = load_embedding(_open_input(_need(args, "embedding")))
    labels, names = _labels_aligned(_need(args, "labels"), table.node_ids)
    k = args.k if args.k is not None else len(names)
    report = harness.clustering_eval(table.vectors, labels, k,
                                     seed=args.seed, restarts=args.restarts)
    report.config.update({"embedding": args.embedding, "labels": args.labels,
                          "seed": args.seed})
    return report


def _cmd_project(args):
    table = load_embedding(_open_input(_need(args, "embedding")))
    out = _need(args, "out")
    harness.export_projection(out, table.vectors, table.node_ids,
                              dims=args.dims)
    return EvalReport(
        task="project",
        metrics={"node_count": len(table.vectors), "dims": args.dims},
        config={"embedding": args.embedding, "out": out})


def _cmd_harp(args):
    g = load_edge_list(_open_input(_need(args, "input")),
                       directed=args.directed)
    cfg = _shallow_config(args)
    table = multiscale.harp_train(g, args.base, args.levels, cfg)
    table.save(_need(args, "out"))
    return EvalReport(
        task="harp",
        metrics={"node_count": g.node_count, "dim": cfg.dim,
                 "levels": args.levels},
        config={"base": args.base, "seed": args.seed,
                "input": args.input, "out": args.out})


def _cmd_ohmnet(args):
    if not args.layer:
        raise ConfigError("at least one --layer NAME=PATH is required")
    layer_files = {}
    order = []
    for spec in args.layer:
        if "=" not in spec:
            raise ConfigError(f"--layer expects NAME=PATH, got {spec!r}")
        name, path = spec.split("=", 1)
        if name in layer_files:
            raise ConfigError(f"duplicate layer name {name!r}")
        layer_files[name] = _open_input(path)
        order.append(name)

    tied = None
    if args.hierarchy is not None:
        hier = multiscale.load_hierarchy(_open_input(args.hierarchy),
                                         layer_files)
        order = hier.names()
        graphs = [hier.layers[n] for n in order]
        tied = hier.tied_index_pairs()
    else:
        graphs = [load_edge_list(layer_files[n]) for n in order]

    cfg = _shallow_config(args, dim_default=8)
    parts = {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}
    parts["epochs"] = args.epochs if args.epochs is not None else 4
    parts["walk_length"] = args.walk_length if args.walk_length is not None else 10
    parts["walks_per_node"] = (args.walks_per_node
                               if args.walks_per_node is not None else 5)
    parts["window"] = args.window if args.window is not None else 3
    cfg = ShallowConfig(**parts)

    tables = multiscale.ohmnet_train(graphs, lam=args.lam, config=cfg,
                                     hierarchy_edges=tied,
                                     squared=not args.unsquared)
    prefix = _need(args, "out_prefix")
    for name, table in zip(order, tables):
        table.save(f"{prefix}{name}.tsv")

    gap = multiscale.inter_layer_gap(tables, tied)
    return EvalReport(
        task="ohmnet",
        metrics={"layer_count": len(graphs), "inter_layer_gap": gap,
                 "dim": cfg.dim},
        config={"lam": args.lam, "seed": args.seed,
                "layers": ",".join(order), "out_prefix": prefix})


_COMMANDS = {
    "embed": _cmd_embed,
    "walk": _cmd_walk,
    "roles": _cmd_roles,
    "subgraph": _cmd_subgraph,
    "eval-nodes": _cmd_eval_nodes,
    "eval-links": _cmd_eval_links,
    "eval-cluster": _cmd_eval_cluster,
    "project": _cmd_project,
    "harp": _cmd_harp,
    "ohmnet": _cmd_ohmnet,
}


# ---------------------------------------------------------------------
# parser assembly
# ---------------------------------------------------------------------


def _add_common(sp):
    sp.add_argument("--config", default=None,
                    help="JSON file of option defaults; flags win")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--report", default=None,
                    help="also write the report lines to this file")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--deterministic", action=argparse.BooleanOptionalAction,
                    default=True)


def _add_shallow_flags(sp, with_method=True):
    if with_method:
        sp.add_argument("--method", default="deepwalk")
    sp.add_argument("--dim", type=int, default=None)
    sp.add_argument("--epochs", type=int, default=None)
    sp.add_argument("--lr", type=float, default=None)
    sp.add_argument("--batch-size", type=int, default=None)
    sp.add_argument("--walk-length", type=int, default=None)
    sp.add_argument("--walks-per-node", type=int, default=None)
    sp.add_argument("--window", type=int, default=None)
    sp.add_argument("--p", type=float, default=None)
    sp.add_argument("--q", type=float, default=None)
    sp.add_argument("--negatives", type=int, default=None)
    sp.add_argument("--power-max", type=int, default=None)
    sp.add_argument("--offsets", default=None)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="grembed", description="Graph embedding toolkit.")
    subs = parser.add_subparsers(dest="command_name", required=True)
    built = {}

    sp = subs.add_parser("embed", help="train node embeddings")
    sp.add_argument("--input", default=None)
    sp.add_argument("--out", default=None)
    sp.add_argument("--directed", action="store_true")
    sp.add_argument("--hidden", default=None,
                    help="autoencoder hidden widths, comma-separated")
    _add_shallow_flags(sp)
    _add_common(sp)
    built["embed"] = sp

    sp = subs.add_parser("walk", help="sample random walks")
    sp.add_argument("--input", default=None)
    sp.add_argument("--out", default=None)
    sp.add_argument("--directed", action="store_true")
    sp.add_argument("--kind", default="uniform", choices=WALK_KINDS)
    sp.add_argument("--length", type=int, default=10)
    sp.add_argument("--walks-per-node", type=int, default=10)
    sp.add_argument("--p", type=float, default=1.0)
    sp.add_argument("--q", type=float, default=1.0)
    sp.add_argument("--types", default=None,
                    help="id<TAB>type file for metapath walks")
    sp.add_argument("--metapath", default=None,
                    help="comma-separated type indices")
    _add_common(sp)
    built["walk"] = sp

    sp = subs.add_parser("roles", help="structural role signatures")
    sp.add_argument("--input", default=None)
    sp.add_argument("--out", default=None)
    sp.add_argument("--directed", action="store_true")
    sp.add_argument("--mode", default="graphwave",
                    choices=("graphwave", "struc2vec"))
    sp.add_argument("--scale", type=float, default=0.5)
    sp.add_argument("--t-points", type=int, default=50)
    sp.add_argument("--t-max", type=float, default=100.0)
    sp.add_argument("--include-psi", action="store_true")
    sp.add_argument("--k-max", type=int, default=3)
    sp.add_argument("--dim", type=int, default=None)
    sp.add_argument("--walk-length", type=int, default=None)
    sp.add_argument("--walks-per-node", type=int, default=None)
    sp.add_argument("--window", type=int, default=None)
    sp.add_argument("--epochs", type=int, default=None)
    _add_common(sp)
    built["roles"] = sp

    sp = subs.add_parser("subgraph", help="whole-graph classification")
    sp.add_argument("--dataset", default=None)
    sp.add_argument("--out", default=None)
    sp.add_argument("--rounds", type=int, default=2)
    sp.add_argument("--edge-dim", type=int, default=8)
    sp.add_argument("--out-dim", type=int, default=8)
    sp.add_argument("--epochs", type=int, default=200)
    sp.add_argument("--lr", type=float, default=0.01)
    sp.add_argument("--target-acc", type=float, default=None)
    _add_common(sp)
    built["subgraph"] = sp

    sp = subs.add_parser("eval-nodes", help="node classification quality")
    sp.add_argument("--embedding", default=None)
    sp.add_argument("--labels", default=None)
    sp.add_argument("--train-fraction", type=float, default=0.1)
    sp.add_argument("--eval-seeds", type=int, default=10)
    sp.add_argument("--epochs", type=int, default=300)
    sp.add_argument("--lr", type=float, default=0.1)
    _add_common(sp)
    built["eval-nodes"] = sp

    sp = subs.add_parser("eval-links", help="link prediction quality")
    sp.add_argument("--input", default=None)
    sp.add_argument("--directed", action="store_true")
    sp.add_argument("--holdout", type=float, default=0.2)
    sp.add_argument("--eval-seeds", type=int, default=10)
    _add_shallow_flags(sp)
    _add_common(sp)
    built["eval-links"] = sp

    sp = subs.add_parser("eval-cluster", help="clustering quality")
    sp.add_argument("--embedding", default=None)
    sp.add_argument("--labels", default=None)
    sp.add_argument("--k", type=int, default=None)
    sp.add_argument("--restarts", type=int, default=10)
    _add_common(sp)
    built["eval-cluster"] = sp

    sp = subs.add_parser("project", help="2-d PCA projection")
    sp.add_argument("--embedding", default=None)
    sp.add_argument("--out", default=None)
    sp.add_argument("--dims", type=int, default=2)
    _add_common(sp)
    built["project"] = sp

    sp = subs.add_parser("harp", help="coarsen-then-train embeddings")
    sp.add_argument("--input", default=None)
    sp.add_argument("--out", default=None)
    sp.add_argument("--directed", action="store_true")
    sp.add_argument("--base", default="deepwalk")
    sp.add_argument("--levels", type=int, default=2)
    _add_shallow_flags(sp, with_method=False)
    _add_common(sp)
    built["harp"] = sp

    sp = subs.add_parser("ohmnet", help="multilayer tied embeddings")
    sp.add_argument("--layer", action="append", default=None,
                    metavar="NAME=PATH")
    sp.add_argument("--hierarchy", default=None)
    sp.add_argument("--lam", type=float, default=0.1)
    sp.add_argument("--unsquared", action="store_true")
    sp.add_argument("--out-prefix", default=None)
    _add_shallow_flags(sp, with_method=False)
    _add_common(sp)
    built["ohmnet"] = sp

    return parser, built


def _load_config_file(argv):
    if "--config" not in argv:
        return {}
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise ConfigError("--config needs a file path")
    path = _open_input(argv[i + 1])
    with open(path) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    return cfg


def _explicit_dests(argv, sub):
    """Dests whose flags literally appear on the command line."""
    opt_to_dest = {}
    for action in sub._actions:
        for opt in action.option_strings:
            opt_to_dest[opt] = action.dest
    seen = set()
    for tok in argv:
        if tok.startswith("--"):
            name = tok.split("=", 1)[0]
            if name in opt_to_dest:
                seen.add(opt_to_dest[name])
    return seen


def parse_args(argv):
    parser, built = build_parser()
    args = parser.parse_args(argv)
    sub = built[args.command_name]
    cfg = _load_config_file(argv)
    if cfg:
        explicit = _explicit_dests(argv, sub)
        valid = {a.dest for a in sub._actions}
        for key, value in cfg.items():
            dest = key.replace("-", "_")
            if dest not in valid:
                raise ConfigError(f"unknown config key {key!r}")
            if dest not in explicit:
                setattr(args, dest, value)
    if args.seed is None:
        env_seed = os.environ.get("GREMBED_SEED")
        if env_seed is not None:
            try:
                args.seed = int(env_seed)
            except ValueError:
                raise ConfigError(
                    f"GREMBED_SEED is not an integer: {env_seed!r}")
    if args.seed is None:
        args.seed = 42
    return args


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    started = time.perf_counter()
    try:
        args = parse_args(argv)
        # surfaces the deterministic/workers contradiction before any work
        RunConfig(command=args.command_name, seed=args.seed,
                  workers=args.workers, deterministic=args.deterministic)
        report = _COMMANDS[args.command_name](args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ConfigError, ContractError, ValidationError,
            EdgeListParseError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GrembedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    report.wall_clock = time.perf_counter() - started
    text = "\n".join(report.lines()) + "\n"
    sys.stdout.write(text)
    if args.report is not None:
        with open(args.report, "w") as fh:
            fh.write(text)
    print(report.summary(), file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
