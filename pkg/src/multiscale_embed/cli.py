"""Command-line interface: train, eval, attn, sweep, export.

Every run is reproducible from its manifest: all randomness hangs off
``--seed`` (default 0), outputs are written atomically, and the manifest
records the resolved configuration plus SHA-256 digests of the inputs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from .checkpoint import _atomic_write_text
from .datasets import DATASET_DIR_VAR
from .evaluation import (
    attention_summary,
    evaluate_ratios,
    format_attention_table,
    format_ratio_table,
    format_sweep_table,
    load_labels,
    sweep,
)
from .graph import load_edge_list
from .training import MultiscaleNodeEmbedding

logger = logging.getLogger(__name__)

THREADS_VAR = "MULTISCALE_EMBED_THREADS"


def main(argv=None):
    _apply_thread_cap()
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except BrokenPipeError:
        return 1
    except Exception as exc:  # single-line diagnostic, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="multiscale-embed",
        description="Multi-scale graph node embeddings with scale attention "
                    "and adversarial latent regularization.",
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train embeddings from an edge list")
    _add_model_flags(train)
    train.add_argument("--edges", required=True, help="edge-list file (one '<id> <id>' per line)")
    train.add_argument("--out", required=True, help="output embedding TSV")
    train.add_argument("--checkpoint", help="checkpoint path (default: <out>.ckpt)")
    train.add_argument("--manifest", help="manifest path (default: <out>.manifest.json)")
    train.set_defaults(func=cmd_train)

    evaluate = sub.add_parser("eval", help="node-classification accuracy table")
    evaluate.add_argument("--embeddings", required=True, help="embedding TSV from train/export")
    evaluate.add_argument("--labels", required=True, help="labels file ('<id>\\t<label>' per line)")
    evaluate.add_argument("--ratios", default="0.1:0.9:0.1",
                          help="labeled ratios: 'start:end:step' or comma list (default 0.1:0.9:0.1)")
    evaluate.add_argument("--repeats", type=int, default=10, help="splits per ratio (default 10)")
    evaluate.add_argument("--seed", type=int, default=0, help="split seed (default 0)")
    evaluate.add_argument("--out", help="write the table here instead of stdout")
    evaluate.set_defaults(func=cmd_eval)

    attn = sub.add_parser("attn", help="learned per-scale attention report")
    attn.add_argument("--checkpoint", required=True)
    attn.add_argument("--edges", required=True)
    attn.add_argument("--out", help="write the per-scale means here instead of stdout")
    attn.add_argument("--per-node", dest="per_node", help="also write the full node-by-scale matrix")
    attn.set_defaults(func=cmd_attn)

    swp = sub.add_parser("sweep", help="accuracy across one parameter's values")
    _add_model_flags(swp)
    swp.add_argument("--edges", required=True)
    swp.add_argument("--labels", required=True)
    swp.add_argument("--param", required=True, choices=("dim", "scales"))
    swp.add_argument("--values", required=True, help="comma-separated values, e.g. 1,2,3,4")
    swp.add_argument("--ratio", type=float, default=0.5, help="labeled ratio (default 0.5)")
    swp.add_argument("--repeats", type=int, default=10)
    swp.add_argument("--out", help="write the table here instead of stdout")
    swp.set_defaults(func=cmd_sweep)

    export = sub.add_parser("export", help="regenerate embeddings from a checkpoint")
    export.add_argument("--checkpoint", required=True)
    export.add_argument("--edges", required=True)
    export.add_argument("--out", required=True)
    export.add_argument("--manifest", help="manifest path (default: <out>.manifest.json)")
    export.set_defaults(func=cmd_export)

    return parser


def _add_model_flags(cmd):
    cmd.add_argument("--k", "--scales", dest="k", type=int, default=8,
                     help="maximum transition scale K (default 8)")
    cmd.add_argument("--dim", type=int, default=128, help="embedding dimension (default 128)")
    cmd.add_argument("--hidden", type=int, default=512, help="autoencoder hidden width (default 512)")
    cmd.add_argument("--neg", type=int, default=7, help="negative samples per node (default 7)")
    cmd.add_argument("--epochs", type=int, default=200, help="training epochs (default 200)")
    cmd.add_argument("--batch-size", type=int, default=64, help="mini-batch size (default 64)")
    cmd.add_argument("--lr", type=float, default=1e-3, help="learning rate (default 1e-3)")
    cmd.add_argument("--seed", type=int, default=0, help="seed for all randomness (default 0)")
    cmd.add_argument("--no-adversarial", dest="adversarial", action="store_false",
                     help="disable the adversarial phases (plain attention autoencoder)")
    cmd.add_argument("--prior-std", type=float, default=1.0,
                     help="Gaussian prior standard deviation (default 1.0)")
    cmd.add_argument("--adv-weight", type=float, default=1.0,
                     help="generator loss weight (default 1.0)")
    cmd.add_argument("--disc-hidden", type=int, default=512,
                     help="discriminator hidden width (default 512)")
    cmd.add_argument("--attention-rank", default="auto",
                     help="'auto', 'full', or an integer rank for the attention matrix")
    cmd.add_argument("--scale-orientation", choices=("row", "column"), default="row",
                     help="scale vectors from rows (default) or columns of A^k")


def _estimator_from_args(args):
    rank = args.attention_rank
    if rank not in ("auto", "full"):
        rank = int(rank)
    return MultiscaleNodeEmbedding(
        scales=args.k,
        dim=args.dim,
        hidden=args.hidden,
        negatives=args.neg,
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr=args.lr,
        adversarial=args.adversarial,
        prior_std=args.prior_std,
        adv_weight=args.adv_weight,
        disc_hidden=args.disc_hidden,
        attention_rank=rank,
        scale_orientation=args.scale_orientation,
        random_state=args.seed,
        verbose=1 if args.verbose else 0,
    )


# ---------------------------------------------------------------------------
# commands


def cmd_train(args):
    started = time.time()
    estimator = _estimator_from_args(args)
    graph = load_edge_list(args.edges)
    logger.info("loaded %d nodes, %d edges", graph.node_count, graph.edge_count)
    estimator.fit(graph)

    checkpoint_path = args.checkpoint or args.out + ".ckpt"
    manifest_path = args.manifest or args.out + ".manifest.json"
    write_embeddings(args.out, graph, estimator.embedding_)
    estimator.save_checkpoint(checkpoint_path)
    final_losses = {key: series[-1] for key, series in estimator.history_.items()}
    write_manifest(
        manifest_path,
        command="train",
        config=estimator.get_params(),
        inputs={"edges": args.edges},
        outputs={"embeddings": args.out, "checkpoint": checkpoint_path},
        duration=time.time() - started,
        final_losses=final_losses,
    )
    logger.info("wrote %s, %s, %s", args.out, checkpoint_path, manifest_path)
    return 0


def cmd_eval(args):
    ids, matrix = read_embeddings(args.embeddings)
    index = {node_id: i for i, node_id in enumerate(ids)}
    labels = load_labels(args.labels, index.__getitem__)
    ratios = parse_ratios(args.ratios)
    rows = evaluate_ratios(matrix, labels, ratios, repeats=args.repeats, seed=args.seed)
    _emit(format_ratio_table(rows), args.out)
    return 0


def cmd_attn(args):
    estimator = MultiscaleNodeEmbedding.from_checkpoint(args.checkpoint)
    estimator.bind(load_edge_list(args.edges))
    means, matrix = attention_summary(estimator)
    _emit(format_attention_table(estimator.orders_, means), args.out)
    if args.per_node:
        lines = ["\t".join(f"{w:.9f}" for w in row) for row in matrix]
        _atomic_write_text(args.per_node, "\n".join(lines) + "\n")
    return 0


def cmd_sweep(args):
    graph = load_edge_list(args.edges)
    labels = load_labels(args.labels, graph.index_of)
    base = _estimator_from_args(args)
    values = _parse_sweep_values(args.param, args.values)
    rows = sweep(graph, labels, args.param, values, estimator=base,
                 ratio=args.ratio, repeats=args.repeats, seed=args.seed)
    _emit(format_sweep_table(args.param, rows), args.out)
    return 0


def cmd_export(args):
    started = time.time()
    estimator = MultiscaleNodeEmbedding.from_checkpoint(args.checkpoint)
    graph = load_edge_list(args.edges)
    estimator.bind(graph)
    write_embeddings(args.out, graph, estimator.embedding_)
    manifest_path = args.manifest or args.out + ".manifest.json"
    write_manifest(
        manifest_path,
        command="export",
        config=estimator.get_params(),
        inputs={"checkpoint": args.checkpoint, "edges": args.edges},
        outputs={"embeddings": args.out},
        duration=time.time() - started,
        final_losses={key: series[-1] if series else None
                      for key, series in estimator.history_.items()},
    )
    return 0


# ---------------------------------------------------------------------------
# file formats and helpers


def write_embeddings(path, graph, matrix):
    """TSV, no header: node id then the latent values with 12 significant
    digits, rows in node-index order. Written atomically."""
    lines = []
    for i in range(graph.node_count):
        values = "\t".join(f"{v:.12g}" for v in matrix[i])
        lines.append(f"{graph.id_of(i)}\t{values}")
    _atomic_write_text(path, "\n".join(lines) + "\n")


def read_embeddings(path):
    """Read an embedding TSV into (ids, float matrix)."""
    ids, rows = [], []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.rstrip("\n")
            if not stripped:
                continue
            fields = stripped.split("\t")
            if len(fields) < 2:
                raise ValueError(f"{path}: line {line_no}: expected id and values")
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise ValueError(f"{path}: line {line_no}: inconsistent column count")
            ids.append(fields[0])
            try:
                rows.append([float(v) for v in fields[1:]])
            except ValueError:
                raise ValueError(f"{path}: line {line_no}: non-numeric value") from None
    if not ids:
        raise ValueError(f"{path}: empty embedding file")
    return ids, np.asarray(rows, dtype=np.float64)


def parse_ratios(spec):
    """Ratio grammar: 'start:end:step' or a comma list like '0.3,0.5'."""
    spec = spec.strip()
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"ratio range must be start:end:step, got {spec!r}")
        start, end, step = (float(p) for p in parts)
        if step <= 0:
            raise ValueError("ratio step must be positive")
        count = int(np.floor((end - start) / step + 0.5)) + 1
        ratios = [round(start + i * step, 10) for i in range(max(count, 0))]
        ratios = [r for r in ratios if r <= end + 1e-9]
    else:
        ratios = [float(p) for p in spec.split(",") if p.strip()]
    if not ratios:
        raise ValueError(f"no ratios in {spec!r}")
    for r in ratios:
        if not 0.0 < r < 1.0:
            raise ValueError(f"ratio {r} outside (0, 1)")
    return ratios


def _parse_sweep_values(parameter, text):
    values = [int(v) for v in text.split(",") if v.strip()]
    if not values:
        raise ValueError(f"no values in {text!r}")
    return values


def write_manifest(path, command, config, inputs, outputs, duration, final_losses):
    manifest = {
        "tool": "multiscale-embed",
        "version": __version__,
        "command": command,
        "config": _jsonable(config),
        "inputs": {
            name: {"path": p, "sha256": _digest(p)} for name, p in inputs.items()
        },
        "outputs": outputs,
        "duration_seconds": round(duration, 3),
        "final_losses": final_losses,
    }
    _atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    return obj


def _digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _emit(text, out_path):
    if out_path:
        _atomic_write_text(out_path, text)
    else:
        sys.stdout.write(text)


def _apply_thread_cap():
    cap = os.environ.get(THREADS_VAR)
    if not cap:
        return
    try:
        limit = max(1, int(cap))
    except ValueError:
        print(f"error: {THREADS_VAR} must be an integer, got {cap!r}", file=sys.stderr)
        raise SystemExit(2)
    import threadpoolctl

    threadpoolctl.threadpool_limits(limits=limit)


if __name__ == "__main__":
    sys.exit(main())
