"""Node-classification evaluation, per-scale baselines, attention analytics.

The protocol: stratified random splits at a given labeled ratio, a
one-vs-rest L2-regularized logistic regression probe per split, accuracy on
the held-out remainder, averaged over repeats with distinct split seeds.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from sklearn.base import clone
from sklearn.linear_model import LogisticRegression
from sklearn.multiclass import OneVsRestClassifier
from sklearn.utils.validation import check_is_fitted

from .exceptions import LabelFileError
from .training import MultiscaleNodeEmbedding
from .validation import check_positive_int, check_ratio

logger = logging.getLogger(__name__)

_SPLIT_STREAM = 2


@dataclass(frozen=True)
class LabelSet:
    """Class labels over node indices; class ids are contiguous from 0 in
    first-appearance order of the label strings."""

    node_indices: np.ndarray
    classes: np.ndarray
    class_names: tuple

    def __post_init__(self):
        if self.node_indices.shape != self.classes.shape:
            raise ValueError("node_indices and classes must align")

    @property
    def class_count(self):
        return len(self.class_names)

    @property
    def size(self):
        return self.node_indices.size


def load_labels(source, resolve_id):
    """Parse a labels file: one ``<node-id><TAB><label>`` pair per line
    (any whitespace run also accepted when the label has no spaces).

    ``resolve_id`` maps an id string to a node index and should raise
    KeyError for unknown ids; errors carry the offending line number.
    """
    if isinstance(source, (str, bytes)) or hasattr(source, "read"):
        if isinstance(source, bytes):
            lines = source.decode("utf-8").splitlines()
        elif hasattr(source, "read"):
            raw = source.read()
            lines = (raw.decode("utf-8") if isinstance(raw, bytes) else raw).splitlines()
        else:
            with open(source, "r", encoding="utf-8") as fh:
                lines = fh.read().splitlines()
    else:
        raise TypeError(f"cannot read labels from {type(source).__name__}")

    indices, class_ids, class_names = [], [], {}
    seen = {}
    for line_no, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split("\t") if "\t" in stripped else stripped.split()
        if len(fields) != 2 or not fields[0] or not fields[1]:
            raise LabelFileError(f"expected '<node-id><TAB><label>', got {stripped!r}", line_no)
        node_id, label = fields
        try:
            idx = resolve_id(node_id)
        except KeyError:
            raise LabelFileError(f"unknown node id {node_id!r}", line_no) from None
        if idx in seen:
            raise LabelFileError(f"duplicate label for node id {node_id!r}", line_no)
        seen[idx] = True
        if label not in class_names:
            class_names[label] = len(class_names)
        indices.append(idx)
        class_ids.append(class_names[label])
    if not indices:
        raise LabelFileError("labels file contains no entries")
    return LabelSet(
        node_indices=np.asarray(indices, dtype=np.int64),
        classes=np.asarray(class_ids, dtype=np.int64),
        class_names=tuple(class_names),
    )


def _probe():
    # One-vs-rest logistic regression, L2 strength 1.0, optimized to a
    # 1e-6 gradient tolerance; lbfgs is deterministic so repeats depend only
    # on the split seed. Ties in the final argmax go to the lower class id.
    return OneVsRestClassifier(LogisticRegression(C=1.0, tol=1e-6, max_iter=2000))


def _stratified_split(members_by_class, ratio, rng):
    train_parts, test_parts = [], []
    for members in members_by_class:
        perm = members[rng.permutation(members.size)]
        take = int(np.floor(ratio * members.size + 0.5))
        train_parts.append(perm[:take])
        test_parts.append(perm[take:])
    return np.sort(np.concatenate(train_parts)), np.sort(np.concatenate(test_parts))


def classify(embeddings, labels, ratio, repeats=10, seed=0):
    """Mean and standard deviation of probe accuracy over stratified splits.

    Each repeat draws its own split from a seed-derived substream, trains
    the probe on ``ratio`` of the labeled nodes (stratified by class) and
    scores the remainder. A split leaving some class without training
    samples is re-drawn up to 10 times, then raises.
    """
    check_ratio("ratio", ratio)
    check_positive_int("repeats", repeats)
    embeddings = np.asarray(embeddings, dtype=np.float64)
    positions_by_class = [
        np.flatnonzero(labels.classes == c) for c in range(labels.class_count)
    ]
    features = embeddings[labels.node_indices]
    accuracies = []
    for rep in range(repeats):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(_SPLIT_STREAM, rep))
        )
        for _ in range(10):
            train_pos, test_pos = _stratified_split(positions_by_class, ratio, rng)
            if np.unique(labels.classes[train_pos]).size == labels.class_count:
                break
        else:
            raise ValueError(
                f"a class has no training samples at ratio {ratio}; check label balance"
            )
        if test_pos.size == 0:
            raise ValueError(f"ratio {ratio} leaves no held-out nodes")
        model = _probe().fit(features[train_pos], labels.classes[train_pos])
        predicted = model.predict(features[test_pos])
        accuracies.append(float(np.mean(predicted == labels.classes[test_pos])))
    accuracies = np.asarray(accuracies)
    return float(accuracies.mean()), float(accuracies.std())


def evaluate_ratios(embeddings, labels, ratios, repeats=10, seed=0):
    """Accuracy table rows (ratio, mean, std) for each labeled ratio."""
    rows = []
    for ratio in ratios:
        mean, std = classify(embeddings, labels, ratio, repeats=repeats, seed=seed)
        rows.append((float(ratio), mean, std))
    return rows


def format_ratio_table(rows):
    lines = ["ratio\tmean_acc\tstd_acc"]
    for ratio, mean, std in rows:
        lines.append(f"{ratio:.6g}\t{mean:.6f}\t{std:.6f}")
    return "\n".join(lines) + "\n"


def attention_summary(estimator):
    """Per-scale mean attention and the full per-node weight matrix under
    the estimator's final parameters.

    With attention disabled the weights are the constant uniform
    distribution over the selected scales.
    """
    check_is_fitted(estimator, "embedding_")
    if estimator.attention_ is None:
        k = len(estimator.orders_)
        matrix = np.full((estimator.n_nodes_, k), 1.0 / k)
    else:
        matrix = estimator.attention_
    return matrix.mean(axis=0), matrix


def per_scale_baseline(graph, labels, estimator=None, ratio=0.5, repeats=10, seed=0):
    """Classification accuracy of each scale on its own.

    For every selected order k, trains the plain autoencoder (no attention,
    no adversary) on the k-step scale vectors alone and scores it at the
    given ratio. Returns (orders, accuracies).
    """
    base = estimator if estimator is not None else MultiscaleNodeEmbedding()
    orders = base._resolved_orders()
    accuracies = []
    for k in orders:
        single = clone(base).set_params(scales=[k], attention=False, adversarial=False)
        single.fit(graph)
        mean, _ = classify(single.embedding_, labels, ratio, repeats=repeats, seed=seed)
        logger.info("scale %d baseline accuracy %.4f", k, mean)
        accuracies.append(mean)
    return orders, accuracies


SWEEPABLE = ("dim", "scales")


def sweep(graph, labels, parameter, values, estimator=None, ratio=0.5, repeats=10, seed=0):
    """Train once per parameter value and report accuracy at the given
    ratio. Returns rows (value, mean, std)."""
    if parameter not in SWEEPABLE:
        raise ValueError(f"parameter must be one of {SWEEPABLE}, got {parameter!r}")
    if not values:
        raise ValueError("values must be non-empty")
    base = estimator if estimator is not None else MultiscaleNodeEmbedding()
    rows = []
    for value in values:
        model = clone(base).set_params(**{parameter: value})
        model.fit(graph)
        mean, std = classify(model.embedding_, labels, ratio, repeats=repeats, seed=seed)
        logger.info("sweep %s=%s accuracy %.4f", parameter, value, mean)
        rows.append((value, mean, std))
    return rows


def format_sweep_table(parameter, rows):
    lines = [f"{parameter}\tmean_acc\tstd_acc"]
    for value, mean, std in rows:
        lines.append(f"{value}\t{mean:.6f}\t{std:.6f}")
    return "\n".join(lines) + "\n"


def format_attention_table(orders, means):
    lines = ["scale\tmean_attention"]
    for k, w in zip(orders, means):
        lines.append(f"{k}\t{w:.6f}")
    return "\n".join(lines) + "\n"
