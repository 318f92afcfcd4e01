"""Bundled desk-scale fixtures and loaders for on-disk citation datasets.

The karate-club graph (Zachary 1977: 34 members, 78 ties, two factions
after the split) ships inline so the library and its tests run without any
downloads. Citation benchmarks are loaded from a local directory; see
``find_citation_dataset`` for the lookup convention.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .evaluation import LabelSet
from .graph import Graph

_KARATE_EDGES = (
    (0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (0, 6), (0, 7), (0, 8), (0, 10),
    (0, 11), (0, 12), (0, 13), (0, 17), (0, 19), (0, 21), (0, 31), (1, 2),
    (1, 3), (1, 7), (1, 13), (1, 17), (1, 19), (1, 21), (1, 30), (2, 3),
    (2, 7), (2, 8), (2, 9), (2, 13), (2, 27), (2, 28), (2, 32), (3, 7),
    (3, 12), (3, 13), (4, 6), (4, 10), (5, 6), (5, 10), (5, 16), (6, 16),
    (8, 30), (8, 32), (8, 33), (9, 33), (13, 33), (14, 32), (14, 33),
    (15, 32), (15, 33), (18, 32), (18, 33), (19, 33), (20, 32), (20, 33),
    (22, 32), (22, 33), (23, 25), (23, 27), (23, 29), (23, 32), (23, 33),
    (24, 25), (24, 27), (24, 31), (25, 31), (26, 29), (26, 33), (27, 33),
    (28, 31), (28, 33), (29, 32), (29, 33), (30, 32), (30, 33), (31, 32),
    (31, 33), (32, 33),
)

# Faction membership after the club split; 0 = instructor's side,
# 1 = administrator's side.
_KARATE_FACTIONS = (
    0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 1, 0, 0, 1, 0, 1, 0, 1, 1,
    1, 1, 1, 1, 1, 1, 1, 1, 1, 1,
)


def karate_club():
    """The karate-club fixture: (Graph, LabelSet) with the two factions."""
    graph = Graph(
        ids=tuple(str(i) for i in range(34)),
        edges=_KARATE_EDGES,
    )
    labels = LabelSet(
        node_indices=np.arange(34, dtype=np.int64),
        classes=np.asarray(_KARATE_FACTIONS, dtype=np.int64),
        class_names=("instructor", "administrator"),
    )
    return graph, labels


def karate_edge_lines():
    """The fixture as edge-list text, for exercising file interfaces."""
    return "".join(f"{i} {j}\n" for i, j in _KARATE_EDGES)


def karate_label_lines():
    names = ("instructor", "administrator")
    return "".join(f"{i}\t{names[c]}\n" for i, c in enumerate(_KARATE_FACTIONS))


# ---------------------------------------------------------------------------
# on-disk citation datasets (Cora layout)


DATASET_DIR_VAR = "MULTISCALE_EMBED_DATA"


def find_citation_dataset(name, start=None):
    """Locate ``<dir>/<name>/`` holding either ``<name>.edges`` +
    ``<name>.labels`` or the raw ``<name>.cites`` + ``<name>.content`` pair.

    Searches ``$MULTISCALE_EMBED_DATA`` and then ``data/`` upward from
    ``start`` (default: the working directory). Returns the directory Path
    or None.
    """
    candidates = []
    env = os.environ.get(DATASET_DIR_VAR)
    if env:
        candidates.append(Path(env) / name)
        candidates.append(Path(env))
    here = Path(start) if start is not None else Path.cwd()
    for base in (here, *here.parents):
        candidates.append(base / "data" / name)
    for cand in candidates:
        if _dataset_files(cand, name) is not None:
            return cand
    return None


def _dataset_files(directory, name):
    directory = Path(directory)
    converted = (directory / f"{name}.edges", directory / f"{name}.labels")
    raw = (directory / f"{name}.cites", directory / f"{name}.content")
    if all(p.is_file() for p in converted):
        return converted
    if all(p.is_file() for p in raw):
        return raw
    return None


def load_citation_dataset(directory, name="cora"):
    """Load a citation dataset as (Graph, LabelSet).

    Supports the converted pair (``.edges`` one edge per line, ``.labels``
    tab-separated id/label) or the raw pair (``.cites`` citation pairs,
    ``.content`` with the label in the last column). Nodes appearing only
    in the content file become isolated nodes.
    """
    from .evaluation import load_labels
    from .graph import load_edge_list

    files = _dataset_files(directory, name)
    if files is None:
        raise FileNotFoundError(
            f"no {name}.edges/{name}.labels or {name}.cites/{name}.content under {directory}"
        )
    edge_path, label_path = files
    if edge_path.suffix == ".cites":
        # Content ids are registered first so papers without citations keep
        # an index (they become isolated nodes).
        ids, label_lines = _parse_content(label_path)
        edge_text = Path(edge_path).read_text(encoding="utf-8")
        graph = _graph_with_nodes(ids, edge_text)
        labels = load_labels(label_lines.encode("utf-8"), graph.index_of)
        return graph, labels
    graph = load_edge_list(edge_path)
    labels = load_labels(str(label_path), graph.index_of)
    return graph, labels


def _parse_content(path):
    ids, lines = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            fields = line.split()
            if len(fields) < 2:
                continue
            ids.append(fields[0])
            lines.append(f"{fields[0]}\t{fields[-1]}\n")
    return ids, "".join(lines)


def _graph_with_nodes(ids, edge_text):
    """Graph over the given id order plus the edges named in the text."""
    index = {node_id: i for i, node_id in enumerate(ids)}
    order = list(ids)
    edges = set()
    for line_no, line in enumerate(edge_text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        tokens = stripped.split()
        if len(tokens) < 2:
            from .exceptions import EdgeListParseError

            raise EdgeListParseError(line_no, f"expected two node ids, got {len(tokens)} token(s)")
        for tok in tokens[:2]:
            if tok not in index:
                index[tok] = len(order)
                order.append(tok)
        i, j = index[tokens[0]], index[tokens[1]]
        if i != j:
            edges.add((min(i, j), max(i, j)))
    return Graph(ids=tuple(order), edges=tuple(sorted(edges)))
