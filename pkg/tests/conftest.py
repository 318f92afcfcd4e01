"""Shared fixtures: tiny hand-built graphs, random-graph helpers, and the
optional Cora dataset discovered on disk."""

import numpy as np
import pytest

from multiscale_embed.datasets import find_citation_dataset, load_citation_dataset
from multiscale_embed.evaluation import LabelSet
from multiscale_embed.graph import Graph


def make_graph(n, edges):
    return Graph(ids=tuple(str(i) for i in range(n)), edges=tuple(sorted(set(edges))))


def er_graph(n, p, rng):
    """Erdos-Renyi instance as a Graph (may contain isolated nodes)."""
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return make_graph(n, edges)


def planted_partition(n_per_class, n_classes, p_in, p_out, rng):
    """Assortative block graph plus aligned labels, for pipeline tests."""
    n = n_per_class * n_classes
    y = np.repeat(np.arange(n_classes), n_per_class)
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            p = p_in if y[i] == y[j] else p_out
            if rng.random() < p:
                edges.append((i, j))
    labels = LabelSet(
        node_indices=np.arange(n, dtype=np.int64),
        classes=y.astype(np.int64),
        class_names=tuple(f"block{c}" for c in range(n_classes)),
    )
    return make_graph(n, edges), labels


@pytest.fixture
def path3():
    """Path 0 - 1 - 2."""
    return make_graph(3, [(0, 1), (1, 2)])


@pytest.fixture
def path3_isolated():
    """Path 0 - 1 - 2 plus isolated node 3."""
    return make_graph(4, [(0, 1), (1, 2)])


@pytest.fixture
def pair():
    """Single edge 0 - 1."""
    return make_graph(2, [(0, 1)])


@pytest.fixture
def path_triangle():
    """Path 0-1-2 plus triangle 3-4-5: the small descent fixture."""
    return make_graph(6, [(0, 1), (1, 2), (3, 4), (4, 5), (3, 5)])


_CORA_DIR = find_citation_dataset("cora")

requires_cora = pytest.mark.skipif(
    _CORA_DIR is None,
    reason=(
        "Cora dataset not found: place cora.cites/cora.content (or "
        "cora.edges/cora.labels) under data/cora/ or set "
        "MULTISCALE_EMBED_DATA; see README"
    ),
)


@pytest.fixture(scope="session")
def cora():
    if _CORA_DIR is None:
        pytest.skip("Cora dataset not available")
    return load_citation_dataset(_CORA_DIR, "cora")
