"""Input coercion and parameter checks shared by the estimator and CLI."""

from __future__ import annotations

import os

import numpy as np
import scipy.sparse as sp

from .graph import Graph, load_edge_list


def as_graph(X):
    """Coerce supported inputs to a Graph.

    Accepts a Graph, an edge-list path / bytes / file-like, a square dense
    or sparse adjacency matrix (nonzero entries become edges, symmetrized,
    diagonal ignored), or an iterable of (u, v) pairs.
    """
    if isinstance(X, Graph):
        return X
    if isinstance(X, (str, bytes, os.PathLike)) or hasattr(X, "read"):
        return load_edge_list(X)
    if sp.issparse(X) or (isinstance(X, np.ndarray) and X.ndim == 2):
        return _graph_from_adjacency(X)
    if hasattr(X, "__iter__"):
        return _graph_from_pairs(X)
    raise TypeError(f"cannot interpret {type(X).__name__} as a graph")


def _graph_from_adjacency(mat):
    n, m = mat.shape
    if n != m:
        raise ValueError(f"adjacency matrix must be square, got {mat.shape}")
    coo = sp.coo_matrix(mat)
    edges = {(min(i, j), max(i, j)) for i, j, v in zip(coo.row, coo.col, coo.data) if i != j and v != 0}
    return Graph(ids=tuple(str(i) for i in range(n)), edges=tuple(sorted(edges)))


def _graph_from_pairs(pairs):
    ids, index, edges = [], {}, set()
    for pair in pairs:
        u, v = pair
        for node in (str(u), str(v)):
            if node not in index:
                index[node] = len(ids)
                ids.append(node)
        i, j = index[str(u)], index[str(v)]
        if i != j:
            edges.add((min(i, j), max(i, j)))
    if not ids:
        raise ValueError("no nodes in edge iterable")
    return Graph(ids=tuple(ids), edges=tuple(sorted(edges)))


def check_positive_int(name, value, minimum=1):
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_positive_float(name, value):
    value = float(value)
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value!r}")
    return value


def check_ratio(name, value):
    value = float(value)
    if not 0.0 < value < 1.0:
        raise ValueError(f"{name} must lie strictly between 0 and 1, got {value!r}")
    return value
