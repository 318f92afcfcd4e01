"""Graph ingestion and k-step transition-matrix machinery.

A graph is undirected with contiguous integer indices and a string-id map.
The first-order transition matrix divides each adjacency row by its degree;
k-step matrices are exact repeated products (no sampling). A node's scale
vector at order k is its row of the k-step matrix: the distribution over
k-step walk endpoints, which serves as the node's structural signature at
that scale.
"""

from __future__ import annotations

import io
import logging
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .exceptions import EdgeListParseError, EmptyGraphError

logger = logging.getLogger(__name__)

#: Orientation of scale vectors: rows of A^k (outgoing k-step probabilities)
#: or columns (incoming). Row is the default; column is exposed for ablation.
ORIENTATIONS = ("row", "column")


@dataclass(frozen=True)
class Graph:
    """Undirected graph: unique string ids, edges as index pairs (i < j).

    Immutable after construction; safe to share across threads.
    """

    ids: tuple
    edges: tuple

    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {node_id: i for i, node_id in enumerate(self.ids)}
        if len(index) != len(self.ids):
            raise ValueError("node ids are not unique")
        n = len(self.ids)
        seen = set()
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self-loop at index {i}")
            if not (0 <= i < j < n):
                raise ValueError(f"edge ({i}, {j}) out of range or unordered")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))
        object.__setattr__(self, "_index", index)

    @property
    def node_count(self):
        return len(self.ids)

    @property
    def edge_count(self):
        return len(self.edges)

    def index_of(self, node_id):
        return self._index[node_id]

    def id_of(self, index):
        return self.ids[index]

    def degrees(self):
        deg = np.zeros(self.node_count, dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def adjacency(self):
        """Symmetric 0/1 adjacency in CSR form."""
        n = self.node_count
        if not self.edges:
            return sp.csr_matrix((n, n), dtype=np.float64)
        rows = np.fromiter((i for i, _ in self.edges), dtype=np.int64, count=len(self.edges))
        cols = np.fromiter((j for _, j in self.edges), dtype=np.int64, count=len(self.edges))
        data = np.ones(len(self.edges), dtype=np.float64)
        upper = sp.coo_matrix((data, (rows, cols)), shape=(n, n))
        return (upper + upper.T).tocsr()


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic k-step transition probabilities.

    Rows of isolated nodes are all-zero. Order 1 is kept sparse; higher
    orders are dense products.
    """

    order: int
    matrix: object  # csr_matrix (order 1) or ndarray

    def toarray(self):
        if sp.issparse(self.matrix):
            return self.matrix.toarray()
        return self.matrix

    def rows(self, indices):
        """Dense block of the given rows, shape (len(indices), n)."""
        block = self.matrix[np.asarray(indices, dtype=np.int64)]
        if sp.issparse(block):
            return np.asarray(block.todense())
        return block

    @property
    def node_count(self):
        return self.matrix.shape[0]


class ScaleFamily:
    """The ordered family of transition matrices A^1 .. A^K.

    ``matrices[k-1]`` holds order k. Immutable and shareable; all blocks are
    returned as fresh dense arrays.
    """

    def __init__(self, matrices):
        if not matrices:
            raise ValueError("empty scale family")
        for k, tm in enumerate(matrices, start=1):
            if tm.order != k:
                raise ValueError(f"matrix at position {k} has order {tm.order}")
        self.matrices = list(matrices)

    @property
    def max_scale(self):
        return len(self.matrices)

    @property
    def node_count(self):
        return self.matrices[0].node_count

    def matrix(self, k):
        if not 1 <= k <= self.max_scale:
            raise ValueError(f"scale k={k} outside [1, {self.max_scale}]")
        return self.matrices[k - 1]

    def rows(self, k, indices):
        return self.matrix(k).rows(indices)

    def context_rows(self, indices, orders=None):
        """Mean of the selected scale vectors for each node: the node's
        global structural context."""
        orders = list(range(1, self.max_scale + 1)) if orders is None else list(orders)
        acc = self.rows(orders[0], indices)
        for k in orders[1:]:
            acc = acc + self.rows(k, indices)
        return acc / len(orders)


def load_edge_list(source):
    """Parse an edge list into a Graph.

    Parameters
    ----------
    source : path, bytes, or file-like
        UTF-8 text, one edge per line as ``<id> <id>`` separated by runs of
        spaces or tabs. Lines starting with ``#`` are ignored. Ids are
        arbitrary non-whitespace strings; tokens beyond the first two are
        ignored. Edges are symmetrized, self-loops dropped and duplicates
        collapsed; nodes are indexed in first-appearance order.

    Raises
    ------
    EdgeListParseError
        If a non-comment line has fewer than two tokens.
    EmptyGraphError
        If the input contains no nodes at all.
    """
    if isinstance(source, bytes):
        stream = io.StringIO(source.decode("utf-8"))
    elif isinstance(source, (str, os.PathLike)):
        stream = open(source, "r", encoding="utf-8")
    elif hasattr(source, "read"):
        raw = source.read()
        stream = io.StringIO(raw.decode("utf-8") if isinstance(raw, bytes) else raw)
    else:
        raise TypeError(f"cannot read edge list from {type(source).__name__}")

    ids = []
    index = {}
    edges = set()
    self_loops = 0
    try:
        for line_no, line in enumerate(stream, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            tokens = stripped.split()
            if len(tokens) < 2:
                raise EdgeListParseError(line_no, f"expected two node ids, got {len(tokens)} token(s)")
            pair = []
            for tok in tokens[:2]:
                if tok not in index:
                    index[tok] = len(ids)
                    ids.append(tok)
                pair.append(index[tok])
            i, j = pair
            if i == j:
                self_loops += 1
                continue
            edges.add((min(i, j), max(i, j)))
    finally:
        if isinstance(source, (str, os.PathLike)):
            stream.close()

    if not ids:
        raise EmptyGraphError("edge list contains no nodes")
    if self_loops:
        logger.warning("dropped %d self-loop(s)", self_loops)
    return Graph(ids=tuple(ids), edges=tuple(sorted(edges)))


def transition_matrix(graph):
    """First-order transition matrix: adjacency with each row divided by its
    degree. Rows of isolated nodes stay all-zero (they are flagged in logs
    and receive zero scale vectors downstream)."""
    if graph.node_count == 0:
        raise EmptyGraphError("cannot normalize an empty graph")
    adj = graph.adjacency()
    deg = np.asarray(adj.sum(axis=1)).ravel()
    isolated = int((deg == 0).sum())
    if isolated:
        logger.warning("%d isolated node(s): transition rows left all-zero", isolated)
    inv = np.zeros_like(deg)
    np.divide(1.0, deg, out=inv, where=deg > 0)
    mat = sp.diags(inv) @ adj
    return TransitionMatrix(order=1, matrix=mat.tocsr())


def power_family(transition, max_scale, orientation="row"):
    """Exact powers [A, A^2, ..., A^K] by repeated multiplication.

    Each product's row-stochasticity is audited: every non-isolated row must
    sum to 1 within 1e-9. With ``orientation="column"`` the family is built
    from the transpose, so a node's scale vector becomes the corresponding
    column of A^k.
    """
    if transition.order != 1:
        raise ValueError(f"power_family needs an order-1 matrix, got order {transition.order}")
    if max_scale < 1:
        raise ValueError(f"max_scale must be >= 1, got {max_scale}")
    if orientation not in ORIENTATIONS:
        raise ValueError(f"orientation must be one of {ORIENTATIONS}, got {orientation!r}")

    base = transition.matrix
    occupied = np.asarray(abs(base).sum(axis=1)).ravel() > 0
    _audit_stochastic(base, occupied, 1)

    def store(order, mat):
        # Powers are computed (and audited) in the row-stochastic direction;
        # column orientation stores the transpose so a node's scale vector
        # is still a row fetch.
        if orientation == "column":
            mat = mat.T.tocsr() if sp.issparse(mat) else np.ascontiguousarray(mat.T)
        return TransitionMatrix(order=order, matrix=mat)

    matrices = [store(1, base)]
    current = base
    for k in range(2, max_scale + 1):
        # CSR @ dense keeps a fixed per-row summation order, so products are
        # reproducible regardless of thread count.
        current = np.asarray(base @ (current.toarray() if sp.issparse(current) else current))
        _audit_stochastic(current, occupied, k)
        matrices.append(store(k, current))
    return ScaleFamily(matrices)


def _audit_stochastic(mat, occupied, order):
    sums = np.asarray(mat.sum(axis=1)).ravel()
    bad = np.abs(sums[occupied] - 1.0) > 1e-9
    if np.any(bad):
        worst = float(np.abs(sums[occupied] - 1.0).max())
        raise ArithmeticError(
            f"stochasticity audit failed at order {order}: {int(bad.sum())} row(s), "
            f"worst deviation {worst:.3e}"
        )


def scale_vector(family, node, k):
    """Scale vector of ``node`` at order ``k``: its row of A^k."""
    n = family.node_count
    if not 0 <= node < n:
        raise ValueError(f"node {node} outside [0, {n})")
    return family.rows(k, [node])[0]
