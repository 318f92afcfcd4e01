"""Three-phase training loop behind a scikit-learn style estimator.

Each mini-batch runs up to three sequential updates: (1) the contrastive
reconstruction loss over attention + encoder + decoder; (2) the
discriminator against fresh prior samples; (3) the encoder (and attention)
against the frozen discriminator. Phases 2 and 3 are skipped when
``adversarial=False``.

Reproducibility contract: a single integer seed drives everything through
named substreams. Stream (0,) initializes weights in construction order
(attention, encoder, decoder, discriminator); stream (1, e) drives epoch e,
consumed as: node shuffle, then per batch the negative draws (one per node,
batch order) followed by the prior samples. Resumed runs therefore replay
exactly, with no RNG state stored in checkpoints.
"""

from __future__ import annotations

import logging

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import adversarial as adv
from . import autodiff as ad
from .autodiff import Adam, Tape, Tensor
from .checkpoint import read_checkpoint, write_checkpoint
from .exceptions import CheckpointError, TrainingError
from .graph import ORIENTATIONS, Graph, power_family, transition_matrix
from .model import EmbeddingNetwork
from .validation import (
    as_graph,
    check_positive_float,
    check_positive_int,
)

logger = logging.getLogger(__name__)

_INIT_STREAM = 0
_EPOCH_STREAM = 1

#: Graphs above this size default to a rank-factored attention matrix.
FULL_ATTENTION_MAX_NODES = 5000
DEFAULT_ATTENTION_RANK = 64

_EXPORT_CHUNK = 512


def _stream_rng(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


class MultiscaleNodeEmbedding(BaseEstimator):
    """Node embeddings from attention-fused multi-scale transition vectors.

    For every node, the rows of A^1 .. A^K (k-step transition probabilities)
    are fused by learned per-node attention and compressed by an autoencoder
    trained with a contrastive unit-margin loss against sampled negative
    nodes. Optionally the latent codes are regularized adversarially toward
    a zero-mean Gaussian prior.

    Parameters
    ----------
    scales : int or iterable of int, default=8
        Transition orders to fuse. An integer K means orders 1..K; an
        explicit iterable selects arbitrary orders (used by per-scale
        baselines).
    dim : int, default=128
        Latent embedding dimension.
    hidden : int, default=512
        Width of the single hidden layer in encoder and decoder.
    negatives : int, default=7
        Negative samples per node per epoch; must stay below the number of
        non-isolated nodes.
    epochs : int, default=200
        Number of shuffled passes to run in this ``fit`` call (on top of any
        warm-started state).
    batch_size : int, default=64
    lr : float, default=1e-3
        Step size shared by all three adaptive-moment optimizers.
    adversarial : bool, default=True
        Enable the discriminator/generator phases.
    prior_std : float, default=1.0
        Per-coordinate standard deviation of the Gaussian prior.
    adv_weight : float, default=1.0
        Multiplier on the generator loss relative to reconstruction.
    disc_hidden : int, default=512
        Width of the discriminator's two hidden layers.
    attention : bool, default=True
        With ``False`` the fused input is the plain scale average (and the
        attention matrix is neither created nor trained).
    attention_rank : "auto", "full" or int, default="auto"
        "full" keeps the dense node-by-node attention matrix; an integer
        uses the rank-r factored form; "auto" picks full up to
        5000 nodes and rank 64 beyond.
    scale_orientation : "row" or "column", default="row"
        Whether a node's scale vector is its row of A^k (outgoing k-step
        probabilities) or its column (ablation flag).
    random_state : int, default=0
        Seed for the single pseudo-random source.
    warm_start : bool, default=False
        When True and the estimator is already fitted (or loaded from a
        checkpoint), ``fit`` continues training instead of reinitializing.
    verbose : int, default=0
        Nonzero logs per-epoch losses.

    Attributes
    ----------
    embedding_ : ndarray of shape (n_nodes, dim)
        Final latent codes from a clean forward pass; isolated nodes get
        exactly zero rows.
    attention_ : ndarray of shape (n_nodes, n_scales) or None
        Per-node attention weights under the final parameters (None when
        ``attention=False``).
    history_ : dict with keys "reconstruction", "discriminator", "generator"
        Per-epoch mean losses (None entries for skipped phases).
    """

    def __init__(self, scales=8, dim=128, hidden=512, negatives=7, epochs=200,
                 batch_size=64, lr=1e-3, adversarial=True, prior_std=1.0,
                 adv_weight=1.0, disc_hidden=512, attention=True,
                 attention_rank="auto", scale_orientation="row",
                 random_state=0, warm_start=False, verbose=0):
        self.scales = scales
        self.dim = dim
        self.hidden = hidden
        self.negatives = negatives
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.adversarial = adversarial
        self.prior_std = prior_std
        self.adv_weight = adv_weight
        self.disc_hidden = disc_hidden
        self.attention = attention
        self.attention_rank = attention_rank
        self.scale_orientation = scale_orientation
        self.random_state = random_state
        self.warm_start = warm_start
        self.verbose = verbose

    # -- configuration ------------------------------------------------

    def _resolved_orders(self):
        if isinstance(self.scales, (int, np.integer)) and not isinstance(self.scales, bool):
            check_positive_int("scales", self.scales)
            return list(range(1, int(self.scales) + 1))
        orders = sorted({check_positive_int("scale order", k) for k in self.scales})
        if not orders:
            raise ValueError("scales must select at least one order")
        return orders

    def _resolved_rank(self, n_nodes):
        if self.attention_rank == "full":
            return None
        if self.attention_rank == "auto":
            return None if n_nodes <= FULL_ATTENTION_MAX_NODES else DEFAULT_ATTENTION_RANK
        return check_positive_int("attention_rank", self.attention_rank)

    def _check_params(self, n_nodes):
        check_positive_int("dim", self.dim)
        check_positive_int("hidden", self.hidden)
        check_positive_int("negatives", self.negatives)
        check_positive_int("epochs", self.epochs)
        check_positive_int("batch_size", self.batch_size)
        check_positive_float("lr", self.lr)
        check_positive_float("prior_std", self.prior_std)
        check_positive_float("adv_weight", self.adv_weight)
        check_positive_int("disc_hidden", self.disc_hidden)
        check_positive_int("random_state", self.random_state, minimum=0)
        if self.scale_orientation not in ORIENTATIONS:
            raise ValueError(f"scale_orientation must be one of {ORIENTATIONS}")
        if self.negatives >= n_nodes:
            raise ValueError(f"negatives={self.negatives} must be below the node count {n_nodes}")

    # -- lifecycle ----------------------------------------------------

    def fit(self, X, y=None):
        """Train on a graph (Graph, edge-list path/stream, adjacency matrix,
        or iterable of node pairs). Returns self."""
        graph = as_graph(X)
        self._check_params(graph.node_count)
        pending = getattr(self, "_pending_state", None)
        if pending is not None:
            self._restore_state(graph, pending)
            self._pending_state = None
        elif self.warm_start and hasattr(self, "network_"):
            if self.n_nodes_ != graph.node_count:
                raise ValueError(
                    f"warm start with {graph.node_count} nodes, but state has {self.n_nodes_}"
                )
        else:
            self._initialize(graph)

        first = self.epochs_done_
        for epoch in range(first, first + self.epochs):
            self._run_epoch(epoch)
            self.epochs_done_ = epoch + 1
        self._finalize()
        return self

    def transform(self, X=None):
        """Embedding rows. ``X`` may be None or a graph (all nodes, index
        order), an iterable of node indices, or of string node ids."""
        check_is_fitted(self, "embedding_")
        if X is None or isinstance(X, Graph):
            return self.embedding_.copy()
        X = list(X) if not isinstance(X, np.ndarray) else X
        if isinstance(X, list) and X and isinstance(X[0], str):
            idx = [self.graph_.index_of(node_id) for node_id in X]
            return self.embedding_[idx].copy()
        idx = np.asarray(X)
        if idx.ndim == 2:  # adjacency passed through a pipeline: all nodes
            return self.embedding_.copy()
        return self.embedding_[idx.astype(np.int64)].copy()

    def fit_transform(self, X, y=None):
        return self.fit(X).embedding_.copy()

    def _initialize(self, graph):
        orders = self._resolved_orders()
        n = graph.node_count
        self.graph_ = graph
        self.n_nodes_ = n
        self.orders_ = orders
        self.attention_rank_ = self._resolved_rank(n) if self.attention else None
        self.family_ = power_family(transition_matrix(graph), max(orders), self.scale_orientation)
        self.degrees_ = graph.degrees()
        self.trainable_ = np.flatnonzero(self.degrees_ > 0)
        self.isolated_ = np.flatnonzero(self.degrees_ == 0)
        if self.isolated_.size:
            logger.warning(
                "%d isolated node(s) excluded from training; their embeddings are zero",
                self.isolated_.size,
            )
        if self.trainable_.size == 0:
            raise ValueError("graph has no edges; nothing to train on")
        if self.negatives > self.trainable_.size - 1:
            raise ValueError(
                f"negatives={self.negatives} exceeds the {self.trainable_.size - 1} "
                "available non-isolated candidates"
            )
        self._build_context_cache()

        rng = _stream_rng(self.random_state, _INIT_STREAM)
        self.network_ = EmbeddingNetwork(
            n, len(orders), self.dim, self.hidden, rng,
            use_attention=self.attention, attention_rank=self.attention_rank_,
        )
        self.discriminator_ = (
            adv.Discriminator(self.dim, self.disc_hidden, rng) if self.adversarial else None
        )
        self.recon_opt_ = Adam(self.network_.parameters(), lr=self.lr)
        if self.adversarial:
            self.disc_opt_ = Adam(self.discriminator_.parameters(), lr=self.lr)
            self.gen_opt_ = Adam(self.network_.encoder_parameters(), lr=self.lr)
        else:
            self.disc_opt_ = self.gen_opt_ = None
        self.epochs_done_ = 0
        self.history_ = {"reconstruction": [], "discriminator": [], "generator": []}

    def _build_context_cache(self):
        acc = self.family_.matrix(self.orders_[0]).toarray().copy()
        for k in self.orders_[1:]:
            acc += self.family_.matrix(k).toarray()
        acc /= len(self.orders_)
        self.context_matrix_ = acc
        norms = np.sqrt(np.einsum("ij,ij->i", acc, acc))
        safe = np.where(norms > 1e-12, norms, 1.0)
        self.unit_contexts_ = acc / safe[:, None]
        self.unit_contexts_[norms <= 1e-12] = 0.0

    # -- training -----------------------------------------------------

    def _run_epoch(self, epoch):
        rng = _stream_rng(self.random_state, _EPOCH_STREAM, epoch)
        order = self.trainable_[rng.permutation(self.trainable_.size)]
        sums = {"reconstruction": 0.0, "discriminator": 0.0, "generator": 0.0}
        count = 0
        for start in range(0, order.size, self.batch_size):
            batch = order[start : start + self.batch_size]
            losses = self.train_step(batch, rng)
            for key in sums:
                if losses[key] is not None:
                    sums[key] += losses[key] * batch.size
            count += batch.size
        for key, total in sums.items():
            enabled = key == "reconstruction" or self.adversarial
            self.history_[key].append(total / count if enabled else None)
        if self.verbose:
            logger.info(
                "epoch %d: reconstruction %.6f discriminator %s generator %s",
                epoch,
                self.history_["reconstruction"][-1],
                _fmt(self.history_["discriminator"][-1]),
                _fmt(self.history_["generator"][-1]),
            )

    def train_step(self, batch, rng):
        """One three-phase update over the given node indices.

        Returns the per-phase loss values (None for skipped phases). The
        batch must not contain isolated nodes.
        """
        batch = np.asarray(batch, dtype=np.int64)
        if batch.size == 0:
            raise ValueError("empty batch")
        if np.any(self.degrees_[batch] == 0):
            raise ValueError("batch contains isolated nodes")

        slabs = np.stack([self.family_.rows(k, batch) for k in self.orders_])
        contexts = self.context_matrix_[batch]
        neg_rows = self.unit_contexts_[self._sample_negatives(batch, rng).ravel()]

        with Tape() as tape:
            fused, codes, recon, _ = self.network_.forward(slabs, contexts)
            loss = self.network_.margin_loss(recon, fused, neg_rows, self.negatives)
            recon_value = float(loss.data)
            if not np.isfinite(recon_value):
                raise TrainingError("non-finite loss in the reconstruction phase")
            tape.backward(loss)
        self.recon_opt_.step()
        result = {"reconstruction": recon_value, "discriminator": None, "generator": None}
        if not self.adversarial:
            return result

        fake, _ = self.network_.codes_numpy(slabs, contexts)
        real = adv.sample_prior(batch.size, self.dim, self.prior_std, rng)
        with Tape() as tape:
            d_loss = adv.discriminator_loss(self.discriminator_, Tensor(real), Tensor(fake))
            d_value = float(d_loss.data)
            if not np.isfinite(d_value):
                raise TrainingError("non-finite loss in the discriminator phase")
            tape.backward(d_loss)
        self.disc_opt_.step()

        with Tape() as tape:
            fused, _ = self.network_.fused_input(slabs, contexts)
            g_loss = ad.scale(
                adv.generator_loss(self.discriminator_, self.network_.encode(fused)),
                self.adv_weight,
            )
            g_value = float(g_loss.data)
            if not np.isfinite(g_value):
                raise TrainingError("non-finite loss in the generator phase")
            tape.backward(g_loss)
        self.gen_opt_.step()

        result.update(discriminator=d_value, generator=g_value)
        return result

    def _sample_negatives(self, batch, rng):
        """(batch, m) negative indices: uniform without replacement from the
        non-isolated nodes, never the node itself. One draw per node, in
        batch order."""
        pool = self.trainable_
        ranks = np.searchsorted(pool, batch)
        out = np.empty((batch.size, self.negatives), dtype=np.int64)
        for row, rank in enumerate(ranks):
            draw = rng.choice(pool.size - 1, size=self.negatives, replace=False)
            draw[draw >= rank] += 1
            out[row] = pool[draw]
        return out

    def _finalize(self):
        n, k = self.n_nodes_, len(self.orders_)
        embedding = np.zeros((n, self.dim))
        weights = None if not self.attention else np.zeros((n, k))
        for start in range(0, n, _EXPORT_CHUNK):
            idx = np.arange(start, min(start + _EXPORT_CHUNK, n))
            slabs = np.stack([self.family_.rows(order, idx) for order in self.orders_])
            codes, attn = self.network_.codes_numpy(slabs, self.context_matrix_[idx])
            embedding[idx] = codes
            if weights is not None:
                weights[idx] = attn
        embedding[self.isolated_] = 0.0
        self.embedding_ = embedding
        self.attention_ = weights

    # -- checkpointing ------------------------------------------------

    def save_checkpoint(self, path):
        """Write the full training state (parameters, optimizer moments,
        epoch counter, loss history, resolved config) to ``path``."""
        check_is_fitted(self, "network_")
        write_checkpoint(path, self._state_tensors())

    def _state_tensors(self):
        tensors = {
            "config/scales": np.asarray(self.orders_, dtype=np.float64),
            "config/dim": np.array([float(self.dim)]),
            "config/hidden": np.array([float(self.hidden)]),
            "config/negatives": np.array([float(self.negatives)]),
            "config/epochs": np.array([float(self.epochs)]),
            "config/batch_size": np.array([float(self.batch_size)]),
            "config/lr": np.array([float(self.lr)]),
            "config/adversarial": np.array([1.0 if self.adversarial else 0.0]),
            "config/prior_std": np.array([float(self.prior_std)]),
            "config/adv_weight": np.array([float(self.adv_weight)]),
            "config/disc_hidden": np.array([float(self.disc_hidden)]),
            "config/attention": np.array([1.0 if self.attention else 0.0]),
            "config/attention_rank": np.array(
                [-1.0 if self.attention_rank_ is None else float(self.attention_rank_)]
            ),
            "config/orientation": np.array([float(ORIENTATIONS.index(self.scale_orientation))]),
            "config/random_state": np.array([float(self.random_state)]),
            "config/n_nodes": np.array([float(self.n_nodes_)]),
            "state/epochs_done": np.array([float(self.epochs_done_)]),
        }
        for key, series in self.history_.items():
            tensors[f"state/history/{key}"] = np.array(
                [np.nan if v is None else v for v in series], dtype=np.float64
            )
        for p in self._all_parameters():
            tensors[f"param/{p.name}"] = p.data
        tensors.update(self.recon_opt_.state_arrays("opt/recon"))
        if self.adversarial:
            tensors.update(self.disc_opt_.state_arrays("opt/disc"))
            tensors.update(self.gen_opt_.state_arrays("opt/gen"))
        return tensors

    def _all_parameters(self):
        params = list(self.network_.parameters())
        if self.discriminator_ is not None:
            params += self.discriminator_.parameters()
        return params

    @classmethod
    def from_checkpoint(cls, path):
        """Rebuild an estimator from a checkpoint. Call ``bind(graph)`` to
        recompute embeddings without training, or ``fit(graph)`` to continue
        training for ``epochs`` more epochs."""
        tensors = read_checkpoint(path)
        try:
            rank = float(tensors["config/attention_rank"][0])
            est = cls(
                scales=[int(k) for k in tensors["config/scales"]],
                dim=int(tensors["config/dim"][0]),
                hidden=int(tensors["config/hidden"][0]),
                negatives=int(tensors["config/negatives"][0]),
                epochs=int(tensors["config/epochs"][0]),
                batch_size=int(tensors["config/batch_size"][0]),
                lr=float(tensors["config/lr"][0]),
                adversarial=bool(tensors["config/adversarial"][0]),
                prior_std=float(tensors["config/prior_std"][0]),
                adv_weight=float(tensors["config/adv_weight"][0]),
                disc_hidden=int(tensors["config/disc_hidden"][0]),
                attention=bool(tensors["config/attention"][0]),
                attention_rank="full" if rank < 0 else int(rank),
                scale_orientation=ORIENTATIONS[int(tensors["config/orientation"][0])],
                random_state=int(tensors["config/random_state"][0]),
                warm_start=True,
            )
        except (KeyError, IndexError) as exc:
            raise CheckpointError(f"checkpoint is missing entry {exc}") from exc
        est._pending_state = tensors
        return est

    def bind(self, X):
        """Attach a loaded checkpoint to its graph and rebuild outputs
        deterministically, without training."""
        pending = getattr(self, "_pending_state", None)
        if pending is None:
            raise CheckpointError("no pending checkpoint state; use from_checkpoint first")
        self._restore_state(as_graph(X), pending)
        self._pending_state = None
        self._finalize()
        return self

    def _restore_state(self, graph, tensors):
        try:
            n_expected = int(tensors["config/n_nodes"][0])
            if graph.node_count != n_expected:
                raise CheckpointError(
                    f"checkpoint was trained on {n_expected} nodes, graph has {graph.node_count}"
                )
            self._initialize(graph)
            for p in self._all_parameters():
                p.data[...] = tensors[f"param/{p.name}"].reshape(p.data.shape)
            self.recon_opt_.load_state_arrays("opt/recon", tensors)
            if self.adversarial:
                self.disc_opt_.load_state_arrays("opt/disc", tensors)
                self.gen_opt_.load_state_arrays("opt/gen", tensors)
            self.epochs_done_ = int(tensors["state/epochs_done"][0])
            self.history_ = {
                key: [None if np.isnan(v) else float(v) for v in tensors[f"state/history/{key}"]]
                for key in ("reconstruction", "discriminator", "generator")
            }
        except KeyError as exc:
            raise CheckpointError(f"checkpoint is missing entry {exc}") from exc


def _fmt(value):
    return "-" if value is None else f"{value:.6f}"
