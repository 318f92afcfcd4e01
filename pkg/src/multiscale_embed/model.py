"""Attention over scale vectors, fused autoencoder, and the margin loss.

Per node, a bilinear attention scores each scale vector against the node's
context (the unweighted mean of its scale vectors); a softmax over the K
scores weights the scale vectors into the fused input, which an autoencoder
compresses to the latent code and reconstructs. Training pushes the
reconstruction toward the fused input and away from sampled negative nodes
via a unit-margin hinge on unit-normalized inner products.

The module exposes two layers of API: plain-numpy per-node functions used by
analysis and tests, and the batched :class:`EmbeddingNetwork` whose forward
methods record on the autodiff tape. The two agree exactly on shared inputs,
which the test suite checks.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .exceptions import ZeroNormError


def glorot_uniform(rng, fan_in, fan_out, shape=None):
    """Uniform init in +-sqrt(6 / (fan_in + fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    shape = (fan_in, fan_out) if shape is None else shape
    return rng.uniform(-limit, limit, size=shape)


# ---------------------------------------------------------------------------
# per-node functions (plain numpy)


def context_vector(family, node, orders=None):
    """Unweighted mean of the node's scale vectors across the family."""
    return family.context_rows([node], orders)[0]


def attention_logits(family, node, attention, orders=None):
    """Bilinear scores d_k = X_k . (M @ y) for each selected scale."""
    y = context_vector(family, node, orders)
    v = attention.apply_numpy(y)
    orders = list(range(1, family.max_scale + 1)) if orders is None else list(orders)
    return np.array([float(family.rows(k, [node])[0] @ v) for k in orders])


def attention_weights(family, node, attention, orders=None):
    """Softmax-normalized relevance of each scale for the node."""
    d = attention_logits(family, node, attention, orders)
    e = np.exp(d - d.max())
    return e / e.sum()


def fuse(family, node, weights, orders=None):
    """Weighted sum of the node's scale vectors."""
    orders = list(range(1, family.max_scale + 1)) if orders is None else list(orders)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (len(orders),):
        raise ValueError(f"expected {len(orders)} weights, got shape {weights.shape}")
    out = np.zeros(family.node_count)
    for a_k, k in zip(weights, orders):
        out += a_k * family.rows(k, [node])[0]
    return out


def negative_samples(family, exclude, m, rng, candidates=None, orders=None):
    """Draw m distinct nodes (never ``exclude``), each represented by its
    context vector.

    ``candidates`` restricts the pool (training uses non-isolated nodes);
    defaults to all nodes. Returns (indices, vectors).
    """
    n = family.node_count
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if m >= n:
        raise ValueError(f"m={m} must be smaller than the node count {n}")
    pool = np.arange(n, dtype=np.int64) if candidates is None else np.asarray(candidates, dtype=np.int64)
    pool = pool[pool != exclude]
    if m > pool.size:
        raise ValueError(f"m={m} exceeds the {pool.size} available candidates")
    picks = pool[rng.choice(pool.size, size=m, replace=False)]
    return picks, family.context_rows(picks, orders)


def _unit(v):
    norm = float(np.linalg.norm(v))
    if norm < 1e-12:
        raise ZeroNormError("cannot unit-normalize a zero vector")
    return v / norm


def reconstruction_loss(r, z, negatives):
    """Contrastive hinge: sum over negatives of
    max(0, 1 - r_hat.z_hat + r_hat.n_hat).

    All vectors are unit-normalized before the inner products; a zero-norm
    vector raises ZeroNormError (isolated nodes are excluded upstream).
    """
    r_hat = _unit(np.asarray(r, dtype=np.float64))
    z_hat = _unit(np.asarray(z, dtype=np.float64))
    pos = float(r_hat @ z_hat)
    total = 0.0
    for neg in negatives:
        total += max(0.0, 1.0 - pos + float(r_hat @ _unit(np.asarray(neg, dtype=np.float64))))
    return total


# ---------------------------------------------------------------------------
# trainable network


class AttentionParams:
    """Bilinear scale-attention matrix, full (n x n) or rank-factored U V^T.

    The factored form trades fidelity for memory on large graphs; the full
    matrix is the default at desk scale.
    """

    def __init__(self, n_nodes, rng, rank=None):
        self.n_nodes = n_nodes
        self.rank = rank
        if rank is None:
            self.M = Parameter(glorot_uniform(rng, n_nodes, n_nodes), "attention/M")
            self.U = self.V = None
        else:
            self.U = Parameter(glorot_uniform(rng, n_nodes, rank), "attention/U")
            self.V = Parameter(glorot_uniform(rng, n_nodes, rank), "attention/V")
            self.M = None

    def parameters(self):
        return [self.M] if self.rank is None else [self.U, self.V]

    def apply_batch(self, contexts):
        """(M @ y_b) for every row y_b of ``contexts``: Y @ M^T, on the tape."""
        if self.rank is None:
            return ad.matmul(contexts, ad.transpose(self.M))
        return ad.matmul(ad.matmul(contexts, self.V), ad.transpose(self.U))

    def apply_numpy(self, y):
        if self.rank is None:
            return self.M.data @ y
        return self.U.data @ (self.V.data.T @ y)

    def dense(self):
        return self.M.data if self.rank is None else self.U.data @ self.V.data.T


class EmbeddingNetwork:
    """Attention + autoencoder parameters with batched tape-aware forwards.

    Encoder maps the fused n-vector through one tanh hidden layer to a
    linear latent code; the decoder mirrors it back. Hidden activations are
    tanh so latent codes stay sign-symmetric, matching a zero-mean prior.
    """

    def __init__(self, n_nodes, n_scales, latent_dim, hidden_dim, rng,
                 use_attention=True, attention_rank=None):
        self.n_nodes = n_nodes
        self.n_scales = n_scales
        self.latent_dim = latent_dim
        self.hidden_dim = hidden_dim
        self.use_attention = use_attention
        # Draw order is fixed (attention, encoder, decoder) so seeds map to
        # identical initializations across runs.
        self.attention = AttentionParams(n_nodes, rng, attention_rank) if use_attention else None
        self.enc_w1 = Parameter(glorot_uniform(rng, n_nodes, hidden_dim), "encoder/w1")
        self.enc_b1 = Parameter(np.zeros(hidden_dim), "encoder/b1")
        self.enc_w2 = Parameter(glorot_uniform(rng, hidden_dim, latent_dim), "encoder/w2")
        self.enc_b2 = Parameter(np.zeros(latent_dim), "encoder/b2")
        self.dec_w1 = Parameter(glorot_uniform(rng, latent_dim, hidden_dim), "decoder/w1")
        self.dec_b1 = Parameter(np.zeros(hidden_dim), "decoder/b1")
        self.dec_w2 = Parameter(glorot_uniform(rng, hidden_dim, n_nodes), "decoder/w2")
        self.dec_b2 = Parameter(np.zeros(n_nodes), "decoder/b2")

    def parameters(self):
        params = [] if self.attention is None else list(self.attention.parameters())
        return params + [self.enc_w1, self.enc_b1, self.enc_w2, self.enc_b2,
                         self.dec_w1, self.dec_b1, self.dec_w2, self.dec_b2]

    def encoder_parameters(self):
        """Parameters updated when the encoder acts as the generator."""
        params = [] if self.attention is None else list(self.attention.parameters())
        return params + [self.enc_w1, self.enc_b1, self.enc_w2, self.enc_b2]

    def attend(self, scale_rows, contexts):
        """Attention weights for a batch.

        Parameters
        ----------
        scale_rows : ndarray (K, B, n)
            Scale vectors for each batch node, one slab per scale.
        contexts : ndarray (B, n)
            Per-node context vectors (mean of the slabs).

        Returns
        -------
        Tensor (B, K) of softmax weights, rows summing to 1.
        """
        projected = self.attention.apply_batch(Tensor(contexts))
        logits = [ad.rowwise_dot(Tensor(scale_rows[k]), projected)
                  for k in range(scale_rows.shape[0])]
        return ad.softmax(ad.stack_cols(logits))

    def fuse_batch(self, scale_rows, weights):
        """Weighted sum of scale slabs: z[b] = sum_k w[b, k] * X_k[b]."""
        mixed = ad.mul(ad.col(weights, 0), Tensor(scale_rows[0]))
        for k in range(1, scale_rows.shape[0]):
            mixed = ad.add(mixed, ad.mul(ad.col(weights, k), Tensor(scale_rows[k])))
        return mixed

    def fused_input(self, scale_rows, contexts):
        """Attention-fused input z for a batch; uniform mean when attention
        is disabled (then z equals the context vector exactly)."""
        if self.attention is None:
            return Tensor(contexts), None
        weights = self.attend(scale_rows, contexts)
        return self.fuse_batch(scale_rows, weights), weights

    def encode(self, fused):
        hidden = ad.tanh(ad.add(ad.matmul(fused, self.enc_w1), self.enc_b1))
        return ad.add(ad.matmul(hidden, self.enc_w2), self.enc_b2)

    def decode(self, codes):
        hidden = ad.tanh(ad.add(ad.matmul(codes, self.dec_w1), self.dec_b1))
        return ad.add(ad.matmul(hidden, self.dec_w2), self.dec_b2)

    def forward(self, scale_rows, contexts):
        """Full forward pass: returns (fused z, codes x, reconstructions r,
        attention weights or None)."""
        fused, weights = self.fused_input(scale_rows, contexts)
        codes = self.encode(fused)
        recon = self.decode(codes)
        return fused, codes, recon, weights

    def margin_loss(self, recon, fused, negative_rows, n_negatives):
        """Batch-mean contrastive hinge loss.

        ``negative_rows`` is a constant (B * m, n) block of negative context
        vectors, m consecutive rows per batch node, already unit-normalized.
        """
        recon_hat = ad.unit_rows(recon)
        fused_hat = ad.unit_rows(fused)
        pos = ad.rowwise_dot(recon_hat, fused_hat)
        neg = ad.rowwise_dot(ad.repeat_rows(recon_hat, n_negatives), Tensor(negative_rows))
        margins = ad.hinge(ad.add(ad.sub(neg, ad.repeat_rows(pos, n_negatives)), 1.0))
        batch = recon.data.shape[0]
        return ad.scale(ad.tsum(margins), 1.0 / batch)

    def codes_numpy(self, scale_rows, contexts):
        """Tape-free forward to latent codes (used for exports and the
        discriminator's fake batch); skips the decoder."""
        fused, weights = self.fused_input(scale_rows, contexts)
        codes = self.encode(fused)
        return codes.data, None if weights is None else weights.data
