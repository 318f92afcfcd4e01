"""Latent-code regularization by a two-player minimax game.

A discriminator learns to tell prior samples from encoder outputs; the
encoder then updates against a frozen discriminator to make its codes
indistinguishable from the prior, which shapes the code distribution toward
the prior and discourages degenerate encodings.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .model import glorot_uniform

#: Log arguments are clamped into [LOG_EPS, 1 - LOG_EPS] so saturated
#: discriminator outputs cannot produce infinite losses.
LOG_EPS = 1e-7

#: Negative slope of the discriminator's hidden rectifier.
LEAKY_SLOPE = 0.2


def sample_prior(n, dim, std, rng):
    """n i.i.d. zero-mean Gaussian latent samples, shape (n, dim)."""
    if n < 1:
        raise ValueError(f"need n >= 1 prior samples, got {n}")
    if std <= 0:
        raise ValueError(f"prior std must be positive, got {std}")
    return std * rng.standard_normal((n, dim))


class Discriminator:
    """Two leaky-rectifier hidden layers and a sigmoid probability head."""

    def __init__(self, latent_dim, hidden_dim, rng):
        self.latent_dim = latent_dim
        self.hidden_dim = hidden_dim
        self.w1 = Parameter(glorot_uniform(rng, latent_dim, hidden_dim), "disc/w1")
        self.b1 = Parameter(np.zeros(hidden_dim), "disc/b1")
        self.w2 = Parameter(glorot_uniform(rng, hidden_dim, hidden_dim), "disc/w2")
        self.b2 = Parameter(np.zeros(hidden_dim), "disc/b2")
        self.w3 = Parameter(glorot_uniform(rng, hidden_dim, 1), "disc/w3")
        self.b3 = Parameter(np.zeros(1), "disc/b3")

    def parameters(self):
        return [self.w1, self.b1, self.w2, self.b2, self.w3, self.b3]

    def probability(self, codes, frozen=False):
        """P(input came from the prior), shape (batch, 1), strictly in (0, 1);
        saturated sigmoid values are clamped away from the endpoints.

        With ``frozen=True`` the weights enter the graph as constants:
        gradients still flow through to the input codes, but never into the
        discriminator's own parameters.
        """
        codes = codes if isinstance(codes, Tensor) else Tensor(np.atleast_2d(codes))
        if codes.data.ndim != 2 or codes.data.shape[1] != self.latent_dim:
            raise ValueError(
                f"discriminator expects (batch, {self.latent_dim}) inputs, got {codes.data.shape}"
            )
        w1, b1, w2, b2, w3, b3 = (
            (Tensor(p.data) for p in self.parameters()) if frozen else self.parameters()
        )
        h1 = ad.leaky_relu(ad.add(ad.matmul(codes, w1), b1), LEAKY_SLOPE)
        h2 = ad.leaky_relu(ad.add(ad.matmul(h1, w2), b2), LEAKY_SLOPE)
        return ad.clip(ad.sigmoid(ad.add(ad.matmul(h2, w3), b3)), LOG_EPS, 1.0 - LOG_EPS)


def discriminator_loss(disc, real_codes, fake_codes):
    """Mean of -log D(real) - log(1 - D(fake)).

    Minimizing this trains D to assign high probability to prior samples and
    low probability to encoder codes. Equals 2 ln 2 when D is identically
    one half.
    """
    p_real = ad.clip(disc.probability(real_codes), LOG_EPS, 1.0 - LOG_EPS)
    p_fake = ad.clip(disc.probability(fake_codes), LOG_EPS, 1.0 - LOG_EPS)
    loss_real = ad.scale(ad.mean(ad.log(p_real)), -1.0)
    loss_fake = ad.scale(ad.mean(ad.log(ad.sub(1.0, p_fake))), -1.0)
    return ad.add(loss_real, loss_fake)


def generator_loss(disc, fake_codes):
    """Mean of -log D(fake), evaluated with the discriminator frozen.

    Gradients reach only the parameters that produced ``fake_codes`` (the
    encoder and attention); the discriminator's weights are constants here.
    """
    p_fake = ad.clip(disc.probability(fake_codes, frozen=True), LOG_EPS, 1.0 - LOG_EPS)
    return ad.scale(ad.mean(ad.log(p_fake)), -1.0)
