"""Multi-scale graph node embedding.

Fuses each node's k-step transition-probability vectors with learned
per-node attention, compresses the fused vector with a contrastive
max-margin autoencoder, and (optionally) regularizes the latent codes
adversarially toward a Gaussian prior. Embeddings are evaluated by
node classification.
"""

__version__ = "0.1.0"

from .datasets import karate_club, load_citation_dataset
from .evaluation import (
    LabelSet,
    attention_summary,
    classify,
    evaluate_ratios,
    load_labels,
    per_scale_baseline,
    sweep,
)
from .graph import (
    Graph,
    ScaleFamily,
    TransitionMatrix,
    load_edge_list,
    power_family,
    scale_vector,
    transition_matrix,
)
from .training import MultiscaleNodeEmbedding

__all__ = [
    "Graph",
    "LabelSet",
    "MultiscaleNodeEmbedding",
    "ScaleFamily",
    "TransitionMatrix",
    "attention_summary",
    "classify",
    "evaluate_ratios",
    "karate_club",
    "load_citation_dataset",
    "load_edge_list",
    "load_labels",
    "per_scale_baseline",
    "power_family",
    "scale_vector",
    "sweep",
    "transition_matrix",
    "__version__",
]
