"""Graph contrastive learning with certified node-compactness regularization."""

__version__ = "0.1.0"

from .augment import AugmentConfig, BudgetSpec, budgets_from_rate, message_passing_bounds, sample_edge_drop
from .certify import brute_force_compactness, compactness_bounds, contrast_weight, realized_compactness
from .encoder import EncoderParams, ProjectorParams, gcn_forward, init_encoder, init_projector
from .evaluate import evaluate_embeddings
from .graph import Graph, load_graph, normalized_message_passing
from .objectives import infonce_loss, pot_loss, total_loss
from .trainer import TrainConfig, TrainLog, embed, train

__all__ = [
    "AugmentConfig",
    "BudgetSpec",
    "EncoderParams",
    "Graph",
    "ProjectorParams",
    "TrainConfig",
    "TrainLog",
    "brute_force_compactness",
    "budgets_from_rate",
    "compactness_bounds",
    "contrast_weight",
    "embed",
    "evaluate_embeddings",
    "gcn_forward",
    "infonce_loss",
    "init_encoder",
    "init_projector",
    "load_graph",
    "message_passing_bounds",
    "normalized_message_passing",
    "pot_loss",
    "realized_compactness",
    "sample_edge_drop",
    "total_loss",
    "train",
]
