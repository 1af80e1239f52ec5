"""Inter-domain multi-relational link prediction.

Bilinear knowledge-graph embeddings trained with a pairwise ranking loss,
with optional entropic optimal transport or maximum mean discrepancy
regularization aligning the entity-embedding distributions of two domains.
"""

from .data import (
    DomainPair,
    OverlapSpec,
    TaggedTriplet,
    TaggedTripletStore,
    Triplet,
    TripletStore,
    Vocab,
    load_domain_pair,
    load_triplets,
    sample_domain_pair,
    save_domain_pair,
)
from .errors import ConfigError, DataError, InterlinkError, NumericalError
from .estimator import InterDomainLinkPredictor
from .evaluation import AucResult, RankingResult, hit_at_10, roc_auc
from .mmd import KernelMixture, base_scale, mmd_gradient, mmd_unbiased
from .rescal import (
    EmbeddingModel,
    NegativeSampler,
    SparseGradient,
    frobenius_reg_gradient,
    init_model,
    load_checkpoint,
    margin_loss,
    ranking_gradients,
    save_checkpoint,
    score,
)
from .training import (
    EpochRecord,
    TrainConfig,
    TrainReport,
    fit,
    refresh_plan,
    train_epoch,
    warmstart,
)
from .transport import (
    TransportState,
    cost_matrix,
    entropic_objective,
    ot_embedding_gradient,
    sinkhorn,
    transport_cost,
)

__version__ = "0.1.0"

__all__ = [
    "AucResult",
    "ConfigError",
    "DataError",
    "DomainPair",
    "EmbeddingModel",
    "EpochRecord",
    "InterDomainLinkPredictor",
    "InterlinkError",
    "KernelMixture",
    "NegativeSampler",
    "NumericalError",
    "OverlapSpec",
    "RankingResult",
    "SparseGradient",
    "TaggedTriplet",
    "TaggedTripletStore",
    "TrainConfig",
    "TrainReport",
    "TransportState",
    "Triplet",
    "TripletStore",
    "Vocab",
    "base_scale",
    "cost_matrix",
    "entropic_objective",
    "fit",
    "frobenius_reg_gradient",
    "hit_at_10",
    "init_model",
    "load_checkpoint",
    "load_domain_pair",
    "load_triplets",
    "margin_loss",
    "mmd_gradient",
    "mmd_unbiased",
    "ot_embedding_gradient",
    "ranking_gradients",
    "refresh_plan",
    "roc_auc",
    "sample_domain_pair",
    "save_checkpoint",
    "save_domain_pair",
    "score",
    "sinkhorn",
    "train_epoch",
    "transport_cost",
    "warmstart",
]
