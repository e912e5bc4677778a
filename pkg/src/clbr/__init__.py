"""Counterfactual data augmentation and constrained training for bundle recommendation."""

__version__ = "0.1.0"

from .augment import (
    BatchThresholds, CounterfactualView, generate_view_set, heuristic_generate, relevance_scores,
    select_pairs, stochastic_generate,
)
from .config import AugmentConfig, PipelineConfig, SplitSpec, TrainConfig, load_config
from .encoder import EmbeddingTable, PropagatedEmbeddings, backpropagate, predict_score, propagate, row_normalize
from .evaluation import MetricsReport, evaluate, ndcg_at_k, rank_bundles, recall_at_k, split
from .graph import (
    EdgeSet, NodeSpace, RelationKind, TripartiteGraph, ViewDelta, apply_delta, build_graph, normalized_adjacency,
)
from .objective import LossBreakdown, LossConfig, bpr_loss, constraint_loss, distance, loss_gradients, total_loss
from .theory import SampleComplexityQuery, lemma_oracles, sample_complexity
from .trainer import OptimizerState, TrainedModel, adam_step, pretrain_selection_model, train
