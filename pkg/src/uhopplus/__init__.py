"""Kernelized modern Hopfield memories, U-Hop+ separation learning and capacity bounds."""

from uhopplus.errors import HopfieldError
from uhopplus.patterns import PatternSet, generate_synthetic, load_idx, normalize_patterns
from uhopplus.normalization import Normalization, NormKind, entmax15, softmax, sparsemax
from uhopplus.kernel import FeatureMap, SeparationStats, apply_feature_map, kernel_similarity, separation_stats
from uhopplus.hopfield import (
    HopfieldConfig,
    RetrievalTrace,
    khm_energy,
    mhm_energy,
    retrieval_error,
    retrieve,
    update_step,
)
from uhopplus.uhop import (
    TrainConfig,
    TrainLog,
    hardmax_loss,
    helper_loss_l0,
    helper_loss_l0_literal,
    loss_gradient,
    pgd_step,
    separation_loss,
    uhop_plus,
)
from uhopplus.analysis import MetaHistogram, basins, energy_landscape, metastable_comparison, metastable_distribution

__all__ = [
    "HopfieldError",
    "PatternSet",
    "generate_synthetic",
    "load_idx",
    "normalize_patterns",
    "Normalization",
    "NormKind",
    "softmax",
    "sparsemax",
    "entmax15",
    "FeatureMap",
    "SeparationStats",
    "apply_feature_map",
    "kernel_similarity",
    "separation_stats",
    "HopfieldConfig",
    "RetrievalTrace",
    "mhm_energy",
    "khm_energy",
    "update_step",
    "retrieve",
    "retrieval_error",
    "TrainConfig",
    "TrainLog",
    "separation_loss",
    "hardmax_loss",
    "helper_loss_l0",
    "helper_loss_l0_literal",
    "loss_gradient",
    "pgd_step",
    "uhop_plus",
    "MetaHistogram",
    "metastable_distribution",
    "metastable_comparison",
    "energy_landscape",
    "basins",
]
