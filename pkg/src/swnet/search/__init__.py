"""Sharing search: gradient ledger, similarity scores, grouping, refinement."""

from .ledger import GradientLedger
from .similarity import coefficient_similarity, cosine, superweight_similarity
from .grouping import SimilarityQueue, group_by_queue
from .baselines import depth_bin_grouping, kmeans, random_grouping
from .procedures import (
    candidate_pairs,
    propose_groups,
    refine_coefficients,
    similarity_table,
)

__all__ = [
    "GradientLedger",
    "SimilarityQueue",
    "candidate_pairs",
    "coefficient_similarity",
    "cosine",
    "depth_bin_grouping",
    "group_by_queue",
    "kmeans",
    "propose_groups",
    "random_grouping",
    "refine_coefficients",
    "similarity_table",
    "superweight_similarity",
]
