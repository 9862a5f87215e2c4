"""Computational laboratory for singularity of discrete random matrices."""
from .distribution import DiscreteDist, bernoulli, parse_dist, predicted_probabilities, rademacher, stats, uniform
from .exact import bonferroni_dominant, enumerate_dominant_union, enumerate_singularity
from .levy import SliceConstraint, SumDist, klr_ratio, levy, levy_conditional, levy_mc, sum_dist, threshold
from .sampler import RngSeed

__all__ = [
    "DiscreteDist", "bernoulli", "parse_dist", "predicted_probabilities", "rademacher", "stats", "uniform",
    "bonferroni_dominant", "enumerate_dominant_union", "enumerate_singularity",
    "SliceConstraint", "SumDist", "klr_ratio", "levy", "levy_conditional", "levy_mc", "sum_dist", "threshold",
    "RngSeed",
]
