"""Critical first passage percolation on configuration-model graphs."""

from .distributions import (DegreeModel, DoubleExp, Empirical, ExpStretch, Exponential,
                            PointMass, PowerNearZero, WeightModel)
from .graphgen import HalfEdgeGraph, configuration_model, match_half_edges, sample_degrees

__version__ = "0.1.0"

__all__ = [
    "DegreeModel", "WeightModel", "PowerNearZero", "ExpStretch", "DoubleExp", "Exponential",
    "PointMass", "Empirical", "HalfEdgeGraph", "configuration_model", "match_half_edges",
    "sample_degrees",
]
