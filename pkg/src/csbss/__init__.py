"""Blind source separation from compressively sensed mixtures.

The sources ``S = D X`` are sparse in a dictionary ``D``; each mixture
``S a_i`` is observed through its own sampling operator. Estimation runs a
conjugate subgradient method on ``R^{d x m} x OB(m, k)``.
"""

__version__ = "0.1.0"

from .csg import LambdaSchedule, SolveResult, SolverConfig, csg_solve
from .geometry import IteratePair, ObliquePoint, TangentPair, random_oblique
from .model import ProblemInstance, SamplingOperator, cost, min_norm_subgradient
from .synth import GenSpec, GroundTruth, generate, initial_point

__all__ = [
    "GenSpec",
    "GroundTruth",
    "IteratePair",
    "LambdaSchedule",
    "ObliquePoint",
    "ProblemInstance",
    "SamplingOperator",
    "SolveResult",
    "SolverConfig",
    "TangentPair",
    "__version__",
    "cost",
    "csg_solve",
    "generate",
    "initial_point",
    "min_norm_subgradient",
    "random_oblique",
]
