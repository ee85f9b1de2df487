"""Reduced-order modeling by trajectory-based optimization of oblique projections."""

from .manifold import RepresentativePair, TangentLift
from .objective import ObjectiveConfig, TrajectoryDataset, evaluate, gradient_sampled
from .optimizer import CgConfig, optimize
from .projection import assemble_rom, project
from .system import toy_model

__all__ = [
    "RepresentativePair",
    "TangentLift",
    "ObjectiveConfig",
    "TrajectoryDataset",
    "evaluate",
    "gradient_sampled",
    "CgConfig",
    "optimize",
    "assemble_rom",
    "project",
    "toy_model",
]

__version__ = "0.1.0"
