"""Numerical laboratory for long-range, polynomially screened Anderson models."""

__version__ = "0.1.0"

from .errors import NumericalError, ResonanceError, ValidationError
from .lattice import Annulus, Ball, Shell, enumerate_ball, inner_boundary, shell_decomposition
from .model import (
    AmplitudeDistribution,
    Background,
    CumulativePotential,
    FieldSample,
    InteractionPotential,
    cumulative_potential,
    eval_interaction,
    plus_modification,
    sample_field,
)
from .rng import stream

__all__ = [
    "__version__",
    "NumericalError",
    "ResonanceError",
    "ValidationError",
    "Annulus",
    "Ball",
    "Shell",
    "enumerate_ball",
    "inner_boundary",
    "shell_decomposition",
    "AmplitudeDistribution",
    "Background",
    "CumulativePotential",
    "FieldSample",
    "InteractionPotential",
    "cumulative_potential",
    "eval_interaction",
    "plus_modification",
    "sample_field",
    "stream",
]
