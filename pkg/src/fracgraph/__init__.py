"""Fractional diffusion on metric star graphs: direct solver and source reconstruction."""

from .fracops import Side, UniformGrid, Series
from .graph import StarGraph, GraphSeries, Coefficients
from .spatial import SingularRepresentation, apply_L, invert_L
from .direct import DirectProblem, DirectSolution, solve_direct

__version__ = "0.1.0"

__all__ = [
    "Side",
    "UniformGrid",
    "Series",
    "StarGraph",
    "GraphSeries",
    "Coefficients",
    "SingularRepresentation",
    "apply_L",
    "invert_L",
    "DirectProblem",
    "DirectSolution",
    "solve_direct",
]
