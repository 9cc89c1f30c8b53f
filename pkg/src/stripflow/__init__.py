"""Pseudo-spectral laboratory for free-surface flow with weak density
variations over topography, on the periodic strip T^d x [-1, 0]."""

from .geometry import Bathymetry, DiffeoFields, PhysParams, build_diffeo
from .grid import StripGrid
from .dynamics import StripState
from .shallow import SWState
from .runner import simulate

__all__ = [
    "StripGrid",
    "PhysParams",
    "Bathymetry",
    "DiffeoFields",
    "build_diffeo",
    "StripState",
    "SWState",
    "simulate",
]

__version__ = "0.1.0"
