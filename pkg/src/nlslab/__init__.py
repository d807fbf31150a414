"""Numerical laboratory for the radial focusing NLS with a potential in three dimensions."""
__version__ = "0.1.0"

from .errors import NlsLabError, NumericalError, ValidationError
from .grid import RadialField, RadialGrid
from .groundstate import GroundState, solve_ground_state
from .potentials import analyze, potential_from_dict
from .classifier import Verdict, classify
from .evolution import EvolveConfig, evolve, scattering_diagnostic
from .virial import Weight, make_weight, virial_eval

__all__ = [
    "__version__", "NlsLabError", "NumericalError", "ValidationError",
    "RadialField", "RadialGrid", "GroundState", "solve_ground_state",
    "analyze", "potential_from_dict", "Verdict", "classify",
    "EvolveConfig", "evolve", "scattering_diagnostic",
    "Weight", "make_weight", "virial_eval",
]
