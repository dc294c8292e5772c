"""Isogeometric curved Euler-Bernoulli beam elements on a circular ring:
five membrane formulations, full-spectrum eigenvalue analysis against the
closed-form solution, and a quarter-circle cantilever benchmark."""

from .assembly import Formulation, FormulationSpec, SystemMatrices, build_system
from .ring import RingParams
from .splines import SplineSpace, gauss_rule, make_open_space, make_periodic_space

__version__ = "0.1.0"

__all__ = [
    "Formulation",
    "FormulationSpec",
    "RingParams",
    "SplineSpace",
    "SystemMatrices",
    "build_system",
    "gauss_rule",
    "make_open_space",
    "make_periodic_space",
]
