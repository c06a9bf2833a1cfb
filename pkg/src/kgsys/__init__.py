"""Numerical laboratory for a coupled cubic Klein-Gordon system.

Pseudospectral tools on a periodic box: functionals and conserved
quantities, ground states and the pass level h0, a split-step propagator,
region classification and dichotomy experiments, Lorentz boosts on stored
space-time data, and finite-n profile decomposition.
"""

from .functionals import (FieldPair, FunctionalReport, NonlinearityParams,
                          PhasePoint)
from .spectral import ScalarField, SpectralGrid, make_grid

__version__ = "0.1.0"

__all__ = [
    "FieldPair",
    "FunctionalReport",
    "NonlinearityParams",
    "PhasePoint",
    "ScalarField",
    "SpectralGrid",
    "make_grid",
    "__version__",
]
