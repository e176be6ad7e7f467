"""Discounted moments of quantum harmonic oscillators and coherent quantum
filter synthesis for directly coupled plant-observer pairs."""

__version__ = "0.1.0"

from .coupled import (CompositeSystem, CostSpec, GramianPair, ObserverSpec, PlantSpec,
                      admissibility, assemble, gramians)
from .errors import QhoFilterError
from .policy import DEFAULT_POLICY, NumericPolicy
from .qho import CcrMatrix, QhoModel, diagonalize_modes, dynamics_matrix, standard_ccr

__all__ = [
    "__version__",
    "CcrMatrix",
    "QhoModel",
    "PlantSpec",
    "ObserverSpec",
    "CostSpec",
    "CompositeSystem",
    "GramianPair",
    "NumericPolicy",
    "DEFAULT_POLICY",
    "QhoFilterError",
    "standard_ccr",
    "dynamics_matrix",
    "diagonalize_modes",
    "assemble",
    "admissibility",
    "gramians",
]
