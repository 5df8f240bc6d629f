"""Teleportation-based quantum critical point detection on finite thermal spin chains."""

__version__ = "0.1.0"

from .models import ModelSpec, SectorPlan, build_hamiltonian, symmetry_sectors
from .thermal import CorrelatorSet, ThermalState, correlators, diagonalize, gibbs_state, reduced_state
from .teleport import (
    external_closed_form,
    external_detector,
    internal_closed_form,
    internal_detector,
)

__all__ = [
    "ModelSpec",
    "SectorPlan",
    "build_hamiltonian",
    "symmetry_sectors",
    "CorrelatorSet",
    "ThermalState",
    "correlators",
    "diagonalize",
    "gibbs_state",
    "reduced_state",
    "external_closed_form",
    "external_detector",
    "internal_closed_form",
    "internal_detector",
]
