"""Lattice-boson toolkit: exact diagonalization, polymer and loop expansions,
explicit Mott-transition bounds and phase-diagram classification."""

from .lattice import HARD_CORE, LatticeSpec, ModelParams

__all__ = ["HARD_CORE", "LatticeSpec", "ModelParams"]
__version__ = "0.1.0"
