"""Multimode Jaynes-Cummings model: dressed states, dynamics and JCH mean-field phases."""

from mmjc.core import ManifoldIndex, ModelParams, detuning, effective_coupling, validate_params
from mmjc.spectrum import DressedPair, eigenspectrum_sweep, manifold_eigensystem

__all__ = [
    "DressedPair",
    "ManifoldIndex",
    "ModelParams",
    "detuning",
    "effective_coupling",
    "eigenspectrum_sweep",
    "manifold_eigensystem",
    "validate_params",
]

__version__ = "0.1.0"
