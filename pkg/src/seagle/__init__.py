"""Inverse scattering with the Lippmann-Schwinger equation.

The forward field is the iterate sequence of an accelerated gradient method on
``0.5 ||(I - G diag(f)) u - u_in||^2``; gradients of the sensor misfit with
respect to ``f`` are computed by backpropagating through that sequence, and
the image is recovered by TV-regularized FISTA.
"""
from .forward import ForwardConfig, ForwardRecord, replay_forward, solve_forward
from .gradient import data_fidelity, data_gradient, value_and_gradient
from .green import InteriorOperator, SensorOperator
from .grid import (Grid, ScatteringPotential, SensorArray, SourceSpec, make_shepp_logan,
                   potential_from_index, wavenumber)
from .inverse import ReconstructionConfig, ReconstructionHistory, reconstruct
from .model import MeasurementSet, ScatteringSetup
from .tv import ConstraintSet, tv_prox, tv_value

__version__ = "0.1.0"

__all__ = [
    "ConstraintSet", "ForwardConfig", "ForwardRecord", "Grid", "InteriorOperator",
    "MeasurementSet", "ReconstructionConfig", "ReconstructionHistory", "ScatteringPotential",
    "ScatteringSetup", "SensorArray", "SensorOperator", "SourceSpec", "data_fidelity",
    "data_gradient", "make_shepp_logan", "potential_from_index", "reconstruct",
    "replay_forward", "solve_forward", "tv_prox", "tv_value", "value_and_gradient",
    "wavenumber",
]
