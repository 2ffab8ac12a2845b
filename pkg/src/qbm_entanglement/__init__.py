"""Entanglement dynamics of two-mode Gaussian states in non-Markovian thermal reservoirs."""

__version__ = "0.1.0"

from .bath_kernels import DEFAULT_QUAD, BathSpec, QuadratureConfig  # noqa: E402
from .dynamics import ChannelKind, ChannelModel, DynamicsOptions, Trajectory, evolve  # noqa: E402
from .gaussian_states import CovarianceMatrix  # noqa: E402

__all__ = [
    "BathSpec",
    "ChannelKind",
    "ChannelModel",
    "CovarianceMatrix",
    "DEFAULT_QUAD",
    "DynamicsOptions",
    "QuadratureConfig",
    "Trajectory",
    "evolve",
]
