"""Exact and Monte Carlo tools for the East kinetically constrained model on ``[1, L]``.

Submodules
----------
core        configurations, constraint, rates and state encoding
graphical   Poisson-clock construction, trajectories, couplings, hitting-time sampling
exact       generator, spectral gap, hitting times, survival, mixing and quantile times
bottleneck  deterministic dynamics, the set ``A*``, boundary chains, variational bounds
network     conductances, capacities, equilibrium flows and the recursive flow bound
lab         scenarios, verification suites and the ``eastlab`` command line

Set ``EASTLAB_NUMBA=0`` to run the simulation kernels in pure numpy.
"""
from __future__ import annotations

from . import bottleneck, core, exact, graphical, network
from ._accel import HAS_NUMBA, backend, numba_enabled, set_numba
from .core import Configuration, ModelParams

__version__ = "0.1.0"

__all__ = [
    "Configuration",
    "ModelParams",
    "HAS_NUMBA",
    "backend",
    "numba_enabled",
    "set_numba",
    "core",
    "graphical",
    "exact",
    "bottleneck",
    "network",
]
