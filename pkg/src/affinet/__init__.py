"""affinet: exact simulation of a spatial invitation/affinity/withdrawal
network model on a flat torus, plus the deterministic mean-field limit solver
and diagnostics connecting the two.

The hot event loop lives in a compiled extension (``affinet._core``) with a
pure-Python fallback; see :mod:`affinet.engine`.
"""

from .domain import Geometry, Params, torus_distance, torus_wrap, validate_params
from .engine import BACKEND
from .kernels import KernelSet, affinity_integral
from .simulator import Model, RunConfig, Simulation, Trajectory, extinction_time, rng_for, run
from .state import SystemState

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Geometry",
    "KernelSet",
    "Model",
    "Params",
    "RunConfig",
    "Simulation",
    "SystemState",
    "Trajectory",
    "affinity_integral",
    "extinction_time",
    "rng_for",
    "run",
    "torus_distance",
    "torus_wrap",
    "validate_params",
    "__version__",
]
