"""Trial execution backends: the deterministic cluster simulator and the
local-process runner."""

from .localproc import LocalProcessBackend
from .objectives import eval_sim_objective, is_registered_function
from .sim import (
    AutoscalerConfig,
    ChaosMode,
    ChaosPolicy,
    SimBackend,
    SimNamespace,
    SimNode,
    SimulatedCrash,
    SimWorld,
)

__all__ = [
    "AutoscalerConfig",
    "ChaosMode",
    "ChaosPolicy",
    "LocalProcessBackend",
    "SimBackend",
    "SimNamespace",
    "SimNode",
    "SimWorld",
    "SimulatedCrash",
    "eval_sim_objective",
    "is_registered_function",
]
