"""Parareal-type parallel-in-time solvers with learned coarse-fine corrections."""
from .correction import (
    CorrectionDataset,
    LaggedCorrectionStore,
    NnGpModel,
    RandNetModel,
    knn_query,
    nngp_correct,
    randnet_correct,
)
from .engine import (
    CorrectionSpec,
    PintConfig,
    RunReport,
    compute_accuracy,
    model_parallel_time,
    run_pint,
    sequential_fine,
)
from .integrators import Method, SolverSpec, integrate_interval
from .systems import make_system

__version__ = "0.1.0"

__all__ = [
    "CorrectionDataset",
    "LaggedCorrectionStore",
    "NnGpModel",
    "RandNetModel",
    "knn_query",
    "nngp_correct",
    "randnet_correct",
    "CorrectionSpec",
    "PintConfig",
    "RunReport",
    "compute_accuracy",
    "model_parallel_time",
    "run_pint",
    "sequential_fine",
    "Method",
    "SolverSpec",
    "integrate_interval",
    "make_system",
]
