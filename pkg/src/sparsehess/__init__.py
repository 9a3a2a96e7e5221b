"""Sparse principal Hessian matrix estimation for interaction detection.

One-step l1-penalized estimation of the principal Hessian matrix from
moment matrices, solved by a proximal ADMM, with cross-validated tuning,
support extraction, pre-screening, an independent reference solver, and a
synthetic benchmark harness.
"""

from ._backend import available as available_backends
from ._backend import default_name as default_backend
from .bench import DesignSpec, MetricsReport, ModelSpec, run_experiment, tpr_fpr
from .detect import (
    FitResult,
    PsiEstimate,
    ScreenReport,
    fit_pipeline,
    prescreen,
    symmetrize_and_extract,
)
from .moments import (
    ColumnLayout,
    DataError,
    DataSet,
    MomentPair,
    center,
    compute_moments,
    load_csv,
    standardize,
)
from .oracle import KktCertificate, kkt_check, kkt_tolerance, reference_solve
from .solver import (
    SolveReport,
    SolverConfig,
    SolverDivergenceError,
    SolverState,
    shrinkage,
    solve,
    spectral_radius,
)
from .tuning import CvResult, LambdaPath, cv_select, kfold_split, lambda_path

__version__ = "0.1.0"

__all__ = [
    "ColumnLayout",
    "CvResult",
    "DataError",
    "DataSet",
    "DesignSpec",
    "FitResult",
    "KktCertificate",
    "LambdaPath",
    "MetricsReport",
    "ModelSpec",
    "MomentPair",
    "PsiEstimate",
    "ScreenReport",
    "SolveReport",
    "SolverConfig",
    "SolverDivergenceError",
    "SolverState",
    "available_backends",
    "center",
    "compute_moments",
    "cv_select",
    "default_backend",
    "fit_pipeline",
    "kfold_split",
    "kkt_check",
    "kkt_tolerance",
    "lambda_path",
    "load_csv",
    "prescreen",
    "reference_solve",
    "run_experiment",
    "shrinkage",
    "solve",
    "spectral_radius",
    "standardize",
    "symmetrize_and_extract",
    "tpr_fpr",
    "__version__",
]
