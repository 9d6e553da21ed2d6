"""Smooth nonnegative tensor factorization for multi-site daily load curves.

Pipeline: a :class:`~loadntf.panel.LoadPanel` of daily curves with per-day
temperature and regime covariates is normalized, aggregated into a weighted
tensor pair, and factorized by a Fast HALS solver whose smoothness penalties
are exact spline curvature integrals.  Site activations feed K-means
clustering with silhouette-based model selection.
"""

from .errors import (
    DegenerateSiteError,
    GridTooCoarseError,
    InternalInconsistencyError,
    InvalidGridError,
    LoadNTFError,
    PanelFormatError,
    SolverNumericsError,
)
from .features import (
    adjusted_rand_index,
    kmeans,
    select_k_by_silhouette,
    silhouette,
    site_features,
)
from .panel import (
    LoadPanel,
    WeightedTensorPair,
    assemble_tensors,
    build_temperature_grid,
    functional_objective,
    normalize_by_daily_mean,
    read_panel_csvs,
    write_panel_csvs,
)
from .solver import (
    FactorSet,
    FitReport,
    SolverConfig,
    fit,
    fit_baseline_ntf,
    init_svd_positive,
    objective,
)
from .splinequad import (
    SplinePair,
    SplineSystem,
    integral,
    natural_spline_system,
    penalty,
    periodic_spline_system,
)
from .synthgen import PlantSpec, PlantedTruth, generate

__version__ = "0.1.0"

__all__ = [
    "LoadNTFError", "InvalidGridError", "GridTooCoarseError", "DegenerateSiteError",
    "InternalInconsistencyError", "PanelFormatError", "SolverNumericsError",
    "SplineSystem", "SplinePair", "natural_spline_system", "periodic_spline_system",
    "integral", "penalty",
    "LoadPanel", "WeightedTensorPair", "normalize_by_daily_mean",
    "build_temperature_grid", "assemble_tensors", "functional_objective",
    "read_panel_csvs", "write_panel_csvs",
    "FactorSet", "FitReport", "SolverConfig", "fit", "fit_baseline_ntf",
    "init_svd_positive", "objective",
    "site_features", "kmeans", "silhouette", "adjusted_rand_index",
    "select_k_by_silhouette",
    "PlantSpec", "PlantedTruth", "generate",
    "__version__",
]
