"""Functional principal components by penalized rank-one approximation."""

from .fpca import FPCAResult, center_columns, fit_mpdc, fit_spdr, variance_explained
from .grid_penalty import build_grid, build_penalty
from .rank_one import FitConfig, fit_power, fit_svd_route
from .selection import Criterion, cv_score, default_alpha_grid, gcv_score, select_alpha
from .spline import evaluate, interpolate

__version__ = "0.1.0"

__all__ = [
    "Criterion",
    "FPCAResult",
    "FitConfig",
    "build_grid",
    "build_penalty",
    "center_columns",
    "cv_score",
    "default_alpha_grid",
    "evaluate",
    "fit_mpdc",
    "fit_power",
    "fit_spdr",
    "fit_svd_route",
    "gcv_score",
    "interpolate",
    "select_alpha",
    "variance_explained",
]
