"""Sequential extraction of several smoothed components.

Two strategies are implemented:

``mpdc``
    one smoothing parameter per component, chosen by column-deletion CV or
    GCV on the current residual matrix, followed by rank-one deflation;
``spdr``
    one smoothing parameter for all components, chosen by row-deletion CV,
    with the components taken as successive singular vectors of the
    half-smoothed matrix (orthogonal in the ``I + alpha Omega`` inner
    product).
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionError, TooFewRows, ZeroMatrix, ZeroResidual
from .grid_penalty import PenaltyOperator, TimeGrid, build_grid
from .rank_one import (
    ComponentFit,
    FitConfig,
    fit_power,
    fit_svd_route,
    profile_objective,
    sign_normalize,
)
from .selection import (
    Criterion,
    SelectionTrace,
    default_alpha_grid,
    select_alpha,
    select_alpha_rows,
)

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
#: residual counts as exhausted below this fraction of the data's norm
ZERO_RESIDUAL_RTOL = 1e-12


class Method(str, enum.Enum):
    MPDC = "mpdc"
    SPDR = "spdr"


@dataclass(frozen=True, eq=False)
class CenteredDataset:
    matrix: np.ndarray
    column_means: np.ndarray
    grid: TimeGrid


@dataclass(eq=False)
class FPCAResult:
    components: list
    method: Method
    column_means: np.ndarray
    residual_fro_norm: float
    total_ss: float
    grid: TimeGrid
    truncated: bool = False
    # spdr only: norm of the half-smoothed data matrix and its singular values
    smoothed_fro_norm: Optional[float] = None
    smoothed_singular_values: Optional[np.ndarray] = field(default=None)

    @property
    def K(self) -> int:
        return len(self.components)

    @property
    def loadings(self) -> np.ndarray:
        """``m x K`` matrix of unit loadings."""
        return np.column_stack([c.loading for c in self.components])

    @property
    def scores(self) -> np.ndarray:
        return np.column_stack([c.scores for c in self.components])

    @property
    def alphas(self) -> list:
        return [c.alpha for c in self.components]

    def to_dict(self) -> dict:
        frac = variance_explained(self)
        comps = []
        for c, f in zip(self.components, frac):
            comps.append(
                {
                    "alpha": c.alpha,
                    "loading": c.loading.tolist(),
                    "scores": c.scores.tolist(),
                    "objective": c.objective,
                    "iterations": c.iterations,
                    "converged": c.converged,
                    "variance_fraction": float(f),
                    "selection": None if c.selection is None else c.selection.to_dict(),
                }
            )
        out = {
            "format_version": FORMAT_VERSION,
            "method": self.method.value,
            "grid": self.grid.times.tolist(),
            "column_means": self.column_means.tolist(),
            "residual_fro_norm": self.residual_fro_norm,
            "total_ss": self.total_ss,
            "truncated": self.truncated,
            "components": comps,
        }
        if self.smoothed_fro_norm is not None:
            out["smoothed_fro_norm"] = self.smoothed_fro_norm
            out["smoothed_singular_values"] = self.smoothed_singular_values.tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "FPCAResult":
        if d.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported format_version {d.get('format_version')!r}")
        comps = []
        for c in d["components"]:
            sel = c.get("selection")
            comps.append(
                ComponentFit(
                    scores=np.asarray(c["scores"], dtype=float),
                    loading=np.asarray(c["loading"], dtype=float),
                    alpha=float(c["alpha"]),
                    objective=float(c["objective"]),
                    iterations=int(c["iterations"]),
                    converged=bool(c["converged"]),
                    selection=None if sel is None else SelectionTrace.from_dict(sel),
                )
            )
        sv = d.get("smoothed_singular_values")
        return cls(
            components=comps,
            method=Method(d["method"]),
            column_means=np.asarray(d["column_means"], dtype=float),
            residual_fro_norm=float(d["residual_fro_norm"]),
            total_ss=float(d["total_ss"]),
            grid=build_grid(d["grid"]),
            truncated=bool(d["truncated"]),
            smoothed_fro_norm=d.get("smoothed_fro_norm"),
            smoothed_singular_values=None if sv is None else np.asarray(sv, dtype=float),
        )


def center_columns(X, grid: TimeGrid) -> CenteredDataset:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise TooFewRows("centering needs a 2-d matrix with at least 2 rows")
    if X.shape[1] != grid.m:
        raise DimensionError(f"X has {X.shape[1]} columns, grid has {grid.m} points")
    means = X.mean(axis=0)
    return CenteredDataset(matrix=X - means, column_means=means, grid=grid)


def uncentered(X, grid: TimeGrid) -> CenteredDataset:
    """Wrap ``X`` without centering (zero mean curve)."""
    X = np.asarray(X, dtype=float)
    return CenteredDataset(matrix=X, column_means=np.zeros(X.shape[1]), grid=grid)


def _validate_k(K: int, limit: int, what: str) -> None:
    if not 1 <= K <= limit:
        raise DimensionError(f"K={K} must lie in [1, {limit}] ({what})")


def fit_mpdc(
    data: CenteredDataset,
    penalty: PenaltyOperator,
    K: int,
    grid=None,
    criterion=Criterion.CV,
    cfg: Optional[FitConfig] = None,
    solver: str = "svd",
) -> FPCAResult:
    """Extract ``K`` components, each with its own selected smoothing parameter.

    Per component: start ``u`` from the leading singular pair of the
    residual, select alpha with that ``u``, refit at the chosen alpha, then
    subtract ``u v'`` from the residual.  ``solver="power"`` (or a
    ``cfg.init``) uses the power iteration instead of the SVD route.
    """
    X = data.matrix
    n, m = X.shape
    _validate_k(K, min(n, m), "min(n, m)")
    grid = default_alpha_grid() if grid is None else grid
    use_power = solver == "power" or (cfg is not None and cfg.init is not None)
    cfg = cfg or FitConfig()

    total_ss = float(np.sum(X * X))
    if total_ss == 0:
        raise ZeroMatrix("data matrix is identically zero")
    scale = np.sqrt(total_ss)

    resid = X.copy()
    comps = []
    truncated = False
    for k in range(K):
        if np.linalg.norm(resid) <= ZERO_RESIDUAL_RTOL * scale:
            truncated = True
            log.warning("residual exhausted after %d of %d components", k, K)
            break
        uu, sv, _ = np.linalg.svd(resid, full_matrices=False)
        u0 = uu[:, 0] * sv[0]
        trace = select_alpha(resid, u0, penalty, grid, criterion)
        if use_power:
            fit = fit_power(resid, penalty, trace.alpha, cfg)
        else:
            fit = fit_svd_route(resid, penalty, trace.alpha)
        fit.selection = trace
        comps.append(fit)
        resid = resid - np.outer(fit.scores, fit.loading)

    if not comps:
        raise ZeroResidual("no component could be extracted")
    return FPCAResult(
        components=comps,
        method=Method.MPDC,
        column_means=np.asarray(data.column_means, dtype=float),
        residual_fro_norm=float(np.linalg.norm(resid)),
        total_ss=total_ss,
        grid=data.grid,
        truncated=truncated,
    )


def spdr_components(X, penalty: PenaltyOperator, alpha: float, K: int):
    """First ``K`` single-parameter components at a fixed ``alpha``.

    Returns ``(fits, raw, singular_values, smoothed_norm)`` where ``raw``
    holds the back-mapped loadings before renormalization (columns), which
    are orthonormal in the ``I + alpha Omega`` inner product.
    """
    X = np.asarray(X, dtype=float)
    G = X @ penalty.eigvecs
    d = np.sqrt(penalty.shrink(alpha))
    Xt = G * d
    _, sv, vt = np.linalg.svd(Xt, full_matrices=False)
    raw = penalty.eigvecs @ (d[:, None] * vt[:K].T)
    fits = []
    for k in range(K):
        v = sign_normalize(raw[:, k] / np.linalg.norm(raw[:, k]))
        fits.append(
            ComponentFit(
                scores=X @ v,
                loading=v,
                alpha=float(alpha),
                objective=profile_objective(X, v, alpha, penalty),
            )
        )
    return fits, raw, sv, float(np.linalg.norm(Xt))


def fit_spdr(
    data: CenteredDataset,
    penalty: PenaltyOperator,
    K: int,
    grid=None,
    cfg: Optional[FitConfig] = None,
) -> FPCAResult:
    """Single smoothing parameter chosen by row-deletion CV for all components."""
    X = data.matrix
    n, m = X.shape
    _validate_k(K, min(n - 1, m), "min(n - 1, m)")
    total_ss = float(np.sum(X * X))
    if total_ss == 0:
        raise ZeroMatrix("data matrix is identically zero")

    trace = select_alpha_rows(X, penalty, grid, K)
    fits, _, sv, smoothed_norm = spdr_components(X, penalty, trace.alpha, K)
    for f in fits:
        f.selection = trace
    resid_sq = max(smoothed_norm**2 - float(np.sum(sv[:K] ** 2)), 0.0)
    return FPCAResult(
        components=fits,
        method=Method.SPDR,
        column_means=np.asarray(data.column_means, dtype=float),
        residual_fro_norm=float(np.sqrt(resid_sq)),
        total_ss=total_ss,
        grid=data.grid,
        smoothed_fro_norm=smoothed_norm,
        smoothed_singular_values=sv[:K].copy(),
    )


def variance_explained(result: FPCAResult) -> np.ndarray:
    """``||u_k||^2 / ||X||_F^2`` for each component."""
    return np.array([c.scores @ c.scores for c in result.components]) / result.total_ss
