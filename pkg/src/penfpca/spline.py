"""Natural cubic spline through a fitted loading vector.

A natural cubic spline is fully described by its knot values ``v`` and
knot second derivatives ``s`` (with ``s_1 = s_m = 0``); the interior second
derivatives solve the tridiagonal system ``R s = Q' v``.  Outside the knot
range the curve continues as a straight line with the boundary slope.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, GridMismatch
from .grid_penalty import (
    PenaltyOperator,
    TimeGrid,
    build_band_factors,
    solve_r,
)


@dataclass(frozen=True, eq=False)
class SplineFunction:
    grid: TimeGrid
    values: np.ndarray
    second_derivs: np.ndarray

    def __call__(self, t):
        return evaluate(self, t)

    def boundary_slopes(self) -> tuple[float, float]:
        """Derivative at ``t_1`` (from the right) and ``t_m`` (from the left)."""
        h = self.grid.gaps
        v = self.values
        s = self.second_derivs
        left = (v[1] - v[0]) / h[0] - h[0] * (2.0 * s[0] + s[1]) / 6.0
        right = (v[-1] - v[-2]) / h[-1] + h[-1] * (s[-2] + 2.0 * s[-1]) / 6.0
        return float(left), float(right)

    def integrated_curvature(self) -> float:
        """Exact ``int (gamma'')^2`` over ``[t_1, t_m]``.

        ``gamma''`` is linear on each interval, so each piece integrates to
        ``h (a^2 + a b + b^2) / 3``.
        """
        s = self.second_derivs
        a, b = s[:-1], s[1:]
        return float(np.sum(self.grid.gaps * (a * a + a * b + b * b)) / 3.0)


def interpolate(grid: TimeGrid, v) -> SplineFunction:
    v = np.asarray(v, dtype=float).ravel()
    if v.shape[0] != grid.m:
        raise DimensionMismatch(
            f"values have length {v.shape[0]}, grid has {grid.m} points"
        )
    bands = build_band_factors(grid)
    s = np.zeros(grid.m)
    s[1:-1] = solve_r(bands, bands.q.T @ v)
    v = v.copy()
    v.setflags(write=False)
    s.setflags(write=False)
    return SplineFunction(grid=grid, values=v, second_derivs=s)


def evaluate(spline: SplineFunction, t):
    """Evaluate the spline at scalar or array ``t``.

    Interior knots are assigned to the interval on their right; the result
    is the same either way by continuity.
    """
    t_arr = np.asarray(t, dtype=float)
    scalar = t_arr.ndim == 0
    t_arr = np.atleast_1d(t_arr)

    knots = spline.grid.times
    h = spline.grid.gaps
    v = spline.values
    s = spline.second_derivs
    m = knots.shape[0]

    j = np.searchsorted(knots, t_arr, side="right") - 1
    j = np.clip(j, 0, m - 2)
    tl = knots[j]
    tr = knots[j + 1]
    hj = h[j]
    a = t_arr - tl
    b = tr - t_arr
    out = (a * v[j + 1] + b * v[j]) / hj - (a * b / 6.0) * (
        (1.0 + a / hj) * s[j + 1] + (1.0 + b / hj) * s[j]
    )
    # exact knot values, including the right endpoint
    at_knot = a == 0.0
    out = np.where(at_knot, v[j], out)
    out = np.where(t_arr == knots[-1], v[-1], out)

    slope_l, slope_r = spline.boundary_slopes()
    below = t_arr < knots[0]
    above = t_arr > knots[-1]
    out = np.where(below, v[0] + (t_arr - knots[0]) * slope_l, out)
    out = np.where(above, v[-1] + (t_arr - knots[-1]) * slope_r, out)

    return float(out[0]) if scalar else out


def roughness(spline: SplineFunction, penalty: PenaltyOperator) -> float:
    """``v' Omega v``, which equals ``int (gamma'')^2`` for the interpolant."""
    if not spline.grid.same_as(penalty.grid):
        raise GridMismatch("spline and penalty were built on different grids")
    v = spline.values
    return float(v @ penalty.omega @ v)
