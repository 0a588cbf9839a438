"""Observation grid, second-derivative roughness penalty and its smoothers.

For sorted knots ``t_1 < ... < t_m`` with gaps ``h_j`` the integrated squared
second derivative of the natural cubic spline interpolating ``v`` equals
``v' Omega v`` with ``Omega = Q R^{-1} Q'``.  ``Q`` (m x (m-2)) holds the
second divided-difference stencils and ``R`` ((m-2) x (m-2)) is symmetric
tridiagonal.  Everything downstream works in the eigenbasis of ``Omega``::

    Omega = Gamma diag(lam) Gamma'
    S(alpha) = (I + alpha Omega)^{-1} = Gamma diag(1 / (1 + alpha lam)) Gamma'
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import EigenFailure, GridTooSmall, NegativeAlpha, NonIncreasingGrid

#: eigenvalues below this fraction of the largest one are set to exactly zero
EIG_CLAMP_RTOL = 1e-10


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing observation points and their gaps."""

    times: np.ndarray
    gaps: np.ndarray

    @property
    def m(self) -> int:
        return self.times.shape[0]

    def same_as(self, other: "TimeGrid") -> bool:
        return self.m == other.m and np.array_equal(self.times, other.times)


@dataclass(frozen=True, eq=False)
class BandFactors:
    q: np.ndarray  # m x (m-2)
    r: np.ndarray  # (m-2) x (m-2), symmetric tridiagonal

    def r_banded(self) -> np.ndarray:
        """``R`` in upper banded storage for :func:`scipy.linalg.solveh_banded`."""
        k = self.r.shape[0]
        ab = np.zeros((2, k))
        ab[1] = np.diag(self.r)
        ab[0, 1:] = np.diag(self.r, 1)
        return ab


@dataclass(frozen=True, eq=False)
class PenaltyOperator:
    """Roughness penalty matrix with its eigendecomposition.

    ``eigvals`` are sorted in descending order, so the two trailing entries
    are the (exactly zero) null-space eigenvalues belonging to the constant
    and linear directions.
    """

    grid: TimeGrid
    omega: np.ndarray
    eigvecs: np.ndarray
    eigvals: np.ndarray

    @property
    def m(self) -> int:
        return self.grid.m

    def shrink(self, alpha: float) -> np.ndarray:
        """Eigenvalues of ``S(alpha)``: ``1 / (1 + alpha * lam)``."""
        _check_alpha(alpha)
        return 1.0 / (1.0 + alpha * self.eigvals)

    def smoother_matrix(self, alpha: float) -> np.ndarray:
        """Dense ``S(alpha)``; meant for small problems and cross-checks."""
        return (self.eigvecs * self.shrink(alpha)) @ self.eigvecs.T


def _check_alpha(alpha: float) -> None:
    if not alpha >= 0:
        raise NegativeAlpha(f"alpha must be nonnegative, got {alpha!r}")


def build_grid(times) -> TimeGrid:
    """Validate ``times`` and compute the gaps.

    >>> build_grid([0, 0.5, 2]).gaps
    array([0.5, 1.5])
    """
    t = np.asarray(times, dtype=float).ravel()
    if t.shape[0] < 3:
        raise GridTooSmall(f"need at least 3 grid points, got {t.shape[0]}")
    if not np.all(np.isfinite(t)):
        raise NonIncreasingGrid("grid contains non-finite values")
    h = np.diff(t)
    bad = np.flatnonzero(h <= 0)
    if bad.size:
        j = int(bad[0])
        raise NonIncreasingGrid(
            f"grid must be strictly increasing: t[{j}]={t[j]!r} >= t[{j + 1}]={t[j + 1]!r}"
        )
    return TimeGrid(times=_readonly(t), gaps=_readonly(h))


def build_band_factors(grid: TimeGrid) -> BandFactors:
    h = grid.gaps
    m = grid.m
    q = np.zeros((m, m - 2))
    cols = np.arange(m - 2)
    # column c corresponds to interior knot c+1 (0-based)
    q[cols, cols] = 1.0 / h[:-1]
    q[cols + 1, cols] = -1.0 / h[:-1] - 1.0 / h[1:]
    q[cols + 2, cols] = 1.0 / h[1:]

    r = np.diag((h[:-1] + h[1:]) / 3.0)
    off = h[1:-1] / 6.0
    r += np.diag(off, 1) + np.diag(off, -1)
    return BandFactors(q=_readonly(q), r=_readonly(r))


def solve_r(bands: BandFactors, rhs: np.ndarray) -> np.ndarray:
    """Solve ``R x = rhs`` with a banded Cholesky factorization (no pivoting)."""
    rhs = np.asarray(rhs, dtype=float)
    if bands.r.shape[0] == 1:  # solveh_banded rejects 1x1 systems
        return rhs / bands.r[0, 0]
    return linalg.solveh_banded(bands.r_banded(), rhs, lower=False)


def build_penalty(grid: TimeGrid) -> PenaltyOperator:
    bands = build_band_factors(grid)
    r_inv_qt = solve_r(bands, bands.q.T)
    omega = bands.q @ r_inv_qt
    omega = 0.5 * (omega + omega.T)

    try:
        lam, gam = linalg.eigh(omega)
    except linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise EigenFailure(str(exc)) from exc
    if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(gam))):
        raise EigenFailure("non-finite eigenpairs of the penalty matrix")

    order = np.argsort(lam, kind="stable")[::-1]
    lam = lam[order]
    gam = gam[:, order]

    lam_max = lam[0]
    lam[lam < EIG_CLAMP_RTOL * lam_max] = 0.0
    # rank is exactly m - 2; round-off does not know that
    lam[-2:] = 0.0

    idx = np.argmax(np.abs(gam), axis=0)
    signs = np.sign(gam[idx, np.arange(gam.shape[1])])
    signs[signs == 0] = 1.0
    gam = gam * signs

    return PenaltyOperator(
        grid=grid,
        omega=_readonly(omega),
        eigvecs=_readonly(gam),
        eigvals=_readonly(lam),
    )


def penalty_for_times(times) -> PenaltyOperator:
    return build_penalty(build_grid(times))


def apply_smoother(penalty: PenaltyOperator, alpha: float, w) -> np.ndarray:
    """``S(alpha) w``.  ``w`` may be a vector or an ``m x k`` matrix."""
    g = penalty.eigvecs
    d = penalty.shrink(alpha)
    w = np.asarray(w, dtype=float)
    coef = g.T @ w
    coef = coef * (d if coef.ndim == 1 else d[:, None])
    return g @ coef


def apply_half_smoother(penalty: PenaltyOperator, alpha: float, w) -> np.ndarray:
    """``S(alpha)^{1/2} w``, the symmetric square root of the smoother."""
    g = penalty.eigvecs
    d = np.sqrt(penalty.shrink(alpha))
    w = np.asarray(w, dtype=float)
    coef = g.T @ w
    coef = coef * (d if coef.ndim == 1 else d[:, None])
    return g @ coef


def smoother_diag(penalty: PenaltyOperator, alpha: float) -> np.ndarray:
    return (penalty.eigvecs**2) @ penalty.shrink(alpha)


def trace_smoother(penalty: PenaltyOperator, alpha: float) -> float:
    return float(np.sum(penalty.shrink(alpha)))
