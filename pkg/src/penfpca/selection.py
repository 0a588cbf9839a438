"""Smoothing-parameter selection.

Column-deletion scores for one component with current scores ``u``:

    CV(alpha)  = (1/m) sum_j [ ((I - S) X'u)_j / (1 - S_jj) ]^2
    GCV(alpha) = (1/m) ||(I - S) X'u||^2 / (1 - tr(S)/m)^2

Both are evaluated in the eigenbasis of the penalty, where ``I - S`` is the
diagonal shrinkage ``alpha lam / (1 + alpha lam)``; ``Gamma' X'u`` is
formed once per ``u`` and reused across the whole alpha grid.  At
``alpha = 0`` both numerator and denominator vanish, so the analytic limits

    CV(0)  = (1/m) sum_j [ (Omega X'u)_j / Omega_jj ]^2
    GCV(0) = (1/m) ||Omega X'u||^2 / (tr(Omega)/m)^2

are returned instead.

Row-deletion CV (the single-parameter baseline) has no such shortcut: each
held-out row triggers a full multi-component refit.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg

from .errors import (
    DegenerateLeverage,
    DimensionError,
    DimensionMismatch,
    FPCAError,
    NegativeAlpha,
    SingularReducedSystem,
    ZeroScores,
)
from .grid_penalty import PenaltyOperator

log = logging.getLogger(__name__)

LEVERAGE_FLOOR = 1e-12
#: scores within this relative distance of the minimum count as ties
TIE_RTOL = 1e-12


class Criterion(str, enum.Enum):
    CV = "cv"
    GCV = "gcv"
    ROW_CV = "row_cv"


def default_alpha_grid(i_min: int = -5, i_max: int = 25, base: float = 1.5) -> np.ndarray:
    """``{0} U {base**i : i_min <= i <= i_max}``, ascending."""
    return np.concatenate([[0.0], base ** np.arange(i_min, i_max + 1, dtype=float)])


def as_alpha_grid(values) -> np.ndarray:
    a = np.asarray(values, dtype=float).ravel()
    if a.size == 0:
        raise ValueError("alpha grid is empty")
    if np.any(~np.isfinite(a)) or np.any(a < 0):
        raise NegativeAlpha("alpha grid values must be finite and nonnegative")
    a = np.unique(a)  # sorted, distinct
    a.setflags(write=False)
    return a


@dataclass(eq=False)
class SelectionTrace:
    alphas: np.ndarray
    scores: np.ndarray
    chosen_index: int
    criterion: Criterion
    failed: np.ndarray = field(default=None)

    @property
    def alpha(self) -> float:
        return float(self.alphas[self.chosen_index])

    def to_dict(self) -> dict:
        return {
            "criterion": self.criterion.value,
            "alphas": [float(a) for a in self.alphas],
            "scores": [float(s) for s in self.scores],
            "failed": [bool(f) for f in self.failed],
            "chosen_index": int(self.chosen_index),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SelectionTrace":
        return cls(
            alphas=np.asarray(d["alphas"], dtype=float),
            scores=np.asarray(d["scores"], dtype=float),
            chosen_index=int(d["chosen_index"]),
            criterion=Criterion(d["criterion"]),
            failed=np.asarray(d.get("failed", [False] * len(d["alphas"])), dtype=bool),
        )


def argmin_ties_low(scores: np.ndarray) -> int:
    """Index of the minimum; near-ties resolve to the lowest index (smallest alpha)."""
    scores = np.asarray(scores, dtype=float)
    if not np.any(np.isfinite(scores)):
        raise FPCAError("criterion failed at every grid point")
    best = np.min(scores)
    return int(np.flatnonzero(scores <= best + TIE_RTOL * abs(best))[0])


class _Projected:
    """``X'u`` and its coordinates in the penalty eigenbasis."""

    def __init__(self, X, u, penalty: PenaltyOperator):
        X = np.asarray(X, dtype=float)
        u = np.asarray(u, dtype=float).ravel()
        if X.ndim != 2 or X.shape != (u.shape[0], penalty.m):
            raise DimensionMismatch(
                f"X{np.shape(X)} incompatible with u({u.shape[0]}) and m={penalty.m}"
            )
        if not np.any(u):
            raise ZeroScores("scores vector u is zero")
        self.penalty = penalty
        self.xtu = X.T @ u
        self.coef = penalty.eigvecs.T @ self.xtu
        self.gamma_sq = penalty.eigvecs**2

    def cv(self, alpha: float) -> float:
        p = self.penalty
        m = p.m
        if alpha == 0:
            num = p.omega @ self.xtu
            return float(np.mean((num / np.diag(p.omega)) ** 2))
        shrink = alpha * p.eigvals / (1.0 + alpha * p.eigvals)
        resid = p.eigvecs @ (shrink * self.coef)
        lev = self.gamma_sq @ shrink  # 1 - S_jj, without cancellation
        if np.min(lev) <= LEVERAGE_FLOOR:
            raise DegenerateLeverage(
                f"1 - S_jj = {np.min(lev):.3g} at alpha={alpha:g}; smoother saturated"
            )
        return float(np.sum((resid / lev) ** 2) / m)

    def gcv(self, alpha: float) -> float:
        p = self.penalty
        m = p.m
        if alpha == 0:
            num = np.sum((p.eigvals * self.coef) ** 2) / m
            den = (np.sum(p.eigvals) / m) ** 2
            return float(num / den)
        shrink = alpha * p.eigvals / (1.0 + alpha * p.eigvals)
        num = np.sum((shrink * self.coef) ** 2) / m
        den = (np.sum(shrink) / m) ** 2
        return float(num / den)


def _check_alpha(alpha):
    if not alpha >= 0:
        raise NegativeAlpha(f"alpha must be nonnegative, got {alpha!r}")


def cv_score(X, u, penalty: PenaltyOperator, alpha: float) -> float:
    """Leave-one-column-out CV score for the current scores ``u``."""
    _check_alpha(alpha)
    return _Projected(X, u, penalty).cv(alpha)


def gcv_score(X, u, penalty: PenaltyOperator, alpha: float) -> float:
    _check_alpha(alpha)
    return _Projected(X, u, penalty).gcv(alpha)


def cv_oracle(X, u, penalty: PenaltyOperator, alpha: float) -> float:
    """Brute-force column-deletion CV by explicit ridge refits.

    For every column ``j`` the penalized least-squares problem in ``v`` is
    re-solved with column ``j`` of ``X`` removed, the held-out column is
    predicted by ``u * v_j``, and the part of the prediction error that does
    not depend on ``alpha`` (``x_j'x_j - (x_j'u)^2/||u||^2``) is subtracted.
    The average over columns equals ``cv_score / ||u||^2``.
    """
    if not alpha > 0:
        raise NegativeAlpha("the column-deletion oracle needs alpha > 0")
    X = np.asarray(X, dtype=float)
    u = np.asarray(u, dtype=float).ravel()
    if X.shape != (u.shape[0], penalty.m):
        raise DimensionMismatch("X, u and penalty dimensions disagree")
    uu = u @ u
    if uu == 0:
        raise ZeroScores("scores vector u is zero")
    m = penalty.m
    xtu = X.T @ u
    total = 0.0
    for j in range(m):
        keep = np.ones(m)
        keep[j] = 0.0
        lhs = uu * (np.diag(keep) + alpha * penalty.omega)
        rhs = keep * xtu
        try:
            v = linalg.solve(lhs, rhs, assume_a="pos")
        except linalg.LinAlgError as exc:
            raise SingularReducedSystem(f"reduced system for column {j} is singular") from exc
        xj = X[:, j]
        err = np.sum((u * v[j] - xj) ** 2)
        total += err - (xj @ xj - xtu[j] ** 2 / uu)
    return total / m


def select_alpha(X, u, penalty: PenaltyOperator, grid=None, criterion=Criterion.CV) -> SelectionTrace:
    """Evaluate ``criterion`` over ``grid`` and pick its minimizer.

    A grid point whose score cannot be computed is recorded as ``+inf`` and
    flagged in ``failed``; it never aborts the search.
    """
    alphas = as_alpha_grid(default_alpha_grid() if grid is None else grid)
    criterion = Criterion(criterion)
    if criterion is Criterion.ROW_CV:
        raise ValueError("use row_cv_curve for row-deletion CV")
    proj = _Projected(X, u, penalty)
    score_fn = proj.cv if criterion is Criterion.CV else proj.gcv

    scores = np.empty(alphas.shape[0])
    failed = np.zeros(alphas.shape[0], dtype=bool)
    for k, a in enumerate(alphas):
        try:
            s = score_fn(float(a))
        except FPCAError as exc:
            log.debug("score failed at alpha=%g: %s", a, exc)
            s = np.inf
        if not np.isfinite(s):
            s, failed[k] = np.inf, True
        scores[k] = s
    return SelectionTrace(
        alphas=alphas,
        scores=scores,
        chosen_index=argmin_ties_low(scores),
        criterion=criterion,
        failed=failed,
    )


# ---------------------------------------------------------------------------
# row-deletion CV


def _top_half_smoothed(gram: np.ndarray, d: np.ndarray, K: int) -> np.ndarray:
    """Top-``K`` loadings in eigen-coordinates (columns, unit norm) for shrink factors ``d``.

    ``gram`` is ``G'G`` for ``G = X Gamma``; the right singular vectors of
    ``G diag(d)`` are the leading eigenvectors of ``diag(d) G'G diag(d)``.
    """
    m = gram.shape[0]
    a = d[:, None] * gram * d[None, :]
    _, vecs = linalg.eigh(a, subset_by_index=[m - K, m - 1])
    b = d[:, None] * vecs[:, ::-1]
    return b / np.linalg.norm(b, axis=0)


def _projection_residual(g: np.ndarray, b: np.ndarray) -> float:
    q, _ = np.linalg.qr(b)
    c = q.T @ g
    return max(float(g @ g - c @ c), 0.0)


def row_cv_curve(X, penalty: PenaltyOperator, alphas: Sequence[float], K: int) -> np.ndarray:
    """Row-deletion CV scores at every alpha in ``alphas``.

    For each row ``i`` the ``K`` single-parameter components are refitted on
    ``X`` without row ``i``, and the held-out row is scored by its squared
    distance to the span of the refitted loadings.  Returns the average over
    rows for each alpha.
    """
    X = np.asarray(X, dtype=float)
    n, m = X.shape
    if m != penalty.m:
        raise DimensionMismatch(f"X has {m} columns, penalty grid has {penalty.m}")
    if n < 2:
        raise DimensionError("row-deletion CV needs at least 2 rows")
    if not 1 <= K <= min(n - 1, m):
        raise DimensionError(f"K={K} must lie in [1, min(n-1, m)] = [1, {min(n - 1, m)}]")
    alphas = np.asarray(alphas, dtype=float).ravel()
    if np.any(alphas < 0):
        raise NegativeAlpha("alpha values must be nonnegative")

    G = X @ penalty.eigvecs
    gram = G.T @ G
    shrink = [np.sqrt(penalty.shrink(float(a))) for a in alphas]
    out = np.zeros(alphas.shape[0])
    for i in range(n):
        gi = G[i]
        gram_i = gram - np.outer(gi, gi)
        for k, d in enumerate(shrink):
            out[k] += _projection_residual(gi, _top_half_smoothed(gram_i, d, K))
    return out / n


def row_cv_score(X, penalty: PenaltyOperator, alpha: float, K: int) -> float:
    return float(row_cv_curve(X, penalty, [alpha], K)[0])


def select_alpha_rows(X, penalty: PenaltyOperator, grid, K: int) -> SelectionTrace:
    alphas = as_alpha_grid(default_alpha_grid() if grid is None else grid)
    scores = row_cv_curve(X, penalty, alphas, K)
    failed = ~np.isfinite(scores)
    scores = np.where(failed, np.inf, scores)
    return SelectionTrace(
        alphas=alphas,
        scores=scores,
        chosen_index=argmin_ties_low(scores),
        criterion=Criterion.ROW_CV,
        failed=failed,
    )
