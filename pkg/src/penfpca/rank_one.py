"""Penalized rank-one approximation of a data matrix.

One component minimizes

    ||X - u v'||_F^2 + alpha * (u'u) * (v' Omega v)

whose two terms scale alike under ``X -> cX``, so the optimal ``v`` does
not depend on the measurement scale.  Two solvers are provided:

* :func:`fit_power` alternates ``u <- Xv``, ``v <- S(alpha) X'u``,
  ``v <- v/||v||`` (a generalized power iteration);
* :func:`fit_svd_route` takes the top singular pair of the half-smoothed
  matrix ``X S(alpha)^{1/2}`` and maps it back, which needs no iteration.

Both return loadings with unit Euclidean norm, scores ``u = Xv`` and the
sign fixed so that the largest-magnitude loading entry is positive.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, NegativeAlpha, ZeroMatrix
from .grid_penalty import PenaltyOperator, apply_smoother

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 500
#: stop the power loop when the step size has not shrunk for this many iterations
STALL_WINDOW = 50


@dataclass(frozen=True)
class FitConfig:
    """Power-iteration controls.  ``init=None`` starts from the top right singular vector."""

    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    init: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass(eq=False)
class ComponentFit:
    scores: np.ndarray
    loading: np.ndarray
    alpha: float
    objective: float
    iterations: int = 0
    converged: bool = True
    history: list = field(default_factory=list, repr=False)
    selection: Optional[object] = None  # SelectionTrace, set by fpca


def sign_normalize(v: np.ndarray) -> np.ndarray:
    """Flip ``v`` so that its largest-magnitude entry is positive."""
    k = int(np.argmax(np.abs(v)))
    return -v if v[k] < 0 else v


def _check_inputs(X, penalty: PenaltyOperator, alpha: float) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch("X must be a 2-d array")
    if X.shape[1] != penalty.m:
        raise DimensionMismatch(
            f"X has {X.shape[1]} columns but the penalty grid has {penalty.m} points"
        )
    if not alpha >= 0:
        raise NegativeAlpha(f"alpha must be nonnegative, got {alpha!r}")
    if not np.any(X):
        raise ZeroMatrix("X is identically zero; no component is defined")
    return X


def penalized_objective(X, u, v, alpha: float, penalty: PenaltyOperator) -> float:
    X = np.asarray(X, dtype=float)
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if X.shape != (u.shape[0], v.shape[0]) or v.shape[0] != penalty.m:
        raise DimensionMismatch(
            f"shapes X{X.shape}, u({u.shape[0]}), v({v.shape[0]}), penalty m={penalty.m}"
        )
    if not alpha >= 0:
        raise NegativeAlpha(f"alpha must be nonnegative, got {alpha!r}")
    resid = X - np.outer(u, v)
    return float(np.sum(resid * resid) + alpha * (u @ u) * (v @ penalty.omega @ v))


def optimal_scores(X, v, alpha: float, penalty: PenaltyOperator) -> np.ndarray:
    """Minimizing ``u`` for fixed ``v``: ``Xv / v'(I + alpha Omega)v``."""
    v = np.asarray(v, dtype=float)
    return np.asarray(X, dtype=float) @ v / (v @ v + alpha * (v @ penalty.omega @ v))


def profile_objective(X, v, alpha: float, penalty: PenaltyOperator) -> float:
    """Objective at ``v`` with ``u`` already minimized out."""
    return penalized_objective(X, optimal_scores(X, v, alpha, penalty), v, alpha, penalty)


def _top_right_singular(X: np.ndarray) -> np.ndarray:
    _, _, vt = np.linalg.svd(X, full_matrices=False)
    return vt[0]


def fit_power(X, penalty: PenaltyOperator, alpha: float, cfg: FitConfig = FitConfig()) -> ComponentFit:
    """Alternating minimization for one smoothed component.

    ``history`` records the profile objective after every sweep; it is
    non-increasing.  If ``max_iter`` is exhausted, or the step size fails to
    shrink for ``STALL_WINDOW`` consecutive sweeps, the current iterate is
    returned with ``converged=False``.
    """
    X = _check_inputs(X, penalty, alpha)
    if cfg.init is None:
        v = _top_right_singular(X)
    else:
        v = np.asarray(cfg.init, dtype=float).ravel()
        if v.shape[0] != penalty.m:
            raise DimensionMismatch("initial loading has the wrong length")
    v = v / np.linalg.norm(v)

    history = []
    converged = False
    stalled = 0
    prev_step = np.inf
    it = 0
    for it in range(1, cfg.max_iter + 1):
        u = X @ v
        v_new = apply_smoother(penalty, alpha, X.T @ u)
        nrm = np.linalg.norm(v_new)
        if nrm == 0:
            raise ZeroMatrix("smoothed loading collapsed to zero")
        v_new = v_new / nrm
        # compare up to sign so an overall flip is not mistaken for movement
        if v_new @ v < 0:
            step = np.linalg.norm(v_new + v)
        else:
            step = np.linalg.norm(v_new - v)
        v = v_new
        history.append(profile_objective(X, v, alpha, penalty))
        if step < cfg.tol:
            converged = True
            break
        stalled = stalled + 1 if step >= prev_step else 0
        prev_step = step
        if stalled >= STALL_WINDOW:
            log.warning("power iteration stalled after %d sweeps (step %.3g)", it, step)
            break
    else:
        log.warning("power iteration hit max_iter=%d without converging", cfg.max_iter)

    v = sign_normalize(v)
    return ComponentFit(
        scores=X @ v,
        loading=v,
        alpha=float(alpha),
        objective=profile_objective(X, v, alpha, penalty),
        iterations=it,
        converged=converged,
        history=history,
    )


def half_smoothed_basis(penalty: PenaltyOperator, alpha: float) -> np.ndarray:
    """``sqrt(shrink)`` factors of ``S(alpha)^{1/2}`` in the penalty eigenbasis."""
    return np.sqrt(penalty.shrink(alpha))


def fit_svd_route(X, penalty: PenaltyOperator, alpha: float, XG: Optional[np.ndarray] = None) -> ComponentFit:
    """Closed-form fit through the top singular pair of ``X Gamma D``.

    ``XG`` (``X @ penalty.eigvecs``) may be passed in to reuse it across a
    grid of ``alpha`` values.
    """
    X = _check_inputs(X, penalty, alpha)
    if XG is None:
        XG = X @ penalty.eigvecs
    d = half_smoothed_basis(penalty, alpha)
    _, _, vt = np.linalg.svd(XG * d, full_matrices=False)
    v = penalty.eigvecs @ (d * vt[0])
    v = sign_normalize(v / np.linalg.norm(v))
    return ComponentFit(
        scores=X @ v,
        loading=v,
        alpha=float(alpha),
        objective=profile_objective(X, v, alpha, penalty),
        iterations=0,
        converged=True,
    )
