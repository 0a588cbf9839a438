"""Monte-Carlo comparison of the two multi-component strategies.

Data follow a two-factor model on an equispaced grid::

    X_ij = u_i1 v1(t_j) + u_i2 v2(t_j) + eps_ij,
    v1 ~ t + sin(pi t),  v2 ~ cos(3 pi t)  (each scaled to unit norm),
    u_i1 ~ N(0, sigma1^2), u_i2 ~ N(0, sigma2^2), eps_ij ~ N(0, sigma^2).

Each replicate is fitted with ``mpdc`` (K=2, column CV) and ``spdr`` (K=2,
row CV), and the loading MSEs are compared through their ratio
``spdr / mpdc``.

Replicate ``i`` draws from ``numpy.random.default_rng(SeedSequence([base_seed, i]))``
(PCG64), in the order: factor-1 scores, factor-2 scores, noise matrix.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .errors import AllZeroDiffs, DimensionMismatch, FPCAError, StudyFailed
from .fpca import center_columns, fit_mpdc, fit_spdr, uncentered
from .grid_penalty import TimeGrid, build_grid, build_penalty
from .selection import Criterion, default_alpha_grid

log = logging.getLogger(__name__)

WORKERS_ENV = "PENFPCA_WORKERS"
MAX_FAILURE_FRACTION = 0.05
MSE_DISPLAY_FACTOR = 1e4


@dataclass(frozen=True)
class SimConfig:
    n: int = 101
    m: int = 101
    sigma1: float = 20.0
    sigma2: float = 10.0
    sigma: float = 4.0
    t_min: float = -1.0
    t_max: float = 1.0
    replicates: int = 100
    base_seed: int = 0
    mean_curve: Optional[tuple] = None
    alpha_grid: Optional[tuple] = None

    def __post_init__(self):
        if self.n < 3 or self.m < 3:
            raise ValueError("n and m must be at least 3")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if not self.t_min < self.t_max:
            raise ValueError("t_min must be below t_max")
        if not (self.sigma1 > 0 and self.sigma2 > 0):
            raise ValueError("factor standard deviations must be positive")
        if not self.sigma >= 0:
            raise ValueError("noise standard deviation must be nonnegative")
        if self.base_seed < 0:
            raise ValueError("base_seed must be nonnegative")
        if self.mean_curve is not None and len(self.mean_curve) != self.m:
            raise ValueError("mean_curve must have length m")
        if self.alpha_grid is not None and (
            len(self.alpha_grid) == 0 or min(self.alpha_grid) < 0
        ):
            raise ValueError("alpha_grid must be a nonempty set of nonnegative values")

    def alphas(self) -> np.ndarray:
        if self.alpha_grid is None:
            return default_alpha_grid()
        return np.asarray(self.alpha_grid, dtype=float)

    def times(self) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, self.m)


def default_mean_curve(times) -> tuple:
    """``5 sin(2 pi t)`` on the grid; the mean used for the centering variant."""
    return tuple(float(x) for x in 5.0 * np.sin(2.0 * np.pi * np.asarray(times)))


def true_components(grid: TimeGrid):
    t = grid.times
    v1 = t + np.sin(np.pi * t)
    v2 = np.cos(3.0 * np.pi * t)
    return v1 / np.linalg.norm(v1), v2 / np.linalg.norm(v2)


def replicate_rng(base_seed: int, replicate_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([base_seed, replicate_index]))


def generate(cfg: SimConfig, replicate_index: int, grid: Optional[TimeGrid] = None) -> np.ndarray:
    grid = grid or build_grid(cfg.times())
    v1, v2 = true_components(grid)
    rng = replicate_rng(cfg.base_seed, replicate_index)
    u1 = rng.normal(0.0, cfg.sigma1, size=cfg.n)
    u2 = rng.normal(0.0, cfg.sigma2, size=cfg.n)
    eps = rng.normal(0.0, cfg.sigma, size=(cfg.n, cfg.m))
    X = np.outer(u1, v1) + np.outer(u2, v2) + eps
    if cfg.mean_curve is not None:
        X = X + np.asarray(cfg.mean_curve, dtype=float)
    return X


def component_mse(estimated, truth) -> float:
    """Sign-aligned mean squared difference over the grid points."""
    est = np.asarray(estimated, dtype=float).ravel()
    tru = np.asarray(truth, dtype=float).ravel()
    if est.shape != tru.shape:
        raise DimensionMismatch(f"lengths differ: {est.shape[0]} vs {tru.shape[0]}")
    if est @ tru < 0:
        est = -est
    return float(np.mean((est - tru) ** 2))


def sign_test(diffs) -> float:
    """Two-sided exact sign test of a zero median; zero differences are dropped."""
    d = np.asarray(diffs, dtype=float).ravel()
    d = d[d != 0]
    if d.size == 0:
        raise AllZeroDiffs("all differences are zero")
    n = d.size
    pos = int(np.sum(d > 0))
    tail = min(stats.binom.cdf(pos, n, 0.5), stats.binom.sf(pos - 1, n, 0.5))
    return float(min(1.0, 2.0 * tail))


@dataclass
class ReplicateResult:
    index: int
    mse_mpdc: tuple
    mse_spdr: tuple
    alphas_mpdc: tuple
    alpha_spdr: float


@dataclass
class SimulationReport:
    config: dict
    per_replicate: list
    ratio_summary: dict
    sign_test_p: dict
    failures: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "config": self.config,
            "per_replicate": [asdict(r) for r in self.per_replicate],
            "ratio_summary": self.ratio_summary,
            "sign_test_p": self.sign_test_p,
            "failures": self.failures,
        }

    def table_rows(self) -> list:
        """Rows of ``(label, Q1, Median, Mean, Q3)``, one per component."""
        return [
            (f"FPC{k}", s["q1"], s["median"], s["mean"], s["q3"])
            for k, s in ((k, self.ratio_summary[f"fpc{k}"]) for k in (1, 2))
        ]


def summarize_ratios(per_replicate: list):
    """Quartiles, mean and sign-test p-value of the spdr/mpdc MSE ratios."""
    summary, pvals = {}, {}
    for k in range(2):
        mp = np.array([r.mse_mpdc[k] for r in per_replicate])
        sp = np.array([r.mse_spdr[k] for r in per_replicate])
        ratio = sp / mp
        q1, med, q3 = np.percentile(ratio, [25, 50, 75])
        summary[f"fpc{k + 1}"] = {
            "q1": float(q1),
            "median": float(med),
            "mean": float(np.mean(ratio)),
            "q3": float(q3),
        }
        try:
            pvals[f"fpc{k + 1}"] = sign_test(sp - mp)
        except AllZeroDiffs:
            pvals[f"fpc{k + 1}"] = 1.0
    return summary, pvals


def run_replicate(cfg: SimConfig, index: int) -> ReplicateResult:
    grid = build_grid(cfg.times())
    penalty = build_penalty(grid)
    v1, v2 = true_components(grid)
    X = generate(cfg, index, grid)
    data = center_columns(X, grid) if cfg.mean_curve is not None else uncentered(X, grid)
    alphas = cfg.alphas()

    mp = fit_mpdc(data, penalty, 2, alphas, Criterion.CV)
    sp = fit_spdr(data, penalty, 2, alphas)
    truth = (v1, v2)
    return ReplicateResult(
        index=index,
        mse_mpdc=tuple(component_mse(c.loading, t) for c, t in zip(mp.components, truth)),
        mse_spdr=tuple(component_mse(c.loading, t) for c, t in zip(sp.components, truth)),
        alphas_mpdc=tuple(mp.alphas),
        alpha_spdr=sp.components[0].alpha,
    )


def _safe_replicate(args):
    cfg, index = args
    try:
        return run_replicate(cfg, index)
    except FPCAError as exc:
        return (index, f"{type(exc).__name__}: {exc}")


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_study(cfg: SimConfig, workers: Optional[int] = None) -> SimulationReport:
    """Run every replicate and aggregate.

    Replicates are independent and seeded individually, so the report does
    not depend on ``workers``.  A replicate whose fit raises is excluded
    and listed in ``failures``; more than 5% failures abort the study.
    """
    workers = workers or default_workers()
    jobs = [(cfg, i) for i in range(cfg.replicates)]
    if workers > 1 and cfg.replicates > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            outcomes = list(ex.map(_safe_replicate, jobs))
    else:
        outcomes = [_safe_replicate(j) for j in jobs]

    results = [o for o in outcomes if isinstance(o, ReplicateResult)]
    failures = [{"index": o[0], "error": o[1]} for o in outcomes if not isinstance(o, ReplicateResult)]
    if len(failures) > MAX_FAILURE_FRACTION * cfg.replicates:
        raise StudyFailed(f"{len(failures)} of {cfg.replicates} replicates failed")
    for f in failures:
        log.warning("replicate %d excluded: %s", f["index"], f["error"])

    summary, pvals = summarize_ratios(results)
    config = asdict(cfg)
    for key in ("mean_curve", "alpha_grid"):
        if config[key] is not None:
            config[key] = list(config[key])
    return SimulationReport(
        config=config,
        per_replicate=results,
        ratio_summary=summary,
        sign_test_p=pvals,
        failures=failures,
    )
