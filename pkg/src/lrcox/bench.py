"""Benchmark protocol: simulate, fit every requested method, evaluate.

Per-population tuning for the separate estimators picks the penalty weight
minimizing held-out deviance (-2 times the held-out partial log-likelihood)
over a 50-point log-spaced grid running from the zero-crossing weight down
four decades. The projected variants additionally pick the rank minimizing
total validation deviance. The convex relaxation is tuned the same way on a
7 x 7 log-spaced grid over both of its weights.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .baselines import (
    ConvexConfig,
    SeparateConfig,
    fit_convex,
    fit_separate,
    project_separate,
)
from .coxph import (
    Population,
    SurvivalDataset,
    population_derivatives,
    population_loglik,
)
from .crossval import CVConfig, select
from .errors import ConfigError
from .linalg import Constraints
from .metrics import (
    breslow_baseline,
    brier_score,
    c_index_uncensored,
    model_error,
    quantile_lower,
)
from .simulate import SimulationSpec, generate_benchmark
from .solver import FitConfig, fit

__all__ = [
    "BENCHMARK_METHODS",
    "MethodSettings",
    "evaluate_estimate",
    "fit_method",
    "run_benchmark",
    "tune_convex",
    "tune_separate",
    "validation_deviance",
    "worker_count",
]

logger = logging.getLogger(__name__)

BENCHMARK_METHODS = (
    "lrcox",
    "convex",
    "sep-ridge",
    "sep-lasso",
    "sep-enet",
    "proj-sep-ridge",
    "proj-sep-lasso",
)

METRIC_COLUMNS = ("model_error", "c_index", "brier_q25", "brier_q50", "brier_q75")

_GRID_POINTS = 50
_GRID_DECADES = 4.0
_CONVEX_GRID = 7


def worker_count() -> int:
    raw = os.environ.get("LRCOX_WORKERS", "1")
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"LRCOX_WORKERS={raw!r} is not an integer") from None
    return max(1, value)


def validation_deviance(pop: Population, b: np.ndarray) -> float:
    return -2.0 * population_loglik(pop, pop.covariates @ np.asarray(b, dtype=float))


def _total_deviance(validation: SurvivalDataset, B: np.ndarray) -> float:
    return sum(
        validation_deviance(pop, B[:, j])
        for j, pop in enumerate(validation.populations)
    )


def _zero_crossing_weight(pop: Population, tie_mode: str) -> float:
    """Smallest l1 weight that keeps the scaled fit at exactly zero."""
    derivs = population_derivatives(pop, np.zeros(pop.n), tie_mode)
    grad0 = pop.covariates.T @ derivs.gradient / pop.n
    return float(np.max(np.abs(grad0)))


def _log_grid(top: float, points: int, decades: float) -> np.ndarray:
    top = max(top, 1e-12)
    return np.geomspace(top, top / 10.0**decades, points)


@dataclass(frozen=True)
class MethodSettings:
    """Per-run knobs for the benchmark methods.

    ``lrcox_rank``/``lrcox_sparsity`` pin the low-rank method's bounds; when
    either is None the truth's (s*, r*) is used ("oracle" tuning) unless a
    CV grid is supplied, in which case the bounds come from cross-validation.
    """

    mu: float = 0.1
    rho0: float = 5.0
    tie_mode: str = "breslow"
    lrcox_rank: int | None = None
    lrcox_sparsity: int | None = None
    proj_rank: int | None = None
    cv_s_grid: tuple[int, ...] | None = None
    cv_r_grid: tuple[int, ...] | None = None
    cv_folds: int = 5
    sep_max_iters: int = 500
    sep_rel_tol: float = 1e-6
    convex_max_iters: int = 1000
    convex_rel_tol: float = 1e-6


def tune_separate(
    train: SurvivalDataset,
    validation: SurvivalDataset,
    penalty: str,
    alpha: float = 0.5,
    tie_mode: str = "breslow",
    max_iters: int = 500,
    rel_tol: float = 1e-7,
) -> tuple[np.ndarray, list[float]]:
    """Per-population penalty weights by held-out deviance, warm-started."""
    B = np.empty((train.p, train.n_populations))
    chosen: list[float] = []
    for j, (pop, pop_val) in enumerate(
        zip(train.populations, validation.populations)
    ):
        lam_max = _zero_crossing_weight(pop, tie_mode)
        if penalty == "elastic-net":
            lam_max = lam_max / alpha
        grid = _log_grid(lam_max, _GRID_POINTS, _GRID_DECADES)
        sub_train = SurvivalDataset((pop,), train.predictor_names)
        sub_val = pop_val
        best_dev = np.inf
        best_b = np.zeros(train.p)
        best_lam = float(grid[0])
        warm: np.ndarray | None = None
        for lam in grid:
            config = SeparateConfig(
                penalty=penalty,
                lambdas=float(lam),
                alpha=alpha,
                max_iters=max_iters,
                rel_tol=rel_tol,
            )
            column = fit_separate(
                sub_train,
                config,
                tie_mode,
                warm_start=None if warm is None else warm[:, None],
            )[:, 0]
            warm = column
            dev = validation_deviance(sub_val, column)
            if dev < best_dev:
                best_dev, best_b, best_lam = dev, column, float(lam)
        B[:, j] = best_b
        chosen.append(best_lam)
    return B, chosen


def tune_projected_rank(
    B: np.ndarray, validation: SurvivalDataset, rank: int | None = None
) -> tuple[np.ndarray, int]:
    """Project onto the deviance-minimizing rank (or a caller-pinned one)."""
    bound = min(B.shape)
    if rank is not None:
        return project_separate(B, rank), rank
    best = None
    best_dev = np.inf
    for r in range(1, bound + 1):
        projected = project_separate(B, r)
        dev = _total_deviance(validation, projected)
        if dev < best_dev:
            best_dev, best = dev, (projected, r)
    assert best is not None
    return best


def tune_convex(
    train: SurvivalDataset,
    validation: SurvivalDataset,
    tie_mode: str = "breslow",
    max_iters: int = 1000,
    rel_tol: float = 1e-6,
) -> tuple[np.ndarray, tuple[float, float]]:
    """Grid search the two convex penalty weights on validation deviance."""
    grad0 = np.empty((train.p, train.n_populations))
    for j, pop in enumerate(train.populations):
        derivs = population_derivatives(pop, np.zeros(pop.n), tie_mode)
        grad0[:, j] = pop.covariates.T @ derivs.gradient
    lam_top = float(np.linalg.svd(grad0, compute_uv=False)[0])
    gam_top = float(np.linalg.norm(grad0, axis=1).max())
    lam_grid = _log_grid(lam_top, _CONVEX_GRID, _GRID_DECADES)
    gam_grid = _log_grid(gam_top, _CONVEX_GRID, _GRID_DECADES)
    best_dev = np.inf
    best: tuple[np.ndarray, tuple[float, float]] | None = None
    for lam in lam_grid:
        for gam in gam_grid:
            config = ConvexConfig(
                lambda_nuc=float(lam),
                gamma_row=float(gam),
                max_iters=max_iters,
                rel_tol=rel_tol,
            )
            result = fit_convex(train, config, tie_mode)
            dev = _total_deviance(validation, result.estimate)
            if dev < best_dev:
                best_dev = dev
                best = (result.estimate, (float(lam), float(gam)))
    assert best is not None
    return best


def fit_method(
    method: str,
    train: SurvivalDataset,
    validation: SurvivalDataset,
    settings: MethodSettings,
    oracle: tuple[int, int] | None = None,
    cache: dict | None = None,
) -> np.ndarray:
    """Fit one benchmark method and return its coefficient matrix.

    ``oracle`` supplies (s*, r*) from the generating truth for the low-rank
    method when no explicit bounds or CV grid are configured. ``cache`` lets
    the projected variants reuse the tuned separate fit they are based on.
    """
    if method not in BENCHMARK_METHODS:
        raise ConfigError(f"method={method!r} not one of {BENCHMARK_METHODS}")
    tie_mode = settings.tie_mode
    if method == "lrcox":
        base = FitConfig(
            mu=settings.mu,
            constraints=Constraints(max_rank=1, max_rows=1),
            rho0=settings.rho0,
            tie_mode=tie_mode,
        )
        if settings.cv_s_grid and settings.cv_r_grid:
            cv = CVConfig(
                folds=settings.cv_folds,
                s_grid=settings.cv_s_grid,
                r_grid=settings.cv_r_grid,
            )
            chosen = select(train, cv, base).selected
        else:
            s = settings.lrcox_sparsity
            r = settings.lrcox_rank
            if s is None or r is None:
                if oracle is None:
                    raise ConfigError(
                        "lrcox needs explicit bounds, a CV grid, or oracle bounds"
                    )
                s = s if s is not None else oracle[0]
                r = r if r is not None else oracle[1]
            chosen = (s, r)
        config = replace(
            base, constraints=Constraints(max_rank=chosen[1], max_rows=chosen[0])
        )
        return fit(train, config).estimate
    if method == "convex":
        return tune_convex(
            train,
            validation,
            tie_mode,
            settings.convex_max_iters,
            settings.convex_rel_tol,
        )[0]
    penalty = {
        "sep-ridge": "ridge",
        "proj-sep-ridge": "ridge",
        "sep-lasso": "lasso",
        "proj-sep-lasso": "lasso",
        "sep-enet": "elastic-net",
    }[method]
    key = ("separate", penalty)
    if cache is not None and key in cache:
        B = cache[key]
    else:
        B, _ = tune_separate(
            train,
            validation,
            penalty,
            alpha=0.5,
            tie_mode=tie_mode,
            max_iters=settings.sep_max_iters,
            rel_tol=settings.sep_rel_tol,
        )
        if cache is not None:
            cache[key] = B
    if method.startswith("proj-"):
        B, _ = tune_projected_rank(B, validation, settings.proj_rank)
    return B


def evaluate_estimate(
    train: SurvivalDataset,
    test: SurvivalDataset,
    B: np.ndarray,
    B_star: np.ndarray | None = None,
    Sigma: np.ndarray | None = None,
) -> dict[str, float]:
    """Model error (when the truth is known), concordance, and Brier scores."""
    out: dict[str, float] = {}
    if B_star is not None and Sigma is not None:
        out["model_error"] = model_error(B, B_star, Sigma)
    cs = []
    briers = {0.25: [], 0.5: [], 0.75: []}
    for j, (pop_train, pop_test) in enumerate(
        zip(train.populations, test.populations)
    ):
        eta = pop_test.covariates @ B[:, j]
        cs.append(c_index_uncensored(pop_test.times, eta))
        baseline = breslow_baseline(pop_train, B[:, j])
        for q in briers:
            t_q = quantile_lower(pop_test.times, q)
            briers[q].append(brier_score(pop_test.times, eta, baseline, t_q))
    out["c_index"] = float(np.mean(cs))
    out["brier_q25"] = float(np.mean(briers[0.25]))
    out["brier_q50"] = float(np.mean(briers[0.5]))
    out["brier_q75"] = float(np.mean(briers[0.75]))
    return out


def _run_one_replication(
    spec: SimulationSpec, methods: Sequence[str], settings: MethodSettings, rep: int
) -> list[dict]:
    rep_spec = replace(spec, seed=spec.seed + rep)
    train, validation, test, truth = generate_benchmark(rep_spec)
    oracle = (len(truth.support), rep_spec.r_star)
    rows = []
    cache: dict = {}
    for method in methods:
        B = fit_method(method, train, validation, settings, oracle, cache)
        metrics = evaluate_estimate(train, test, B, truth.B_star, truth.Sigma)
        rows.append({"replication": rep, "method": method, **metrics})
    return rows


def run_benchmark(
    spec: SimulationSpec,
    methods: Sequence[str],
    replications: int,
    settings: MethodSettings | None = None,
) -> tuple[list[dict], list[dict], int]:
    """All replication rows, summary rows (mean and 2 SE), and failure count.

    Replications use consecutive seeds from ``spec.seed``; failed ones are
    logged and excluded from the summaries.
    """
    settings = settings or MethodSettings()
    for method in methods:
        if method not in BENCHMARK_METHODS:
            raise ConfigError(f"method={method!r} not one of {BENCHMARK_METHODS}")
    workers = worker_count()
    results: list[list[dict] | None] = [None] * replications
    failures = 0

    def run(rep: int) -> list[dict]:
        return _run_one_replication(spec, methods, settings, rep)

    if workers == 1:
        for rep in range(replications):
            try:
                results[rep] = run(rep)
            except Exception as exc:  # noqa: BLE001 - replication isolation
                logger.warning("replication %d failed: %s", rep, exc)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {rep: pool.submit(run, rep) for rep in range(replications)}
            for rep, future in futures.items():
                try:
                    results[rep] = future.result()
                except Exception as exc:  # noqa: BLE001
                    logger.warning("replication %d failed: %s", rep, exc)

    rows: list[dict] = []
    for result in results:
        if result is None:
            failures += 1
        else:
            rows.extend(result)

    summaries: list[dict] = []
    for method in methods:
        values = {
            metric: [row[metric] for row in rows if row["method"] == method and metric in row]
            for metric in METRIC_COLUMNS
        }
        n_reps = max((len(v) for v in values.values()), default=0)
        mean_row: dict = {"replication": "mean", "method": method, "n_reps": n_reps}
        se_row: dict = {"replication": "two_se", "method": method, "n_reps": n_reps}
        for metric, vals in values.items():
            if not vals:
                continue
            arr = np.asarray(vals, dtype=float)
            mean_row[metric] = float(arr.mean())
            se = arr.std(ddof=1) / np.sqrt(len(arr)) if len(arr) > 1 else 0.0
            se_row[metric] = float(2.0 * se)
        summaries.append(mean_row)
        summaries.append(se_row)
    return rows, summaries, failures
