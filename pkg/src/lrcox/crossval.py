"""K-fold selection of the (rows, rank) bounds by held-out linear predictors.

Subjects are partitioned into folds within each population. For every fold
the model is fit on the complement, the held-out subjects' linear
predictors are computed from that fold's estimate, and once every subject
has a predictor the grid cell is scored with

    sum_j w_j sum_i status_ji * [phi_ji - log sum_{k in R_ji} exp(phi_jk)],

where the risk sets R_ji are those of the full population, never rebuilt
per fold. The selected cell maximizes the score, with ties broken toward
smaller row bound and then smaller rank.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .coxph import (
    Population,
    SurvivalDataset,
    build_dataset,
    population_loglik,
)
from .errors import ConfigError, DataError, NumericalError
from .linalg import Constraints
from .rng import substream
from .solver import FitConfig, _fit_from, fit_path

__all__ = [
    "CVConfig",
    "CVResult",
    "assign_folds",
    "cv_score",
    "resolve_weights",
    "select",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CVConfig:
    folds: int
    s_grid: tuple[int, ...]
    r_grid: tuple[int, ...]
    weights: str | Sequence[float] = "inverse-size"
    seed: int = 0

    def validate(self, data: SurvivalDataset) -> None:
        problems = []
        if self.folds < 2:
            problems.append(f"folds={self.folds} must be at least 2")
        if self.folds > min(data.sizes):
            problems.append(
                f"folds={self.folds} exceeds the smallest population size "
                f"{min(data.sizes)}"
            )
        if not self.s_grid or not self.r_grid:
            problems.append("s_grid and r_grid must be nonempty")
        for s in self.s_grid:
            if not 1 <= s <= data.p:
                problems.append(f"s={s} outside [1, {data.p}]")
        bound = min(data.p, data.n_populations)
        for r in self.r_grid:
            if not 1 <= r <= bound:
                problems.append(f"r={r} outside [1, {bound}]")
        if isinstance(self.weights, str):
            if self.weights not in ("uniform", "inverse-size"):
                problems.append(f"weights={self.weights!r} unknown")
        else:
            ws = list(self.weights)
            if len(ws) != data.n_populations or any(w <= 0 for w in ws):
                problems.append("explicit weights must be positive, one per population")
        if problems:
            raise ConfigError("; ".join(problems))


@dataclass(frozen=True)
class FoldDiagnostics:
    """Instrumentation retained so fold exclusivity can be audited after the
    fact: the training indices used by every fold's fit, per population."""

    training_indices: tuple[tuple[tuple[int, ...], ...], ...]  # [fold][population]
    cell_terminations: dict[tuple[int, int, int], str]  # (fold, s, r) -> reason


@dataclass(frozen=True)
class CVResult:
    scores: np.ndarray  # (len(s_grid), len(r_grid))
    selected: tuple[int, int]
    s_grid: tuple[int, ...]
    r_grid: tuple[int, ...]
    fold_assignments: tuple[np.ndarray, ...]
    failed_cells: tuple[tuple[int, int, str], ...]
    diagnostics: FoldDiagnostics


def resolve_weights(
    data: SurvivalDataset, weights: str | Sequence[float]
) -> np.ndarray:
    if isinstance(weights, str):
        if weights == "uniform":
            return np.ones(data.n_populations)
        if weights == "inverse-size":
            return 1.0 / np.asarray(data.sizes, dtype=float)
        raise ConfigError(f"weights={weights!r} unknown")
    ws = np.asarray(list(weights), dtype=float)
    if ws.shape != (data.n_populations,) or np.any(ws <= 0):
        raise ConfigError("explicit weights must be positive, one per population")
    return ws


def assign_folds(
    data: SurvivalDataset, folds: int, seed: int
) -> tuple[np.ndarray, ...]:
    """Per-population fold labels: near-equal sizes, complement keeps >= 1 event.

    Each population draws from its own seeded substream, so assignments are
    reproducible and independent across populations. If some fold's
    complement would contain no events the permutation is redrawn from the
    same stream, up to 100 attempts.
    """
    if folds < 2:
        raise ConfigError(f"folds={folds} must be at least 2")
    if folds > min(data.sizes):
        raise ConfigError(f"folds={folds} exceeds the smallest population")
    labels = []
    for j, pop in enumerate(data.populations):
        rng = substream(seed, (101, j))
        total_events = pop.n_events
        assignment = None
        for _ in range(100):
            perm = rng.permutation(pop.n)
            candidate = np.empty(pop.n, dtype=int)
            for k, part in enumerate(np.array_split(perm, folds)):
                candidate[part] = k
            fold_events = np.bincount(
                candidate, weights=pop.status.astype(float), minlength=folds
            )
            if np.all(total_events - fold_events >= 1):
                assignment = candidate
                break
        if assignment is None:
            raise DataError(
                f"population {pop.name!r}: could not build {folds} folds whose "
                "complements all retain an event (100 attempts)"
            )
        labels.append(assignment)
    return tuple(labels)


def _subset_population(pop: Population, idx: np.ndarray) -> Population:
    from .coxph import make_population

    return make_population(
        pop.name, pop.times[idx], pop.status[idx], pop.covariates[idx]
    )


def _fold_complement(
    data: SurvivalDataset, fold_labels: Sequence[np.ndarray], k: int
) -> tuple[SurvivalDataset, tuple[tuple[int, ...], ...]]:
    pops = []
    kept: list[tuple[int, ...]] = []
    for pop, labels in zip(data.populations, fold_labels):
        idx = np.flatnonzero(labels != k)
        kept.append(tuple(int(i) for i in idx))
        pops.append((pop.name, pop.times[idx], pop.status[idx], pop.covariates[idx]))
    return build_dataset(pops, data.predictor_names), tuple(kept)


def _score_predictors(
    data: SurvivalDataset, phis: Sequence[np.ndarray], weights: np.ndarray
) -> float:
    total = 0.0
    for pop, phi, w in zip(data.populations, phis, weights):
        total += float(w) * population_loglik(pop, phi, "breslow")
    return total


def cv_score(
    data: SurvivalDataset,
    fold_labels: Sequence[np.ndarray],
    s: int,
    r: int,
    fit_config: FitConfig,
    weights: str | Sequence[float] = "inverse-size",
) -> float:
    """Held-out linear-predictor score of a single (rows, rank) cell."""
    ws = resolve_weights(data, weights)
    folds = int(max(labels.max() for labels in fold_labels)) + 1
    cell_config = replace(fit_config, constraints=Constraints(max_rank=r, max_rows=s))
    phis = [np.full(pop.n, np.nan) for pop in data.populations]
    for k in range(folds):
        train, kept = _fold_complement(data, fold_labels, k)
        for pop_kept, labels in zip(kept, fold_labels):
            held = np.flatnonzero(labels == k)
            if np.intersect1d(np.asarray(pop_kept), held).size:
                raise AssertionError("fold overlap detected")
        result = _fit_from(
            train, cell_config, np.zeros((data.p, data.n_populations))
        )
        for j, (pop, labels) in enumerate(zip(data.populations, fold_labels)):
            held = labels == k
            phis[j][held] = pop.covariates[held] @ result.estimate[:, j]
    for phi in phis:
        if np.isnan(phi).any():
            raise AssertionError("some subjects never received a held-out predictor")
    return _score_predictors(data, phis, ws)


def select(
    data: SurvivalDataset, cv_config: CVConfig, fit_config: FitConfig
) -> CVResult:
    """Score every grid cell with warm-started fits and pick the maximizer."""
    cv_config.validate(data)
    ws = resolve_weights(data, cv_config.weights)
    fold_labels = assign_folds(data, cv_config.folds, cv_config.seed)

    s_grid = tuple(cv_config.s_grid)
    r_grid = tuple(cv_config.r_grid)
    r_desc = tuple(sorted(set(r_grid), reverse=True))
    cells = [(s, r) for s in s_grid for r in r_grid]
    phis = {
        cell: [np.full(pop.n, np.nan) for pop in data.populations] for cell in cells
    }
    failed: dict[tuple[int, int], str] = {}
    training_record: list[tuple[tuple[int, ...], ...]] = []
    terminations: dict[tuple[int, int, int], str] = {}

    for k in range(cv_config.folds):
        train, kept = _fold_complement(data, fold_labels, k)
        training_record.append(kept)
        results = fit_path(train, fit_config, list(s_grid), list(r_desc))
        for (s, r) in cells:
            result = results.get((s, r))
            if result is None:
                failed.setdefault((s, r), f"fit failed in fold {k}")
                continue
            terminations[(k, s, r)] = result.termination
            for j, (pop, labels) in enumerate(zip(data.populations, fold_labels)):
                held = labels == k
                phis[(s, r)][j][held] = pop.covariates[held] @ result.estimate[:, j]

    scores = np.full((len(s_grid), len(r_grid)), -np.inf)
    for si, s in enumerate(s_grid):
        for ri, r in enumerate(r_grid):
            cell = (s, r)
            if cell in failed:
                continue
            if any(np.isnan(phi).any() for phi in phis[cell]):
                failed[cell] = "incomplete held-out predictors"
                continue
            try:
                scores[si, ri] = _score_predictors(data, phis[cell], ws)
            except (ValueError, NumericalError) as exc:
                failed[cell] = str(exc)

    if not np.isfinite(scores).any():
        raise NumericalError("every cross-validation cell failed")

    best: tuple[int, int] | None = None
    best_score = -np.inf
    for s in sorted(set(s_grid)):
        for r in sorted(set(r_grid)):
            si, ri = s_grid.index(s), r_grid.index(r)
            if scores[si, ri] > best_score:
                best_score = scores[si, ri]
                best = (s, r)
    assert best is not None

    return CVResult(
        scores=scores,
        selected=best,
        s_grid=s_grid,
        r_grid=r_grid,
        fold_assignments=fold_labels,
        failed_cells=tuple(
            (s, r, message) for (s, r), message in sorted(failed.items())
        ),
        diagnostics=FoldDiagnostics(tuple(training_record), terminations),
    )
