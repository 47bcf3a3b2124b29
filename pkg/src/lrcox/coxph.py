"""Breslow partial log-likelihood for multi-population proportional hazards data.

A dataset holds one (times, status, covariates) triple per population, all
sharing the same predictors. Subjects are sorted by descending time once, at
construction; each maximal run of equal times forms a tie group, so the risk
set of any subject is the prefix of the sorted order ending at its tie
group's last member. Likelihood values and derivatives are then computed in
a single O(n) pass per population, with the log-sum-exp over each risk set
stabilized by subtracting the population maximum of the linear predictor.

Two tie conventions are supported:

* ``"breslow"`` (default): each observed event contributes its linear
  predictor minus one log risk-set sum, so a time with d tied events carries
  total log-term weight d (the standard Breslow approximation).
* ``"tie-weighted"``: each tied event's log term is additionally multiplied
  by the number of events at its time, for total weight d^2 per distinct
  time. This double counts relative to Breslow.

The two modes coincide whenever event times are distinct.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

__all__ = [
    "Population",
    "PopulationDerivatives",
    "SurvivalDataset",
    "TIE_MODES",
    "build_dataset",
    "derivatives_eta",
    "linear_predictors",
    "loglik_linear_predictors",
    "make_population",
    "partial_loglik",
    "penalized_objective",
    "population_derivatives",
    "population_loglik",
]

TIE_MODES = ("breslow", "tie-weighted")


@dataclass(frozen=True)
class Population:
    """One population's observations plus the precomputed risk-set layout.

    ``order`` sorts subjects by descending time (stable, so tied subjects
    keep their original relative order). ``group_start``/``group_last`` give,
    for each sorted position, the first and last position of its tie group.
    ``tie_counts`` holds, per sorted position, the number of observed events
    at that exact time.
    """

    name: str
    times: np.ndarray
    status: np.ndarray
    covariates: np.ndarray
    order: np.ndarray
    group_start: np.ndarray
    group_last: np.ndarray
    tie_counts: np.ndarray

    @property
    def n(self) -> int:
        return int(self.times.shape[0])

    @property
    def n_events(self) -> int:
        return int(self.status.sum())


def make_population(
    name: str, times, status, covariates
) -> Population:
    times = np.asarray(times, dtype=float)
    status = np.asarray(status)
    covariates = np.asarray(covariates, dtype=float)
    if times.ndim != 1 or status.shape != times.shape:
        raise DataError(f"population {name!r}: times/status must be matching vectors")
    if covariates.ndim != 2 or covariates.shape[0] != times.shape[0]:
        raise DataError(f"population {name!r}: covariate rows must match subjects")
    if times.shape[0] == 0:
        raise DataError(f"population {name!r}: empty population")
    if not np.all(np.isfinite(times)) or np.any(times < 0):
        raise DataError(f"population {name!r}: times must be finite and nonnegative")
    if not np.all(np.isfinite(covariates)):
        raise DataError(f"population {name!r}: covariates must be finite")
    if not np.isin(status, (0, 1)).all():
        raise DataError(f"population {name!r}: status must be 0/1")
    status = status.astype(np.int8)

    n = times.shape[0]
    order = np.argsort(-times, kind="stable")
    t_sorted = times[order]
    is_new = np.empty(n, dtype=bool)
    is_new[0] = True
    is_new[1:] = t_sorted[1:] != t_sorted[:-1]
    gid = np.cumsum(is_new) - 1
    starts = np.flatnonzero(is_new)
    lasts = np.append(starts[1:] - 1, n - 1)
    events_per_group = np.add.reduceat(status[order].astype(float), starts)
    return Population(
        name=name,
        times=times,
        status=status,
        covariates=covariates,
        order=order,
        group_start=starts[gid],
        group_last=lasts[gid],
        tie_counts=events_per_group[gid],
    )


@dataclass(frozen=True)
class SurvivalDataset:
    """Immutable collection of populations sharing one predictor space."""

    populations: tuple[Population, ...]
    predictor_names: tuple[str, ...]

    @property
    def p(self) -> int:
        return len(self.predictor_names)

    @property
    def n_populations(self) -> int:
        return len(self.populations)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(pop.n for pop in self.populations)

    def population_names(self) -> tuple[str, ...]:
        return tuple(pop.name for pop in self.populations)


def build_dataset(
    populations: Iterable[tuple[str, object, object, object]],
    predictor_names: Sequence[str] | None = None,
) -> SurvivalDataset:
    """Assemble a dataset from (name, times, status, covariates) tuples."""
    pops = tuple(make_population(*args) for args in populations)
    if not pops:
        raise DataError("dataset needs at least one population")
    p = pops[0].covariates.shape[1]
    for pop in pops:
        if pop.covariates.shape[1] != p:
            raise DataError(
                f"population {pop.name!r} has {pop.covariates.shape[1]} predictors, "
                f"expected {p}"
            )
    if predictor_names is None:
        predictor_names = tuple(f"x{i + 1}" for i in range(p))
    else:
        predictor_names = tuple(predictor_names)
        if len(predictor_names) != p:
            raise DataError("predictor_names length does not match covariates")
    return SurvivalDataset(pops, predictor_names)


def _event_weights(pop: Population, tie_mode: str) -> tuple[np.ndarray, np.ndarray]:
    """Per sorted position: event indicator, and the log-term weight."""
    if tie_mode not in TIE_MODES:
        raise ValueError(f"tie_mode must be one of {TIE_MODES}, got {tie_mode!r}")
    status_sorted = pop.status[pop.order].astype(float)
    if tie_mode == "breslow":
        return status_sorted, status_sorted
    return status_sorted, status_sorted * pop.tie_counts


def _check_eta(pop: Population, eta: np.ndarray) -> np.ndarray:
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (pop.n,):
        raise DataError(
            f"population {pop.name!r}: linear predictor length {eta.shape} "
            f"does not match {pop.n} subjects"
        )
    if not np.all(np.isfinite(eta)):
        raise ValueError(f"population {pop.name!r}: non-finite linear predictors")
    return eta


def population_loglik(pop: Population, eta, tie_mode: str = "breslow") -> float:
    """Partial log-likelihood of one population at linear predictors eta."""
    eta = _check_eta(pop, eta)
    eta_sorted = eta[pop.order]
    shift = eta_sorted.max()
    e = np.exp(eta_sorted - shift)
    risk = np.cumsum(e)[pop.group_last]
    status_sorted, w = _event_weights(pop, tie_mode)
    return float(np.sum(status_sorted * eta_sorted) - np.sum(w * (shift + np.log(risk))))


@dataclass(frozen=True)
class PopulationDerivatives:
    """Value, gradient and Hessian diagonal of the negative partial
    log-likelihood viewed as a function of the linear predictors."""

    value: float
    gradient: np.ndarray
    hessian_diag: np.ndarray


def population_derivatives(
    pop: Population, eta, tie_mode: str = "breslow"
) -> PopulationDerivatives:
    """O(n) derivatives of f(eta) = -loglik(eta) for one population.

    Writing S_i for the risk-set sum of event i and w_i for its log-term
    weight, the gradient entry of subject m is

        -status_m + exp(eta_m) * sum_{events i with y_i <= y_m} w_i / S_i,

    and the Hessian diagonal entry is the matching sum of
    w_i * p_mi (1 - p_mi) terms with p_mi = exp(eta_m)/S_i, each a scaled
    Bernoulli variance and hence nonnegative. Both sums run over suffixes of
    the descending-time order, so one reversed cumulative sum serves every
    subject.
    """
    eta = _check_eta(pop, eta)
    eta_sorted = eta[pop.order]
    shift = eta_sorted.max()
    e = np.exp(eta_sorted - shift)
    risk = np.cumsum(e)[pop.group_last]
    status_sorted, w = _event_weights(pop, tie_mode)

    value = -(np.sum(status_sorted * eta_sorted) - np.sum(w * (shift + np.log(risk))))

    a = w / risk
    b = w / risk**2
    suffix_a = np.cumsum(a[::-1])[::-1][pop.group_start]
    suffix_b = np.cumsum(b[::-1])[::-1][pop.group_start]
    grad_sorted = -status_sorted + e * suffix_a
    hess_sorted = np.maximum(e * suffix_a - e**2 * suffix_b, 0.0)

    gradient = np.empty_like(eta)
    hessian = np.empty_like(eta)
    gradient[pop.order] = grad_sorted
    hessian[pop.order] = hess_sorted
    return PopulationDerivatives(float(value), gradient, hessian)


def _check_coefficients(data: SurvivalDataset, B) -> np.ndarray:
    B = np.asarray(B, dtype=float)
    if B.shape != (data.p, data.n_populations):
        raise DataError(
            f"coefficient matrix shape {B.shape} does not match "
            f"({data.p}, {data.n_populations})"
        )
    if not np.all(np.isfinite(B)):
        raise ValueError("coefficient matrix contains non-finite entries")
    return B


def linear_predictors(data: SurvivalDataset, B) -> list[np.ndarray]:
    """Per-population linear predictors X_j b_j."""
    B = _check_coefficients(data, B)
    return [pop.covariates @ B[:, j] for j, pop in enumerate(data.populations)]


def partial_loglik(data: SurvivalDataset, B, tie_mode: str = "breslow") -> float:
    """Summed partial log-likelihood over all populations."""
    B = _check_coefficients(data, B)
    return sum(
        population_loglik(pop, pop.covariates @ B[:, j], tie_mode)
        for j, pop in enumerate(data.populations)
    )


def loglik_linear_predictors(
    data: SurvivalDataset, etas: Sequence[np.ndarray], tie_mode: str = "breslow"
) -> float:
    """Summed partial log-likelihood at caller-supplied linear predictors."""
    if len(etas) != data.n_populations:
        raise DataError("one linear-predictor vector per population required")
    return sum(
        population_loglik(pop, eta, tie_mode)
        for pop, eta in zip(data.populations, etas)
    )


def derivatives_eta(
    data: SurvivalDataset, etas: Sequence[np.ndarray], tie_mode: str = "breslow"
) -> list[PopulationDerivatives]:
    if len(etas) != data.n_populations:
        raise DataError("one linear-predictor vector per population required")
    return [
        population_derivatives(pop, eta, tie_mode)
        for pop, eta in zip(data.populations, etas)
    ]


def penalized_objective(
    data: SurvivalDataset, B, mu: float, tie_mode: str = "breslow"
) -> float:
    """Ridge-penalized negative partial log-likelihood -loglik + mu ||B||_F^2."""
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    B = _check_coefficients(data, B)
    return -partial_loglik(data, B, tie_mode) + mu * float(np.sum(B**2))
