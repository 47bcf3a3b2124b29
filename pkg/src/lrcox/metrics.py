"""Prediction and estimation metrics, plus the factor-transfer workflow.

The concordance index comes in two variants. ``c_index_uncensored``
implements the strict double-sum definition (ties in the predictor earn no
credit) and assumes an evaluation set with no censoring. ``c_index_censored``
is the usual censoring-adjusted concordance: pairs are permissible when the
earlier time is an observed event, tied predictors earn half credit.

Survival probabilities for the Brier score use the cumulative-hazard step
estimator whose increment at each distinct event time is the event count
over the risk-set sum of exp(linear predictor), plugged into
S(t | x) = exp(-H0(t) exp(x'b)).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .coxph import Population, make_population
from .errors import DataError
from .solver import mm_update_population

__all__ = [
    "BaselineHazard",
    "FactorModel",
    "breslow_baseline",
    "brier_score",
    "c_index_censored",
    "c_index_uncensored",
    "factor_transfer",
    "model_error",
    "quantile_lower",
]


def quantile_lower(values: np.ndarray, q: float) -> float:
    """Lower-interpolation sample quantile, the convention used throughout."""
    return float(np.quantile(np.asarray(values, dtype=float), q, method="lower"))


def model_error(B_hat: np.ndarray, B_star: np.ndarray, Sigma: np.ndarray) -> float:
    """tr{(B_hat - B_star)' Sigma (B_hat - B_star)}."""
    B_hat = np.asarray(B_hat, dtype=float)
    B_star = np.asarray(B_star, dtype=float)
    Sigma = np.asarray(Sigma, dtype=float)
    if B_hat.shape != B_star.shape:
        raise DataError(f"shape mismatch {B_hat.shape} vs {B_star.shape}")
    if Sigma.shape != (B_hat.shape[0], B_hat.shape[0]):
        raise DataError("Sigma must be p x p")
    if np.max(np.abs(Sigma - Sigma.T)) > 1e-10:
        raise DataError("Sigma must be symmetric")
    diff = B_hat - B_star
    return float(np.trace(diff.T @ Sigma @ diff))


def c_index_uncensored(times: np.ndarray, eta: np.ndarray) -> float:
    """Strict-inequality concordance for a fully observed evaluation set."""
    times = np.asarray(times, dtype=float)
    eta = np.asarray(eta, dtype=float)
    later = times[:, None] > times[None, :]
    denom = int(later.sum())
    if denom == 0:
        raise DataError("no orderable pairs: all times tied")
    concordant = later & (eta[:, None] < eta[None, :])
    return float(concordant.sum() / denom)


def c_index_censored(
    times: np.ndarray, status: np.ndarray, eta: np.ndarray
) -> float | None:
    """Censoring-adjusted concordance; None when no pair is orderable."""
    times = np.asarray(times, dtype=float)
    status = np.asarray(status)
    eta = np.asarray(eta, dtype=float)
    earlier = times[:, None] < times[None, :]
    permissible = earlier & (status[:, None] == 1)
    n_perm = int(permissible.sum())
    if n_perm == 0:
        return None
    higher_risk = eta[:, None] > eta[None, :]
    tied = eta[:, None] == eta[None, :]
    credit = (permissible & higher_risk).sum() + 0.5 * (permissible & tied).sum()
    return float(credit / n_perm)


@dataclass(frozen=True)
class BaselineHazard:
    """Step cumulative hazard: nondecreasing, zero before the first event."""

    times: np.ndarray  # ascending distinct event times
    increments: np.ndarray  # nonnegative jumps

    def cumulative(self, t: float | np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        csum = np.concatenate(([0.0], np.cumsum(self.increments)))
        return csum[np.searchsorted(self.times, t, side="right")]

    def survival(self, t: float | np.ndarray, eta: np.ndarray) -> np.ndarray:
        """S(t | eta) = exp(-H0(t) exp(eta)).

        Scalar t gives one probability per subject; a vector of times gives
        a (subjects, times) array.
        """
        eta = np.asarray(eta, dtype=float)
        h0 = self.cumulative(t)
        if np.ndim(h0) == 0:
            return np.exp(-np.exp(eta) * float(h0))
        return np.exp(-np.exp(eta)[:, None] * np.asarray(h0)[None, :])


def breslow_baseline(pop: Population, b: np.ndarray) -> BaselineHazard:
    b = np.asarray(b, dtype=float)
    if not np.all(np.isfinite(b)):
        raise ValueError("coefficients must be finite")
    eta = pop.covariates @ b
    eta_sorted = eta[pop.order]
    shift = eta_sorted.max()
    e = np.exp(eta_sorted - shift)
    risk = np.cumsum(e)[pop.group_last]

    t_sorted = pop.times[pop.order]
    starts = np.unique(pop.group_start)
    group_times = t_sorted[starts]
    group_events = pop.tie_counts[starts]
    group_risk = risk[starts] * np.exp(shift)
    has_event = group_events > 0
    # descending-time groups: reverse into ascending event times
    times = group_times[has_event][::-1]
    increments = (group_events[has_event] / group_risk[has_event])[::-1]
    return BaselineHazard(times=times, increments=increments)


def brier_score(
    times: np.ndarray, eta: np.ndarray, baseline: BaselineHazard, t: float
) -> float:
    """Mean squared gap between survival-at-t indicators and S(t | x)."""
    times = np.asarray(times, dtype=float)
    survival = np.atleast_1d(baseline.survival(t, eta))
    indicator = (times > t).astype(float)
    return float(np.mean((indicator - survival) ** 2))


@dataclass(frozen=True)
class FactorModel:
    """Cox model on the reduced features x'U, with U pinned by fingerprint."""

    factor_weights: np.ndarray  # (p, r)
    coefficients: np.ndarray  # (r,)
    fingerprint: str

    def transform(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.factor_weights

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.transform(X) @ self.coefficients


def _fingerprint(U: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(U, dtype=float).tobytes()).hexdigest()


def factor_transfer(
    U: np.ndarray,
    times: np.ndarray,
    status: np.ndarray,
    covariates: np.ndarray,
    feature_names: list[str] | None = None,
    factor_feature_names: list[str] | None = None,
    ridge: float = 1e-6,
    max_iters: int = 200,
    tol: float = 1e-12,
) -> FactorModel:
    """Fit a proportional hazards model on the transferred factors x'U.

    A vanishingly small ridge keeps the solve well posed when the reduced
    features are collinear; it is negligible by design. When both name lists
    are supplied they must match exactly (same predictors, same order).
    """
    U = np.asarray(U, dtype=float)
    covariates = np.asarray(covariates, dtype=float)
    if U.ndim != 2 or U.shape[0] != covariates.shape[1]:
        raise DataError(
            f"factor weights have {U.shape[0] if U.ndim == 2 else '?'} rows, "
            f"data has {covariates.shape[1]} predictors"
        )
    if U.shape[1] > U.shape[0]:
        raise DataError("more factors than predictors")
    if feature_names is not None and factor_feature_names is not None:
        if list(feature_names) != list(factor_feature_names):
            mism = [
                f"position {i}: data={a!r} factors={b!r}"
                for i, (a, b) in enumerate(zip(feature_names, factor_feature_names))
                if a != b
            ]
            extra = abs(len(feature_names) - len(factor_feature_names))
            if extra:
                mism.append(f"{extra} name(s) unmatched in length")
            raise DataError("predictor order mismatch: " + "; ".join(mism))

    pop = make_population("transfer", times, status, covariates @ U)
    r = U.shape[1]
    b = np.zeros(r)
    zero_target = np.zeros(r)
    for _ in range(max_iters):
        b_new = mm_update_population(pop, b, zero_target, 0.0, ridge)
        moved = float(np.linalg.norm(b_new - b))
        b = b_new
        if moved <= tol * (1.0 + float(np.linalg.norm(b))):
            break
    return FactorModel(U.copy(), b, _fingerprint(U))
