"""Synthetic multi-population survival data.

Covariates are AR(1) Gaussians, the true coefficient matrix is a low-rank
product with a common row support, survival times follow a Gompertz-baseline
proportional hazards model inverted through uniform draws, and censoring
times are exponential with mean calibrated to a quantile of each
population's generated times. Test splits are emitted uncensored.

For population j with location kappa_j the scale is
phi_j = a * exp(-0.5772 - a * kappa_j) (a the shared shape), and a uniform
draw u maps to the survival time

    T = log(1 - (a / phi_j) * log(u) * exp(-x'b_j)) / a,

whose survival function is S(t | x) = exp(-(phi_j / a)(e^{a t} - 1) e^{x'b}).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .coxph import SurvivalDataset, build_dataset
from .errors import ConfigError
from .rng import substream

__all__ = [
    "GroundTruth",
    "SimulationSpec",
    "apply_censoring",
    "generate_benchmark",
    "generate_truth",
    "gompertz_survival",
    "sample_survival",
]

logger = logging.getLogger(__name__)

# Stream ids: (kind, population). Truth uses population index 0.
_STREAMS = {
    "truth": 0,
    "train": 1,
    "train-censor": 2,
    "validation": 3,
    "validation-censor": 4,
    "test": 5,
    "test-censor": 6,
}

_EULER_MASCHERONI = 0.5772  # kept at four decimals on purpose


@dataclass(frozen=True)
class SimulationSpec:
    """All generator knobs, with defaults at the benchmark scale."""

    p: int = 250
    n_populations: int = 12
    n_pattern: tuple[int, ...] = (100, 200, 300)
    r_star: int = 3
    s_star: int = 20
    gompertz_shape: float = math.pi / (600.0 * math.sqrt(6.0))
    baseline_locations: tuple[float, ...] | None = None
    censor_quantile: float = 0.35
    corr_decay: float = 0.7
    n_validation: int = 150
    n_test: int = 1000
    seed: int = 0

    def validate(self) -> None:
        problems = []
        if self.p < 1:
            problems.append(f"p={self.p} must be positive")
        if self.n_populations < 1:
            problems.append(f"n_populations={self.n_populations} must be positive")
        if not self.n_pattern or any(n < 1 for n in self.n_pattern):
            problems.append(f"n_pattern={self.n_pattern} must be positive sizes")
        if not 1 <= self.r_star <= min(self.p, self.n_populations):
            problems.append(
                f"r_star={self.r_star} outside [1, {min(self.p, self.n_populations)}]"
            )
        if not 1 <= self.s_star <= self.p:
            problems.append(f"s_star={self.s_star} outside [1, {self.p}]")
        if self.s_star < self.r_star:
            problems.append(
                f"s_star={self.s_star} < r_star={self.r_star} makes the rank unattainable"
            )
        if self.gompertz_shape <= 0:
            problems.append(f"gompertz_shape={self.gompertz_shape} must be positive")
        if self.baseline_locations is not None and len(self.baseline_locations) != (
            self.n_populations
        ):
            problems.append("baseline_locations must have one entry per population")
        if not 0.0 < self.censor_quantile < 0.8:
            problems.append(
                f"censor_quantile={self.censor_quantile} must satisfy "
                "0 < tau and tau + 0.20 < 1"
            )
        if not -1.0 < self.corr_decay < 1.0:
            problems.append(f"corr_decay={self.corr_decay} must lie in (-1, 1)")
        if self.n_validation < 1 or self.n_test < 1:
            problems.append("n_validation and n_test must be positive")
        if problems:
            raise ConfigError("; ".join(problems))

    def resolved_locations(self) -> tuple[float, ...]:
        if self.baseline_locations is not None:
            return tuple(float(v) for v in self.baseline_locations)
        return tuple(2000.0 + 10.0 * j for j in range(self.n_populations))

    def train_sizes(self) -> tuple[int, ...]:
        pattern = self.n_pattern
        return tuple(pattern[j % len(pattern)] for j in range(self.n_populations))

    def scales(self) -> tuple[float, ...]:
        a = self.gompertz_shape
        return tuple(
            a * math.exp(-_EULER_MASCHERONI - a * loc)
            for loc in self.resolved_locations()
        )


@dataclass(frozen=True)
class GroundTruth:
    B_star: np.ndarray
    support: tuple[int, ...]
    U_star: np.ndarray
    V_star: np.ndarray
    Sigma: np.ndarray
    cholesky: np.ndarray | None = field(repr=False, default=None)


def generate_truth(spec: SimulationSpec) -> GroundTruth:
    """Low-rank coefficient matrix with a random row support.

    The left factor has s_star nonzero rows with entries drawn uniformly
    from +-[sqrt(2)/r, sqrt(8)/r]; the right factor is the Q of a Gaussian
    QR draw, hence has orthonormal columns.
    """
    spec.validate()
    rng = substream(spec.seed, (_STREAMS["truth"], 0))
    r = spec.r_star
    rows = np.sort(rng.choice(spec.p, size=spec.s_star, replace=False))
    magnitudes = rng.uniform(
        math.sqrt(2.0) / r, math.sqrt(8.0) / r, size=(spec.s_star, r)
    )
    signs = rng.choice(np.array([-1.0, 1.0]), size=(spec.s_star, r))
    U = np.zeros((spec.p, r))
    U[rows] = signs * magnitudes
    V = np.linalg.qr(rng.standard_normal((spec.n_populations, r)))[0]
    idx = np.arange(spec.p)
    Sigma = spec.corr_decay ** np.abs(idx[:, None] - idx[None, :])
    return GroundTruth(
        B_star=U @ V.T,
        support=tuple(int(i) for i in rows),
        U_star=U,
        V_star=V,
        Sigma=Sigma,
        cholesky=np.linalg.cholesky(Sigma),
    )


def gompertz_survival(
    t: np.ndarray, eta: np.ndarray, shape: float, scale: float
) -> np.ndarray:
    """S(t | x) for the generator's baseline, at linear predictors eta."""
    return np.exp(-(scale / shape) * np.expm1(shape * np.asarray(t)) * np.exp(eta))


def sample_survival(
    spec: SimulationSpec,
    truth: GroundTruth,
    sizes: Sequence[int],
    split: str = "train",
) -> SurvivalDataset:
    """Uncensored draws: every subject's status is 1 and time is the true one."""
    spec.validate()
    if split not in ("train", "validation", "test"):
        raise ConfigError(f"split={split!r} unknown")
    if len(sizes) != spec.n_populations:
        raise ConfigError("one size per population required")
    shape = spec.gompertz_shape
    scales = spec.scales()
    chol = truth.cholesky
    if chol is None:
        chol = np.linalg.cholesky(truth.Sigma)
    pops = []
    for j in range(spec.n_populations):
        rng = substream(spec.seed, (_STREAMS[split], j))
        n = int(sizes[j])
        X = rng.standard_normal((n, spec.p)) @ chol.T
        u = np.clip(rng.random(n), np.finfo(float).tiny, None)
        eta = X @ truth.B_star[:, j]
        times = (
            np.log1p(-(shape / scales[j]) * np.log(u) * np.exp(-eta)) / shape
        )
        status = np.ones(n, dtype=np.int8)
        pops.append((f"pop{j + 1:02d}", times, status, X))
    return build_dataset(pops)


def apply_censoring(
    data: SurvivalDataset, spec: SimulationSpec, split: str = "train"
) -> SurvivalDataset:
    """Exponential censoring calibrated to a per-population time quantile.

    Populations with fewer than 300 subjects use the base quantile tau;
    larger ones use tau + 0.20. The censoring draw comes from its own
    substream, so the same seed pairs censoring noise across tau values.
    """
    spec.validate()
    if split not in ("train", "validation", "test"):
        raise ConfigError(f"split={split!r} unknown")
    pops = []
    for j, pop in enumerate(data.populations):
        rng = substream(spec.seed, (_STREAMS[f"{split}-censor"], j))
        level = spec.censor_quantile + (0.20 if pop.n >= 300 else 0.0)
        mean = float(np.quantile(pop.times, level, method="lower"))
        censor = mean * rng.standard_exponential(pop.n)
        observed = np.minimum(pop.times, censor)
        status = (pop.times <= censor).astype(np.int8)
        pops.append((pop.name, observed, status, pop.covariates))
    return build_dataset(pops, data.predictor_names)


def generate_benchmark(
    spec: SimulationSpec,
) -> tuple[SurvivalDataset, SurvivalDataset, SurvivalDataset, GroundTruth]:
    """(train, validation, test, truth); the test split is left uncensored."""
    spec.validate()
    truth = generate_truth(spec)
    train = apply_censoring(
        sample_survival(spec, truth, spec.train_sizes(), "train"), spec, "train"
    )
    validation = apply_censoring(
        sample_survival(
            spec, truth, (spec.n_validation,) * spec.n_populations, "validation"
        ),
        spec,
        "validation",
    )
    test = sample_survival(spec, truth, (spec.n_test,) * spec.n_populations, "test")
    km_scale = float(np.median(np.concatenate([p.times for p in train.populations])))
    logger.info("median generated observed time: %.1f", km_scale)
    return train, validation, test, truth
