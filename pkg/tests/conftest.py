import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lrcox.coxph import SurvivalDataset, build_dataset


def random_population(rng, n, p, censor_frac=0.4, tied=False, name="pop"):
    """Small survival instance; ``tied`` draws times from a coarse grid."""
    X = rng.standard_normal((n, p))
    if tied:
        times = rng.integers(1, max(3, n // 4), size=n).astype(float)
    else:
        times = rng.exponential(1.0, size=n)
    status = (rng.random(n) > censor_frac).astype(int)
    if status.sum() == 0:
        status[int(rng.integers(0, n))] = 1
    return name, times, status, X


def random_dataset(
    rng, n_pops=2, n=30, p=5, censor_frac=0.4, tied=False
) -> SurvivalDataset:
    return build_dataset(
        [
            random_population(rng, n, p, censor_frac, tied, name=f"pop{j}")
            for j in range(n_pops)
        ]
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
