"""Counter-based random substreams.

Every consumer derives its generator from (seed, key) where the key is a
small integer tuple naming the stream. Streams are independent, so e.g.
changing one population's sample size never perturbs another population's
draws, and results are identical no matter how work is scheduled.
"""

from __future__ import annotations

import numpy as np

__all__ = ["substream"]


def substream(seed: int, key: tuple[int, ...]) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=key))
    )
