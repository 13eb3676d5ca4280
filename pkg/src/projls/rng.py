"""Seeded random streams.

Every random draw in the package comes from a Philox-4x64 counter-based
bit generator keyed by ``(seed, *spawn_key)``, so results do not depend on
which thread or in which order a trial runs.  Gaussian variates use numpy's
ziggurat transform (``Generator.standard_normal``).
"""

from __future__ import annotations

import numpy as np

# purpose ids; keep stable, they are part of the reproducibility contract
OPERATOR = 0
NOISE = 1
PHANTOM = 2
POWER_ITERATION = 3
REGENERATE = 4


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``seed`` and the substream ``key``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
