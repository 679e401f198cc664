"""Counter-based random streams keyed by ``(master_seed, trajectory_index)``.

Every trajectory draws from its own Philox stream, so a campaign's output
does not depend on how trajectories are batched or distributed over workers.
"""

from __future__ import annotations

import numpy as np


def substream(master_seed: int, index: int, *, purpose: int = 0) -> np.random.Generator:
    """Independent generator for one trajectory.

    ``purpose`` separates auxiliary streams (e.g. reference-law draws) from
    the path streams that share the same master seed.
    """
    if master_seed < 0 or index < 0:
        raise ValueError("seed and index must be non-negative")
    seq = np.random.SeedSequence(master_seed, spawn_key=(purpose, index))
    return np.random.Generator(np.random.Philox(seq))


PATHS = 0
REFERENCE = 1
