"""Counter-based random streams.

Every random draw in the package comes from a stream keyed by
``(seed, purpose, *counters)``. A stream depends only on its key, so results
do not change with batch grouping or with the number of worker threads.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np


class Purpose(IntEnum):
    """Namespaces for independent sub-streams of one seed."""

    SCENARIO = 0
    SIMULATION = 1
    PREDICTION = 2
    HISTORY_SCENARIO = 3
    HISTORY_NOISE = 4
    FIT = 5
    ZONE = 6
    COIN = 7
    BENCH = 8


def stream(seed: int, purpose: int, *counters: int) -> np.random.Generator:
    """Return the generator for one key. Equal keys give equal generators."""
    key = (int(purpose), *(int(c) for c in counters))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=key)))
