"""Random number generator conventions shared by all simulators."""
from __future__ import annotations

import numpy as np

SeedLike = "int | np.random.Generator | None"


def as_generator(seed) -> np.random.Generator:
    """
    Returns ``seed`` unchanged if it is already a Generator, otherwise a
    fresh PCG64 generator seeded with it.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def task_generator(master_seed: int, task_index: int) -> np.random.Generator:
    """
    Independent stream for replicate ``task_index`` of a job seeded with
    ``master_seed``. Streams do not depend on how tasks are scheduled.
    """
    return np.random.default_rng([int(master_seed), int(task_index)])
