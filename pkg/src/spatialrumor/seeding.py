"""Seed derivation for reproducible ensembles.

Every random stream is ``PCG64`` seeded from ``SeedSequence(master,
spawn_key=key)``. SeedSequence hashes the spawn key into the entropy pool,
so replica ``i`` of cell ``c`` always gets the stream ``(master, (c, i))``
no matter which thread runs it or in what order.
"""

import numpy as np

from .errors import ConfigError

MAX_SEED = 2**64 - 1


def check_seed(seed) -> int:
    if seed is None:
        raise ConfigError("a seed is required")
    if isinstance(seed, (bool, float)):
        raise ConfigError(f"seed must be an integer, got {seed!r}")
    try:
        value = int(seed)
    except (TypeError, ValueError):
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed!r}") from None
    if not 0 <= value <= MAX_SEED:
        raise ConfigError(f"seed {value} outside [0, 2^64)")
    return value


def make_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(check_seed(seed), spawn_key=key)))
