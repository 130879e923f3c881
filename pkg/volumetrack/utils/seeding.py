import numpy as np


def keyed_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent counter-based stream per (seed, *keys); order of draws elsewhere never shifts it."""
    entropy = [int(seed)] + [int(k) for k in keys]
    if any(e < 0 for e in entropy):
        raise ValueError(f"stream keys must be nonnegative, got {entropy}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
