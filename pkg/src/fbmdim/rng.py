"""Counter-based random number streams.

All Monte Carlo code in this package draws from Philox streams keyed by an
explicit 64-bit seed.  Philox is counter-based, so streams with distinct keys
are independent by construction and replica r of an experiment can always be
re-run in isolation from ``base_seed + r``.
"""

import numpy as np

__all__ = ["stream", "replica_seeds"]


def stream(seed: int) -> np.random.Generator:
    """Return the deterministic generator for a 64-bit seed."""
    if not 0 <= int(seed) < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.Philox(key=int(seed)))


def replica_seeds(base_seed: int, replicas: int) -> list[int]:
    """Seeds ``base_seed + i`` for i = 0..replicas-1, wrapping at 2**64."""
    return [(int(base_seed) + i) % 2**64 for i in range(replicas)]
