"""Counter-based, splittable random streams.

Replication ``r`` of an experiment with master seed ``m`` always draws from
the stream keyed by ``(m, r)``, no matter which thread or in which order it
runs.  Aggregates over replications are therefore independent of scheduling,
and any single replication can be replayed in isolation.
"""

from __future__ import annotations

import numpy as np

__all__ = ["stream", "stream_token"]


def _seed_sequence(master_seed: int, key: tuple) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Return the Generator for the (counter-based Philox) stream ``(master_seed, *key)``."""
    return np.random.Generator(np.random.Philox(seed=_seed_sequence(master_seed, key)))


def stream_token(master_seed: int, *key: int) -> int:
    """A 64-bit fingerprint of a stream, recorded next to every output row.

    Two rows carry the same token iff they were produced by the same
    ``(master_seed, key)`` stream.
    """
    state = _seed_sequence(master_seed, key).generate_state(1, np.uint64)
    return int(state[0])
