"""Deterministic named random streams.

Every random draw in the package comes from a stream addressed by the run
seed plus a path of names and integers, for example
``stream(seed, "SS-2A", "tte", rep, "data")``. Streams are Philox generators
keyed through ``numpy.random.SeedSequence``, so distinct paths give
statistically independent streams and the same path always reproduces the
same draws, regardless of scheduling or worker count.

String path parts are hashed with BLAKE2b rather than the builtin ``hash``
so the mapping is stable across interpreter runs and platforms.
"""

import hashlib

import numpy as np

from .errors import InvalidArgument


def _encode(part) -> int:
    if isinstance(part, (bool, float)):
        raise InvalidArgument(f"stream path parts must be str or int, got {part!r}")
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise InvalidArgument("stream path integers must be nonnegative")
        return int(part)
    if isinstance(part, str):
        digest = hashlib.blake2b(part.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "big")
    raise InvalidArgument(f"stream path parts must be str or int, got {part!r}")


def stream(seed: int, *path) -> np.random.Generator:
    """Return the generator addressed by ``(seed, *path)``.

    Parameters
    ----------
    seed : int
        Nonnegative run-level seed.
    *path : str or int
        Hierarchical address, e.g. scenario label, outcome, replication
        index, purpose.
    """
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool) or seed < 0:
        raise InvalidArgument("seed must be a nonnegative integer")
    entropy = (int(seed),) + tuple(_encode(p) for p in path)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
