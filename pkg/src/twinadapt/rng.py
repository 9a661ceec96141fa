"""Named, reproducible random streams.

Every stochastic choice in the package draws from a generator keyed by
(seed, purpose tags), so unrelated pipeline stages never share a stream
and adding draws to one stage cannot shift another.  Tags are hashed with
sha256, which is stable across platforms and Python versions.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["stream"]


def stream(seed: int, *tags: object) -> np.random.Generator:
    """PCG64 generator for the stream named by ``tags`` under ``seed``."""
    label = "/".join(str(t) for t in tags)
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]
    return np.random.default_rng(np.random.SeedSequence([int(seed), *words]))
