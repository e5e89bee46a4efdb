"""Deterministic random-stream management.

Every random choice in the package flows from one user-visible seed through
named substreams, so that e.g. parameter initialization and batch shuffling
can be reproduced independently of each other.
"""

from __future__ import annotations

import hashlib

import numpy as np


def substream(seed: int, name: str) -> np.random.Generator:
    """Return a Generator for the named substream of ``seed``.

    The mapping is stable across processes and platforms: the stream is
    keyed by the seed together with a SHA-256 digest of the name.
    """
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    key = int.from_bytes(digest[:8], "big")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, key])))
