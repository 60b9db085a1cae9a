"""Named sub-seed derivation.

Every random stream in an experiment is derived from one global seed plus a
stable stream name, so components (data generation, embeddings, training,
bootstrap) can be re-run independently and still reproduce byte-identical
artifacts.
"""
from __future__ import annotations

import zlib

import numpy as np

# canonical stream names
DATA = "data"
EMBEDDINGS = "embeddings"
INIT = "init"
NOISE = "noise"
SAMPLE_SRC = "sample:src"
SAMPLE_TRG = "sample:trg"
BOOTSTRAP = "bootstrap"


def subseed(seed: int, name: str) -> np.random.SeedSequence:
    """Derive a named SeedSequence from a global integer seed.

    The name is folded in via crc32 (stable across processes, unlike hash()).
    """
    return np.random.SeedSequence([int(seed), zlib.crc32(name.encode("utf-8"))])


def rng_for(seed: int, name: str) -> np.random.Generator:
    """Generator for the named stream of a global seed."""
    return np.random.default_rng(subseed(seed, name))
