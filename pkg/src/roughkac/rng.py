"""Seed bookkeeping: every random quantity draws from its own substream.

A substream is addressed by ``(seed, tag, replicate, component)`` so results
never depend on the order in which replicates are processed.
"""
import numpy as np

POISSON = 0
CHOLESKY = 1
WIENER = 2


def stream(seed: int, tag: int, replicate: int = 0, component: int = 0) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(seed), spawn_key=(int(tag), int(replicate), int(component)))


def generator(seed: int, tag: int, replicate: int = 0, component: int = 0) -> np.random.Generator:
    return np.random.default_rng(stream(seed, tag, replicate, component))
