"""Seeded random primitives.

Every consumer of randomness draws from a named substream of one `Rng`, so
adding draws to one consumer (e.g. switching spectral probes on) never shifts
the draws seen by another.
"""
import logging
import math
from typing import Dict, Optional, Union

import numpy as np

from cncscsg.core.exceptions import DimensionError

logger = logging.getLogger(__name__)

# Order is part of the reproducibility contract: append only.
STREAMS = ("dataset", "minibatch", "geometric", "sphere", "init", "probe", "bound")

_U64 = 2 ** 64


class Rng:
    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed < _U64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        self._generators: Dict[str, np.random.Generator] = {}

    def stream(self, name: str) -> np.random.Generator:
        if name not in STREAMS:
            raise KeyError(f"Unknown random substream '{name}', expected one of {STREAMS}")
        gen = self._generators.get(name)
        if gen is None:
            seq = np.random.SeedSequence(self.seed, spawn_key=(STREAMS.index(name),))
            gen = np.random.Generator(np.random.PCG64(seq))
            self._generators[name] = gen
        return gen

    def minibatch(self, n: int, b: int) -> np.ndarray:
        return sample_minibatch(self.stream("minibatch"), n, b)

    def index(self, n: int) -> int:
        if n < 1:
            raise DimensionError(f"cannot draw an index from an empty range (n={n})")
        return int(self.stream("minibatch").integers(n))

    def indices_with_replacement(self, n: int, m: int) -> np.ndarray:
        if n < 1 or m < 1:
            raise DimensionError(f"invalid sample request n={n}, m={m}")
        return self.stream("minibatch").integers(n, size=m)

    def geometric(self, gamma: float) -> int:
        return int(sample_geometric(self.stream("geometric"), gamma))

    def sphere(self, d: int, radius: float, stream: str = "sphere") -> np.ndarray:
        return sample_sphere(self.stream(stream), d, radius)

    def normal(self, d: int, stream: str = "init") -> np.ndarray:
        return self.stream(stream).standard_normal(d)


def sample_minibatch(gen: np.random.Generator, n: int, b: int) -> np.ndarray:
    """Uniform size-b subset of range(n), without replacement, sorted ascending."""
    if not 1 <= b <= n:
        raise DimensionError(f"minibatch size must satisfy 1 <= b <= n, got b={b}, n={n}")
    idx = np.arange(n)
    # partial Fisher-Yates
    for i in range(b):
        j = int(gen.integers(i, n))
        idx[i], idx[j] = idx[j], idx[i]
    return np.sort(idx[:b])


def sample_geometric(gen: np.random.Generator, gamma: float,
                     size: Optional[int] = None) -> Union[int, np.ndarray]:
    """N with P(N = k) = (1 - gamma) * gamma**k on {0, 1, 2, ...}, by inverse CDF."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    log_gamma = math.log(gamma)
    # 1 - U is uniform on (0, 1]
    u = 1.0 - gen.random(size)
    draws = np.floor(np.log(u) / log_gamma).astype(np.int64)
    return int(draws) if size is None else draws


def sample_sphere(gen: np.random.Generator, d: int, radius: float) -> np.ndarray:
    """Uniform point on the sphere of the given radius in R^d."""
    if d < 1:
        raise DimensionError(f"dimension must be positive, got {d}")
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    while True:
        g = gen.standard_normal(d)
        norm = float(np.linalg.norm(g))
        if norm > 0.0:
            return radius * (g / norm)
        logger.debug("Degenerate all-zero Gaussian draw on the sphere, resampling")
