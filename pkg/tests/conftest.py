from typing import List

import numpy as np
import pytest

from cncscsg.models.enums import NoisePattern
from cncscsg.problems import (QuadraticSaddleSpec, generate_dataset, make_quadratic_saddle,
                              make_sigmoid_problem, saddle_noise)
from cncscsg.services.sampling import Rng


class ScriptedRng(Rng):
    """Rng whose geometric draws come from a fixed script (then fall back to sampling)."""

    def __init__(self, seed: int, inner_lengths: List[int]):
        super().__init__(seed)
        self.inner_lengths = list(inner_lengths)
        self.used: List[int] = []

    def geometric(self, gamma: float) -> int:
        if self.inner_lengths:
            value = self.inner_lengths.pop(0)
        else:
            value = super().geometric(gamma)
        self.used.append(value)
        return value


def saddle(spectrum=(1.0, -1.0), n=40, pattern=NoisePattern.PM, quartic=0.0, gradient_bound=None):
    noise = saddle_noise(n, spectrum, pattern)
    return make_quadratic_saddle(QuadraticSaddleSpec(spectrum=np.asarray(spectrum, dtype=float), noise=noise,
                                                     quartic=quartic, gradient_bound=gradient_bound))


@pytest.fixture
def small_sigmoid():
    return make_sigmoid_problem(generate_dataset(10, 3, seed=7), lam=0.5, bound_draws=0)


@pytest.fixture
def dataset_one():
    return make_sigmoid_problem(generate_dataset(40, 4, seed=0), lam=0.5, bound_draws=2_000)


@pytest.fixture
def pm_saddle():
    return saddle()


@pytest.fixture
def quiet_saddle():
    return saddle(pattern=NoisePattern.ZERO)


@pytest.fixture
def bowl():
    """1/2 ||x||^2 with no component noise."""
    return saddle(spectrum=(1.0, 1.0), n=4, pattern=NoisePattern.ZERO)
