import logging

import numpy as np
from scipy.special import expit

from cncscsg.core.exceptions import DimensionError
from cncscsg.problems.base_problem import FiniteSumProblem, ProblemMetadata
from cncscsg.problems.dataset import Dataset
from cncscsg.services.sampling import Rng

logger = logging.getLogger(__name__)

# sup |sigma''| and sup |sigma'''| of the logistic function
_SIGMA2_MAX = 1.0 / (6.0 * np.sqrt(3.0))
_SIGMA3_MAX = 1.0 / 8.0

_t = np.linspace(-5.0, 5.0, 200_001)
# sup |d^3/dx^3 x^2/(1+x^2)|
_REG3_MAX = float(np.max(np.abs(24.0 * _t * (_t * _t - 1.0) / (1.0 + _t * _t) ** 4)))
del _t


def _reg_value(x: np.ndarray) -> float:
    x2 = x * x
    return float(np.sum(x2 / (1.0 + x2)))


def _reg_grad(x: np.ndarray) -> np.ndarray:
    return 2.0 * x / (1.0 + x * x) ** 2


def _reg_hess_diag(x: np.ndarray) -> np.ndarray:
    x2 = x * x
    return 2.0 * (1.0 - 3.0 * x2) / (1.0 + x2) ** 3


class SigmoidProblem(FiniteSumProblem):
    """f_i(x) = sigma(y_i z_i^T x) + lam * sum_j x_j^2 / (1 + x_j^2)."""

    def __init__(self, data: Dataset, lam: float, remap_labels: bool = False):
        if lam < 0:
            raise ValueError(f"lambda must be nonnegative, got {lam}")
        labels = 2.0 * data.labels - 1.0 if remap_labels else data.labels.astype(np.float64)
        # Rows y_i * z_i; everything below only needs these
        self._yz = labels[:, None] * data.features
        self.lam = float(lam)
        self.remap_labels = remap_labels

        row_norms = np.linalg.norm(self._yz, axis=1)
        metadata = ProblemMetadata(
            name="sigmoid",
            L=float(_SIGMA2_MAX * np.max(row_norms) ** 2 + 2.0 * self.lam),
            rho=float(_SIGMA3_MAX * np.max(row_norms) ** 3 + self.lam * _REG3_MAX),
        )
        super().__init__(data.n, data.d, metadata)

    def _sigmoids(self, x: np.ndarray, idx: np.ndarray) -> np.ndarray:
        return expit(self._yz[idx] @ x)

    def _component_values(self, x, idx):
        return self._sigmoids(x, idx) + self.lam * _reg_value(x)

    def _component_gradients(self, x, idx):
        s = self._sigmoids(x, idx)
        return (s * (1.0 - s))[:, None] * self._yz[idx] + (self.lam * _reg_grad(x))[None, :]

    def _mean_gradient(self, x, idx):
        s = self._sigmoids(x, idx)
        return (s * (1.0 - s)) @ self._yz[idx] / idx.size + self.lam * _reg_grad(x)

    def _component_hvps(self, x, idx, v):
        s = self._sigmoids(x, idx)
        rows = self._yz[idx]
        weights = s * (1.0 - s) * (1.0 - 2.0 * s) * (rows @ v)
        return weights[:, None] * rows + (self.lam * _reg_hess_diag(x) * v)[None, :]

    def _mean_hvp(self, x, idx, v):
        s = self._sigmoids(x, idx)
        rows = self._yz[idx]
        weights = s * (1.0 - s) * (1.0 - 2.0 * s) * (rows @ v)
        return weights @ rows / idx.size + self.lam * _reg_hess_diag(x) * v

    def estimate_gradient_bound(self, draws: int, radius: float, seed: int) -> float:
        """max ||grad f_z(x)|| over random (x, z) with x uniform in the ball of `radius`."""
        gen = Rng(seed).stream("bound")
        directions = gen.standard_normal((draws, self.d))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        radii = radius * gen.random(draws) ** (1.0 / self.d)
        points = directions * radii[:, None]
        rows = self._yz[gen.integers(self.n, size=draws)]
        s = expit(np.sum(rows * points, axis=1))
        grads = (s * (1.0 - s))[:, None] * rows + self.lam * 2.0 * points / (1.0 + points ** 2) ** 2
        return float(np.max(np.linalg.norm(grads, axis=1)))


def make_sigmoid_problem(data: Dataset, lam: float, remap_labels: bool = False,
                         bound_draws: int = 10_000, bound_radius: float = 10.0) -> SigmoidProblem:
    if data.n < 1:
        raise DimensionError("dataset is empty")
    problem = SigmoidProblem(data, lam, remap_labels=remap_labels)
    seed = 0 if data.seed is None else data.seed
    if bound_draws > 0:
        problem.metadata.l = problem.estimate_gradient_bound(bound_draws, bound_radius, seed)
        problem.metadata.l_box = {"radius": bound_radius, "draws": bound_draws, "seed": seed}
    logger.debug(f"Sigmoid problem n={problem.n}, d={problem.d}, lam={lam}, l~{problem.metadata.l}")
    return problem
