from dataclasses import dataclass
from typing import Optional

import numpy as np

from cncscsg.core.exceptions import DimensionError
from cncscsg.models.enums import NoisePattern
from cncscsg.problems.base_problem import FiniteSumProblem, ProblemMetadata
from cncscsg.services.sampling import Rng


@dataclass
class QuadraticSaddleSpec:
    """Shared Hessian spectrum `a` and per-component linear noise `noise` (n x d).

    The noise rows are re-centred on construction so they sum to zero.
    `quartic` > 0 adds (quartic/4)*||x||^4 to every component.
    """

    spectrum: np.ndarray
    noise: np.ndarray
    quartic: float = 0.0
    gradient_bound: Optional[float] = None

    def __post_init__(self):
        self.spectrum = np.asarray(self.spectrum, dtype=np.float64).reshape(-1)
        self.noise = np.asarray(self.noise, dtype=np.float64)
        d = self.spectrum.size
        if d < 1 or self.noise.ndim != 2 or self.noise.shape[1] != d or self.noise.shape[0] < 1:
            raise DimensionError(f"noise must be an n x {d} matrix, got shape {self.noise.shape}")
        if not (np.all(np.isfinite(self.spectrum)) and np.all(np.isfinite(self.noise))):
            raise DimensionError("spectrum and noise must be finite")
        if self.quartic < 0:
            raise ValueError(f"quartic coefficient must be nonnegative, got {self.quartic}")
        self.noise = self.noise - self.noise.mean(axis=0)
        residual = np.abs(self.noise.sum(axis=0)).max()
        scale = max(1.0, float(np.abs(self.noise).max()))
        if residual > 1e-12 * self.noise.shape[0] * scale:
            raise DimensionError(f"noise vectors do not sum to zero after centring (residual {residual})")

    @property
    def n(self) -> int:
        return self.noise.shape[0]

    @property
    def d(self) -> int:
        return self.spectrum.size

    @property
    def is_strict_saddle(self) -> bool:
        return bool(np.min(self.spectrum) < 0)


def saddle_noise(n: int, spectrum, pattern: NoisePattern, scale: float = 1.0,
                 seed: int = 0) -> np.ndarray:
    spectrum = np.asarray(spectrum, dtype=np.float64).reshape(-1)
    d = spectrum.size
    pattern = NoisePattern(pattern)
    noise = np.zeros((n, d))
    if pattern is NoisePattern.PM:
        if n % 2:
            raise DimensionError(f"the +/- noise pattern needs an even n, got {n}")
        j = int(np.argmin(spectrum))
        noise[: n // 2, j] = scale
        noise[n // 2:, j] = -scale
    elif pattern is NoisePattern.GAUSSIAN:
        noise = scale * Rng(seed).stream("dataset").standard_normal((n, d))
    return noise


class QuadraticSaddleProblem(FiniteSumProblem):
    """f_z(x) = 1/2 x^T diag(a) x + c_z^T x (+ quartic/4 ||x||^4)."""

    def __init__(self, spec: QuadraticSaddleSpec):
        self.spec = spec
        self._a = spec.spectrum
        self._c = spec.noise
        self._beta = float(spec.quartic)
        pure = self._beta == 0.0
        metadata = ProblemMetadata(
            name="quadratic_saddle" if pure else "quartic_saddle",
            l=spec.gradient_bound,
            L=float(np.max(np.abs(self._a))) if pure else None,
            rho=0.0 if pure else None,
        )
        super().__init__(spec.n, spec.d, metadata)

    def _shared_gradient(self, x: np.ndarray) -> np.ndarray:
        g = self._a * x
        if self._beta:
            g = g + self._beta * float(x @ x) * x
        return g

    def _component_values(self, x, idx):
        shared = 0.5 * float(np.sum(self._a * x * x))
        if self._beta:
            shared += 0.25 * self._beta * float(x @ x) ** 2
        return shared + self._c[idx] @ x

    def _component_gradients(self, x, idx):
        return self._shared_gradient(x)[None, :] + self._c[idx]

    def _mean_gradient(self, x, idx):
        shared = self._shared_gradient(x)
        if idx.size == self.n and np.array_equal(idx, self._all):
            # the noise rows sum to zero
            return shared
        return shared + self._c[idx].sum(axis=0) / idx.size

    def _shared_hvp(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        hv = self._a * v
        if self._beta:
            hv = hv + self._beta * (float(x @ x) * v + 2.0 * float(x @ v) * x)
        return hv

    def _component_hvps(self, x, idx, v):
        return np.tile(self._shared_hvp(x, v), (idx.size, 1))

    def _mean_hvp(self, x, idx, v):
        return self._shared_hvp(x, v)


def make_quadratic_saddle(spec: QuadraticSaddleSpec) -> QuadraticSaddleProblem:
    return QuadraticSaddleProblem(spec)
