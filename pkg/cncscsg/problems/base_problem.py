from abc import ABC, abstractmethod
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, Optional, Sequence, Union

import numpy as np

from cncscsg.core.exceptions import DimensionError, OracleError

IndexSet = Union[Sequence[int], np.ndarray]


@dataclass
class ProblemMetadata:
    name: str
    # Gradient bound l; None when unknown
    l: Optional[float] = None
    L: Optional[float] = None
    rho: Optional[float] = None
    # How l was obtained when it was estimated by sampling
    l_box: Dict[str, Any] = field(default_factory=dict)


class FiniteSumProblem(ABC):
    """f(x) = (1/n) * sum_z f_z(x) with per-component oracles.

    Gradient evaluations are counted as IFO calls, one per (point, index)
    pair. Hessian-vector products are counted separately in `hvp_calls`.
    Inside `uncounted()` gradient evaluations go to `monitor_calls` instead,
    which is what trace recording and diagnostics use.
    """

    def __init__(self, n: int, d: int, metadata: ProblemMetadata):
        if n < 1 or d < 1:
            raise DimensionError(f"problem needs n >= 1 and d >= 1, got n={n}, d={d}")
        self.n = int(n)
        self.d = int(d)
        self.metadata = metadata
        self.ifo_calls = 0
        self.hvp_calls = 0
        self.monitor_calls = 0
        self._counting = True
        self._all = np.arange(self.n)

    @abstractmethod
    def _component_values(self, x: np.ndarray, idx: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def _component_gradients(self, x: np.ndarray, idx: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def _component_hvps(self, x: np.ndarray, idx: np.ndarray, v: np.ndarray) -> np.ndarray:
        pass

    def _mean_gradient(self, x: np.ndarray, idx: np.ndarray) -> np.ndarray:
        return self._component_gradients(x, idx).sum(axis=0) / idx.size

    def _mean_hvp(self, x: np.ndarray, idx: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self._component_hvps(x, idx, v).sum(axis=0) / idx.size

    @contextmanager
    def uncounted(self) -> Iterator["FiniteSumProblem"]:
        previous = self._counting
        self._counting = False
        try:
            yield self
        finally:
            self._counting = previous

    def _charge(self, calls: int):
        if self._counting:
            self.ifo_calls += calls
        else:
            self.monitor_calls += calls

    def _point(self, x: Any, what: str = "x") -> np.ndarray:
        arr = np.asarray(x, dtype=np.float64)
        if arr.shape != (self.d,):
            raise DimensionError(f"{what} must have shape ({self.d},), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise OracleError(f"{what} contains non-finite entries")
        return arr

    def _indices(self, I: IndexSet) -> np.ndarray:
        idx = np.asarray(I, dtype=np.int64).reshape(-1)
        if idx.size == 0:
            raise DimensionError("index set must be nonempty")
        if idx.min() < 0 or idx.max() >= self.n:
            raise DimensionError(f"component index out of range [0, {self.n})")
        return idx

    def value_component(self, x: Any, z: int) -> float:
        x = self._point(x)
        return float(self._component_values(x, self._indices([z]))[0])

    def grad_component(self, x: Any, z: int) -> np.ndarray:
        x = self._point(x)
        idx = self._indices([z])
        self._charge(1)
        return self._component_gradients(x, idx)[0]

    def grad_minibatch(self, x: Any, I: IndexSet) -> np.ndarray:
        x = self._point(x)
        idx = self._indices(I)
        self._charge(idx.size)
        return self._mean_gradient(x, idx)

    def grad_full(self, x: Any) -> np.ndarray:
        return self.grad_minibatch(x, self._all)

    def eval_full(self, x: Any) -> float:
        # Objective monitoring, never charged as IFO
        x = self._point(x)
        return float(self._component_values(x, self._all).sum() / self.n)

    def hvp_full(self, x: Any, v: Any) -> np.ndarray:
        x = self._point(x)
        v = self._point(v, "v")
        self.hvp_calls += 1
        out = self._mean_hvp(x, self._all, v)
        if not np.all(np.isfinite(out)):
            raise OracleError("Hessian-vector product returned non-finite entries")
        return out

    def component_gradients(self, x: Any) -> np.ndarray:
        """All n component gradients as rows; diagnostic, charged to monitor_calls."""
        x = self._point(x)
        self.monitor_calls += self.n
        return self._component_gradients(x, self._all)

    def counters(self) -> Dict[str, int]:
        return {
            "ifo_calls": self.ifo_calls,
            "hvp_calls": self.hvp_calls,
            "monitor_calls": self.monitor_calls,
        }
