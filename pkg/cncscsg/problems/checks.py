"""Central finite-difference references for the analytic oracles."""
from typing import Callable, Optional

import numpy as np


def fd_step(x: np.ndarray) -> float:
    return 1e-5 * (1.0 + float(np.linalg.norm(x)))


def fd_gradient(func: Callable[[np.ndarray], float], x: np.ndarray,
                h: Optional[float] = None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    h = fd_step(x) if h is None else h
    grad = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        grad[j] = (func(x + e) - func(x - e)) / (2.0 * h)
    return grad


def fd_hvp(grad: Callable[[np.ndarray], np.ndarray], x: np.ndarray, v: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    h = 1e-5 * (1.0 + float(np.linalg.norm(x))) / (1.0 + float(np.linalg.norm(v)))
    return (grad(x + h * v) - grad(x - h * v)) / (2.0 * h)


def relative_error(approx, exact, floor: float = 1e-6) -> float:
    approx = np.asarray(approx, dtype=np.float64)
    exact = np.asarray(exact, dtype=np.float64)
    return float(np.linalg.norm(approx - exact) / max(float(np.linalg.norm(exact)), floor))
