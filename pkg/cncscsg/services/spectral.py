"""Second-order diagnostics built on Hessian-vector products.

Spectral probes draw their start vectors from the `probe` substream and their
HVPs are counted in `problem.hvp_calls`, never as IFO.
"""
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy.linalg import eigh

from cncscsg.core.config import settings
from cncscsg.core.exceptions import DimensionError
from cncscsg.problems.base_problem import FiniteSumProblem
from cncscsg.services.sampling import Rng

logger = logging.getLogger(__name__)

_SHIFT_MARGIN = 1.1
_STAGNATION_RTOL = 1e-14
_STAGNATION_WINDOW = 20
_SHIFT_RETRIES = 3
_BOUND_SLACK = 1e-6


@dataclass
class SpectralReport:
    lambda_min_hat: float
    eigvec_hat: np.ndarray
    tau_hat: float
    iterations_used: int
    converged: bool

    def to_json(self) -> Dict[str, Any]:
        return {
            "lambda_min": self.lambda_min_hat,
            "tau": self.tau_hat,
            "converged": self.converged,
            "iters": self.iterations_used,
        }


def default_max_iter(d: int) -> int:
    return int(math.ceil(10 * d * math.log(d + 1)))


def _dominant_magnitude(p: FiniteSumProblem, x: np.ndarray, v: np.ndarray, tol: float,
                        max_iter: int) -> Tuple[float, int]:
    """Spectral radius estimate of H by plain power iteration, run to a Rayleigh residual of tol."""
    bound = 0.0
    used = 0
    for _ in range(max_iter):
        hv = p.hvp_full(x, v)
        used += 1
        norm = float(np.linalg.norm(hv))
        bound = max(bound, norm)
        if norm == 0.0:
            break
        rq = float(v @ hv)
        if float(np.linalg.norm(hv - rq * v)) <= tol:
            break
        v = hv / norm
    return bound, used


def _shifted_power(p: FiniteSumProblem, x: np.ndarray, mu: float, rng: Rng, tol: float,
                   max_iter: int) -> Tuple[np.ndarray, float, float, float, int, bool]:
    """Power iteration on mu*I - H; returns the best-residual vector, its quotient and residual,
    the largest |Hv| seen, the iterations used and whether tol was reached."""
    v = rng.sphere(p.d, 1.0, stream="probe")
    best_v, best_rq, best_res = v, math.nan, math.inf
    peak = 0.0
    restarted = False
    converged = False
    still = 0
    previous_rq = None
    iterations = 0
    while iterations < max_iter:
        hv = p.hvp_full(x, v)
        iterations += 1
        peak = max(peak, float(np.linalg.norm(hv)))
        rq = float(v @ hv)
        residual = float(np.linalg.norm(hv - rq * v))
        if residual < best_res:
            best_v, best_rq, best_res = v, rq, residual
        if residual <= tol:
            converged = True
            break
        if previous_rq is not None and abs(rq - previous_rq) <= _STAGNATION_RTOL * max(abs(rq), 1e-300):
            still += 1
        else:
            still = 0
        previous_rq = rq
        if still >= _STAGNATION_WINDOW:
            if restarted:
                break
            logger.debug("Rayleigh quotient stagnated, restarting from a fresh start vector")
            restarted = True
            still = 0
            previous_rq = None
            v = rng.sphere(p.d, 1.0, stream="probe")
            continue
        w = mu * v - hv
        v = w / np.linalg.norm(w)
    return best_v, best_rq, best_res, peak, iterations, converged


def lambda_min(p: FiniteSumProblem, x, tol: Optional[float] = None,
               max_iter: Optional[int] = None, rng: Optional[Rng] = None) -> SpectralReport:
    """Smallest Hessian eigenvalue at x by power iteration on mu*I - H."""
    tol = settings.probe_tol if tol is None else tol
    if max_iter is None:
        max_iter = settings.probe_max_iter or default_max_iter(p.d)
    if not tol > 0 or max_iter < 1:
        raise ValueError(f"need tol > 0 and max_iter >= 1, got tol={tol}, max_iter={max_iter}")
    x = p._point(x)
    rng = rng or Rng(0)

    cap = min(max_iter, max(100, 20 * p.d))
    bound, used = _dominant_magnitude(p, x, rng.sphere(p.d, 1.0, stream="probe"), tol, cap)

    for attempt in range(_SHIFT_RETRIES + 1):
        mu = _SHIFT_MARGIN * bound if bound > 0.0 else 1.0
        best_v, best_rq, best_res, peak, iterations, converged = _shifted_power(p, x, mu, rng, tol, max_iter)
        used += iterations
        # a shift below the spectral radius lets the top of the spectrum win
        seen = max(abs(best_rq) if math.isfinite(best_rq) else 0.0, peak)
        if seen <= bound * (1.0 + _BOUND_SLACK) or attempt == _SHIFT_RETRIES:
            break
        logger.debug(f"shift {mu:.3e} below observed |Hv| {seen:.3e}, re-running with a larger shift")
        bound = seen

    if not converged:
        logger.warning(f"lambda_min probe did not converge in {max_iter} iterations (residual {best_res:.3e})")
    eigvec = best_v / np.linalg.norm(best_v)
    return SpectralReport(
        lambda_min_hat=best_rq,
        eigvec_hat=eigvec,
        tau_hat=cnc_estimate(p, x, eigvec),
        iterations_used=used,
        converged=converged,
    )


def dense_hessian(p: FiniteSumProblem, x) -> np.ndarray:
    if p.d > settings.dense_hessian_cap:
        raise DimensionError(f"dense Hessian refused for d={p.d} > {settings.dense_hessian_cap}")
    x = p._point(x)
    columns = [p.hvp_full(x, e) for e in np.eye(p.d)]
    h = np.column_stack(columns)
    return 0.5 * (h + h.T)


def dense_lambda_min(p: FiniteSumProblem, x) -> Tuple[float, np.ndarray]:
    values, vectors = eigh(dense_hessian(p, x))
    return float(values[0]), vectors[:, 0]


def cnc_estimate(p: FiniteSumProblem, x, v) -> float:
    """tau_hat = (1/n) sum_z (v^T grad f_z(x))^2, exact over the finite sum."""
    v = np.asarray(v, dtype=np.float64)
    if abs(float(np.linalg.norm(v)) - 1.0) > 1e-8:
        raise ValueError("direction v must be a unit vector")
    projections = p.component_gradients(x) @ v
    return float(np.mean(projections ** 2))


def _check_cap(p: FiniteSumProblem, cap: Optional[int]):
    cap = settings.dense_matrix_cap if cap is None else cap
    if p.d > cap:
        raise DimensionError(
            f"d={p.d} exceeds the dense matrix cap {cap}; use lambda_min / cnc_estimate probes instead"
        )


def empirical_fisher(p: FiniteSumProblem, x, cap: Optional[int] = None) -> np.ndarray:
    _check_cap(p, cap)
    grads = p.component_gradients(x)
    fisher = grads.T @ grads / p.n
    return 0.5 * (fisher + fisher.T)


def grad_covariance(p: FiniteSumProblem, x, cap: Optional[int] = None) -> np.ndarray:
    _check_cap(p, cap)
    grads = p.component_gradients(x)
    centred = grads - grads.sum(axis=0) / p.n
    cov = centred.T @ centred / p.n
    return 0.5 * (cov + cov.T)
