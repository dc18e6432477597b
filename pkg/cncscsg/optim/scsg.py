"""Variance-reduced SCSG machinery shared by every SCSG-based method."""
import logging
from typing import Callable, Optional, Tuple

import numpy as np

from cncscsg.core.exceptions import DimensionError, DivergenceError
from cncscsg.optim.state import IfoMeter, IterateState, is_finite_iterate
from cncscsg.problems.base_problem import FiniteSumProblem, IndexSet
from cncscsg.services.sampling import Rng

logger = logging.getLogger(__name__)

InnerPerturbCallback = Callable[[int, int, np.ndarray, np.ndarray], None]


def scsg_direction(p: FiniteSumProblem, x_prev: np.ndarray, snapshot: np.ndarray,
                   mu_tilde: np.ndarray, I: IndexSet) -> np.ndarray:
    """grad_I(x_prev) - grad_I(snapshot) + mu_tilde; 2|I| raw gradient evaluations."""
    if len(I) == 0:
        raise DimensionError("minibatch index set must be nonempty")
    return (p.grad_minibatch(x_prev, I) - p.grad_minibatch(snapshot, I)) + mu_tilde


def inner_loop_gamma(n: int, b: int) -> float:
    return n / (n + b)


def variance_reduced_steps(p: FiniteSumProblem, x: np.ndarray, mu: np.ndarray, steps: int,
                           eta: float, b: int, rng: Rng, meter: IfoMeter, divergence_bound: float,
                           state: IterateState, perturb_every: Optional[int] = None, r: float = 0.0,
                           on_perturb: Optional[InnerPerturbCallback] = None) -> np.ndarray:
    snapshot = x
    current = x.copy()
    for t in range(1, steps + 1):
        I = rng.minibatch(p.n, b)
        v = scsg_direction(p, current, snapshot, mu, I)
        meter.inner_step(b)
        nxt = current - eta * v
        if perturb_every and t % perturb_every == 0 and is_finite_iterate(nxt, divergence_bound):
            before = nxt
            nxt, index = sgd_perturbation(p, nxt, r, rng, meter)
            if on_perturb is not None:
                on_perturb(t, index, before, nxt)
        if not is_finite_iterate(nxt, divergence_bound):
            logger.warning(f"Iterate left the finite region at epoch {state.epoch}, inner step {t}")
            raise DivergenceError(f"iterate diverged at epoch {state.epoch}, inner step {t}",
                                  state=state.copy(), epoch=state.epoch)
        current = nxt
    return current


def scsg_epoch(p: FiniteSumProblem, state: IterateState, eta: float, b: int, rng: Rng,
               meter: Optional[IfoMeter] = None, divergence_bound: float = 1e8,
               refresh_gradient: bool = True, perturb_every: Optional[int] = None, r: float = 0.0,
               on_perturb: Optional[InnerPerturbCallback] = None) -> IterateState:
    """One outer epoch: N ~ Geom(n/(n+b)) inner steps, then mu_tilde at the new snapshot.

    With N = 0 the snapshot is unchanged. `refresh_gradient=False` skips the
    closing full gradient and leaves the returned state stale.
    """
    if not 1 <= b <= p.n:
        raise DimensionError(f"minibatch size must satisfy 1 <= b <= n, got b={b}, n={p.n}")
    if not state.fresh:
        raise ValueError("scsg_epoch needs mu_tilde computed at the snapshot")
    meter = meter or IfoMeter()
    steps = rng.geometric(inner_loop_gamma(p.n, b))
    x = variance_reduced_steps(p, state.x, state.mu_tilde, steps, eta, b, rng, meter, divergence_bound,
                               state, perturb_every=perturb_every, r=r, on_perturb=on_perturb)
    if refresh_gradient:
        mu = p.grad_full(x)
        meter.full(p.n)
    else:
        mu = state.mu_tilde.copy()
    return IterateState(x=x, mu_tilde=mu, epoch=state.epoch + 1, t_noise=state.t_noise + 1,
                        ifo_count=meter.total, fresh=refresh_gradient)


def sgd_perturbation(p: FiniteSumProblem, x: np.ndarray, r: float, rng: Rng,
                     meter: IfoMeter) -> Tuple[np.ndarray, int]:
    """x - r * grad f_i(x) with i uniform on the component indices."""
    index = rng.index(p.n)
    g = p.grad_component(x, index)
    meter.single()
    return x - r * g, index


def sphere_perturbation(p: FiniteSumProblem, x: np.ndarray, radius: float, rng: Rng) -> np.ndarray:
    return x + rng.sphere(p.d, radius)
