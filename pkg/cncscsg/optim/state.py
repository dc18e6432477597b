import logging
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence

import numpy as np

from cncscsg.models.enums import EventTag, IfoConvention, TerminationReason
from cncscsg.models.trace import PerturbationEvent, Trace, TraceRow, TraceSummary
from cncscsg.problems.base_problem import FiniteSumProblem
from cncscsg.services.sampling import Rng
from cncscsg.services.spectral import lambda_min

logger = logging.getLogger(__name__)


@dataclass
class IterateState:
    """Snapshot x, the full gradient mu_tilde at it, and the epoch counters."""
    x: np.ndarray
    mu_tilde: np.ndarray
    epoch: int = 0
    # Epochs since the last perturbation
    t_noise: int = 0
    ifo_count: int = 0
    # mu_tilde == grad_full(x) while fresh
    fresh: bool = True

    def copy(self) -> "IterateState":
        return replace(self, x=self.x.copy(), mu_tilde=self.mu_tilde.copy())

    @property
    def grad_norm(self) -> float:
        return float(np.linalg.norm(self.mu_tilde))


Hook = Callable[[int, IterateState, EventTag], None]


class IfoMeter:
    """Reported IFO count under one accounting convention.

    `paper` charges b per variance-reduced inner step, `strict` charges 2b
    (both minibatch gradients). Every other oracle use is charged as made.
    """

    def __init__(self, convention: IfoConvention = IfoConvention.PAPER):
        self.convention = IfoConvention(convention)
        self.total = 0

    def full(self, n: int):
        self.total += n

    def batch(self, size: int):
        self.total += size

    def single(self, count: int = 1):
        self.total += count

    def inner_step(self, b: int):
        self.total += b if self.convention is IfoConvention.PAPER else 2 * b


class StallMonitor:
    """True once the best objective improved by < tol over the last `window` observations."""

    def __init__(self, tol: float, window: int):
        self.tol = tol
        self.window = window
        self._best: List[float] = []

    def reset(self):
        self._best = []

    def observe(self, f: float) -> bool:
        best = f if not self._best else min(self._best[-1], f)
        self._best.append(best)
        if len(self._best) <= self.window:
            return False
        return self._best[-1 - self.window] - best < self.tol


def is_finite_iterate(x: np.ndarray, bound: float, f: Optional[float] = None) -> bool:
    if not np.all(np.isfinite(x)) or float(np.linalg.norm(x)) > bound:
        return False
    return f is None or bool(np.isfinite(f))


class TraceRecorder:
    """Rows, perturbation events, spectral probes and hooks for one run."""

    def __init__(self, problem: FiniteSumProblem, rng: Rng, meter: IfoMeter,
                 probe_every: int = 0, hooks: Sequence[Hook] = ()):
        self.problem = problem
        self.rng = rng
        self.meter = meter
        self.probe_every = probe_every
        self.hooks = list(hooks)
        self.trace = Trace()

    def objective(self, x: np.ndarray) -> float:
        return self.problem.eval_full(x)

    def monitor_grad_norm(self, x: np.ndarray) -> float:
        with self.problem.uncounted():
            return float(np.linalg.norm(self.problem.grad_full(x)))

    def record(self, epoch: int, x: np.ndarray, f: float, grad_norm: float, perturbed: bool) -> TraceRow:
        lam = tau = None
        if self.probe_every and epoch % self.probe_every == 0:
            # probe substream only, the optimizer's draws are untouched
            report = lambda_min(self.problem, x, rng=self.rng)
            lam, tau = report.lambda_min_hat, report.tau_hat
        row = TraceRow(epoch=epoch, f=f, grad_norm=grad_norm, ifo=self.meter.total,
                       perturbed=perturbed, lambda_min=lam, tau=tau)
        self.trace.append(row)
        logger.debug(f"epoch {epoch}: f={f:.10g} |g|={grad_norm:.3e} ifo={self.meter.total}")
        return row

    def perturbation(self, epoch: int, index: int, t_noise: int, grad_norm: float,
                     f_before: float, f_after: float, inner_step: Optional[int] = None) -> PerturbationEvent:
        event = PerturbationEvent(epoch=epoch, index=index, t_noise=t_noise, grad_norm=grad_norm,
                                  f_before=f_before, f_after=f_after, inner_step=inner_step)
        self.trace.events.append(event)
        if inner_step is None:
            logger.info(f"Perturbation at epoch {epoch} (component {index}): f {f_before:.6g} -> {f_after:.6g}")
        return event

    def notify(self, epoch: int, state: IterateState, tag: EventTag):
        for hook in self.hooks:
            hook(epoch, state.copy(), tag)

    def finish(self, reason: TerminationReason, x: np.ndarray, grad_norm: float) -> Trace:
        f = self.objective(x) if np.all(np.isfinite(x)) else float("nan")
        self.trace.terminate(TraceSummary(
            reason=reason,
            epochs=len(self.trace.rows),
            total_ifo=self.meter.total,
            hvp_calls=self.problem.hvp_calls,
            final_f=f,
            final_grad_norm=grad_norm,
            ifo_convention=self.meter.convention.value,
            x_final=[float(v) for v in x],
        ))
        return self.trace
