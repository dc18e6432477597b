"""Generic framework: any epoch-based first-order algorithm plus the CNC-SCSG escaping module."""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from cncscsg.core.exceptions import CncScsgError, DimensionError, DivergenceError, ExperimentError
from cncscsg.models.enums import EventTag, FirstOrderCheck, TerminationReason
from cncscsg.models.optimizer_config import OptimizerConfig
from cncscsg.models.trace import Trace
from cncscsg.optim.cnc_scsg import cnc_scsg_escaping
from cncscsg.optim.methods import prepare_config
from cncscsg.optim.scsg import inner_loop_gamma, variance_reduced_steps
from cncscsg.optim.state import Hook, IfoMeter, IterateState, TraceRecorder, is_finite_iterate
from cncscsg.problems.base_problem import FiniteSumProblem
from cncscsg.services.sampling import Rng

logger = logging.getLogger(__name__)

PluginStep = Callable[[FiniteSumProblem, np.ndarray, Rng, IfoMeter], np.ndarray]


@dataclass(frozen=True)
class PluginAlgorithm:
    """An epoch y = A(x) and its per-epoch IFO cost bound."""
    name: str
    step: PluginStep
    ifo_bound: float

    def __call__(self, p: FiniteSumProblem, x: np.ndarray, rng: Rng, meter: IfoMeter) -> np.ndarray:
        return self.step(p, x, rng, meter)


def scsg_epoch_plugin(B1: int, b1: int, eta: float, divergence_bound: float = 1e8) -> PluginAlgorithm:
    """One SCSG epoch with batch B1, minibatch b1 and N ~ Geom(B1/(B1 + b1)) inner steps."""
    if not 1 <= b1 <= B1:
        raise DimensionError(f"plugin sizes must satisfy 1 <= b1 <= B1, got b1={b1}, B1={B1}")
    gamma = inner_loop_gamma(B1, b1)
    expected_steps = gamma / (1.0 - gamma)

    def step(p: FiniteSumProblem, x: np.ndarray, rng: Rng, meter: IfoMeter) -> np.ndarray:
        if B1 > p.n:
            raise DimensionError(f"plugin batch B1={B1} exceeds n={p.n}")
        batch = rng.minibatch(p.n, B1)
        mu = p.grad_minibatch(x, batch)
        meter.batch(B1)
        steps = rng.geometric(gamma)
        state = IterateState(x=x, mu_tilde=mu, fresh=False)
        return variance_reduced_steps(p, x, mu, steps, eta, b1, rng, meter, divergence_bound, state)

    return PluginAlgorithm(name=f"scsg_epoch(B1={B1},b1={b1})", step=step,
                           ifo_bound=B1 + 2.0 * b1 * expected_steps)


def gradient_descent_plugin(eta: float) -> PluginAlgorithm:
    def step(p: FiniteSumProblem, x: np.ndarray, rng: Rng, meter: IfoMeter) -> np.ndarray:
        g = p.grad_full(x)
        meter.full(p.n)
        return x - eta * g

    return PluginAlgorithm(name="gd", step=step, ifo_bound=float("nan"))


def plugin_batch_lower_bound(l: float, eps_g: float) -> float:
    """Smallest B1 for which one SCSG epoch meets the framework's decrease contract."""
    return 12.0 * l ** 2 / eps_g ** 2


def plugin_decrease(eta: float, B1: int, b1: int, eps_g: float) -> float:
    """Guaranteed expected decrease of one SCSG-epoch plug-in away from first-order stationarity."""
    return eta * B1 * eps_g ** 2 / (2.0 * b1)


def sampled_check_size(l: float, eps: float, delta: float) -> int:
    return math.ceil(2.0 * l ** 2 * (1.0 + math.log(1.0 / delta)) / eps ** 2)


def first_order_check_exact(p: FiniteSumProblem, x: np.ndarray, eps: float,
                            meter: Optional[IfoMeter] = None) -> bool:
    g = p.grad_full(x)
    if meter is not None:
        meter.full(p.n)
    return float(np.linalg.norm(g)) <= eps


def first_order_check_sampled(p: FiniteSumProblem, x, eps: float, delta: float, rng: Rng,
                              meter: Optional[IfoMeter] = None) -> bool:
    """||grad_S(x)|| <= eps/2 on |S| indices drawn with replacement.

    Certifies ||grad f(x)|| <= eps with probability at least 1 - delta. When
    |S| would reach n the exact full-gradient check is used instead.
    """
    if not eps > 0 or not 0 < delta < 1:
        raise ValueError(f"need eps > 0 and 0 < delta < 1, got eps={eps}, delta={delta}")
    l = p.metadata.l
    if l is None:
        raise ValueError(f"gradient bound l of {p.metadata.name} is unknown, use the exact first-order check")
    x = p._point(x)
    size = sampled_check_size(l, eps, delta)
    if size >= p.n:
        return first_order_check_exact(p, x, eps, meter)
    sample = rng.indices_with_replacement(p.n, size)
    g = p.grad_minibatch(x, sample)
    if meter is not None:
        meter.batch(size)
    return float(np.linalg.norm(g)) <= eps / 2.0


def framework_run(p: FiniteSumProblem, plugin: PluginAlgorithm, config: OptimizerConfig, rng: Rng,
                  hooks: Sequence[Hook] = (), x0: Optional[np.ndarray] = None,
                  meter: Optional[IfoMeter] = None, probe_every: int = 0, constants=None) -> Trace:
    """y_k = A(x_k); at first-order stationary y_k run the escaping module and
    return y_k once it no longer buys more than f_thres of decrease."""
    cfg = prepare_config(config, p, constants)
    meter = meter or IfoMeter()
    recorder = TraceRecorder(p, rng, meter, probe_every=probe_every, hooks=hooks)
    x = rng.normal(p.d) if x0 is None else p._point(x0).copy()
    eps_g = cfg.resolved_eps_g
    reason = TerminationReason.BUDGET
    final_x = x

    epoch = 0
    try:
        for epoch in range(cfg.max_epochs):
            f_x = recorder.objective(x)
            grad_norm = recorder.monitor_grad_norm(x)
            y = plugin(p, x, rng, meter)
            if not is_finite_iterate(y, cfg.divergence_bound):
                raise DivergenceError(f"plugin {plugin.name} left the finite region at epoch {epoch}",
                                      epoch=epoch, state=IterateState(x=x, mu_tilde=np.zeros(p.d), epoch=epoch))
            if cfg.first_order_check is FirstOrderCheck.SAMPLED:
                stationary = first_order_check_sampled(p, y, eps_g, cfg.delta, rng, meter)
            else:
                stationary = first_order_check_exact(p, y, eps_g, meter)

            recorder.record(epoch, x, f_x, grad_norm, stationary)
            state = IterateState(x=x, mu_tilde=np.zeros(p.d), epoch=epoch, ifo_count=meter.total, fresh=False)
            recorder.notify(epoch, state, EventTag.EPOCH)
            if not stationary:
                x = y
                final_x = x
                continue

            f_y = recorder.objective(y)
            z = cnc_scsg_escaping(p, y, cfg.k_thres, cfg.eta, cfg.r, cfg.b, rng, meter=meter,
                                  divergence_bound=cfg.divergence_bound)
            f_z = recorder.objective(z)
            recorder.perturbation(epoch, -1, cfg.k_thres, grad_norm, f_y, f_z)
            recorder.notify(epoch, IterateState(x=z, mu_tilde=np.zeros(p.d), epoch=epoch, fresh=False),
                            EventTag.PERTURBATION)
            if f_y - f_z <= cfg.f_thres:
                final_x = y
                reason = TerminationReason.F_THRES
                break
            x = z
            final_x = x
    except DivergenceError as e:
        logger.warning(f"framework diverged at epoch {epoch}: {e}")
        reason = TerminationReason.DIVERGED
    except CncScsgError as e:
        logger.error(f"framework failed at epoch {epoch}: {e}")
        raise ExperimentError(f"framework failed at epoch {epoch}: {e}", epoch=epoch) from e

    final_grad = recorder.monitor_grad_norm(final_x) if is_finite_iterate(final_x, np.inf) else float("nan")
    trace = recorder.finish(reason, final_x, final_grad)
    recorder.notify(len(trace.rows), IterateState(x=np.asarray(final_x), mu_tilde=np.zeros(p.d),
                                                  epoch=len(trace.rows), fresh=False), EventTag.TERMINATE)
    logger.info(f"framework[{plugin.name}] finished after {len(trace.rows)} epochs ({reason.value})")
    return trace
