"""Epoch-based methods and the shared driver loop.

Each method turns one epoch state into the next and may carry a
perturbation. The driver owns the gating (t_noise, ||mu_tilde|| <= eps),
stopping rules, divergence guard, trace rows and hooks, so every method
shares one trace schema and one accounting.
"""
import logging
from abc import ABC, abstractmethod
from typing import Optional, Sequence, Tuple

import numpy as np

from cncscsg.core.exceptions import CncScsgError, ConfigError, DivergenceError, ExperimentError
from cncscsg.models.enums import EventTag, StoppingRule, TerminationReason
from cncscsg.models.optimizer_config import OptimizerConfig
from cncscsg.models.trace import Trace
from cncscsg.optim.scsg import scsg_epoch, sgd_perturbation, sphere_perturbation
from cncscsg.optim.state import (Hook, IfoMeter, IterateState, StallMonitor, TraceRecorder,
                                 is_finite_iterate)
from cncscsg.problems.base_problem import FiniteSumProblem
from cncscsg.services.parameters import ensure_valid
from cncscsg.services.sampling import Rng

logger = logging.getLogger(__name__)


class EpochMethod(ABC):
    """One optimizer as an epoch transform plus an optional perturbation."""

    name = "method"
    # Whether the per-epoch full gradient is part of the method (charged) or monitoring only
    gradient_counted = True

    def __init__(self, problem: FiniteSumProblem, config: OptimizerConfig, rng: Rng, meter: IfoMeter,
                 perturbation: Optional[str] = None):
        self.problem = problem
        self.config = config
        self.rng = rng
        self.meter = meter
        # None, "sgd" (one step x - r * grad f_i) or "sphere" (uniform noise of radius pgd_radius)
        self.perturbation = perturbation
        self.recorder: Optional[TraceRecorder] = None

    @property
    def perturbs(self) -> bool:
        return self.perturbation is not None and self.config.perturb

    def full_gradient(self, x: np.ndarray) -> np.ndarray:
        if self.gradient_counted:
            g = self.problem.grad_full(x)
            self.meter.full(self.problem.n)
            return g
        with self.problem.uncounted():
            return self.problem.grad_full(x)

    def initial_state(self, x0: np.ndarray) -> IterateState:
        return IterateState(x=x0.copy(), mu_tilde=self.full_gradient(x0), ifo_count=self.meter.total)

    def next_state(self, state: IterateState, x: np.ndarray, refresh: bool) -> IterateState:
        mu = self.full_gradient(x) if refresh else state.mu_tilde.copy()
        return IterateState(x=x, mu_tilde=mu, epoch=state.epoch + 1, t_noise=state.t_noise + 1,
                            ifo_count=self.meter.total, fresh=refresh)

    @abstractmethod
    def advance(self, state: IterateState, refresh: bool = True) -> IterateState:
        """Next epoch state; `refresh=False` skips the closing full gradient (last epoch)."""

    def perturb(self, state: IterateState) -> Tuple[IterateState, int]:
        """Apply the method's perturbation; returns the new state and the component index (-1 for noise)."""
        if self.perturbation == "sgd":
            x, index = sgd_perturbation(self.problem, state.x, self.config.r, self.rng, self.meter)
        elif self.perturbation == "sphere":
            x, index = sphere_perturbation(self.problem, state.x, self.config.pgd_radius, self.rng), -1
        else:
            raise ValueError(f"{self.name} has no perturbation step")
        if not is_finite_iterate(x, self.config.divergence_bound):
            raise DivergenceError(f"perturbation left the finite region at epoch {state.epoch}",
                                  state=state.copy(), epoch=state.epoch)
        new_state = IterateState(x=x, mu_tilde=self.full_gradient(x), epoch=state.epoch, t_noise=0,
                                 ifo_count=self.meter.total)
        return new_state, index


class GradientDescentMethod(EpochMethod):
    """One full gradient step per epoch."""
    name = "gd"

    def advance(self, state: IterateState, refresh: bool = True) -> IterateState:
        x = state.x - self.config.eta * state.mu_tilde
        if not is_finite_iterate(x, self.config.divergence_bound):
            raise DivergenceError(f"iterate diverged at epoch {state.epoch}", state=state.copy(), epoch=state.epoch)
        return self.next_state(state, x, refresh)


class StochasticGradientMethod(EpochMethod):
    """n single-sample steps per epoch, so one epoch costs n IFO like the others."""
    name = "sgd"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        # The gating check is the only reason to pay for a full gradient
        self.gradient_counted = self.perturbs

    def advance(self, state: IterateState, refresh: bool = True) -> IterateState:
        p, eta = self.problem, self.config.resolved_sgd_eta
        x = state.x.copy()
        for step in range(p.n):
            index = self.rng.index(p.n)
            x = x - eta * p.grad_component(x, index)
            self.meter.single()
            if not is_finite_iterate(x, self.config.divergence_bound):
                raise DivergenceError(f"iterate diverged at epoch {state.epoch}, step {step}",
                                      state=state.copy(), epoch=state.epoch)
        return self.next_state(state, x, refresh)


class ScsgMethod(EpochMethod):
    """SCSG epochs; with the SGD perturbation this is CNC-SCSG."""
    name = "scsg"

    def advance(self, state: IterateState, refresh: bool = True) -> IterateState:
        cfg = self.config
        return scsg_epoch(self.problem, state, cfg.eta, cfg.b, self.rng, meter=self.meter,
                          divergence_bound=cfg.divergence_bound, refresh_gradient=refresh,
                          perturb_every=cfg.inner_perturb_every if self.perturbs else None,
                          r=cfg.r, on_perturb=self._inner_perturbation(state))

    def _inner_perturbation(self, state: IterateState):
        recorder = self.recorder
        if recorder is None:
            return None

        def on_perturb(step: int, index: int, before: np.ndarray, after: np.ndarray):
            recorder.perturbation(state.epoch, index, state.t_noise, state.grad_norm,
                                  recorder.objective(before), recorder.objective(after), inner_step=step)
        return on_perturb


def run_epochs(method: EpochMethod, x0: np.ndarray, hooks: Sequence[Hook] = (),
               probe_every: int = 0) -> Trace:
    """Drive `method` for at most config.max_epochs epochs.

    Row k holds the state at the start of epoch k, before any perturbation
    fired in it. A perturbation fires when t_noise >= k_thres and
    ||mu_tilde|| <= eps.
    """
    p, cfg, meter = method.problem, method.config, method.meter
    recorder = TraceRecorder(p, method.rng, meter, probe_every=probe_every, hooks=hooks)
    method.recorder = recorder
    stall = StallMonitor(cfg.stall_tol, cfg.stall_epochs)

    state = method.initial_state(np.asarray(x0, dtype=np.float64))
    state.t_noise = cfg.k_thres if cfg.arm_at_start else 0
    # (x, f, grad norm) at the last perturbation, for the f_thres rule
    anchor: Optional[Tuple[np.ndarray, float, float]] = None
    perturbed_once = False
    reason = TerminationReason.BUDGET
    final_x, final_grad = state.x, state.grad_norm

    epoch = 0
    try:
        for epoch in range(cfg.max_epochs):
            state.epoch = epoch
            f = recorder.objective(state.x)
            if not is_finite_iterate(state.x, cfg.divergence_bound, f):
                raise DivergenceError(f"objective not finite at epoch {epoch}", state=state.copy(), epoch=epoch)
            grad_norm = state.grad_norm
            final_x, final_grad = state.x, grad_norm

            if cfg.stopping_rule is StoppingRule.F_THRES:
                if anchor is not None and state.t_noise >= cfg.k_thres:
                    anchor_x, anchor_f, anchor_grad = anchor
                    if anchor_f - f < cfg.f_thres:
                        recorder.record(epoch, state.x, f, grad_norm, False)
                        reason = TerminationReason.F_THRES
                        # The point the perturbation started from is the certified one
                        final_x, final_grad = anchor_x, anchor_grad
                        break
                    anchor = None
            else:
                stalled = stall.observe(f)
                if stalled and grad_norm <= cfg.eps and (perturbed_once or not method.perturbs):
                    recorder.record(epoch, state.x, f, grad_norm, False)
                    reason = TerminationReason.STALLED
                    break

            fire = method.perturbs and state.t_noise >= cfg.k_thres and grad_norm <= cfg.eps
            recorder.record(epoch, state.x, f, grad_norm, fire)
            recorder.notify(epoch, state, EventTag.EPOCH)
            if fire:
                t_noise = state.t_noise
                anchor = (state.x.copy(), f, grad_norm)
                state, index = method.perturb(state)
                recorder.perturbation(epoch, index, t_noise, grad_norm, f, recorder.objective(state.x))
                recorder.notify(epoch, state, EventTag.PERTURBATION)
                perturbed_once = True
                stall.reset()

            # the last epoch's closing gradient would never be used
            state = method.advance(state, refresh=epoch < cfg.max_epochs - 1)
            final_x = state.x
            final_grad = state.grad_norm if state.fresh else recorder.monitor_grad_norm(state.x)
    except DivergenceError as e:
        logger.warning(f"{method.name} diverged at epoch {e.epoch}: {e}")
        reason = TerminationReason.DIVERGED
        if e.state is not None:
            final_x, final_grad = e.state.x, e.state.grad_norm
    except CncScsgError as e:
        logger.error(f"{method.name} failed at epoch {epoch}: {e}")
        raise ExperimentError(f"{method.name} failed at epoch {epoch}: {e}", epoch=epoch) from e

    trace = recorder.finish(reason, final_x, final_grad)
    recorder.notify(len(trace.rows), IterateState(x=np.asarray(final_x), mu_tilde=state.mu_tilde,
                                                 epoch=len(trace.rows), t_noise=state.t_noise,
                                                 ifo_count=meter.total, fresh=False), EventTag.TERMINATE)
    logger.info(f"{method.name} finished after {len(trace.rows)} epochs ({reason.value}), "
                f"ifo={meter.total}, |g|={final_grad:.3e}")
    return trace


def prepare_config(config: OptimizerConfig, problem: FiniteSumProblem, constants=None) -> OptimizerConfig:
    """Bind n to the problem and reject invalid configs before the first epoch."""
    if config.n is None:
        config = config.with_n(problem.n)
    elif config.n != problem.n:
        raise ConfigError(f"config n={config.n} does not match the problem's n={problem.n}")
    return ensure_valid(config, constants)
