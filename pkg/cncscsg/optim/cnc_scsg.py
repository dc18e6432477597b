import logging
from typing import Optional, Sequence

import numpy as np

from cncscsg.models.optimizer_config import OptimizerConfig
from cncscsg.models.trace import Trace
from cncscsg.optim.methods import ScsgMethod, prepare_config, run_epochs
from cncscsg.optim.scsg import scsg_epoch, sgd_perturbation
from cncscsg.optim.state import Hook, IfoMeter, IterateState
from cncscsg.problems.base_problem import FiniteSumProblem
from cncscsg.services.sampling import Rng

logger = logging.getLogger(__name__)


def cnc_scsg_run(p: FiniteSumProblem, config: OptimizerConfig, rng: Rng, hooks: Sequence[Hook] = (),
                 x0: Optional[np.ndarray] = None, meter: Optional[IfoMeter] = None,
                 probe_every: int = 0, constants=None) -> Trace:
    """CNC-SCSG: SCSG epochs plus one SGD step at first-order stationary snapshots.

    The config is validated (against `constants` in theory mode) before the
    first epoch; x0 defaults to a N(0, I) draw from the init substream.
    """
    config = prepare_config(config, p, constants)
    x0 = rng.normal(p.d) if x0 is None else np.asarray(x0, dtype=np.float64)
    method = ScsgMethod(p, config, rng, meter or IfoMeter(), perturbation="sgd")
    method.name = "cnc_scsg" if config.perturb else "scsg"
    return run_epochs(method, x0, hooks=hooks, probe_every=probe_every)


def cnc_scsg_escaping(p: FiniteSumProblem, x, k_thres: int, eta: float, r: float, b: int, rng: Rng,
                      meter: Optional[IfoMeter] = None, divergence_bound: float = 1e8) -> np.ndarray:
    """One SGD perturbation followed by exactly k_thres + 1 SCSG epochs; returns the last snapshot."""
    if k_thres < 0:
        raise ValueError(f"k_thres must be nonnegative, got {k_thres}")
    meter = meter or IfoMeter()
    x = p._point(x)
    x0, _ = sgd_perturbation(p, x, r, rng, meter)
    state = IterateState(x=x0, mu_tilde=p.grad_full(x0))
    meter.full(p.n)
    for k in range(k_thres + 1):
        state = scsg_epoch(p, state, eta, b, rng, meter=meter, divergence_bound=divergence_bound,
                           refresh_gradient=k < k_thres)
    logger.debug(f"Escaping module ran {k_thres + 1} epochs, ifo={meter.total}")
    return state.x
