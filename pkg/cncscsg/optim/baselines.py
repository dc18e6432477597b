from typing import Optional, Sequence

import numpy as np

from cncscsg.models.enums import MethodKind
from cncscsg.models.optimizer_config import OptimizerConfig
from cncscsg.models.trace import Trace
from cncscsg.optim.methods import (EpochMethod, GradientDescentMethod, ScsgMethod, StochasticGradientMethod,
                                   prepare_config, run_epochs)
from cncscsg.optim.state import Hook, IfoMeter
from cncscsg.problems.base_problem import FiniteSumProblem
from cncscsg.services.sampling import Rng

# method -> (epoch transform, perturbation)
METHOD_TABLE = {
    MethodKind.GD: (GradientDescentMethod, None),
    MethodKind.SGD: (StochasticGradientMethod, None),
    MethodKind.PGD: (GradientDescentMethod, "sphere"),
    MethodKind.CNC_GD: (GradientDescentMethod, "sgd"),
    MethodKind.CNC_SGD: (StochasticGradientMethod, "sgd"),
    MethodKind.SCSG: (ScsgMethod, None),
    MethodKind.CNC_SCSG: (ScsgMethod, "sgd"),
}


def build_method(method: MethodKind, p: FiniteSumProblem, config: OptimizerConfig, rng: Rng,
                 meter: IfoMeter) -> EpochMethod:
    try:
        kind = MethodKind(method)
        method_cls, perturbation = METHOD_TABLE[kind]
    except (ValueError, KeyError):
        raise ValueError(f"Unknown epoch method: {method}")
    instance = method_cls(p, config, rng, meter, perturbation=perturbation)
    instance.name = kind.value
    return instance


def baseline_run(method: MethodKind, p: FiniteSumProblem, config: OptimizerConfig, rng: Rng,
                 hooks: Sequence[Hook] = (), x0: Optional[np.ndarray] = None,
                 meter: Optional[IfoMeter] = None, probe_every: int = 0, constants=None) -> Trace:
    config = prepare_config(config, p, constants)
    x0 = rng.normal(p.d) if x0 is None else np.asarray(x0, dtype=np.float64)
    instance = build_method(method, p, config, rng, meter or IfoMeter())
    return run_epochs(instance, x0, hooks=hooks, probe_every=probe_every)
