from enum import Enum


class MethodKind(str, Enum):
    """Optimizer to run"""
    GD = "gd"
    SGD = "sgd"
    PGD = "pgd"  # GD + uniform-sphere noise injection near stationary points
    CNC_GD = "cnc_gd"  # GD + one SGD step near stationary points
    CNC_SGD = "cnc_sgd"
    SCSG = "scsg"  # CNC-SCSG with the perturbation branch switched off
    CNC_SCSG = "cnc_scsg"
    FRAMEWORK = "framework"  # generic framework with the SCSG-epoch plug-in


class RunMode(str, Enum):
    """Which constraint system the optimizer config is validated against"""
    PRACTICAL = "practical"
    THEORY = "theory"


class StoppingRule(str, Enum):
    STALL = "stall"  # stop when the objective stops improving near a stationary point
    F_THRES = "f_thres"  # (f_thres, k_thres) rule used in the proofs


class IfoConvention(str, Enum):
    PAPER = "paper"  # b IFO per inner variance-reduced step
    STRICT = "strict"  # 2b IFO per inner step (both minibatch gradients)


class FirstOrderCheck(str, Enum):
    EXACT = "exact"
    SAMPLED = "sampled"


class TerminationReason(str, Enum):
    BUDGET = "budget"
    STALLED = "stalled"
    F_THRES = "f_thres"
    DIVERGED = "diverged"


class NoisePattern(str, Enum):
    """Stochastic-gradient noise vectors c_z of the quadratic saddle"""
    ZERO = "zero"
    PM = "pm"  # +/- scale * e_j along the most negative eigen-direction, split evenly
    GAUSSIAN = "gaussian"


class EventTag(str, Enum):
    """Tags passed to run hooks at epoch boundaries"""
    EPOCH = "epoch"
    PERTURBATION = "perturbation"
    TERMINATE = "terminate"
