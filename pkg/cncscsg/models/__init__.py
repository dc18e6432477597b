from .enums import (EventTag, FirstOrderCheck, IfoConvention, MethodKind, NoisePattern,
                    RunMode, StoppingRule, TerminationReason)
from .optimizer_config import ConfigViolation, OptimizerConfig, ProblemConstants
from .run_spec import DATASET_PRESETS, RunSpec, SaddleProblemSpec, SigmoidProblemSpec
from .trace import PerturbationEvent, Trace, TraceRow, TraceSummary

__all__ = [
    "EventTag", "FirstOrderCheck", "IfoConvention", "MethodKind", "NoisePattern",
    "RunMode", "StoppingRule", "TerminationReason", "ConfigViolation", "OptimizerConfig",
    "ProblemConstants", "DATASET_PRESETS", "RunSpec", "SaddleProblemSpec", "SigmoidProblemSpec",
    "PerturbationEvent", "Trace", "TraceRow", "TraceSummary",
]
