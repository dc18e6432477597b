from .baselines import baseline_run, build_method
from .cnc_scsg import cnc_scsg_escaping, cnc_scsg_run
from .framework import PluginAlgorithm, framework_run, gradient_descent_plugin, scsg_epoch_plugin
from .scsg import scsg_direction, scsg_epoch
from .state import IfoMeter, IterateState

__all__ = [
    "baseline_run", "build_method", "cnc_scsg_escaping", "cnc_scsg_run", "PluginAlgorithm",
    "framework_run", "gradient_descent_plugin", "scsg_epoch_plugin", "scsg_direction", "scsg_epoch",
    "IfoMeter", "IterateState",
]
