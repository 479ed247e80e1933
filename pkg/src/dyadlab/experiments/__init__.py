from .generators import WeightSpec, gen_weight
from .sweep import ExperimentConfig, Instance, build_instance, evaluate_instance, run_sweep

__all__ = [
    "ExperimentConfig",
    "Instance",
    "WeightSpec",
    "build_instance",
    "evaluate_instance",
    "gen_weight",
    "run_sweep",
]
