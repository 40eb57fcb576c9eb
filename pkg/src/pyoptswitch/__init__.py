from pyoptswitch.catalog import load_instance
from pyoptswitch.expr import parse_expression
from pyoptswitch.grid import GridSpec, ValueFields, interpolate
from pyoptswitch.model import DiffusionSpec, SwitchingModel, check_assumptions
from pyoptswitch.montecarlo import simulate_paths, validate_representation
from pyoptswitch.oracle import build_chain, dp_solve, enumerate_strategies
from pyoptswitch.solver import residual_report, solve

__version__ = "0.1.0"

__all__ = [
    "DiffusionSpec",
    "GridSpec",
    "SwitchingModel",
    "ValueFields",
    "build_chain",
    "check_assumptions",
    "dp_solve",
    "enumerate_strategies",
    "interpolate",
    "load_instance",
    "parse_expression",
    "residual_report",
    "simulate_paths",
    "solve",
    "validate_representation",
]
