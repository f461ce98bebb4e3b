"""Numerical laboratory for null control of stochastic parabolic cascade systems."""
from .adjoint import Sources, solve_adjoint
from .backward import duality_gap, solve_backward_direct, solve_backward_transpose
from .config import ExperimentConfig, parse_config, serialize
from .errors import (
    ConfigError,
    ConvergenceFailure,
    EigensolverFailure,
    InvalidArgument,
    LabError,
    NumericalBlowup,
)
from .grid import Grid1D, SubdomainMask
from .hum import synthesize_control
from .model import CascadeCoefficients, PiecewiseField, compute_K, compute_lambda0
from .observability import assemble_gramian, estimate_observability_constant, unique_continuation_probe
from .tree import AdaptedField, ScenarioTree, build_tree

__version__ = "0.1.0"
