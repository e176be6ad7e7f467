"""Coherent quantum filtering: cost, gradients, optimality conditions, synthesis."""

from .conditions import (StationarityReport, closed_form_L, closed_form_M,
                         hankelian_identity_residual, jacobi_residual, lie_forms,
                         stationarity)
from .cost import CostBreakdown, GradientPair, evaluate_cost, gradients
from .lagrange import LagrangianCheck, MultiplierSolution, lagrangian_check, solve_multiplier
from .optimize import (MultiStartResult, OptimizerOptions, SynthesisResult, TraceRow,
                       initial_observer, multistart, optimize)

__all__ = [
    "CostBreakdown",
    "GradientPair",
    "StationarityReport",
    "OptimizerOptions",
    "TraceRow",
    "SynthesisResult",
    "MultiStartResult",
    "evaluate_cost",
    "gradients",
    "stationarity",
    "lie_forms",
    "hankelian_identity_residual",
    "jacobi_residual",
    "closed_form_L",
    "closed_form_M",
    "LagrangianCheck",
    "MultiplierSolution",
    "lagrangian_check",
    "solve_multiplier",
    "initial_observer",
    "optimize",
    "multistart",
]
