"""Bistable traveling-wave speeds and profiles for p-Laplacian reaction-diffusion-convection."""

from .expr import (Expression, ExpressionDomainError, ExpressionError, ExpressionSyntaxError,
                   PiecewiseFunction, eval_piecewise, parse_expression)
from .problem import ProblemFormatError, ProblemSpec, load_problem, problem_from_dict

__version__ = "0.1.0"

__all__ = [
    "Expression", "ExpressionDomainError", "ExpressionError", "ExpressionSyntaxError",
    "PiecewiseFunction", "eval_piecewise", "parse_expression",
    "ProblemFormatError", "ProblemSpec", "load_problem", "problem_from_dict",
]
