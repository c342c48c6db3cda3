"""Coherent-state propagators for 1D polynomial Hamiltonians.

Exact truncated-Fock-basis propagation plus four semiclassical formulas
built on complex classical trajectories (normal-ordered, anti-normal,
mixed, and Weyl symbol forms), with the finite-step stationary system of
the mixed form for convergence checks.
"""

from .symbols import (
    DEFAULT_MAX_DEGREE,
    OperatorPoly,
    ScaleParams,
    SymbolPoly,
    apply_delta_exp,
    effective_symbol,
    op_multiply,
    p_symbol,
    q_symbol,
    symbol_derivative,
    symbol_eval,
    weyl_symbol,
)
from .parser import ExpressionError, parse_hamiltonian

__all__ = [
    "DEFAULT_MAX_DEGREE",
    "OperatorPoly",
    "ScaleParams",
    "SymbolPoly",
    "apply_delta_exp",
    "effective_symbol",
    "op_multiply",
    "p_symbol",
    "q_symbol",
    "symbol_derivative",
    "symbol_eval",
    "weyl_symbol",
    "ExpressionError",
    "parse_hamiltonian",
]

__version__ = "0.1.0"
