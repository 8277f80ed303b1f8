"""Dense conic optimisation with Hermitian, 2x2 and scalar blocks."""

from .kkt import KKTResiduals, kkt_residuals
from .problem import (
    INFEASIBLE, MAX_ITER, NUMERICAL_TROUBLE, OPTIMAL, UNBOUNDED,
    ConicProblem, ConicSolution, Constraint, FreeScalar, HermitianPSD,
    NonnegScalar, Real2x2PSD, dumps, entry, evaluate, loads,
)
from .solver import solve

__all__ = [
    "ConicProblem", "ConicSolution", "Constraint", "FreeScalar", "HermitianPSD",
    "KKTResiduals", "NonnegScalar", "Real2x2PSD", "dumps", "entry", "evaluate",
    "kkt_residuals", "loads", "solve",
    "OPTIMAL", "INFEASIBLE", "UNBOUNDED", "MAX_ITER", "NUMERICAL_TROUBLE",
]
