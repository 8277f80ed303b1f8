"""Solver-independent optimality residuals for :class:`ConicSolution`."""

from typing import NamedTuple

import numpy as np

from . import problem as cp


class KKTResiduals(NamedTuple):
    """Scaled primal infeasibility, scaled dual infeasibility, duality gap.

    ``primal`` is the largest constraint / cone violation divided by
    ``1 + max|rhs|``; ``dual`` the largest stationarity or dual-cone
    violation divided by ``1 + max|objective coefficient|``; ``gap`` is
    the absolute difference primal minus dual objective.
    """

    primal: float
    dual: float
    gap: float


def _coef_size(coef) -> float:
    return float(np.max(np.abs(coef), initial=0.0))


def kkt_residuals(problem: cp.ConicProblem, solution: cp.ConicSolution) -> KKTResiduals:
    """Residuals computed from problem data and the reported point only."""
    values = solution.primal
    duals = np.asarray(solution.duals, dtype=float)

    rhs_scale = 1.0 + max((abs(c.rhs) for c in problem.constraints), default=0.0)
    pviol = 0.0
    for con in problem.constraints:
        r = cp.evaluate(problem, con.form, values) - con.rhs
        pviol = max(pviol, abs(r) if con.sense == "=" else max(0.0, -r))
    for blk, val in zip(problem.blocks, values):
        if isinstance(blk, (cp.HermitianPSD, cp.Real2x2PSD)):
            pviol = max(pviol, max(0.0, -float(np.linalg.eigvalsh(np.asarray(val))[0])))
        elif isinstance(blk, cp.NonnegScalar):
            pviol = max(pviol, max(0.0, -float(val)))

    obj_scale = 1.0 + max((_coef_size(v) for v in problem.objective.values()), default=0.0)
    dviol = 0.0
    for i, con in enumerate(problem.constraints):
        if con.sense == ">=":
            dviol = max(dviol, max(0.0, -duals[i]))
    for j, blk in enumerate(problem.blocks):
        matrix = isinstance(blk, (cp.HermitianPSD, cp.Real2x2PSD))
        zero = np.zeros((blk.n, blk.n), dtype=complex) if matrix else 0.0
        station = np.asarray(problem.objective.get(j, zero), dtype=complex) if matrix \
            else complex(problem.objective.get(j, 0.0))
        for i, con in enumerate(problem.constraints):
            if j in con.form:
                station = station - duals[i] * np.asarray(con.form[j])
        sdual = solution.block_duals[j]
        if isinstance(blk, cp.FreeScalar):
            dviol = max(dviol, abs(station))
            continue
        station = station - sdual
        dviol = max(dviol, float(np.linalg.norm(np.atleast_1d(station))))
        if matrix:
            dviol = max(dviol, max(0.0, -float(np.linalg.eigvalsh(np.asarray(sdual))[0])))
        else:
            dviol = max(dviol, max(0.0, -float(sdual)))

    pobj = cp.evaluate(problem, problem.objective, values) + problem.offset
    dobj = float(sum(d * c.rhs for d, c in zip(duals, problem.constraints))) + problem.offset
    return KKTResiduals(pviol / rhs_scale, dviol / obj_scale, pobj - dobj)
