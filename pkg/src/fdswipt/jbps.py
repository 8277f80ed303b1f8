"""Joint beamforming and power splitting (JBPS) for the downlink.

The relaxed downlink design replaces each ``v_k v_k^H`` by a PSD matrix
``Z_k`` and keeps the power-splitting ratios ``rho_k`` as variables:

    minimize    sum_k tr(Z_k)
    subject to  h_k^H Z_k h_k / gamma - sum_{j != k} h_k^H Z_j h_k
                    >= g_bar_k + sigma2 + delta2 / rho_k
                sum_j h_k^H Z_j h_k + g_tilde_k + sigma2 >= q_bar / (1 - rho_k)

The two reciprocal terms are lifted into 2x2 PSD blocks
``[[t_k, delta], [delta, rho_k]]`` and ``[[u_k, sqrt(q)], [sqrt(q), 1 - rho_k]]``
so the whole problem is a linear conic program. The optimum is rank one,
so beamformers are read off the top eigenpair of each ``Z_k``; the
multipliers of the two constraint families give a dual certificate
``A_k`` that proves it.
"""

import warnings
from dataclasses import dataclass, field
from typing import List

import numpy as np

from . import conic
from .exceptions import (CapViolationWarning, InfeasibleError, RankDeficiencyWarning,
                         SolverError)
from .linalg import hermitian_eig
from .system import (ChannelRealization, RobustBounds, SystemParams, complex_from_json,
                     complex_to_json)

RHO_MARGIN = 1e-9
RANK_WARN = 1e-5
DEFAULT_TOL = 1e-11
# a solve that stalls within this factor of tol is kept: the remaining
# error is rounding in the barely interior 2x2 blocks
STALL_ACCEPT = 100.0


@dataclass
class UserCertificate:
    rank_ratio: float
    sinr_slack: float
    harvest_slack: float
    cert_min_eig: float
    cert_compl_norm: float
    cert_norm: float
    lam: float
    mu: float
    trace: float

    @property
    def duals_positive(self) -> bool:
        return self.lam > 1e-10 and self.mu > 1e-10

    def holds(self, rank_tol=1e-6, slack_tol=1e-6, eig_tol=1e-7, compl_tol=1e-6) -> bool:
        """Rank one, both constraints tight, ``A_k`` PSD and ``A_k Z_k = 0``."""
        return (self.rank_ratio <= rank_tol
                and abs(self.sinr_slack) <= slack_tol
                and abs(self.harvest_slack) <= slack_tol
                and self.cert_min_eig >= -eig_tol * (1.0 + self.cert_norm)
                and self.cert_compl_norm <= compl_tol * self.trace)


@dataclass
class DownlinkSolution:
    """Relaxed downlink optimum with recovered beamformers.

    Attributes
    ----------
    v : ndarray, shape (K, n_tx)
        Beamformers, phase-aligned so ``h_k^H v_k`` is real and >= 0.
    rho : ndarray, shape (K,)
        Power-splitting ratios.
    z : ndarray, shape (K, n_tx, n_tx)
        Relaxed beamforming matrices as returned by the conic solver.
    objective : float
        ``sum_k ||v_k||^2`` (W). Equals the relaxed optimum up to solver
        tolerance when the relaxation is tight.
    lam, mu : ndarray
        Multipliers of the SINR and harvesting constraints.
    certificates : list of UserCertificate
    """

    v: np.ndarray
    rho: np.ndarray
    z: np.ndarray
    objective: float
    lam: np.ndarray
    mu: np.ndarray
    certificates: List[UserCertificate] = field(default_factory=list)
    conic_solution: conic.ConicSolution = None
    rank_deficient: bool = False
    cap_violation: bool = False

    @property
    def powers(self) -> np.ndarray:
        return np.sum(np.abs(self.v) ** 2, axis=1)

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "rho": self.rho.tolist(),
            "v": complex_to_json(self.v),
            "z": complex_to_json(self.z),
            "lam": self.lam.tolist(),
            "mu": self.mu.tolist(),
            "rank_deficient": self.rank_deficient,
            "cap_violation": self.cap_violation,
            "certificates": [vars(c) for c in self.certificates],
        }


def solution_from_dict(data: dict) -> DownlinkSolution:
    """Inverse of :meth:`DownlinkSolution.to_dict` (without the conic solution)."""
    return DownlinkSolution(
        v=complex_from_json(data["v"]), rho=np.asarray(data["rho"], dtype=float),
        z=complex_from_json(data["z"]), objective=float(data["objective"]),
        lam=np.asarray(data["lam"], dtype=float), mu=np.asarray(data["mu"], dtype=float),
        rank_deficient=bool(data.get("rank_deficient", False)),
        cap_violation=bool(data.get("cap_violation", False)))


def power_scale(params: SystemParams, ch: ChannelRealization, bounds: RobustBounds) -> float:
    """Sum of interference-free single-user powers; a natural unit for the objective."""
    gains = np.sum(np.abs(ch.h_dl) ** 2, axis=1)
    return float(np.sum(params.gamma_dl * (bounds.g_bar + params.sigma2_ms) / gains))


def build_sdr(params: SystemParams, ch: ChannelRealization, bounds: RobustBounds,
              objective_scale: float = 1.0) -> conic.ConicProblem:
    """Conic form of the relaxed downlink problem.

    Blocks are ``Z_0 .. Z_{K-1}`` followed by the pairs
    ``(sinr_k, harvest_k)`` of 2x2 blocks. Constraints are named
    ``sinr_k``, ``harvest_k``, ``delta_k``, ``sqrtq_k``, ``split_k``,
    ``rho_lo_k`` and ``rho_hi_k``. The objective is ``sum_k tr(Z_k)``
    divided by ``objective_scale``, which leaves the minimizer unchanged
    and divides every multiplier by the same factor.
    """
    k_users, n_t = ch.h_dl.shape
    # received-power coefficients: h^H Z h = Re tr(C Z) with C = h h^H
    # (h_dl stores the conjugated channel, so h^H Z h uses h directly)
    coefs = [np.outer(h, h.conj()) for h in ch.h_dl]
    blocks = [conic.HermitianPSD(n_t) for _ in range(k_users)]
    blocks += [conic.Real2x2PSD() for _ in range(2 * k_users)]

    def sinr_block(k):
        return k_users + 2 * k

    def harv_block(k):
        return k_users + 2 * k + 1

    e00, e01, e11 = conic.entry(0, 0), conic.entry(0, 1), conic.entry(1, 1)
    delta = np.sqrt(params.delta2_ms)
    sqrt_q = np.sqrt(params.q_bar)
    cons = []
    for k in range(k_users):
        form = {j: (coefs[k] / params.gamma_dl if j == k else -coefs[k]) for j in range(k_users)}
        form[sinr_block(k)] = -e00
        cons.append(conic.Constraint(form, ">=", bounds.g_bar[k] + params.sigma2_ms, f"sinr_{k}"))
    for k in range(k_users):
        form = {j: coefs[k] for j in range(k_users)}
        form[harv_block(k)] = -e00
        cons.append(conic.Constraint(form, ">=", -bounds.g_tilde[k] - params.sigma2_ms,
                                     f"harvest_{k}"))
    for k in range(k_users):
        cons.append(conic.Constraint({sinr_block(k): e01}, "=", delta, f"delta_{k}"))
        cons.append(conic.Constraint({harv_block(k): e01}, "=", sqrt_q, f"sqrtq_{k}"))
        cons.append(conic.Constraint({sinr_block(k): e11, harv_block(k): e11}, "=", 1.0,
                                     f"split_{k}"))
        cons.append(conic.Constraint({sinr_block(k): e11}, ">=", RHO_MARGIN, f"rho_lo_{k}"))
        cons.append(conic.Constraint({harv_block(k): e11}, ">=", RHO_MARGIN, f"rho_hi_{k}"))
    objective = {k: np.eye(n_t, dtype=complex) / objective_scale for k in range(k_users)}
    return conic.ConicProblem(blocks, objective, cons)


def received_powers(h_dl: np.ndarray, z: np.ndarray) -> np.ndarray:
    """``P[k, j] = h_k^H Z_j h_k``."""
    return np.real(np.einsum("ka,jab,kb->kj", h_dl.conj(), z, h_dl))


def constraint_slacks(params, ch, bounds, z, rho):
    """Relative slacks (achieved / required - 1) of both constraint families."""
    p = received_powers(ch.h_dl, z)
    own = np.diag(p)
    interf = p.sum(axis=1) - own
    sinr_lhs = own / params.gamma_dl - interf
    sinr_rhs = bounds.g_bar + params.sigma2_ms + params.delta2_ms / rho
    harv_lhs = p.sum(axis=1) + bounds.g_tilde + params.sigma2_ms
    harv_rhs = params.q_bar / (1.0 - rho)
    return sinr_lhs / sinr_rhs - 1.0, harv_lhs / harv_rhs - 1.0


def dual_certificate(params, ch, lam, mu, k) -> np.ndarray:
    """``A_k = I + sum_j (lam_j - mu_j) h_j h_j^H - lam_k (1/gamma + 1) h_k h_k^H``."""
    n_t = ch.h_dl.shape[1]
    outers = np.array([np.outer(h, h.conj()) for h in ch.h_dl])
    a = np.eye(n_t, dtype=complex) + np.einsum("j,jab->ab", lam - mu, outers)
    a -= lam[k] * (1.0 / params.gamma_dl + 1.0) * outers[k]
    return 0.5 * (a + a.conj().T)


def certify(sol: DownlinkSolution, params: SystemParams, ch: ChannelRealization,
            bounds: RobustBounds) -> List[UserCertificate]:
    """Check the optimality structure of a relaxed downlink optimum.

    For every user this rebuilds ``A_k`` from the reported multipliers and
    records its smallest eigenvalue, ``||A_k Z_k||_F`` and the eigenvalue
    ratio ``lambda_2 / lambda_1`` of the relaxed ``Z_k``, plus the relative
    slack of both constraints at the returned beamformers.
    """
    outer = np.einsum("ka,kb->kab", sol.v, sol.v.conj())
    sinr_slack, harv_slack = constraint_slacks(params, ch, bounds, outer, sol.rho)
    report = []
    for k in range(ch.n_users):
        a = dual_certificate(params, ch, sol.lam, sol.mu, k)
        eig_a = np.linalg.eigvalsh(a)
        report.append(UserCertificate(
            rank_ratio=_rank_ratio(sol.z[k]),
            sinr_slack=float(sinr_slack[k]),
            harvest_slack=float(harv_slack[k]),
            cert_min_eig=float(eig_a[0]),
            cert_compl_norm=float(np.linalg.norm(a @ sol.z[k], "fro")),
            cert_norm=float(np.linalg.norm(a, 2)),
            lam=float(sol.lam[k]),
            mu=float(sol.mu[k]),
            trace=float(np.real(np.trace(sol.z[k]))),
        ))
    return report


def _rank_ratio(z) -> float:
    eig = hermitian_eig(0.5 * (z + z.conj().T)).eigenvalues
    if eig.size < 2 or eig[0] <= 0:
        return 0.0
    return float(max(eig[1], 0.0) / eig[0])


def extract_beamformer(z: np.ndarray, h: np.ndarray) -> np.ndarray:
    """``sqrt(lambda_1)`` times the top eigenvector, rotated so ``h^H v >= 0``."""
    eig = hermitian_eig(0.5 * (z + z.conj().T))
    v = np.sqrt(max(eig.eigenvalues[0], 0.0)) * eig.eigenvectors[:, 0]
    proj = np.vdot(h, v)
    if abs(proj) > 0:
        v = v * (abs(proj) / proj)
    return v


def _tight_point(params, bounds, gains, rho0, max_iter=60):
    """Powers and ratios making every SINR and harvesting constraint tight.

    ``gains[k, j] = |h_k^H u_j|^2`` for unit beam directions ``u_j``. For
    fixed ``rho`` the SINR equalities are linear in the powers; the
    harvesting equalities are then solved for ``logit(rho)`` by damped
    Newton. Returns ``(p, rho)`` or ``None``.
    """
    gamma, q, d2, s2 = params.gamma_dl, params.q_bar, params.delta2_ms, params.sigma2_ms
    m = -gains.copy()
    m[np.diag_indices_from(m)] = np.diag(gains) / gamma
    try:
        m_inv = np.linalg.inv(m)
    except np.linalg.LinAlgError:
        return None
    sens = gains @ m_inv

    def evaluate(t):
        rho = 1.0 / (1.0 + np.exp(-t))
        p = m_inv @ (bounds.g_bar + s2 + d2 / rho)
        need = q / (1.0 - rho)
        return p, rho, (gains @ p + bounds.g_tilde + s2 - need) / need

    t = np.log(rho0) - np.log1p(-rho0)
    p, rho, r = evaluate(t)
    for _ in range(max_iter):
        if np.max(np.abs(r)) <= 1e-14:
            break
        need = q / (1.0 - rho)
        drho = rho * (1.0 - rho)
        # d r_k / d t_j
        jac = sens * (-d2 / rho ** 2 * drho)[None, :]
        jac[np.diag_indices_from(jac)] -= q / (1.0 - rho) ** 2 * drho
        jac /= need[:, None]
        jac[np.diag_indices_from(jac)] -= r * rho  # from the 1/need factor
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            return None
        step_size = 1.0
        while step_size > 1e-8:
            cand = evaluate(t + step_size * step)
            if np.linalg.norm(cand[2]) < np.linalg.norm(r):
                break
            step_size *= 0.5
        else:
            break
        t = t + step_size * step
        p, rho, r = cand
    if np.max(np.abs(r)) > 1e-10 or np.any(p <= 0):
        return None
    return p, rho


def polish(params, ch, bounds, z, rho):
    """Rank-one point with every constraint tight, along the beam directions of ``z``.

    Interior-point iterates stop short of the constraint boundary; this
    moves powers and splitting ratios onto it without changing directions.
    Returns ``(v, rho)`` or ``None`` when the tight system has no admissible
    solution near ``rho``.
    """
    dirs = np.array([extract_beamformer(z[k], ch.h_dl[k]) for k in range(ch.n_users)])
    norms = np.linalg.norm(dirs, axis=1)
    if np.any(norms <= 0):
        return None
    dirs = dirs / norms[:, None]
    gains = np.abs(ch.h_dl.conj() @ dirs.T) ** 2
    found = _tight_point(params, bounds, gains, np.clip(rho, 1e-15, 1.0 - 1e-15))
    if found is None:
        return None
    p, rho = found
    return dirs * np.sqrt(p)[:, None], rho


def solve_downlink(params: SystemParams, ch: ChannelRealization, bounds: RobustBounds,
                   tol: float = DEFAULT_TOL) -> DownlinkSolution:
    """Solve the relaxed downlink problem and recover rank-one beamformers.

    Raises
    ------
    InfeasibleError
        The solver returned an infeasibility certificate.
    SolverError
        The solver hit its iteration cap or numerical trouble.

    Warns
    -----
    RankDeficiencyWarning
        Some ``Z_k`` has eigenvalue ratio above 1e-5; the top eigenpair is
        still used.
    CapViolationWarning
        Some ``tr(Z_k)`` exceeds ``p_max`` (the relaxation does not enforce it).
    """
    # solver tolerances are relative to 1 + |objective|; work in units where
    # the optimum is of order one
    scale = power_scale(params, ch, bounds)
    problem = build_sdr(params, ch, bounds, objective_scale=scale)
    res = conic.solve(problem, tol=tol)
    if res.status == conic.INFEASIBLE:
        raise InfeasibleError("downlink SINR / harvesting targets are infeasible")
    stalled = (res.status == conic.MAX_ITER and res.certificate is not None
               and res.certificate.get("merit", np.inf) <= STALL_ACCEPT * tol)
    if res.status != conic.OPTIMAL and not stalled:
        raise SolverError(f"downlink solve ended with status {res.status}", res.status)
    k_users = ch.n_users
    z = np.array([0.5 * (m + m.conj().T) for m in res.primal[:k_users]])
    rho = np.array([res.primal[k_users + 2 * k][1, 1] for k in range(k_users)])
    lam = res.duals[problem.constraint_indices("sinr_")] * scale
    mu = res.duals[problem.constraint_indices("harvest_")] * scale
    v = np.array([extract_beamformer(z[k], ch.h_dl[k]) for k in range(k_users)])
    polished = polish(params, ch, bounds, z, rho)
    if polished is not None:
        v, rho = polished
    sol = DownlinkSolution(v=v, rho=rho, z=z, objective=float(np.sum(np.abs(v) ** 2)),
                           lam=lam, mu=mu, conic_solution=res)
    sol.certificates = certify(sol, params, ch, bounds)
    sol.rank_deficient = any(c.rank_ratio > RANK_WARN for c in sol.certificates)
    sol.cap_violation = bool(np.any(sol.powers > params.p_max))
    if sol.rank_deficient:
        warnings.warn("relaxed downlink solution is not numerically rank one",
                      RankDeficiencyWarning, stacklevel=2)
    if sol.cap_violation:
        warnings.warn("downlink beamformer power exceeds p_max", CapViolationWarning,
                      stacklevel=2)
    return sol
