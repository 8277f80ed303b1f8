"""Zero-forcing (ZF) baseline for the downlink.

Each beamformer is confined to the null space of the other users'
channels, so the design decouples per user. With the interference gone
both constraints of user ``k`` are tight at the optimum:

    SINR:     |h_k^H v_k|^2 = tau_k = gamma (g_bar_k + sigma2 + delta2 / rho_k)
    harvest:  (1 - rho_k) (tau_k + g_tilde_k + sigma2) = q_bar

Eliminating ``tau_k`` leaves ``alpha rho^2 - beta rho - gamma delta2 = 0``
with a single root in (0, 1).
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import CapViolationWarning, ContractError, DegenerateChannel
from .linalg import null_space_basis
from .system import ChannelRealization, RobustBounds, SystemParams, complex_to_json

DEGENERATE_RTOL = 1e-12


@dataclass
class ZfSolution:
    """Per-user ZF design.

    Attributes
    ----------
    v : ndarray, shape (K, n_tx)
        Beamformers with ``h_k^H v_k`` real and nonnegative.
    rho : ndarray, shape (K,)
        Power-splitting ratios.
    p : ndarray, shape (K,)
        Beamformer powers ``||v_k||^2`` (W).
    tau : ndarray, shape (K,)
        Required received signal power per user (W).
    quad : ndarray, shape (K, 3)
        Coefficients ``(alpha, beta, c)`` of ``alpha rho^2 - beta rho - c = 0``.
    objective : float
        ``sum_k p_k`` (W).
    """

    v: np.ndarray
    rho: np.ndarray
    p: np.ndarray
    tau: np.ndarray
    quad: np.ndarray
    objective: float
    cap_violation: bool = False

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "rho": self.rho.tolist(),
            "p": self.p.tolist(),
            "tau": self.tau.tolist(),
            "quad": self.quad.tolist(),
            "v": complex_to_json(self.v),
            "cap_violation": self.cap_violation,
        }


def zf_rho(params: SystemParams, bounds: RobustBounds, k: int):
    """Power-splitting ratio of user ``k`` under ZF.

    Returns
    -------
    rho, alpha, beta, c : float
        The root in (0, 1) and the quadratic's coefficients.
    """
    gamma, s2, d2 = params.gamma_dl, params.sigma2_ms, params.delta2_ms
    alpha = gamma * (bounds.g_bar[k] + s2) + bounds.g_tilde[k] + s2
    beta = alpha - params.q_bar - gamma * d2
    c = gamma * d2
    disc = np.sqrt(beta * beta + 4.0 * alpha * c)
    # the + root, written to avoid cancellation when beta < 0
    if beta >= 0:
        rho = (beta + disc) / (2.0 * alpha)
    else:
        rho = 2.0 * c / (disc - beta)
    return float(rho), float(alpha), float(beta), float(c)


def required_power(params: SystemParams, bounds: RobustBounds, k: int, rho: float) -> float:
    """Received signal power ``tau_k`` that meets the SINR target at ``rho``."""
    return float(params.gamma_dl * (bounds.g_bar[k] + params.sigma2_ms + params.delta2_ms / rho))


def _projected_channel(ch: ChannelRealization, k: int) -> np.ndarray:
    others = np.delete(ch.h_dl, k, axis=0).T
    u = null_space_basis(others)
    return u @ (u.conj().T @ ch.h_dl[k])


def zf_beamformer(params: SystemParams, ch: ChannelRealization, bounds: RobustBounds,
                  k: int, rho_k: float) -> np.ndarray:
    """ZF beamformer of user ``k`` meeting its SINR target with equality.

    ``v = sqrt(tau) g / ||g||^2`` with ``g`` the projection of ``h_k`` onto
    the null space of the other channels.

    Raises
    ------
    DegenerateChannel
        ``||g|| <= 1e-12 ||h_k||``.
    """
    if ch.n_users > ch.h_dl.shape[1]:
        raise ContractError("zero forcing needs at least as many transmit antennas as users")
    g = _projected_channel(ch, k)
    g_norm2 = float(np.real(np.vdot(g, g)))
    if np.sqrt(g_norm2) <= DEGENERATE_RTOL * np.linalg.norm(ch.h_dl[k]):
        raise DegenerateChannel(f"user {k} channel lies in the span of the other users")
    tau = required_power(params, bounds, k, rho_k)
    return np.sqrt(tau) * g / g_norm2


def zf_solve(params: SystemParams, ch: ChannelRealization, bounds: RobustBounds) -> ZfSolution:
    """Closed-form ZF downlink design for every user.

    Raises
    ------
    DegenerateChannel
        Some user's projected channel vanishes.

    Warns
    -----
    CapViolationWarning
        Some ``||v_k||^2`` exceeds ``p_max``.
    """
    k_users = ch.n_users
    rho = np.empty(k_users)
    tau = np.empty(k_users)
    quad = np.empty((k_users, 3))
    v = np.empty((k_users, ch.h_dl.shape[1]), dtype=complex)
    for k in range(k_users):
        rho[k], *quad[k] = zf_rho(params, bounds, k)
        tau[k] = required_power(params, bounds, k, rho[k])
        v[k] = zf_beamformer(params, ch, bounds, k, rho[k])
    p = np.sum(np.abs(v) ** 2, axis=1)
    sol = ZfSolution(v=v, rho=rho, p=p, tau=tau, quad=quad, objective=float(np.sum(p)),
                     cap_violation=bool(np.any(p > params.p_max)))
    if sol.cap_violation:
        warnings.warn("ZF beamformer power exceeds p_max", CapViolationWarning, stacklevel=2)
    return sol
