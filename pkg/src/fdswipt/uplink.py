"""Uplink power control with linear MMSE (Wiener) receive filters.

The base station sees user ``k`` with SINR

    p_k |w_k^H h_k|^2 / (sum_{j != k} p_j |w_k^H h_j|^2 + (e_bar + sigma2) ||w_k||^2)

where ``e_bar`` bounds the residual loop interference. Filters and powers
are updated alternately: the Wiener filter maximises every SINR for the
current powers, and the powers are then set to the smallest values that
meet the target for the current filters.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import InfeasibleUplink, NonConvergence
from .linalg import solve_hermitian_pd
from .system import ChannelRealization, RobustBounds, SystemParams, complex_to_json

log = logging.getLogger(__name__)

MAX_ITER = 50
REL_TOL = 1e-8
# final powers are raised by this relative margin so that rounding never
# leaves an SINR just below its target
SAFETY = 1e-12


@dataclass
class UplinkSolution:
    """Uplink filters and powers.

    Attributes
    ----------
    w : ndarray, shape (K, n_rx)
        Receive filters.
    p_up : ndarray, shape (K,)
        Transmit powers (W).
    sinr : ndarray, shape (K,)
        Achieved SINRs (linear).
    iterations : int
    converged : bool
    """

    w: np.ndarray
    p_up: np.ndarray
    sinr: np.ndarray
    iterations: int
    converged: bool

    @property
    def total(self) -> float:
        return float(np.sum(self.p_up))

    def to_dict(self) -> dict:
        return {
            "p_up": self.p_up.tolist(),
            "sinr": self.sinr.tolist(),
            "w": complex_to_json(self.w),
            "iterations": self.iterations,
            "converged": self.converged,
        }


def wiener_filter(ch: ChannelRealization, p_up, noise_plus_si: float) -> np.ndarray:
    """``w_k = (sum_j p_j h_j h_j^H + n I)^-1 sqrt(p_k) h_k`` for every user."""
    p_up = np.asarray(p_up, dtype=float)
    h = ch.h_ul
    cov = np.einsum("j,ja,jb->ab", p_up, h, h.conj()) + noise_plus_si * np.eye(h.shape[1])
    return solve_hermitian_pd(cov, (h * np.sqrt(p_up)[:, None]).T).T


def _coupling(ch, w):
    """``a[k, j] = |w_k^H h_j|^2``."""
    return np.abs(w.conj() @ ch.h_ul.T) ** 2


def uplink_sinr(ch: ChannelRealization, w, p_up, e_bar: float, sigma2_bs: float) -> np.ndarray:
    a = _coupling(ch, w)
    own = np.diag(a) * p_up
    interf = a @ p_up - own
    noise = (e_bar + sigma2_bs) * np.sum(np.abs(w) ** 2, axis=1)
    return own / (interf + noise)


def min_uplink_power(ch: ChannelRealization, w, e_bar: float, sigma2_bs: float,
                     gamma_ul: float, p_up_others, p_cap: float = None) -> np.ndarray:
    """Smallest power of each user meeting its SINR target, others held fixed.

    ``p_up_others[j]`` is the power assumed for user ``j`` when it
    interferes with another user.

    Raises
    ------
    InfeasibleUplink
        A filter collects no signal from its own user, or a required power
        exceeds ``p_cap``.
    """
    a = _coupling(ch, w)
    p_others = np.asarray(p_up_others, dtype=float)
    own = np.diag(a)
    interf = a @ p_others - own * p_others
    noise = (e_bar + sigma2_bs) * np.sum(np.abs(w) ** 2, axis=1)
    if np.any(own <= 0):
        raise InfeasibleUplink("a receive filter is orthogonal to its own user's channel")
    p = gamma_ul * (interf + noise) / own
    if p_cap is not None and np.any(p > p_cap):
        raise InfeasibleUplink(f"required uplink power {np.max(p):.3e} W exceeds cap {p_cap:.3e} W")
    return p


def joint_uplink_power(ch: ChannelRealization, w, e_bar: float, sigma2_bs: float,
                       gamma_ul: float) -> np.ndarray:
    """Powers meeting every SINR target with equality for fixed filters.

    Solves ``(diag(a_kk) / gamma - offdiag(a)) p = noise``.

    Raises
    ------
    InfeasibleUplink
        The system has no positive solution.
    """
    a = _coupling(ch, w)
    m = -a
    m[np.diag_indices_from(m)] = np.diag(a) / gamma_ul
    noise = (e_bar + sigma2_bs) * np.sum(np.abs(w) ** 2, axis=1)
    try:
        p = np.linalg.solve(m, noise)
    except np.linalg.LinAlgError as exc:
        raise InfeasibleUplink("uplink power system is singular") from exc
    if not np.all(np.isfinite(p)) or np.any(p <= 0):
        raise InfeasibleUplink("uplink SINR targets are not jointly reachable")
    return p


def uplink_solve(params: SystemParams, ch: ChannelRealization, bounds: RobustBounds,
                 filter_noise: float = None) -> UplinkSolution:
    """Minimum-power uplink design.

    Parameters
    ----------
    filter_noise : float, optional
        Noise level used inside the Wiener filter. Defaults to
        ``sigma2_bs + e_bar``, the level the SINR constraint is written for;
        passing ``sigma2_bs + sum ||v_j||^2`` couples the filter to the
        downlink beamformers instead.

    Raises
    ------
    InfeasibleUplink
        The targets cannot be met within ``min(q_bar, p_max)``.
    NonConvergence
        The iteration did not settle within 50 steps; the last iterate is
        attached.
    """
    cap = params.uplink_cap
    noise = params.sigma2_bs + bounds.e_bar
    fnoise = noise if filter_noise is None else filter_noise
    p = np.full(ch.n_users, cap / 2.0)
    converged = False
    feasible_total = None
    it = 0
    for it in range(1, MAX_ITER + 1):
        w = wiener_filter(ch, p, fnoise)
        p_new = min_uplink_power(ch, w, bounds.e_bar, params.sigma2_bs, params.gamma_ul, p,
                                 p_cap=cap)
        change = np.max(np.abs(p_new - p) / p_new)
        p = p_new
        total = float(np.sum(p))
        if feasible_total is not None and total > feasible_total * (1 + 1e-12):
            log.warning("uplink total power rose from %.6e to %.6e W", feasible_total, total)
        sinr = uplink_sinr(ch, wiener_filter(ch, p, fnoise), p, bounds.e_bar, params.sigma2_bs)
        if np.all(sinr >= params.gamma_ul * (1 - 1e-12)):
            feasible_total = total
        if change <= REL_TOL:
            converged = True
            break
    w = wiener_filter(ch, p, fnoise)
    if not converged:
        sinr = uplink_sinr(ch, w, p, bounds.e_bar, params.sigma2_bs)
        raise NonConvergence("uplink power iteration did not converge",
                             UplinkSolution(w, p, sinr, it, False))
    p = joint_uplink_power(ch, w, bounds.e_bar, params.sigma2_bs, params.gamma_ul) * (1 + SAFETY)
    if np.any(p > cap):
        raise InfeasibleUplink(f"required uplink power {np.max(p):.3e} W exceeds cap {cap:.3e} W")
    sinr = uplink_sinr(ch, w, p, bounds.e_bar, params.sigma2_bs)
    return UplinkSolution(w, p, sinr, it, True)
