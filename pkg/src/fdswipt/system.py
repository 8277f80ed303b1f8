"""Scenario parameters, channel draws and worst-case self-interference bounds.

All powers are linear watts and all SINR targets linear ratios. Conversion
from the dB / dBm values used in configuration files happens in
:mod:`fdswipt.harness`.
"""

from dataclasses import dataclass, field, asdict
from typing import Tuple

import numpy as np

from .exceptions import ContractError
from .linalg import spectral_norm

# stream ids for the per-trial generators; one stream per channel family so
# that changing e.g. the antenna count never perturbs the other draws
STREAM_DL, STREAM_UL, STREAM_SI_MS, STREAM_SI_BS = 0, 1, 2, 3


def db_to_linear(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def dbm_to_watt(x_dbm):
    return 10.0 ** ((np.asarray(x_dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(p):
    return 10.0 * np.log10(np.asarray(p, dtype=float)) + 30.0


@dataclass(frozen=True)
class SystemParams:
    """All scalars of one scenario (linear units).

    Parameters
    ----------
    n_users : int
        Number of mobile stations ``K``.
    n_tx, n_rx : int
        Base-station transmit / receive antenna counts.
    sigma2_ms : float
        Antenna noise power at every mobile (W).
    delta2_ms : float
        Information-decoder processing noise power at every mobile (W).
    sigma2_bs : float
        Receiver noise power at the base station (W).
    gamma_dl, gamma_ul : float
        Downlink / uplink SINR targets (linear).
    q_bar : float
        Harvested power target at every mobile (W).
    p_max : float
        Per-node transmit power cap (W).
    eps1, eps2 : float
        Radii of the mobile / base-station loop channel estimation errors.
    eta : float
        Energy conversion efficiency, fixed at one.
    sic_residual_fraction : float
        Fraction of the loop-channel power left after cancellation.
    """

    n_users: int = 2
    n_tx: int = 2
    n_rx: int = 2
    sigma2_ms: float = 1e-5
    delta2_ms: float = 1e-5
    sigma2_bs: float = 1e-5
    gamma_dl: float = 1e-2
    gamma_ul: float = 1e-2
    q_bar: float = 0.1
    p_max: float = 1.0
    eps1: float = 0.1
    eps2: float = 0.1
    eta: float = 1.0
    sic_residual_fraction: float = 0.4

    def __post_init__(self):
        for name in ("n_users", "n_tx", "n_rx"):
            if int(getattr(self, name)) < 1:
                raise ContractError(f"{name} must be a positive integer")
        for name in ("sigma2_ms", "delta2_ms", "sigma2_bs", "gamma_dl",
                     "gamma_ul", "q_bar", "p_max"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ContractError(f"{name} must be positive, got {value}")
        for name in ("eps1", "eps2"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise ContractError(f"{name} must be non-negative, got {value}")
        if not 0 < self.sic_residual_fraction <= 1:
            raise ContractError("sic_residual_fraction must lie in (0, 1]")
        if self.eta != 1.0:
            raise ContractError("only unit conversion efficiency is modelled")

    @property
    def uplink_cap(self) -> float:
        """Largest admissible uplink power ``min(q_bar, p_max)``."""
        return min(self.q_bar, self.p_max)

    def replace(self, **changes) -> "SystemParams":
        values = asdict(self)
        values.update(changes)
        return SystemParams(**values)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of every channel in the system.

    ``h_dl[k]`` and ``h_ul[k]`` are user ``k``'s downlink (``n_tx``) and
    uplink (``n_rx``) vectors, ``h_si_ms[k]`` its estimated loop channel and
    ``h_si_bs`` the estimated ``n_rx x n_tx`` base-station loop channel.
    """

    h_dl: np.ndarray
    h_ul: np.ndarray
    h_si_ms: np.ndarray
    h_si_bs: np.ndarray
    seed_tag: Tuple[int, int] = field(default=(0, 0))

    def __post_init__(self):
        for name in ("h_dl", "h_ul", "h_si_ms", "h_si_bs"):
            arr = np.asarray(getattr(self, name), dtype=complex)
            if not np.all(np.isfinite(arr)):
                raise ContractError(f"{name} has non-finite entries")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.h_dl.ndim != 2 or self.h_ul.ndim != 2:
            raise ContractError("h_dl and h_ul must be 2-D (users x antennas)")
        k = self.h_dl.shape[0]
        if self.h_ul.shape[0] != k or self.h_si_ms.shape != (k,):
            raise ContractError("inconsistent user counts across channels")
        if self.h_si_bs.shape != (self.h_ul.shape[1], self.h_dl.shape[1]):
            raise ContractError("h_si_bs must be n_rx x n_tx")

    @property
    def n_users(self) -> int:
        return self.h_dl.shape[0]

    def to_dict(self) -> dict:
        return {
            "seed_tag": list(self.seed_tag),
            **{name: complex_to_json(getattr(self, name))
               for name in ("h_dl", "h_ul", "h_si_ms", "h_si_bs")},
        }

    @classmethod
    def from_dict(cls, data) -> "ChannelRealization":
        return cls(
            **{name: complex_from_json(data[name])
               for name in ("h_dl", "h_ul", "h_si_ms", "h_si_bs")},
            seed_tag=tuple(data.get("seed_tag", (0, 0))),
        )


@dataclass(frozen=True)
class RobustBounds:
    """Worst-case loop interference powers.

    ``e_bar`` bounds the interference at the base station; ``g_bar[k]``
    and ``g_tilde[k]`` are the largest / smallest loop power at mobile
    ``k`` (used in its SINR and its harvesting constraint respectively).
    """

    e_bar: float
    g_bar: np.ndarray
    g_tilde: np.ndarray


def complex_to_json(a) -> dict:
    a = np.asarray(a, dtype=complex)
    return {"re": a.real.tolist(), "im": a.imag.tolist()}


def complex_from_json(d) -> np.ndarray:
    return np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)


def _cscg(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def trial_rng(seed: int, trial_index: int, stream: int) -> np.random.Generator:
    """Generator keyed by ``(seed, trial_index, stream)``.

    Draws depend only on the key, never on the order in which trials run.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1),
                                spawn_key=(int(trial_index), int(stream)))
    return np.random.Generator(np.random.PCG64(ss))


def sample_channels(params: SystemParams, trial_index: int, seed: int) -> ChannelRealization:
    """Draw i.i.d. unit-variance CSCG channels for one trial.

    Loop channels are scaled by ``sqrt(sic_residual_fraction)`` so their
    power is the residual left after cancellation.
    """
    k, n_t, n_r = params.n_users, params.n_tx, params.n_rx
    si_amp = np.sqrt(params.sic_residual_fraction)
    h_dl = _cscg(trial_rng(seed, trial_index, STREAM_DL), (k, n_t))
    h_ul = _cscg(trial_rng(seed, trial_index, STREAM_UL), (k, n_r))
    h_si_ms = si_amp * _cscg(trial_rng(seed, trial_index, STREAM_SI_MS), (k,))
    h_si_bs = si_amp * _cscg(trial_rng(seed, trial_index, STREAM_SI_BS), (n_r, n_t))
    return ChannelRealization(h_dl, h_ul, h_si_ms, h_si_bs,
                              seed_tag=(int(seed), int(trial_index)))


def compute_bounds(params: SystemParams, ch: ChannelRealization) -> RobustBounds:
    """Worst-case loop interference powers for a realization.

    Both loop channels are assumed to transmit at ``p_max``; the base station
    radiates ``n_users * p_max`` in the worst case.
    """
    mag = np.abs(ch.h_si_ms)
    g_bar = (mag + params.eps1) ** 2 * params.p_max
    # (|h| - eps)^2 is only a lower bound while |h| >= eps
    g_tilde = np.where(mag >= params.eps1, (mag - params.eps1) ** 2, 0.0) * params.p_max
    e_bar = (spectral_norm(ch.h_si_bs) + params.eps2) ** 2 * ch.n_users * params.p_max
    return RobustBounds(float(e_bar), g_bar, g_tilde)
