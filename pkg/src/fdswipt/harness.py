"""Monte Carlo sweeps over one scenario parameter.

A sweep draws ``trials`` channel realizations, solves the uplink and the
downlink (JBPS and/or ZF) for every value of the swept parameter, and
aggregates the end-to-end power ``sum ||v_k||^2 + sum p_up,k`` per value
and method. Trial ``i`` always sees the same channels, whatever the
number of workers or the order in which trials finish.
"""

import csv
import io
import json
import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .exceptions import ContractError, InfeasibleError, NonConvergence, SolverError
from .jbps import solve_downlink
from .system import (SystemParams, compute_bounds, db_to_linear, dbm_to_watt,
                     sample_channels, watt_to_dbm)
from .uplink import uplink_solve
from .zf import zf_solve

log = logging.getLogger(__name__)

METHODS = ("jbps", "zf")
SWEEP_VARS = ("gamma_ul_db", "n_t", "q_dbm")
CSV_HEADER = ["sweep_var", "value", "method", "mean_dbm", "std_dbm", "feasible_frac",
              "mean_rank_ratio", "trials"]
# the sweep only needs objectives, not certificates
SWEEP_TOL = 1e-8

# config key -> (SystemParams field, converter)
_PARAM_KEYS = {
    "n_users": ("n_users", int),
    "n_tx": ("n_tx", int),
    "n_rx": ("n_rx", int),
    "gamma_dl_db": ("gamma_dl", db_to_linear),
    "gamma_ul_db": ("gamma_ul", db_to_linear),
    "q_dbm": ("q_bar", dbm_to_watt),
    "p_max_dbm": ("p_max", dbm_to_watt),
    "sigma2_dbm": ("sigma2_ms", dbm_to_watt),
    "delta2_dbm": ("delta2_ms", dbm_to_watt),
    "sigma2_bs_dbm": ("sigma2_bs", dbm_to_watt),
    "eps1": ("eps1", float),
    "eps2": ("eps2", float),
    "sic_residual_fraction": ("sic_residual_fraction", float),
}


def params_from_dict(data: dict) -> SystemParams:
    """Build :class:`SystemParams` from unit-suffixed configuration values."""
    unknown = set(data) - set(_PARAM_KEYS)
    if unknown:
        raise ContractError(f"unknown parameter keys {sorted(unknown)}; "
                            f"expected a subset of {sorted(_PARAM_KEYS)}")
    values = {}
    for key, raw in data.items():
        name, conv = _PARAM_KEYS[key]
        values[name] = int(raw) if conv is int else float(conv(raw))
    return SystemParams(**values)


def apply_sweep_value(params: SystemParams, sweep_var: str, value,
                      rx_follows_tx: bool = True) -> SystemParams:
    """Scenario at one sweep point.

    With ``rx_follows_tx`` an antenna sweep resizes the receive array
    together with the transmit array.
    """
    if sweep_var == "gamma_ul_db":
        return params.replace(gamma_ul=float(db_to_linear(value)))
    if sweep_var == "q_dbm":
        return params.replace(q_bar=float(dbm_to_watt(value)))
    if sweep_var == "n_t":
        if rx_follows_tx:
            return params.replace(n_tx=int(value), n_rx=int(value))
        return params.replace(n_tx=int(value))
    raise ContractError(f"unknown sweep variable {sweep_var!r}")


@dataclass
class ExperimentConfig:
    """One sweep.

    Parameters
    ----------
    params : SystemParams
        Base scenario; the swept field is overwritten per point.
    sweep_var : str
        One of ``gamma_ul_db``, ``n_t`` or ``q_dbm``.
    sweep_values : list
    trials : int
    seed : int
    methods : tuple of str
        Subset of ``("jbps", "zf")``.
    output_path : str, optional
    workers : int
        Worker processes; results do not depend on it.
    rx_follows_tx : bool
        In an ``n_t`` sweep, give the base station as many receive as
        transmit antennas.
    """

    params: SystemParams
    sweep_var: str
    sweep_values: List[float]
    trials: int = 500
    seed: int = 0
    methods: Tuple[str, ...] = METHODS
    output_path: Optional[str] = None
    workers: int = 1
    rx_follows_tx: bool = True

    def __post_init__(self):
        if self.sweep_var not in SWEEP_VARS:
            raise ContractError(f"sweep variable must be one of {SWEEP_VARS}")
        if not self.sweep_values:
            raise ContractError("sweep needs at least one value")
        if int(self.trials) < 1:
            raise ContractError("trials must be at least 1")
        self.methods = tuple(self.methods)
        if not self.methods or set(self.methods) - set(METHODS):
            raise ContractError(f"methods must be a non-empty subset of {METHODS}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ContractError("seed must be a 64-bit unsigned integer")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        sweep = data.pop("sweep", None)
        if not isinstance(sweep, dict) or len(sweep) != 1:
            raise ContractError("'sweep' must map exactly one variable to a list of values")
        (var, values), = sweep.items()
        known = {"params", "trials", "seed", "methods", "output_path", "workers",
                 "rx_follows_tx"}
        if set(data) - known:
            raise ContractError(f"unknown config keys {sorted(set(data) - known)}")
        return cls(params=params_from_dict(data.get("params", {})), sweep_var=var,
                   sweep_values=list(values), trials=int(data.get("trials", 500)),
                   seed=int(data.get("seed", 0)), methods=data.get("methods", METHODS),
                   output_path=data.get("output_path"), workers=int(data.get("workers", 1)),
                   rx_follows_tx=bool(data.get("rx_follows_tx", True)))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise OSError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ContractError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)


@dataclass
class SweepRow:
    sweep_var: str
    value: float
    method: str
    mean_dbm: float
    std_dbm: float
    feasible_frac: float
    mean_rank_ratio: float
    trials: int


@dataclass
class SweepResult:
    rows: List[SweepRow] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in self.rows:
            writer.writerow([r.sweep_var, _fmt(r.value), r.method, _fmt(r.mean_dbm),
                             _fmt(r.std_dbm), _fmt(r.feasible_frac), _fmt(r.mean_rank_ratio),
                             r.trials])
        return buf.getvalue()

    def write(self, path) -> None:
        try:
            with open(path, "w", newline="") as fh:
                fh.write(self.to_csv())
        except OSError as exc:
            raise OSError(f"cannot write sweep results to {path}: {exc}") from exc

    def series(self, method: str) -> List[SweepRow]:
        return [r for r in self.rows if r.method == method]

    @property
    def infeasible_only(self) -> bool:
        """True when some point has no feasible trial at all."""
        return any(r.trials == 0 for r in self.rows)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x)) if np.isfinite(x) else "nan"


def _downlink(params, ch, bounds, method, tol):
    """``(power, rank_ratio, cap_violation)`` of one downlink design."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if method == "jbps":
            sol = solve_downlink(params, ch, bounds, tol=tol)
            ratio = max(c.rank_ratio for c in sol.certificates)
            return sol.objective, ratio, sol.cap_violation
        sol = zf_solve(params, ch, bounds)
        return sol.objective, 0.0, sol.cap_violation


def run_point(params: SystemParams, trial_index: int, seed: int, method: str,
              tol: float = SWEEP_TOL, cache: Optional[dict] = None):
    """End-to-end power of one trial.

    Parameters
    ----------
    cache : dict, optional
        Memo for downlink results keyed by everything they depend on; lets
        a sweep over the uplink target reuse one downlink solve per trial.

    Returns
    -------
    total : float
        ``sum ||v_k||^2 + sum p_up,k`` (W), ``nan`` when infeasible.
    diagnostics : dict
        ``feasible``, ``downlink``, ``uplink``, ``rank_ratio``,
        ``cap_violation`` and ``error`` (the failure message, if any).
    """
    if method not in METHODS:
        raise ContractError(f"method must be one of {METHODS}")
    diag = {"feasible": False, "downlink": np.nan, "uplink": np.nan, "rank_ratio": np.nan,
            "cap_violation": False, "error": None}
    ch = sample_channels(params, trial_index, seed)
    bounds = compute_bounds(params, ch)
    # the uplink target does not enter the downlink problem
    key = (method, trial_index, seed, tol, params.replace(gamma_ul=1.0))
    try:
        if cache is not None and key in cache:
            down = cache[key]
        else:
            try:
                down = _downlink(params, ch, bounds, method, tol)
            except (InfeasibleError, SolverError) as exc:
                down = exc
            if cache is not None:
                cache[key] = down
        if isinstance(down, Exception):
            raise down
        diag["downlink"], diag["rank_ratio"], diag["cap_violation"] = down
        up = uplink_solve(params, ch, bounds)
        diag["uplink"] = up.total
    except (InfeasibleError, SolverError, NonConvergence) as exc:
        diag["error"] = f"{type(exc).__name__}: {exc}"
        return np.nan, diag
    diag["feasible"] = True
    return diag["downlink"] + diag["uplink"], diag


@dataclass
class JointSolution:
    """Downlink and uplink design of one realization.

    Attributes
    ----------
    method : str
        ``"jbps"`` or ``"zf"``.
    v : ndarray, shape (K, n_tx)
        Downlink beamformers.
    rho : ndarray, shape (K,)
        Power-splitting ratios.
    w : ndarray, shape (K, n_rx)
        Uplink receive filters.
    p_up : ndarray, shape (K,)
        Uplink powers (W).
    downlink_power, uplink_power : float
        ``sum ||v_k||^2`` and ``sum p_up,k`` (W).
    downlink : DownlinkSolution or ZfSolution
    uplink : UplinkSolution
    """

    method: str
    v: np.ndarray
    rho: np.ndarray
    w: np.ndarray
    p_up: np.ndarray
    downlink_power: float
    uplink_power: float
    downlink: object
    uplink: object

    @property
    def objective(self) -> float:
        return self.downlink_power + self.uplink_power

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "objective_w": self.objective,
            "objective_dbm": float(watt_to_dbm(self.objective)),
            "downlink_power_w": self.downlink_power,
            "uplink_power_w": self.uplink_power,
            "downlink": self.downlink.to_dict(),
            "uplink": self.uplink.to_dict(),
        }


def solve_joint(params: SystemParams, ch, bounds, method: str = "jbps",
                tol: Optional[float] = None) -> JointSolution:
    """Solve both link directions of one realization.

    Raises
    ------
    InfeasibleError, SolverError, NonConvergence
        From the downlink or uplink solver.
    """
    if method == "jbps":
        down = solve_downlink(params, ch, bounds) if tol is None else \
            solve_downlink(params, ch, bounds, tol=tol)
        v, rho, p_down = down.v, down.rho, down.objective
    elif method == "zf":
        down = zf_solve(params, ch, bounds)
        v, rho, p_down = down.v, down.rho, down.objective
    else:
        raise ContractError(f"method must be one of {METHODS}")
    up = uplink_solve(params, ch, bounds)
    return JointSolution(method, v, rho, up.w, up.p_up, float(p_down), up.total, down, up)


def _run_trial(config: ExperimentConfig, trial_index: int):
    """Totals and rank ratios of one trial for every (value, method)."""
    cache = {}
    out = []
    for value in config.sweep_values:
        params = apply_sweep_value(config.params, config.sweep_var, value,
                                   config.rx_follows_tx)
        for method in config.methods:
            total, diag = run_point(params, trial_index, config.seed, method, cache=cache)
            if diag["error"]:
                log.debug("trial %d %s=%s %s: %s", trial_index, config.sweep_var, value,
                          method, diag["error"])
            out.append((total, diag["rank_ratio"]))
    return out


def _aggregate(config, per_trial) -> SweepResult:
    data = np.array(per_trial, dtype=float)  # (trials, points, 2)
    rows = []
    idx = 0
    for value in config.sweep_values:
        for method in config.methods:
            totals, ratios = data[:, idx, 0], data[:, idx, 1]
            ok = np.isfinite(totals)
            n_ok = int(np.sum(ok))
            if n_ok:
                dbm = watt_to_dbm(totals[ok])
                mean, std = float(np.mean(dbm)), float(np.std(dbm))
                ratio = float(np.mean(ratios[ok]))
            else:
                mean = std = ratio = np.nan
            rows.append(SweepRow(config.sweep_var, value, method, mean, std,
                                 n_ok / len(totals), ratio, n_ok))
            idx += 1
    return SweepResult(rows)


def run_sweep(config: ExperimentConfig) -> SweepResult:
    """Run every trial of a sweep and aggregate per point and method.

    Means and deviations are over the per-trial powers in dBm, using
    feasible trials only; their count is reported alongside.
    """
    trials = range(int(config.trials))
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            per_trial = list(pool.map(_run_trial, [config] * len(trials), trials,
                                      chunksize=max(1, len(trials) // (4 * config.workers))))
    else:
        per_trial = [_run_trial(config, i) for i in trials]
    result = _aggregate(config, per_trial)
    if config.output_path:
        result.write(config.output_path)
    return result


def default_campaign(trials: int = 500, seed: int = 0) -> Dict[str, ExperimentConfig]:
    """The three sweeps of the reference study (uplink target, antennas, harvest target)."""
    base = {"n_users": 2, "n_tx": 2, "n_rx": 2, "gamma_dl_db": -20.0, "gamma_ul_db": -20.0,
            "q_dbm": 20.0, "p_max_dbm": 30.0, "sigma2_dbm": -20.0, "delta2_dbm": -20.0,
            "sigma2_bs_dbm": -20.0, "eps1": 0.1, "eps2": 0.1, "sic_residual_fraction": 0.4}
    params = params_from_dict(base)
    return {
        "gamma_ul": ExperimentConfig(params, "gamma_ul_db", [-30.0, -25.0, -20.0], trials, seed),
        "n_t": ExperimentConfig(params, "n_t", [2, 4, 6, 8], trials, seed),
        "q": ExperimentConfig(params, "q_dbm", [15.0, 20.0, 25.0], trials, seed),
    }
