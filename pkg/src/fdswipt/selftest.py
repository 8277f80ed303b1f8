"""Quick analytic and oracle checks, runnable without the test suite."""

import warnings
from typing import Callable, List, NamedTuple

import numpy as np

from . import conic
from .jbps import solve_downlink
from .system import ChannelRealization, RobustBounds, SystemParams, compute_bounds, sample_channels
from .uplink import uplink_solve, wiener_filter
from .zf import zf_rho, zf_solve


class CheckResult(NamedTuple):
    name: str
    passed: bool
    detail: str


def _shifted_psd():
    # X = Y + I with Y >= 0: minimise tr(Y) + 2
    prob = conic.ConicProblem([conic.HermitianPSD(2)], {0: np.eye(2, dtype=complex)}, [],
                              offset=2.0)
    sol = conic.solve(prob, tol=1e-9)
    err = abs(sol.objective - 2.0)
    ok = sol.status == conic.OPTIMAL and err <= 1e-8 and max(sol.kkt) <= 1e-8
    return ok, f"status {sol.status}, objective error {err:.1e}, kkt {max(sol.kkt):.1e}"


def _hyperbolic():
    prob = conic.ConicProblem(
        [conic.Real2x2PSD()], {0: conic.entry(0, 0)},
        [conic.Constraint({0: conic.entry(0, 1)}, "=", 1.0),
         conic.Constraint({0: conic.entry(1, 1)}, "=", 0.5)])
    sol = conic.solve(prob, tol=1e-9)
    err = abs(sol.objective - 2.0)
    ok = sol.status == conic.OPTIMAL and err <= 1e-8 and max(sol.kkt) <= 1e-8
    return ok, f"status {sol.status}, t error {err:.1e}, kkt {max(sol.kkt):.1e}"


def _contradictory_box():
    prob = conic.ConicProblem([conic.FreeScalar()], {0: 0.0},
                              [conic.Constraint({0: 1.0}, ">=", 1.0),
                               conic.Constraint({0: -1.0}, ">=", 0.0)])
    sol = conic.solve(prob)
    return sol.status == conic.INFEASIBLE, f"status {sol.status}"


def _zf_root():
    params = SystemParams(n_users=1, n_tx=1, n_rx=1, sigma2_ms=1.0, delta2_ms=1.0,
                          gamma_dl=1.0, q_bar=1.0)
    bounds = RobustBounds(0.0, np.zeros(1), np.zeros(1))
    rho, alpha, beta, _ = zf_rho(params, bounds, 0)
    err = abs(rho - 1.0 / np.sqrt(2.0))
    return err <= 1e-12 and alpha == 2.0 and beta == 0.0, f"rho error {err:.1e}"


def _wiener():
    ch = ChannelRealization(np.ones((1, 1)), np.ones((1, 1)), np.zeros(1), np.zeros((1, 1)))
    w = wiener_filter(ch, [1.0], 1.0)
    err = abs(w[0, 0] - 0.5)
    return err <= 1e-14, f"filter error {err:.1e}"


def _single_user_oracle():
    params = SystemParams(n_users=1, n_tx=3, n_rx=2)
    worst = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for trial in range(10):
            ch = sample_channels(params, trial, 7)
            bounds = compute_bounds(params, ch)
            a = solve_downlink(params, ch, bounds).objective
            b = zf_solve(params, ch, bounds).objective
            worst = max(worst, abs(a - b) / (1.0 + b))
    return worst <= 1e-5, f"largest JBPS/ZF mismatch {worst:.1e}"


def _uplink_single_user():
    params = SystemParams(n_users=1, n_tx=2, n_rx=2)
    ch = sample_channels(params, 0, 3)
    bounds = compute_bounds(params, ch)
    sol = uplink_solve(params, ch, bounds)
    noise = params.sigma2_bs + bounds.e_bar
    expected = params.gamma_ul * noise / np.real(np.vdot(ch.h_ul[0], ch.h_ul[0]))
    err = abs(sol.p_up[0] - expected) / expected
    return sol.converged and sol.iterations <= 2 and err <= 1e-10, \
        f"{sol.iterations} iterations, power error {err:.1e}"


CHECKS: List[tuple] = [
    ("conic: shifted PSD cone", _shifted_psd),
    ("conic: hyperbolic boundary", _hyperbolic),
    ("conic: contradictory box", _contradictory_box),
    ("zf: splitting-ratio root", _zf_root),
    ("uplink: rank-one Wiener filter", _wiener),
    ("jbps: single-user ZF oracle", _single_user_oracle),
    ("uplink: single-user closed form", _uplink_single_user),
]


def run_checks(checks=None) -> List[CheckResult]:
    results = []
    for name, fn in (checks or CHECKS):
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failed check, not a crashed run
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(ok), detail))
    return results
