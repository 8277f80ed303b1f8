"""Acceptance criteria, one test (or pair of tests) per criterion.

Each criterion prints a ``CRITERION n: PASS/FAIL`` line; the lines are
repeated in the terminal summary. Criteria that the implementation does
not meet are marked ``xfail(strict=True)`` with their assertions intact,
so an unexpected pass also shows up.
"""

import json
import time
import warnings

import numpy as np
import pytest

from conftest import instance, record_criterion
from fdswipt import conic
from fdswipt.cli import main as cli_main
from fdswipt.exceptions import InfeasibleError, InfeasibleUplink, NonConvergence, SolverError
from fdswipt.harness import default_campaign, run_point, run_sweep
from fdswipt.jbps import constraint_slacks, solve_downlink
from fdswipt.system import SystemParams
from fdswipt.uplink import MAX_ITER, uplink_solve
from fdswipt.zf import zf_solve
from oracles import mmse_sinr

CORPUS_SIZE = 200
CAMPAIGN_TRIALS = 500
_results = {}


def _physical_sinr_and_harvest(params, ch, bounds, v, rho):
    """Downlink SINR and harvested power at the worst-case loop interference."""
    rx = np.abs(ch.h_dl.conj() @ v.T) ** 2  # [k, j] = |h_k^H v_j|^2
    own = np.diag(rx)
    interf = rx.sum(axis=1) - own
    sinr = rho * own / (rho * (interf + bounds.g_bar + params.sigma2_ms) + params.delta2_ms)
    harvest = (1 - rho) * (rx.sum(axis=1) + bounds.g_tilde + params.sigma2_ms)
    return sinr, harvest


# -- criteria 1-3: the relaxed downlink corpus -----------------------------------------

@pytest.fixture(scope="module")
def corpus():
    params = SystemParams(n_users=2, n_tx=4, n_rx=2)
    solved, errors = [], []
    trial = 0
    start = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        while len(solved) + len(errors) < CORPUS_SIZE:
            ch, bounds = instance(params, trial, seed=2024)
            trial += 1
            try:
                solved.append((ch, bounds, solve_downlink(params, ch, bounds)))
            except InfeasibleError:
                continue
            except SolverError as exc:
                errors.append((trial - 1, str(exc)))
    return params, solved, errors, time.perf_counter() - start


def test_criterion_1_rank_one(corpus):
    params, solved, errors, elapsed = corpus
    ratios = [c.rank_ratio for *_, sol in solved for c in sol.certificates]
    total = CORPUS_SIZE * params.n_users
    good = sum(r <= 1e-6 for r in ratios)
    for ch, bounds, sol in solved:
        for k, c in enumerate(sol.certificates):
            if c.rank_ratio > 1e-6:
                print(f"rank exception trial {ch.seed_tag} user {k}: {json.dumps(vars(c))}")
    ok = good >= 0.99 * total and elapsed <= 60.0
    record_criterion(1, ok, f"rank ratio <= 1e-6 on {good}/{total} user-instances, "
                            f"{len(errors)} solver errors, {elapsed:.1f} s")
    assert not errors
    assert good >= 0.99 * total
    assert elapsed <= 60.0


def test_criterion_2_tightness(corpus):
    params, solved, errors, _ = corpus
    worst = 0.0
    for ch, bounds, sol in solved:
        outer = np.einsum("ka,kb->kab", sol.v, sol.v.conj())
        sinr, harv = constraint_slacks(params, ch, bounds, outer, sol.rho)
        worst = max(worst, float(np.max(np.abs(sinr))), float(np.max(np.abs(harv))))
    ok = worst <= 1e-6 and not errors
    record_criterion(2, ok, f"largest relative slack {worst:.2e} over {len(solved)} optima")
    assert ok


def test_criterion_3a_certificate(corpus):
    _, solved, _, _ = corpus
    bad = []
    for ch, bounds, sol in solved:
        for k, c in enumerate(sol.certificates):
            eig_ok = c.cert_min_eig >= -1e-7 * (1 + c.cert_norm)
            compl_ok = c.cert_compl_norm <= 1e-6 * c.trace
            if not (eig_ok and compl_ok):
                bad.append((ch.seed_tag, k, c))
                print(f"certificate failure {ch.seed_tag} user {k}: {json.dumps(vars(c))}")
    _results["cert_bad"] = len(bad)
    assert not bad


@pytest.mark.xfail(strict=True, reason="the harvesting multiplier vanishes when the splitting "
                                       "ratio pins at its lower end; see the decision ledger")
def test_criterion_3b_dual_positivity(corpus):
    _, solved, _, _ = corpus
    mults = np.array([(c.lam, c.mu) for *_, sol in solved for c in sol.certificates])
    small_lam = int(np.sum(mults[:, 0] <= 1e-10))
    small_mu = int(np.sum(mults[:, 1] <= 1e-10))
    cert_bad = _results.get("cert_bad", -1)
    ok = cert_bad == 0 and small_lam == 0 and small_mu == 0
    record_criterion(3, ok, f"{cert_bad} certificate failures; lambda <= 1e-10 on {small_lam}, "
                            f"mu <= 1e-10 on {small_mu} of {len(mults)} user-instances "
                            f"(smallest mu {mults[:, 1].min():.1e})")
    assert small_lam == 0
    assert small_mu == 0


# -- criterion 4: zero forcing -----------------------------------------------------------

def test_criterion_4_zero_forcing():
    params = SystemParams(n_users=2, n_tx=4, n_rx=2)
    worst_sinr = worst_harv = 0.0
    unique = 0
    n = 500
    for trial in range(n):
        ch, bounds = instance(params, trial, seed=77)
        sol = zf_solve(params, ch, bounds)
        sinr, harv = _physical_sinr_and_harvest(params, ch, bounds, sol.v, sol.rho)
        worst_sinr = max(worst_sinr, float(np.max(np.abs(sinr / params.gamma_dl - 1))))
        worst_harv = max(worst_harv, float(np.max(np.abs(harv / params.q_bar - 1))))
        for alpha, beta, c in sol.quad:
            roots = np.roots([alpha, -beta, -c])
            inside = (roots.real > 0) & (roots.real < 1) & (np.abs(roots.imag) <= 1e-12)
            unique += int(np.sum(inside) == 1)
    total = n * params.n_users
    ok = worst_sinr <= 1e-9 and worst_harv <= 1e-9 and unique == total
    record_criterion(4, ok, f"SINR error {worst_sinr:.1e}, harvest error {worst_harv:.1e}, "
                            f"unique root on {unique}/{total}")
    assert ok


# -- criterion 5: single-user exactness ----------------------------------------------------

def _grid_single_user(params, bounds, gain, levels=3, size=200):
    """Least ``p`` on a zooming (logit rho, p) grid meeting both constraints along MRT.

    Each level keeps every ``rho`` row whose cheapest feasible cell is within
    one ``p`` step of the best, so a flat optimum cannot be zoomed past.
    """
    s2, d2 = params.sigma2_ms, params.delta2_ms

    def feasible(t, p):
        rho = 1 / (1 + np.exp(-t))
        sinr_ok = rho * p * gain >= params.gamma_dl * (rho * (bounds.g_bar[0] + s2) + d2)
        harv_ok = (1 - rho) * (p * gain + bounds.g_tilde[0] + s2) >= params.q_bar
        return sinr_ok & harv_ok

    t_lo, t_hi = -25.0, 25.0
    # no split ratio beats the SINR-only power at rho -> 1
    p_lo = params.gamma_dl * (bounds.g_bar[0] + s2) / gain
    p_hi = 2 * p_lo
    while not feasible(np.linspace(t_lo, t_hi, size), p_hi).any():
        p_hi *= 2.0
    best = np.inf
    for _ in range(levels):
        t = np.linspace(t_lo, t_hi, size)[:, None]
        p = np.geomspace(p_lo, p_hi, size)[None, :]
        cost = np.where(feasible(t, p), np.broadcast_to(p, (size, size)), np.inf)
        row_best = cost.min(axis=1)
        best = min(best, float(row_best.min()))
        step = p[0, 1] / p[0, 0]
        rows = np.flatnonzero(row_best <= best * step)
        dt = (t_hi - t_lo) / (size - 1)
        t_lo, t_hi = t[rows[0], 0] - dt, t[rows[-1], 0] + dt
        p_lo, p_hi = best / step ** 2, best
    return best


def test_criterion_5_single_user():
    worst = 0.0
    for trial in range(100):
        params = SystemParams(n_users=1, n_tx=4, n_rx=2)
        ch, bounds = instance(params, trial, seed=5)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            a = solve_downlink(params, ch, bounds).objective
            b = zf_solve(params, ch, bounds).objective
        worst = max(worst, abs(a - b) / (1 + b))
    worst_grid = 0.0
    params = SystemParams(n_users=1, n_tx=2, n_rx=2)
    for trial in range(10):
        ch, bounds = instance(params, trial, seed=6)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            a = solve_downlink(params, ch, bounds).objective
            b = zf_solve(params, ch, bounds).objective
        grid = _grid_single_user(params, bounds, float(np.linalg.norm(ch.h_dl[0]) ** 2))
        worst_grid = max(worst_grid, abs(grid - a) / a, abs(grid - b) / b)
    ok = worst <= 1e-5 and worst_grid <= 1e-3
    record_criterion(5, ok, f"JBPS/ZF mismatch {worst:.1e}, grid mismatch {worst_grid:.1e}")
    assert ok


# -- criteria 6 and 7: the sweep campaign ----------------------------------------------

@pytest.fixture(scope="module")
def campaign():
    start = time.perf_counter()
    results = {name: run_sweep(cfg) for name, cfg in
               default_campaign(trials=CAMPAIGN_TRIALS, seed=0).items()}
    return results, time.perf_counter() - start


def test_criterion_6a_ordering():
    base = default_campaign(trials=1)["gamma_ul"].params
    violations, joint = 0, 0
    for trial in range(200):
        _, a = run_point(base, trial, 0, "jbps")
        _, b = run_point(base, trial, 0, "zf")
        if not (np.isfinite(a["downlink"]) and np.isfinite(b["downlink"])):
            continue
        joint += 1
        if a["downlink"] > b["downlink"] + 1e-6 * (1 + b["downlink"]):
            violations += 1
    _results["order"] = (violations, joint)
    assert joint > 0
    assert violations == 0


def test_criterion_6b_gap(campaign):
    results, _ = campaign
    rows = {r.method: r for r in results["gamma_ul"].rows if r.value == -20.0}
    gap = rows["zf"].mean_dbm - rows["jbps"].mean_dbm
    violations, joint = _results.get("order", (-1, 0))
    ok = violations == 0 and 0.2 <= gap <= 3.0
    record_criterion(6, ok, f"ordering violations {violations}/{joint}; mean gap at "
                            f"N_t=2, gamma_UL=-20 dB: {gap:.2f} dB (window [0.2, 3])")
    assert gap > 0
    assert 0.2 <= gap <= 3.0


def test_criterion_7_trends(campaign):
    results, elapsed = campaign
    problems = []
    for name, res in results.items():
        for method in ("jbps", "zf"):
            means = [r.mean_dbm for r in res.series(method)]
            steps = np.diff(means)
            if name == "n_t":
                good = np.all(steps <= 0)
            else:
                good = np.all(steps > 0)
            if not good or not np.all(np.isfinite(means)):
                problems.append(f"{name}/{method}: {np.round(means, 3).tolist()}")
            print(f"{name:>8} {method:>4}: " + ", ".join(f"{m:.3f}" for m in means) + " dBm")
    ok = not problems and elapsed <= 300.0
    record_criterion(7, ok, f"{CAMPAIGN_TRIALS} trials per point in {elapsed:.0f} s; "
                            f"non-monotone series: {problems or 'none'}")
    assert not problems
    assert elapsed <= 300.0


# -- criterion 8: uplink ------------------------------------------------------------------

def _grid_uplink(h_ul, noise, gamma, size=400):
    lb = gamma * noise / np.sum(np.abs(h_ul) ** 2, axis=1)
    g0 = np.geomspace(lb[0], 4 * lb[0], size)
    g1 = np.geomspace(lb[1], 4 * lb[1], size)
    p = np.stack(np.meshgrid(g0, g1, indexing="ij"), axis=-1)
    sinr = mmse_sinr(h_ul, p, noise)
    total = np.where(np.all(sinr >= gamma, axis=-1), p.sum(axis=-1), np.inf)
    return float(total.min())


def test_criterion_8_uplink():
    params = default_campaign(trials=1)["gamma_ul"].params
    converged = feasible = 0
    worst_low = worst_high = 0.0
    solutions = []
    for trial in range(500):
        ch, bounds = instance(params, trial, seed=8)
        try:
            sol = uplink_solve(params, ch, bounds)
        except InfeasibleUplink:
            continue
        except NonConvergence:
            feasible += 1
            continue
        feasible += 1
        converged += int(sol.converged and sol.iterations <= MAX_ITER)
        ratio = sol.sinr / params.gamma_ul - 1
        worst_low = min(worst_low, float(ratio.min()))
        worst_high = max(worst_high, float(ratio.max()))
        solutions.append((ch, bounds, sol))
    worst_grid = 0.0
    for ch, bounds, sol in solutions[:20]:
        grid = _grid_uplink(ch.h_ul, params.sigma2_bs + bounds.e_bar, params.gamma_ul)
        worst_grid = max(worst_grid, abs(grid - sol.total) / sol.total)
    ok = (converged >= 0.99 * feasible and worst_low >= 0 and worst_high <= 1e-8
          and worst_grid <= 1e-2)
    record_criterion(8, ok, f"converged on {converged}/{feasible} feasible draws; SINR/target - 1 "
                            f"in [{worst_low:.1e}, {worst_high:.1e}]; grid mismatch "
                            f"{worst_grid:.1e}")
    assert ok


# -- criterion 9: conic solver analytic suite -----------------------------------------------

def _analytic_suite():
    shifted = conic.ConicProblem([conic.HermitianPSD(2)], {0: np.eye(2, dtype=complex)}, [],
                                 offset=2.0)
    hyper = conic.ConicProblem(
        [conic.Real2x2PSD()], {0: conic.entry(0, 0)},
        [conic.Constraint({0: conic.entry(0, 1)}, "=", 1.0),
         conic.Constraint({0: conic.entry(1, 1)}, "=", 0.5)])
    box = conic.ConicProblem([conic.FreeScalar()], {0: 0.0},
                             [conic.Constraint({0: 1.0}, ">=", 1.0),
                              conic.Constraint({0: -1.0}, ">=", 0.0)])
    return [("shifted PSD", shifted, conic.OPTIMAL, 2.0),
            ("hyperbolic t = delta^2 / rho", hyper, conic.OPTIMAL, 2.0),
            ("contradictory box", box, conic.INFEASIBLE, None)]


def test_criterion_9_conic_suite():
    failures, worst = [], 0.0
    for name, prob, status, optimum in _analytic_suite():
        sol = conic.solve(prob, tol=1e-9)
        if sol.status != status:
            failures.append(f"{name}: {sol.status}")
            continue
        if optimum is None:
            continue
        res = conic.kkt_residuals(prob, sol)
        gap = abs(res.gap) / (1 + abs(sol.objective))
        worst = max(worst, res.primal, res.dual, gap)
        if abs(sol.objective - optimum) > 1e-8 or max(res.primal, res.dual, gap) > 1e-8:
            failures.append(f"{name}: objective {sol.objective!r}, kkt {tuple(res)}")
    ok = not failures
    record_criterion(9, ok, f"largest KKT residual {worst:.1e}; failures: {failures or 'none'}")
    assert ok


# -- criterion 10: determinism ---------------------------------------------------------------

def test_criterion_10_determinism(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"params": {"n_tx": 2, "n_rx": 2},
                               "sweep": {"q_dbm": [15, 20]}, "trials": 6, "seed": 9}))
    outputs = []
    for i, workers in enumerate(("1", "1", "2", "3")):
        out = tmp_path / f"run{i}.csv"
        assert cli_main(["sweep", "--config", str(cfg), "--out", str(out),
                         "--workers", workers]) == 0
        outputs.append(out.read_bytes())
    ok = all(o == outputs[0] for o in outputs)
    record_criterion(10, ok, f"{len(outputs)} sweep runs (workers 1, 1, 2, 3) byte-identical: {ok}")
    assert ok
