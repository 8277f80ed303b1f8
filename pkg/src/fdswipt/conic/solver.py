"""Primal-dual interior-point method for small dense conic problems.

The solver works on the homogeneous self-dual embedding of the standard
form compiled by :func:`fdswipt.conic.problem.compile_problem`::

    [0]   [ 0   A'  G'  c] [x]
    [0] = [-A   0   0   b] [y]        s, z in K;  tau, kappa >= 0
    [s]   [-G   0   0   h] [z]
    [k]   [-c' -b' -h'  0] [tau]

``K`` is a nonnegative orthant times PSD cones, complex Hermitian or real
symmetric. Cones of one shape are stored as a stacked ``(m, n, n)`` array
so every cone operation is a handful of batched numpy calls.

Search directions use Nesterov-Todd scaling, recomputed from the current
``s`` and ``z`` at every iteration, with a Mehrotra predictor-corrector.
"""

import functools
import logging
import warnings
from dataclasses import dataclass
from typing import List

import numpy as np
import scipy.linalg

from . import problem as cp
from .kkt import kkt_residuals

log = logging.getLogger(__name__)

STEP_FRACTION = 0.99
TAU_KAPPA_THRESHOLD = 1e-8
# iterative refinement steps per KKT solve, by requested accuracy
REFINE_STEPS_TIGHT = 2
REFINE_STEPS_LOOSE = 0
REFINE_TOL = 1e-9
STALL_ITERS = 4      # iterations without improving the best merit
STALL_GROWTH = 1e3
STALL_ZONE = 1e-6     # stall checks apply once the merit is this small
SQRT2 = np.sqrt(2.0)


class _Trouble(Exception):
    pass


def _herm(m):
    return np.conj(np.swapaxes(m, -1, -2))


@functools.lru_cache(maxsize=None)
def _triu(n):
    iu = np.triu_indices(n, 1)
    return iu[0], iu[1], np.arange(n)


def svec(x: np.ndarray, is_complex: bool) -> np.ndarray:
    """Isometric half-vectorisation over the last two axes.

    Diagonal, then ``sqrt(2)`` times the real (and, for complex input,
    imaginary) parts of the strict upper triangle, so that
    ``svec(X) @ svec(Y) = Re tr(X Y)``.
    """
    rows, cols, _ = _triu(x.shape[-1])
    upper = x[..., rows, cols] * SQRT2
    parts = [np.real(np.diagonal(x, axis1=-2, axis2=-1)), np.real(upper)]
    if is_complex:
        parts.append(np.imag(upper))
    return np.concatenate(parts, axis=-1)


def unsvec(v: np.ndarray, n: int, is_complex: bool) -> np.ndarray:
    rows, cols, idx = _triu(n)
    k = rows.size
    x = np.zeros(v.shape[:-1] + (n, n), dtype=complex if is_complex else float)
    x[..., idx, idx] = v[..., :n]
    upper = v[..., n:n + k] / SQRT2
    if is_complex:
        upper = upper + 1j * (v[..., n + k:n + 2 * k] / SQRT2)
    x[..., rows, cols] = upper
    x[..., cols, rows] = np.conj(upper)
    return x


def _svec_len(n, is_complex):
    return n * n if is_complex else n * (n + 1) // 2


@dataclass
class _Scaling:
    w: np.ndarray              # orthant: W v = w * v
    r: List[np.ndarray]        # per group: W^T V = R V R^H
    rinv: List[np.ndarray]
    lam_lp: np.ndarray
    lam_psd: List[np.ndarray]  # per group, (m, n) eigenvalues


class _Cone:
    """Linear algebra on ``(orthant vector, [stacked group matrices])`` pairs."""

    def __init__(self, sf: cp.StandardForm):
        self.sf = sf
        self.groups = sf.groups
        nx = sf.nx
        self._g_flat = [grp.g.reshape(nx, -1) for grp in self.groups]
        # Re <G_p, V> for Hermitian pairs is the real dot product of the
        # interleaved (re, im) storage
        self._g_real = [np.ascontiguousarray(gf).view(float) if grp.is_complex else gf
                        for gf, grp in zip(self._g_flat, self.groups)]

    # -- G and its adjoint --------------------------------------------------
    def g(self, x):
        return (self.sf.g_lp @ x,
                [(x @ gf).reshape(grp.g.shape[1:]) for gf, grp in zip(self._g_flat, self.groups)])

    def gt(self, v):
        out = self.sf.g_lp.T @ v[0]
        for gr, m in zip(self._g_real, v[1]):
            m = np.ascontiguousarray(m)
            out = out + gr @ (m.view(float).ravel() if np.iscomplexobj(m) else m.ravel())
        return out

    # -- vector-space helpers ------------------------------------------------
    @staticmethod
    def dot(u, v):
        return float(u[0] @ v[0] + sum(np.vdot(a, b).real for a, b in zip(u[1], v[1])))

    def norm(self, u):
        return np.sqrt(max(self.dot(u, u), 0.0))

    @staticmethod
    def add(u, v, alpha=1.0):
        return (u[0] + alpha * v[0], [a + alpha * b for a, b in zip(u[1], v[1])])

    @staticmethod
    def scale(u, alpha):
        return (alpha * u[0], [alpha * a for a in u[1]])

    def identity(self):
        return (np.ones(self.sf.n_lp),
                [np.broadcast_to(np.eye(grp.n, dtype=grp.h.dtype), grp.h.shape).copy()
                 for grp in self.groups])

    def h(self):
        return (self.sf.h_lp, [grp.h for grp in self.groups])

    @staticmethod
    def min_eig(u):
        vals = [np.min(u[0])] if u[0].size else []
        vals += [np.min(np.linalg.eigvalsh(m)[..., 0]) for m in u[1]]
        return min(vals) if vals else np.inf

    # -- scaling maps -------------------------------------------------------
    @staticmethod
    def w_t(sc, v):
        return (sc.w * v[0], [r @ m @ _herm(r) for r, m in zip(sc.r, v[1])])

    @staticmethod
    def w_inv_t(sc, v):
        return (v[0] / sc.w, [ri @ m @ _herm(ri) for ri, m in zip(sc.rinv, v[1])])

    @staticmethod
    def w_inv(sc, v):
        return (v[0] / sc.w, [_herm(ri) @ m @ ri for ri, m in zip(sc.rinv, v[1])])

    # -- Jordan algebra at the scaled point ---------------------------------
    @staticmethod
    def _diag(l):
        return l[..., :, None] * np.eye(l.shape[-1])

    def lam(self, sc):
        return (sc.lam_lp, [self._diag(l) for l in sc.lam_psd])

    def lam_sq(self, sc):
        return (sc.lam_lp ** 2, [self._diag(l ** 2) for l in sc.lam_psd])

    @staticmethod
    def lam_solve(sc, v):
        """Solve ``lambda o X = v`` for ``X``."""
        return (v[0] / sc.lam_lp,
                [2.0 * m / (l[..., :, None] + l[..., None, :]) for l, m in zip(sc.lam_psd, v[1])])

    @staticmethod
    def jordan(u, v):
        return (u[0] * v[0], [0.5 * (a @ b + b @ a) for a, b in zip(u[1], v[1])])

    @staticmethod
    def max_step(sc, d):
        """Largest ``alpha`` with ``lambda + alpha d`` in the cone."""
        alpha = np.inf
        neg = d[0] < 0
        if np.any(neg):
            alpha = min(alpha, float(np.min(-sc.lam_lp[neg] / d[0][neg])))
        for l, m in zip(sc.lam_psd, d[1]):
            isq = 1.0 / np.sqrt(l)
            low = np.linalg.eigvalsh(isq[..., :, None] * m * isq[..., None, :])[..., 0]
            if np.any(low < 0):
                alpha = min(alpha, float(np.min(-1.0 / low[low < 0])))
        return alpha


def _nt_scaling(s, z):
    """Stacked ``R`` with ``R^-1 s R^-H = R^H z R = diag(lambda)``."""
    try:
        ls = np.linalg.cholesky(0.5 * (s + _herm(s)))
        lz = np.linalg.cholesky(0.5 * (z + _herm(z)))
    except np.linalg.LinAlgError as exc:
        raise _Trouble("lost positive definiteness in scaling update") from exc
    _, sv, vh = np.linalg.svd(_herm(lz) @ ls)
    if not np.all(np.isfinite(sv)) or np.any(sv <= 0):
        raise _Trouble("degenerate scaling")
    root = np.sqrt(sv)
    r = (ls @ _herm(vh)) / root[..., None, :]
    rinv = (root[..., :, None] * vh) @ np.linalg.inv(ls)
    return r, rinv, sv


def _scaling_from_points(cone, s, z):
    if np.any(s[0] <= 0) or np.any(z[0] <= 0):
        raise _Trouble("initial point outside the orthant")
    r, rinv, lam = [], [], []
    for sm, zm in zip(s[1], z[1]):
        a, b, c = _nt_scaling(sm, zm)
        r.append(a)
        rinv.append(b)
        lam.append(c)
    return _Scaling(np.sqrt(s[0] / z[0]), r, rinv, np.sqrt(s[0] * z[0]), lam)


class _KKT:
    """Factored KKT system for the current scaling.

    The scaled system ``[0 A' M'; A 0 0; M 0 -I]`` with ``M = W^-T G`` (cone
    part in half-vectorised coordinates) is factored directly; eliminating
    the last block row instead would square the condition number near the
    optimum.
    """

    def __init__(self, cone, sc, refine_steps=REFINE_STEPS_TIGHT):
        sf = cone.sf
        self.cone, self.sc = cone, sc
        self.refine_steps = refine_steps
        nx, p = sf.nx, sf.a.shape[0]
        rows = [sf.g_lp / sc.w[:, None]]
        for grp, ri in zip(sf.groups, sc.rinv):
            scaled = ri[None] @ grp.g @ _herm(ri)[None]
            rows.append(svec(scaled, grp.is_complex).reshape(nx, -1).T)
        mmat = np.vstack(rows)
        nz = mmat.shape[0]
        kmat = np.zeros((nx + p + nz, nx + p + nz))
        kmat[:nx, nx:nx + p] = sf.a.T
        kmat[nx:nx + p, :nx] = sf.a
        kmat[:nx, nx + p:] = mmat.T
        kmat[nx + p:, :nx] = mmat
        kmat[nx + p:, nx + p:] = -np.eye(nz)
        if not np.all(np.isfinite(kmat)):
            raise _Trouble("non-finite KKT matrix")
        self.nx, self.p = nx, p
        self.lu = self._factor(kmat, nx, p)

    @staticmethod
    def _factor(kmat, nx, p):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu = scipy.linalg.lu_factor(kmat, check_finite=False)
            piv = np.abs(np.diag(lu[0]))
            if piv.size and piv.min() > 1e-14 * piv.max():
                return lu
            # variables outside every cone make the system singular; a
            # quasi-definite regularisation keeps the direction well defined
            reg = 1e-10 * (1.0 + np.max(np.abs(kmat)))
            kreg = kmat.copy()
            kreg[np.arange(nx), np.arange(nx)] += reg
            kreg[np.arange(nx, nx + p), np.arange(nx, nx + p)] -= reg
            lu = scipy.linalg.lu_factor(kreg, check_finite=False)
        if not np.all(np.isfinite(lu[0])):
            raise _Trouble("KKT factorization failed")
        return lu

    def _pack(self, v):
        return np.concatenate([v[0]] + [svec(m, grp.is_complex).ravel()
                                        for grp, m in zip(self.cone.groups, v[1])])

    def _unpack(self, vec):
        n_lp = self.cone.sf.n_lp
        out, pos = [], n_lp
        for grp in self.cone.groups:
            d = _svec_len(grp.n, grp.is_complex)
            out.append(unsvec(vec[pos:pos + grp.size * d].reshape(grp.size, d),
                              grp.n, grp.is_complex))
            pos += grp.size * d
        return vec[:n_lp], out

    def _solve_once(self, bx, by, bz):
        u = self._pack(self.cone.w_inv_t(self.sc, bz))
        sol = scipy.linalg.lu_solve(self.lu, np.concatenate([bx, by, u]), check_finite=False)
        nx, p = self.nx, self.p
        return sol[:nx], sol[nx:nx + p], self._unpack(sol[nx + p:])

    def solve(self, bx, by, bz):
        """Solve ``[0 A' G'; A 0 0; G 0 -W'W] (dx, dy, dz) = (bx, by, bz)``.

        Returns ``dx, dy`` and the scaled ``W dz``, after a few steps of
        iterative refinement against the unscaled system.
        """
        cone, sc, sf = self.cone, self.sc, self.cone.sf
        out = self._solve_once(bx, by, bz)
        for _ in range(self.refine_steps):
            dx, dy, dz_sc = out
            dz = cone.w_inv(sc, dz_sc)
            ex = bx - (sf.a.T @ dy + cone.gt(dz))
            ey = by - sf.a @ dx
            ez = cone.add(bz, cone.add(cone.g(dx), cone.w_t(sc, dz_sc), -1.0), -1.0)
            cx, cy, cz = self._solve_once(ex, ey, ez)
            out = dx + cx, dy + cy, cone.add(dz_sc, cz)
        if not (np.all(np.isfinite(out[0])) and np.all(np.isfinite(out[1]))):
            raise _Trouble("non-finite search direction")
        return out


def _initial_point(cone, mode):
    sf = cone.sf
    e = cone.identity()
    if mode == "scaled":
        mag = max(1.0, np.linalg.norm(sf.c), np.linalg.norm(sf.b),
                  cone.norm(cone.h()))
        p = sf.a.shape[0]
        return (np.zeros(sf.nx), np.zeros(p), cone.scale(e, mag), cone.scale(e, mag))
    unit = _Scaling(np.ones(sf.n_lp), e[1], e[1], np.ones(sf.n_lp),
                    [np.ones((grp.size, grp.n)) for grp in sf.groups])
    kkt = _KKT(cone, unit)
    zero_cone = cone.scale(e, 0.0)
    x, _, dz = kkt.solve(np.zeros(sf.nx), sf.b, cone.h())
    s = cone.scale(dz, -1.0)
    _, y, z = kkt.solve(-sf.c, np.zeros(sf.a.shape[0]), zero_cone)
    nrm_s, nrm_z = cone.norm(s), cone.norm(z)
    ts = -cone.min_eig(s)
    if ts >= -1e-8 * max(nrm_s, 1.0):
        s = cone.add(s, e, 1.0 + ts)
    tz = -cone.min_eig(z)
    if tz >= -1e-8 * max(nrm_z, 1.0):
        z = cone.add(z, e, 1.0 + tz)
    return x, y, s, z


def _hsd(sf, tol, max_iter, mode):
    cone = _Cone(sf)
    c, a, b = sf.c, sf.a, sf.b
    hvec = cone.h()
    deg = sf.degree
    resx0 = max(1.0, np.linalg.norm(c))
    resy0 = max(1.0, np.linalg.norm(b))
    resz0 = max(1.0, cone.norm(hvec))

    x, y, s, z = _initial_point(cone, mode)
    tau, kappa = 1.0, 1.0
    sc = _scaling_from_points(cone, s, z)
    best = (np.inf, None, 0)
    refine = REFINE_STEPS_TIGHT if tol < REFINE_TOL else REFINE_STEPS_LOOSE

    for it in range(max_iter + 1):
        gz = cone.gt(z)
        r_x = a.T @ y + gz + c * tau
        r_y = a @ x - b * tau
        gx = cone.g(x)
        r_z = cone.add(cone.add(gx, s), hvec, -tau)
        hz, by, cx = cone.dot(hvec, z), float(b @ y), float(c @ x)
        r_t = kappa + cx + by + hz
        gap = cone.dot(s, z)
        mu = (gap + tau * kappa) / (deg + 1)

        pcost, dcost = cx / tau, -(hz + by) / tau
        pres = max(np.linalg.norm(r_y) / resy0, cone.norm(r_z) / resz0) / tau
        dres = np.linalg.norm(r_x) / resx0 / tau
        log.debug("it %2d pcost %+.8e dcost %+.8e gap %.2e pres %.2e dres %.2e tau/kappa %.2e",
                  it, pcost, dcost, gap / tau ** 2, pres, dres, tau / kappa)

        point = (x / tau, y / tau, cone.scale(z, 1 / tau), cone.scale(s, 1 / tau))
        merit = max(pres, dres, gap / tau ** 2 / (1 + abs(pcost)),
                    abs(pcost - dcost) / (1 + abs(pcost)))
        if merit <= tol:
            return cp.OPTIMAL, point, it, None
        if merit < best[0]:
            best = (merit, point, it)
        elif best[0] <= STALL_ZONE and (it - best[2] >= STALL_ITERS
                                        or merit > STALL_GROWTH * best[0]):
            # rounding dominates the step; report the best iterate seen
            log.debug("stalled at merit %.2e", best[0])
            return cp.MAX_ITER, best[1], it, {"merit": best[0]}

        if hz + by < 0:
            with np.errstate(over="ignore"):  # inf just means "no certificate yet"
                pinf = np.linalg.norm(a.T @ y + gz) / resx0 / -(hz + by)
            if pinf <= tol or tau < TAU_KAPPA_THRESHOLD * kappa:
                scale = 1.0 / -(hz + by)
                cert = {"y": y * scale, "z": cone.scale(z, scale), "residual": pinf,
                        "tau_over_kappa": tau / kappa}
                return cp.INFEASIBLE, None, it, cert
        if cx < 0:
            with np.errstate(over="ignore"):
                dinf = max(np.linalg.norm(a @ x) / resy0,
                           cone.norm(cone.add(gx, s)) / resz0) / -cx
            if dinf <= tol or tau < TAU_KAPPA_THRESHOLD * kappa:
                cert = {"x": x / -cx, "residual": dinf, "tau_over_kappa": tau / kappa}
                return cp.UNBOUNDED, None, it, cert
        if tau < TAU_KAPPA_THRESHOLD * kappa:
            raise _Trouble("tau/kappa collapsed without a certificate")
        if it == max_iter:
            break

        kkt = _KKT(cone, sc, refine)
        x1, y1, z1 = kkt.solve(-c, b, hvec)
        h_sc = cone.w_inv_t(sc, hvec)
        denom1 = float(c @ x1 + b @ y1) + cone.dot(h_sc, z1) - kappa / tau
        lam = cone.lam(sc)

        def direction(eta, d_s, d_k):
            q = cone.lam_solve(sc, d_s)
            bz = cone.add(cone.scale(r_z, -eta), cone.w_t(sc, q), -1.0)
            x2, y2, z2 = kkt.solve(-eta * r_x, -eta * r_y, bz)
            num = -eta * r_t - d_k / tau - (float(c @ x2 + b @ y2) + cone.dot(h_sc, z2))
            dtau = num / denom1
            dx = x2 + dtau * x1
            dy = y2 + dtau * y1
            dz_sc = cone.add(z2, z1, dtau)
            ds_sc = cone.add(q, dz_sc, -1.0)
            dkappa = (d_k - kappa * dtau) / tau
            return dx, dy, dz_sc, ds_sc, dtau, dkappa

        def step_length(ds_sc, dz_sc, dtau, dkappa):
            alpha = min(cone.max_step(sc, ds_sc), cone.max_step(sc, dz_sc))
            if dtau < 0:
                alpha = min(alpha, -tau / dtau)
            if dkappa < 0:
                alpha = min(alpha, -kappa / dkappa)
            return alpha

        # predictor
        aff = direction(1.0, cone.scale(cone.lam_sq(sc), -1.0), -tau * kappa)
        alpha_aff = min(1.0, step_length(aff[3], aff[2], aff[4], aff[5]))
        sigma = max(0.0, min(1.0, 1.0 - alpha_aff)) ** 3

        # corrector
        d_s = cone.add(cone.add(cone.scale(cone.lam_sq(sc), -1.0), cone.identity(), sigma * mu),
                       cone.jordan(aff[3], aff[2]), -1.0)
        d_k = -tau * kappa + sigma * mu - aff[4] * aff[5]
        dx, dy, dz_sc, ds_sc, dtau, dkappa = direction(1.0 - sigma, d_s, d_k)
        alpha = min(1.0, STEP_FRACTION * step_length(ds_sc, dz_sc, dtau, dkappa))

        x = x + alpha * dx
        y = y + alpha * dy
        tau = tau + alpha * dtau
        kappa = kappa + alpha * dkappa
        # update the scaling in factored form: the new scaled point is
        # diagonalised relative to the old factor, so s and z never need
        # to be factored from scratch
        s_t = cone.add(lam, ds_sc, alpha)
        z_t = cone.add(lam, dz_sc, alpha)
        if np.any(s_t[0] <= 0) or np.any(z_t[0] <= 0):
            raise _Trouble("left the orthant")
        r_new, rinv_new, lam_new = [], [], []
        for r, ri, sm, zm in zip(sc.r, sc.rinv, s_t[1], z_t[1]):
            rt, rti, lt = _nt_scaling(sm, zm)
            r_new.append(r @ rt)
            rinv_new.append(rti @ ri)
            lam_new.append(lt)
        sc = _Scaling(sc.w * np.sqrt(s_t[0] / z_t[0]), r_new, rinv_new,
                      np.sqrt(s_t[0] * z_t[0]), lam_new)
        s = cone.w_t(sc, cone.lam(sc))
        z = cone.w_inv(sc, cone.lam(sc))
        if not (np.all(np.isfinite(x)) and np.isfinite(tau) and np.isfinite(kappa)):
            raise _Trouble("non-finite iterate")

    return cp.MAX_ITER, best[1], max_iter, {"merit": best[0]}


def _assemble(problem, sf, status, point, iterations, certificate):
    ncon = len(problem.constraints)
    if point is None:
        return cp.ConicSolution(status=status, primal=[], duals=np.full(ncon, np.nan),
                                block_duals=[], objective=np.nan, dual_objective=np.nan,
                                iterations=iterations, certificate=certificate)
    x, y, z, _ = point
    duals = np.zeros(ncon)
    for con_idx, row in sf.ineq_rows:
        duals[con_idx] = z[0][row]
    for con_idx, row in sf.eq_rows:
        duals[con_idx] = -y[row]
    block_duals = []
    for where in sf.block_cone:
        if where is None:
            block_duals.append(0.0)
        elif where[0] == "lp":
            block_duals.append(float(z[0][where[1]]))
        else:
            m = z[1][where[1]][where[2]]
            block_duals.append(0.5 * (m + _herm(m)))
    hz = float(sf.h_lp @ z[0]) + sum(np.vdot(grp.h, zm).real for grp, zm in zip(sf.groups, z[1]))
    sol = cp.ConicSolution(
        status=status,
        primal=cp.block_values(problem, x),
        duals=duals,
        block_duals=block_duals,
        objective=float(sf.c @ x) + sf.offset,
        dual_objective=-(hz + float(sf.b @ y)) + sf.offset,
        iterations=iterations,
        certificate=certificate,
    )
    sol.kkt = kkt_residuals(problem, sol)
    return sol


def solve(problem: cp.ConicProblem, tol: float = 1e-8, max_iter: int = 100) -> cp.ConicSolution:
    """Solve a :class:`ConicProblem`.

    Parameters
    ----------
    problem : ConicProblem
    tol : float
        Feasibility and relative duality-gap tolerance, in ``[1e-12, 1e-4]``.
    max_iter : int
        Iteration cap; reaching it yields status ``MaxIter`` with the last
        iterate attached.

    Returns
    -------
    ConicSolution
        On ``Optimal`` every KKT residual reported by
        :func:`fdswipt.conic.kkt_residuals` is within ``tol`` (the gap
        relative to ``1 + |objective|``). On ``Infeasible`` / ``Unbounded``
        an improving-ray certificate is attached instead of a point.
    """
    if not 1e-12 <= tol <= 1e-4:
        raise ValueError(f"tol must lie in [1e-12, 1e-4], got {tol}")
    sf = cp.compile_problem(problem)
    last_error = None
    for mode in ("lsq", "scaled"):
        try:
            status, point, its, cert = _hsd(sf, tol, max_iter, mode)
        except _Trouble as exc:
            log.debug("interior-point attempt (%s start) failed: %s", mode, exc)
            last_error = exc
            continue
        return _assemble(problem, sf, status, point, its, cert)
    sol = _assemble(problem, sf, cp.NUMERICAL_TROUBLE, None, max_iter,
                    {"reason": str(last_error)})
    return sol
