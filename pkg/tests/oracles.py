"""Independent reference computations used by the tests."""

import numpy as np

from fdswipt.conic import problem as cp


def cvxopt_solve(problem, tol=1e-8):
    """Solve with cvxopt, complex cones embedded as real ``[[Re, -Im], [Im, Re]]`` blocks.

    The decision vector is shared with the package's compiled form, so the
    two objectives are directly comparable.
    """
    from cvxopt import matrix, solvers

    sf = cp.compile_problem(problem)
    nx = sf.nx
    rows, hs, sizes = [sf.g_lp], [sf.h_lp], []
    for grp in sf.groups:
        for b in range(grp.size):
            g, h = grp.g[:, b], grp.h[b]
            if grp.is_complex:
                g = np.block([[g.real, -g.imag], [g.imag, g.real]])
                h = np.block([[h.real, -h.imag], [h.imag, h.real]])
            n = g.shape[-1]
            sizes.append(n)
            rows.append(g.transpose(0, 2, 1).reshape(nx, n * n).T)  # column-major vec
            hs.append(h.T.ravel())
    kw = {}
    if sf.a.shape[0]:
        kw = {"A": matrix(sf.a), "b": matrix(sf.b)}
    opts = {"show_progress": False, "abstol": tol, "reltol": tol, "feastol": tol,
            "maxiters": 200}
    res = solvers.conelp(matrix(sf.c), matrix(np.vstack(rows)), matrix(np.concatenate(hs)),
                         {"l": sf.n_lp, "q": [], "s": sizes}, options=opts, **kw)
    objective = None
    if res["status"] == "optimal":
        objective = float(sf.c @ np.array(res["x"]).ravel()) + sf.offset
    return res["status"], objective


def mmse_sinr(h_ul, p, noise):
    """Uplink SINRs with per-point optimal (MMSE) filters, batched over power grids.

    ``p`` has shape ``(..., K)``; returns the same shape.
    """
    k_users, n_r = h_ul.shape
    cov = noise * np.eye(n_r) + np.einsum("...j,ja,jb->...ab", p, h_ul, h_ul.conj())
    out = np.empty(p.shape)
    for k in range(k_users):
        hk = h_ul[k]
        interf = cov - p[..., k, None, None] * np.outer(hk, hk.conj())
        rhs = np.broadcast_to(hk[:, None], interf.shape[:-1] + (1,))
        x = np.linalg.solve(interf, rhs)[..., 0]
        out[..., k] = p[..., k] * np.real(np.einsum("a,...a->...", hk.conj(), x))
    return out
