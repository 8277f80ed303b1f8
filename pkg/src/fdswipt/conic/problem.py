"""Block-structured conic problems and their solutions.

A :class:`ConicProblem` is a list of variable blocks, a linear objective
and a list of linear constraints. A linear functional is a mapping from
block index to a coefficient:

* ``HermitianPSD(n)`` blocks take a Hermitian ``n x n`` coefficient ``C``
  and contribute ``Re tr(C X)``;
* ``Real2x2PSD`` blocks take a real symmetric ``2 x 2`` coefficient and
  contribute ``tr(C X)``;
* scalar blocks take a float.

Problems are compiled into the standard form used by the interior-point
solver::

    minimize    c'x
    subject to  G x + s = h,  A x = b,  s in K

where ``x`` collects the real parameters of every block and ``K`` is a
product of a nonnegative orthant and PSD cones. Matrix blocks of equal
shape and field form one :class:`ConeGroup`, which the solver handles as a
stacked array.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from ..exceptions import ContractError

Coefficient = Union[float, np.ndarray]
LinearForm = Dict[int, Coefficient]

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
MAX_ITER = "MaxIter"
NUMERICAL_TROUBLE = "NumericalTrouble"


@dataclass(frozen=True)
class HermitianPSD:
    n: int
    kind = "hermitian"

    @property
    def n_params(self) -> int:
        return self.n * self.n


@dataclass(frozen=True)
class Real2x2PSD:
    kind = "real2x2"
    n = 2
    n_params = 3


@dataclass(frozen=True)
class NonnegScalar:
    kind = "nonneg"
    n_params = 1


@dataclass(frozen=True)
class FreeScalar:
    kind = "free"
    n_params = 1


Block = Union[HermitianPSD, Real2x2PSD, NonnegScalar, FreeScalar]


@dataclass(frozen=True)
class Constraint:
    """``form(X) <sense> rhs`` with ``sense`` one of ``"="`` and ``">="``."""

    form: LinearForm
    sense: str
    rhs: float
    name: str = ""

    def __post_init__(self):
        if self.sense not in ("=", ">="):
            raise ContractError(f"unknown constraint sense {self.sense!r}")


@dataclass
class ConicProblem:
    blocks: List[Block]
    objective: LinearForm
    constraints: List[Constraint] = field(default_factory=list)
    offset: float = 0.0

    def __post_init__(self):
        for form in [self.objective] + [c.form for c in self.constraints]:
            _check_form(self.blocks, form)
        if not np.isfinite(self.offset):
            raise ContractError("objective offset must be finite")

    def constraint_indices(self, prefix: str) -> List[int]:
        """Indices of constraints whose name starts with ``prefix``."""
        return [i for i, c in enumerate(self.constraints) if c.name.startswith(prefix)]


@dataclass
class ConicSolution:
    """Solver output.

    ``duals[i]`` is the multiplier of constraint ``i`` in the convention
    ``c = sum_i duals[i] * a_i + S`` (so duals of ``>=`` constraints are
    nonnegative) and ``block_duals[j]`` is the slack ``S`` restricted to
    block ``j``.
    """

    status: str
    primal: List[Coefficient]
    duals: np.ndarray
    block_duals: List[Coefficient]
    objective: float
    dual_objective: float
    kkt: Optional[tuple] = None
    iterations: int = 0
    certificate: Optional[dict] = None

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def entry(i: int, j: int, n: int = 2, hermitian: bool = False) -> np.ndarray:
    """Coefficient selecting the ``(i, j)`` entry (real part if Hermitian)."""
    c = np.zeros((n, n), dtype=complex if hermitian else float)
    if i == j:
        c[i, i] = 1.0
    else:
        c[i, j] = c[j, i] = 0.5
    return c


def _check_form(blocks: Sequence[Block], form: LinearForm):
    for idx, coef in form.items():
        if not 0 <= idx < len(blocks):
            raise ContractError(f"linear form references unknown block {idx}")
        blk = blocks[idx]
        if isinstance(blk, (HermitianPSD, Real2x2PSD)):
            coef = np.asarray(coef)
            if coef.shape != (blk.n, blk.n):
                raise ContractError(
                    f"coefficient for block {idx} must be {blk.n}x{blk.n}")
            if np.max(np.abs(coef - coef.conj().T), initial=0.0) > 1e-12 * max(
                    1.0, float(np.max(np.abs(coef), initial=0.0))):
                raise ContractError(f"coefficient for block {idx} is not Hermitian")
            if isinstance(blk, Real2x2PSD) and np.any(np.imag(coef) != 0):
                raise ContractError("real 2x2 blocks take real coefficients")
        elif not np.isscalar(coef) and np.ndim(coef) != 0:
            raise ContractError(f"scalar block {idx} needs a scalar coefficient")
        if not np.all(np.isfinite(coef)):
            raise ContractError("non-finite coefficient")


# ---------------------------------------------------------------------------
# parameterisation of block entries


def _basis(blk: Block) -> np.ndarray:
    """Basis matrices ``E_p`` with ``X = sum_p x_p E_p``."""
    if isinstance(blk, HermitianPSD):
        n = blk.n
        out = np.zeros((n * n, n, n), dtype=complex)
        p = 0
        for i in range(n):
            out[p, i, i] = 1.0
            p += 1
        for i in range(n):
            for j in range(i + 1, n):
                out[p, i, j] = out[p, j, i] = 1.0
                out[p + 1, i, j] = 1j
                out[p + 1, j, i] = -1j
                p += 2
        return out
    if isinstance(blk, Real2x2PSD):
        return np.array([[[1.0, 0.0], [0.0, 0.0]],
                         [[0.0, 1.0], [1.0, 0.0]],
                         [[0.0, 0.0], [0.0, 1.0]]])
    return np.ones((1, 1, 1))


@dataclass
class ConeGroup:
    """PSD cones of one shape: complex Hermitian or real symmetric ``n x n``.

    ``g[p, b]`` is the coefficient of parameter ``p`` in the slack of the
    ``b``-th member (``s = h - G x``), ``h[b]`` its constant.
    """

    n: int
    is_complex: bool
    members: List[int]
    g: np.ndarray                  # (nx, m, n, n)
    h: np.ndarray                  # (m, n, n)

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass
class StandardForm:
    """Compiled problem; see the module docstring for the layout."""

    c: np.ndarray
    offset: float
    n_lp: int
    g_lp: np.ndarray               # n_lp x nx
    h_lp: np.ndarray
    groups: List[ConeGroup]
    a: np.ndarray
    b: np.ndarray
    block_slices: List[slice]      # parameter range of each block
    eq_rows: np.ndarray = None     # (constraint index, row of A)
    ineq_rows: np.ndarray = None   # (constraint index, row of g_lp)
    block_cone: List[tuple] = field(default_factory=list)

    @property
    def nx(self) -> int:
        return self.c.size

    @property
    def degree(self) -> int:
        return self.n_lp + sum(grp.n * grp.size for grp in self.groups)


def form_vector(blocks, bases, slices, form: LinearForm) -> np.ndarray:
    """Coefficient vector of ``form`` over the real parameters."""
    nx = slices[-1].stop if slices else 0
    out = np.zeros(nx)
    for idx, coef in form.items():
        basis = bases[idx]
        if isinstance(blocks[idx], (HermitianPSD, Real2x2PSD)):
            coef = np.asarray(coef)
            out[slices[idx]] += np.real(np.einsum("ji,pij->p", coef, basis))
        else:
            out[slices[idx]] += float(np.real(coef))
    return out


def compile_problem(problem: ConicProblem) -> StandardForm:
    blocks = problem.blocks
    bases = [_basis(b) for b in blocks]
    slices, start = [], 0
    for blk in blocks:
        slices.append(slice(start, start + blk.n_params))
        start += blk.n_params
    nx = start

    c = form_vector(blocks, bases, slices, problem.objective)

    lp_g, lp_h, block_cone = [], [], []
    for j, blk in enumerate(blocks):
        if isinstance(blk, NonnegScalar):
            row = np.zeros(nx)
            row[slices[j].start] = -1.0
            block_cone.append(("lp", len(lp_g)))
            lp_g.append(row)
            lp_h.append(0.0)
        else:
            block_cone.append(None)

    ineq_rows, eq_rows = [], []
    a_rows, b_vals = [], []
    for i, con in enumerate(problem.constraints):
        vec = form_vector(blocks, bases, slices, con.form)
        if con.sense == ">=":
            ineq_rows.append((i, len(lp_g)))
            lp_g.append(-vec)
            lp_h.append(-float(con.rhs))
        else:
            eq_rows.append((i, len(a_rows)))
            a_rows.append(vec)
            b_vals.append(float(con.rhs))

    keyed: Dict[tuple, List[int]] = {}
    for j, blk in enumerate(blocks):
        if isinstance(blk, HermitianPSD):
            keyed.setdefault((blk.n, True), []).append(j)
        elif isinstance(blk, Real2x2PSD):
            keyed.setdefault((2, False), []).append(j)
    groups = []
    for (n, is_complex), members in keyed.items():
        dtype = complex if is_complex else float
        g = np.zeros((nx, len(members), n, n), dtype=dtype)
        for pos, j in enumerate(members):
            g[slices[j], pos] = -bases[j]
            block_cone[j] = ("psd", len(groups), pos)
        groups.append(ConeGroup(n, is_complex, members, g,
                                np.zeros((len(members), n, n), dtype=dtype)))

    return StandardForm(
        c=c, offset=float(problem.offset),
        n_lp=len(lp_g),
        g_lp=np.array(lp_g).reshape(len(lp_g), nx),
        h_lp=np.array(lp_h, dtype=float),
        groups=groups,
        a=np.array(a_rows).reshape(len(a_rows), nx),
        b=np.array(b_vals, dtype=float),
        block_slices=slices,
        eq_rows=np.array(eq_rows, dtype=int).reshape(-1, 2),
        ineq_rows=np.array(ineq_rows, dtype=int).reshape(-1, 2),
        block_cone=block_cone,
    )


def block_values(problem: ConicProblem, x: np.ndarray) -> List[Coefficient]:
    """Block matrices / scalars for a parameter vector ``x``."""
    out, start = [], 0
    for blk in problem.blocks:
        params = x[start:start + blk.n_params]
        start += blk.n_params
        if isinstance(blk, HermitianPSD):
            out.append(np.einsum("p,pij->ij", params, _basis(blk)))
        elif isinstance(blk, Real2x2PSD):
            out.append(np.array([[params[0], params[1]], [params[1], params[2]]]))
        else:
            out.append(float(params[0]))
    return out


def evaluate(problem: ConicProblem, form: LinearForm, values: Sequence[Coefficient]) -> float:
    """Value of a linear functional at the given block values."""
    total = 0.0
    for idx, coef in form.items():
        val = values[idx]
        if isinstance(problem.blocks[idx], (HermitianPSD, Real2x2PSD)):
            total += float(np.real(np.trace(np.asarray(coef) @ np.asarray(val))))
        else:
            total += float(np.real(coef)) * float(np.real(val))
    return total


# ---------------------------------------------------------------------------
# text dump
#
#   fdswipt-conic 1
#   blocks <count>
#   block <index> hermitian <n> | real2x2 | nonneg | free
#   offset <value>
#   objective <terms>
#   constraint <index> <sense> <rhs> <terms> [<name>]
#   term <block> <row> <col> <re> <im>
#
# ``term`` lines follow the objective / constraint line that announces
# them; for scalar blocks row = col = 0. Matrix coefficients list every
# nonzero entry of the (Hermitian or symmetric) coefficient matrix.


def _terms(problem: ConicProblem, form: LinearForm):
    lines = []
    for idx in sorted(form):
        coef = form[idx]
        if isinstance(problem.blocks[idx], (HermitianPSD, Real2x2PSD)):
            coef = np.asarray(coef, dtype=complex)
            for (r, col), v in np.ndenumerate(coef):
                if v != 0:
                    lines.append(f"term {idx} {r} {col} {float(v.real)!r} {float(v.imag)!r}")
        else:
            lines.append(f"term {idx} 0 0 {float(np.real(coef))!r} 0.0")
    return lines


def dumps(problem: ConicProblem) -> str:
    lines = ["fdswipt-conic 1", f"blocks {len(problem.blocks)}"]
    for j, blk in enumerate(problem.blocks):
        extra = f" {blk.n}" if isinstance(blk, HermitianPSD) else ""
        lines.append(f"block {j} {blk.kind}{extra}")
    lines.append(f"offset {float(problem.offset)!r}")
    terms = _terms(problem, problem.objective)
    lines.append(f"objective {len(terms)}")
    lines.extend(terms)
    for i, con in enumerate(problem.constraints):
        terms = _terms(problem, con.form)
        name = f" {con.name}" if con.name else ""
        lines.append(f"constraint {i} {con.sense} {float(con.rhs)!r} {len(terms)}{name}")
        lines.extend(terms)
    return "\n".join(lines) + "\n"


def loads(text: str) -> ConicProblem:
    lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines or lines[0][:2] != ["fdswipt-conic", "1"]:
        raise ContractError("not an fdswipt-conic version 1 dump")
    pos = 1
    n_blocks = int(lines[pos][1])
    pos += 1
    blocks: List[Block] = []
    for _ in range(n_blocks):
        kind = lines[pos][2]
        if kind == "hermitian":
            blocks.append(HermitianPSD(int(lines[pos][3])))
        elif kind == "real2x2":
            blocks.append(Real2x2PSD())
        elif kind == "nonneg":
            blocks.append(NonnegScalar())
        elif kind == "free":
            blocks.append(FreeScalar())
        else:
            raise ContractError(f"unknown block kind {kind!r}")
        pos += 1
    offset = float(lines[pos][1])
    pos += 1

    def read_terms(count):
        nonlocal pos
        form: LinearForm = {}
        for _ in range(count):
            _, blk, r, col, re, im = lines[pos]
            pos += 1
            blk, r, col = int(blk), int(r), int(col)
            value = float(re) + 1j * float(im)
            block = blocks[blk]
            if isinstance(block, (HermitianPSD, Real2x2PSD)):
                dtype = complex if isinstance(block, HermitianPSD) else float
                mat = form.setdefault(blk, np.zeros((block.n, block.n), dtype=dtype))
                mat[r, col] = value if dtype is complex else value.real
            else:
                form[blk] = value.real
        return form

    count = int(lines[pos][1])
    pos += 1
    objective = read_terms(count)
    constraints = []
    while pos < len(lines):
        head = lines[pos]
        pos += 1
        sense, rhs, count = head[2], float(head[3]), int(head[4])
        name = head[5] if len(head) > 5 else ""
        constraints.append(Constraint(read_terms(count), sense, rhs, name))
    return ConicProblem(blocks, objective, constraints, offset)
