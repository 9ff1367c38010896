"""Conic feasibility/optimization programs and a deterministic solve.

A :class:`ConeProgram` is a purely declarative object: an objective
``minimize 0.5 x @ quadratic @ x + objective @ x`` (the quadratic part is
optional) plus affine blocks ``matrix @ x + offset`` required to lie
in one of four cones ("zero", "nonneg", "soc", "psd").  Second-order blocks
use the convention ``r[0] >= ||r[1:]||``.  Semidefinite blocks map into the
scaled upper-triangle packing (column-major, off-diagonal entries multiplied
by sqrt(2)) of a ``side x side`` symmetric matrix; :func:`svec` and
:func:`smat` convert between packings.

:func:`solve` hands the program to the Clarabel interior-point solver and
returns a :class:`SolveReport` whose ``max_violation`` field is recomputed
from the returned point, so callers never need to trust solver bookkeeping.
Solves are deterministic for identical inputs (single-threaded, no random
restarts).
"""

from dataclasses import dataclass, field

import clarabel
import numpy as np
import scipy.sparse as sp

_KINDS = ("zero", "nonneg", "soc", "psd")
_SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class Block:
    """One affine-into-cone constraint: ``matrix @ x + offset in cone``."""

    kind: str
    matrix: object              # (rows, n) ndarray or scipy sparse
    offset: np.ndarray
    side: int = 0               # matrix order, "psd" blocks only

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown cone kind {self.kind!r}")
        rows = self.matrix.shape[0]
        if rows != np.asarray(self.offset).size:
            raise ValueError("offset length does not match matrix rows")
        if self.kind == "psd" and rows != self.side * (self.side + 1) // 2:
            raise ValueError("psd block rows must equal side*(side+1)//2")


@dataclass(frozen=True)
class ConeProgram:
    """``minimize 0.5 x'Qx + objective @ x`` with every block in its cone.

    ``quadratic`` (Q) is an optional symmetric positive-semidefinite matrix;
    omit it for a purely linear objective.
    """

    objective: np.ndarray
    blocks: tuple = field(default_factory=tuple)
    quadratic: object = None

    @property
    def n(self):
        return np.asarray(self.objective).size


@dataclass
class SolveReport:
    status: str                 # "optimal" | "infeasible" | "numerical-failure"
    x: object                   # ndarray on success, None otherwise
    objective: float
    max_violation: float
    iterations: int
    solve_time: float


def _tri_indices(side):
    rows = np.concatenate([np.arange(j + 1) for j in range(side)])
    cols = np.concatenate([np.full(j + 1, j) for j in range(side)])
    return rows, cols


def svec(m):
    """Pack a symmetric matrix into the scaled upper-triangle vector."""
    m = np.asarray(m, dtype=float)
    i, j = _tri_indices(m.shape[0])
    scale = np.where(i == j, 1.0, _SQRT2)
    return m[i, j] * scale


def smat(v, side):
    """Invert :func:`svec` for a matrix of the given order."""
    v = np.asarray(v, dtype=float)
    i, j = _tri_indices(side)
    out = np.zeros((side, side))
    out[i, j] = v / np.where(i == j, 1.0, _SQRT2)
    out[j, i] = out[i, j]
    return out


def violation(program, x):
    """Worst constraint violation of ``x`` across all blocks (0 if feasible)."""
    worst = 0.0
    for blk in program.blocks:
        r = np.asarray(blk.matrix @ x).ravel() + np.asarray(blk.offset).ravel()
        if blk.kind == "zero":
            v = np.max(np.abs(r)) if r.size else 0.0
        elif blk.kind == "nonneg":
            v = max(0.0, -np.min(r)) if r.size else 0.0
        elif blk.kind == "soc":
            v = max(0.0, np.linalg.norm(r[1:]) - r[0])
        else:
            v = max(0.0, -np.linalg.eigvalsh(smat(r, blk.side))[0])
        worst = max(worst, v)
    return worst


_CONE_MAKERS = {
    "zero": clarabel.ZeroConeT,
    "nonneg": clarabel.NonnegativeConeT,
    "soc": clarabel.SecondOrderConeT,
    "psd": None,  # needs the matrix order, handled separately
}


def solve(program, tol=1e-8, max_iter=200):
    """Solve a :class:`ConeProgram`, recomputing feasibility of the result."""
    n = program.n
    q = np.asarray(program.objective, dtype=float).ravel()

    mats, offs, cones = [], [], []
    # group by kind so the cone list stays in Clarabel's preferred order
    for kind in _KINDS:
        for blk in program.blocks:
            if blk.kind != kind:
                continue
            rows = blk.matrix.shape[0]
            if rows == 0:
                continue
            mats.append(sp.csr_matrix(blk.matrix))
            offs.append(np.asarray(blk.offset, dtype=float).ravel())
            if kind == "psd":
                cones.append(clarabel.PSDTriangleConeT(blk.side))
            else:
                cones.append(_CONE_MAKERS[kind](rows))

    a = sp.csc_matrix(-sp.vstack(mats)) if mats else sp.csc_matrix((0, n))
    b = np.concatenate(offs) if offs else np.zeros(0)

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = max_iter
    settings.max_threads = 1
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol

    if program.quadratic is None:
        p = sp.csc_matrix((n, n))
    else:
        p = sp.csc_matrix(sp.triu(sp.csc_matrix(program.quadratic)))

    solver = clarabel.DefaultSolver(p, q, a, b, cones, settings)
    sol = solver.solve()
    status = str(sol.status)

    if status in ("Solved", "AlmostSolved"):
        x = np.asarray(sol.x, dtype=float)
        quad = 0.0 if program.quadratic is None else \
            0.5 * float(x @ (program.quadratic @ x))
        return SolveReport(
            status="optimal",
            x=x,
            objective=quad + float(q @ x),
            max_violation=violation(program, x),
            iterations=int(sol.iterations),
            solve_time=float(sol.solve_time),
        )
    if status in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        report_status = "infeasible"
    else:
        report_status = "numerical-failure"
    return SolveReport(
        status=report_status,
        x=None,
        objective=np.nan,
        max_violation=np.nan,
        iterations=int(sol.iterations),
        solve_time=float(sol.solve_time),
    )
