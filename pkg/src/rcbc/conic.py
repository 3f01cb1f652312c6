"""Affine matrix expressions and a small semidefinite-program builder.

Programs have the form

    maximize / minimize   c^T z
    subject to            E z = f                  (equality rows)
                          g(z) >= 0                (scalar affine)
                          M_k(z) PSD               (symmetric affine blocks)

with ``z`` a flat vector of free variables.  Backends receive exactly this
structure; the reference backend is Clarabel.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp


class Affine:
    """Matrix of shape ``(r, c)`` whose row-major flattening is ``A z + b``."""

    __slots__ = ("shape", "A", "b")

    def __init__(self, shape: Tuple[int, int], A: sp.spmatrix, b: np.ndarray):
        self.shape = (int(shape[0]), int(shape[1]))
        self.A = A.tocsr()
        self.b = np.asarray(b, dtype=float).reshape(-1)

    # construction ------------------------------------------------------------

    @classmethod
    def constant(cls, mat, nvars: int = 0) -> "Affine":
        m = np.atleast_2d(np.asarray(mat, dtype=float))
        return cls(m.shape, sp.csr_matrix((m.size, nvars)), m.reshape(-1))

    @classmethod
    def zeros(cls, shape, nvars: int = 0) -> "Affine":
        return cls(shape, sp.csr_matrix((shape[0] * shape[1], nvars)), np.zeros(shape[0] * shape[1]))

    # helpers -----------------------------------------------------------------

    @property
    def nvars(self) -> int:
        return self.A.shape[1]

    def widen(self, nvars: int) -> "Affine":
        if nvars == self.nvars:
            return self
        if nvars < self.nvars:
            raise ValueError("cannot shrink an expression")
        A = sp.csr_matrix((self.A.data, self.A.indices, self.A.indptr), shape=(self.A.shape[0], nvars))
        return Affine(self.shape, A, self.b)

    def _align(self, other: "Affine"):
        n = max(self.nvars, other.nvars)
        return self.widen(n), other.widen(n)

    def value(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return (self.A @ z[: self.nvars] + self.b).reshape(self.shape)

    def is_constant(self) -> bool:
        return self.A.nnz == 0

    # algebra -----------------------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, Affine):
            other = Affine.constant(np.broadcast_to(np.asarray(other, dtype=float), self.shape), self.nvars)
        if other.shape != self.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")
        a, o = self._align(other)
        return Affine(self.shape, a.A + o.A, a.b + o.b)

    __radd__ = __add__

    def __neg__(self):
        return Affine(self.shape, -self.A, -self.b)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Affine) else -np.asarray(other, dtype=float))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, c: float):
        c = float(c)
        return Affine(self.shape, self.A * c, self.b * c)

    __rmul__ = __mul__

    def lmul(self, L) -> "Affine":
        """``L @ self`` for a constant matrix ``L``."""
        L = np.atleast_2d(np.asarray(L, dtype=float))
        r, c = self.shape
        if L.shape[1] != r:
            raise ValueError("inner dimensions disagree")
        K = sp.kron(sp.csr_matrix(L), sp.identity(c), format="csr")
        return Affine((L.shape[0], c), K @ self.A, K @ self.b)

    def rmul(self, R) -> "Affine":
        """``self @ R`` for a constant matrix ``R``."""
        R = np.atleast_2d(np.asarray(R, dtype=float))
        r, c = self.shape
        if R.shape[0] != c:
            raise ValueError("inner dimensions disagree")
        K = sp.kron(sp.identity(r), sp.csr_matrix(R.T), format="csr")
        return Affine((r, R.shape[1]), K @ self.A, K @ self.b)

    def scale_by(self, c: "Affine") -> "Affine":
        """Scalar affine ``c`` (1x1) times a constant ``self``, or constant ``c`` times affine ``self``."""
        if c.shape != (1, 1):
            raise ValueError("scale_by needs a 1x1 expression")
        if self.is_constant():
            M = self.b
            A = sp.csr_matrix(M.reshape(-1, 1)) @ c.A
            return Affine(self.shape, A, M * c.b[0])
        if c.is_constant():
            return self * c.b[0]
        raise ValueError("product of two non-constant expressions is not affine")

    @property
    def T(self) -> "Affine":
        r, c = self.shape
        perm = np.arange(r * c).reshape(r, c).T.reshape(-1)
        return Affine((c, r), self.A[perm], self.b[perm])

    def entry(self, i: int, j: int) -> "Affine":
        k = i * self.shape[1] + j
        return Affine((1, 1), self.A[k : k + 1], self.b[k : k + 1])

    def flat_rows(self, rows: Sequence[int]) -> Tuple[sp.csr_matrix, np.ndarray]:
        rows = np.asarray(rows, dtype=np.int64)
        return self.A[rows], self.b[rows]


def bmat(blocks: Sequence[Sequence[Optional[Affine]]], row_sizes=None, col_sizes=None) -> Affine:
    """Block matrix of Affine pieces (``None`` for zero blocks)."""
    R, C = len(blocks), len(blocks[0])
    rs = list(row_sizes) if row_sizes else [None] * R
    cs = list(col_sizes) if col_sizes else [None] * C
    nv = 0
    for i in range(R):
        for j in range(C):
            b = blocks[i][j]
            if b is None:
                continue
            nv = max(nv, b.nvars)
            if rs[i] is None:
                rs[i] = b.shape[0]
            if cs[j] is None:
                cs[j] = b.shape[1]
            if (rs[i], cs[j]) != b.shape:
                raise ValueError(f"block ({i},{j}) has shape {b.shape}, expected {(rs[i], cs[j])}")
    if None in rs or None in cs:
        raise ValueError("cannot infer block sizes; pass row_sizes/col_sizes")
    tot_r, tot_c = sum(rs), sum(cs)
    ro = np.concatenate([[0], np.cumsum(rs)])
    co = np.concatenate([[0], np.cumsum(cs)])
    rows_idx, mats, bvec = [], [], np.zeros(tot_r * tot_c)
    for i in range(R):
        for j in range(C):
            b = blocks[i][j]
            if b is None:
                continue
            rr, cc = np.meshgrid(np.arange(rs[i]) + ro[i], np.arange(cs[j]) + co[j], indexing="ij")
            dest = (rr * tot_c + cc).reshape(-1)
            rows_idx.append(dest)
            mats.append(b.widen(nv).A)
            bvec[dest] += b.b
    if mats:
        stacked = sp.vstack(mats, format="coo")
        dest = np.concatenate(rows_idx)
        A = sp.csr_matrix((stacked.data, (dest[stacked.row], stacked.col)), shape=(tot_r * tot_c, nv))
    else:
        A = sp.csr_matrix((tot_r * tot_c, nv))
    return Affine((tot_r, tot_c), A, bvec)


def svec_indices(d: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(row, col, weight) of the upper-triangular column-major vectorization."""
    rows, cols = [], []
    for j in range(d):
        for i in range(j + 1):
            rows.append(i)
            cols.append(j)
    r, c = np.array(rows), np.array(cols)
    w = np.where(r == c, 1.0, math.sqrt(2.0))
    return r, c, w


def smat(v: np.ndarray, d: int) -> np.ndarray:
    """Inverse of the scaled vectorization."""
    r, c, w = svec_indices(d)
    M = np.zeros((d, d))
    M[r, c] = v / w
    M[c, r] = v / w
    return M


@dataclass
class SymVar:
    """Symmetric matrix variable stored as its upper triangle."""

    name: str
    dim: int
    offset: int

    @property
    def size(self) -> int:
        return self.dim * (self.dim + 1) // 2

    def index(self, i, j):
        """Flat variable index of entry (i, j) (vectorised over arrays)."""
        i, j = np.minimum(i, j), np.maximum(i, j)
        return self.offset + j * (j + 1) // 2 + i

    def value(self, z) -> np.ndarray:
        r, c, _ = svec_indices(self.dim)
        M = np.zeros((self.dim, self.dim))
        v = np.asarray(z)[self.offset : self.offset + self.size]
        M[r, c] = v
        M[c, r] = v
        return M


@dataclass
class MatVar:
    name: str
    shape: Tuple[int, int]
    offset: int

    @property
    def size(self) -> int:
        return self.shape[0] * self.shape[1]

    def value(self, z) -> np.ndarray:
        return np.asarray(z)[self.offset : self.offset + self.size].reshape(self.shape)


@dataclass
class PSDConstraint:
    name: str
    expr: Affine


@dataclass
class ConicProgram:
    """Variables, equality rows, scalar inequalities and PSD blocks."""

    nvars: int = 0
    variables: Dict[str, object] = field(default_factory=dict)
    eq_rows: List[sp.csr_matrix] = field(default_factory=list)
    eq_rhs: List[np.ndarray] = field(default_factory=list)
    eq_names: List[Tuple[str, int]] = field(default_factory=list)
    nonneg: List[Tuple[str, Affine]] = field(default_factory=list)
    psd: List[PSDConstraint] = field(default_factory=list)
    objective: Optional[np.ndarray] = None
    maximize: bool = True

    # variables ---------------------------------------------------------------

    def _reserve(self, name: str, size: int) -> int:
        if name in self.variables:
            raise ValueError(f"duplicate variable name {name!r}")
        off = self.nvars
        self.nvars += size
        return off

    def sym_var(self, name: str, dim: int) -> SymVar:
        v = SymVar(name, dim, 0)
        v.offset = self._reserve(name, v.size)
        self.variables[name] = v
        return v

    def mat_var(self, name: str, shape) -> MatVar:
        v = MatVar(name, (int(shape[0]), int(shape[1])), 0)
        v.offset = self._reserve(name, v.size)
        self.variables[name] = v
        return v

    def expr(self, var) -> Affine:
        """Affine view of a declared variable."""
        if isinstance(var, SymVar):
            d = var.dim
            i, j = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
            cols = var.index(i.reshape(-1), j.reshape(-1))
            A = sp.csr_matrix((np.ones(d * d), (np.arange(d * d), cols)), shape=(d * d, self.nvars))
            return Affine((d, d), A, np.zeros(d * d))
        r, c = var.shape
        A = sp.csr_matrix((np.ones(r * c), (np.arange(r * c), var.offset + np.arange(r * c))), shape=(r * c, self.nvars))
        return Affine((r, c), A, np.zeros(r * c))

    def scalar(self, var) -> Affine:
        e = self.expr(var)
        if e.shape != (1, 1):
            raise ValueError("not a scalar variable")
        return e

    # constraints -------------------------------------------------------------

    def add_eq(self, name: str, A: sp.spmatrix, rhs: np.ndarray):
        """Rows ``A z = rhs``."""
        A = sp.csr_matrix(A)
        if A.shape[1] < self.nvars:
            A = sp.csr_matrix((A.data, A.indices, A.indptr), shape=(A.shape[0], self.nvars))
        self.eq_rows.append(A)
        self.eq_rhs.append(np.asarray(rhs, dtype=float).reshape(-1))
        self.eq_names.append((name, A.shape[0]))

    def add_eq_expr(self, name: str, e: Affine):
        """All entries of ``e`` equal zero."""
        self.add_eq(name, e.A, -e.b)

    def add_nonneg(self, name: str, e: Affine):
        self.nonneg.append((name, e))

    def add_psd(self, name: str, e: Affine):
        if e.shape[0] != e.shape[1]:
            raise ValueError("PSD constraint needs a square expression")
        v = e.value(np.zeros(max(e.nvars, 1)))
        if not np.allclose(v, v.T, atol=1e-12 * (1 + np.abs(v).max())):
            raise ValueError(f"PSD block {name!r} is not symmetric")
        sym = (e.A - e.T.A)
        if sym.nnz and np.abs(sym.data).max() > 1e-12:
            raise ValueError(f"PSD block {name!r} is not symmetric")
        self.psd.append(PSDConstraint(name, e))

    def set_objective(self, e: Affine, maximize: bool = True):
        if e.shape != (1, 1):
            raise ValueError("objective must be scalar")
        self.objective = np.asarray(e.widen(self.nvars).A.todense()).reshape(-1)
        self.maximize = maximize

    # assembled arrays ----------------------------------------------------------

    def equality_system(self) -> Tuple[sp.csr_matrix, np.ndarray]:
        if not self.eq_rows:
            return sp.csr_matrix((0, self.nvars)), np.zeros(0)
        A = sp.vstack([sp.csr_matrix((r.data, r.indices, r.indptr), shape=(r.shape[0], self.nvars)) for r in self.eq_rows], format="csr")
        return A, np.concatenate(self.eq_rhs)

    def psd_svec(self, c: PSDConstraint) -> Tuple[sp.csr_matrix, np.ndarray]:
        """``svec(M(z)) = L z + h``."""
        d = c.expr.shape[0]
        r, cc, w = svec_indices(d)
        rows = r * d + cc
        e = c.expr.widen(self.nvars)
        L = sp.diags(w) @ e.A[rows]
        return sp.csr_matrix(L), w * e.b[rows]

    def stats(self) -> Dict[str, int]:
        return {
            "variables": self.nvars,
            "equalities": int(sum(n for _, n in self.eq_names)),
            "nonneg": len(self.nonneg),
            "psd_blocks": len(self.psd),
            "largest_psd": max((c.expr.shape[0] for c in self.psd), default=0),
        }

    def dump(self) -> str:
        """Sparse text form for cross-checking with external solvers.

        Layout::

            rcbc-sdp 1
            vars N
            objective max|min
            c <index> <value>               (nonzeros)
            eq <rows>
            a <row> <col> <value>           (nonzeros of E)
            f <row> <value>                 (nonzeros of the right-hand side)
            nonneg <k>
            g <row> <col> <value> / h <row> <value>      (g_k(z) = G z + h >= 0)
            psd <dim> <name>
            m <i> <j> <col> <value>         (upper-triangular coefficients of M(z))
            m0 <i> <j> <value>              (constant term)
        """
        out = ["rcbc-sdp 1", f"vars {self.nvars}", f"objective {'max' if self.maximize else 'min'}"]
        c = self.objective if self.objective is not None else np.zeros(self.nvars)
        out += [f"c {i} {v:.17g}" for i, v in enumerate(c) if v != 0]
        E, f = self.equality_system()
        out.append(f"eq {E.shape[0]}")
        Ec = E.tocoo()
        out += [f"a {i} {j} {v:.17g}" for i, j, v in zip(Ec.row, Ec.col, Ec.data)]
        out += [f"f {i} {v:.17g}" for i, v in enumerate(f) if v != 0]
        out.append(f"nonneg {len(self.nonneg)}")
        for k, (_, g) in enumerate(self.nonneg):
            gc = g.widen(self.nvars).A.tocoo()
            out += [f"g {k} {j} {v:.17g}" for j, v in zip(gc.col, gc.data)]
            if g.b[0] != 0:
                out.append(f"h {k} {g.b[0]:.17g}")
        for blk in self.psd:
            d = blk.expr.shape[0]
            out.append(f"psd {d} {blk.name}")
            e = blk.expr.widen(self.nvars)
            A = e.A.tocoo()
            for row, col, v in zip(A.row, A.col, A.data):
                i, j = divmod(int(row), d)
                if i <= j:
                    out.append(f"m {i} {j} {col} {v:.17g}")
            for row in np.flatnonzero(e.b):
                i, j = divmod(int(row), d)
                if i <= j:
                    out.append(f"m0 {i} {j} {e.b[row]:.17g}")
        return "\n".join(out) + "\n"


# ---------------------------------------------------------------- solving


FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical_failure"


@dataclass
class SolveResult:
    status: str
    z: Optional[np.ndarray]
    objective: Optional[float]
    diagnostics: Dict[str, object]


def audit(prog: ConicProgram, z: np.ndarray, psd_tol: float = 1e-7, eq_tol: float = 1e-6) -> Dict[str, object]:
    """Re-check every constraint at ``z`` independently of the solver."""
    worst_psd, worst_name = math.inf, None
    for c in prog.psd:
        M = c.expr.value(z)
        M = 0.5 * (M + M.T)
        scale = max(1.0, float(np.abs(M).max()))
        mineig = float(np.linalg.eigvalsh(M)[0]) / scale
        if mineig < worst_psd:
            worst_psd, worst_name = mineig, c.name
    worst_nn = math.inf
    for _, g in prog.nonneg:
        v = float(g.value(z)[0, 0])
        worst_nn = min(worst_nn, v / max(1.0, abs(v)))
    E, f = prog.equality_system()
    if E.shape[0]:
        res = E @ z - f
        # relative to the size of the terms that cancel in each row
        mag = abs(E) @ np.abs(z) + np.abs(f)
        scale = np.maximum(mag, 1e-6 * max(float(mag.max()), 1e-300))
        eq_res = float(np.max(np.abs(res) / scale))
    else:
        eq_res = 0.0
    ok = (worst_psd >= -psd_tol) and (worst_nn >= -psd_tol) and (eq_res <= eq_tol)
    return {
        "passed": bool(ok),
        "min_psd_eig_rel": worst_psd if worst_psd != math.inf else None,
        "worst_psd_block": worst_name,
        "min_nonneg_rel": worst_nn if worst_nn != math.inf else None,
        "max_eq_residual": eq_res,
    }


class ClarabelBackend:
    name = "clarabel"

    def __init__(self, max_iter: int = 400, tol: float = 1e-9, verbose: bool = False):
        self.max_iter = max_iter
        self.tol = tol
        self.verbose = verbose

    def solve(self, prog: ConicProgram) -> SolveResult:
        import clarabel

        E, f = prog.equality_system()
        A_parts, b_parts, cones = [], [], []
        if E.shape[0]:
            A_parts.append(E)
            b_parts.append(f)
            cones.append(clarabel.ZeroConeT(E.shape[0]))
        if prog.nonneg:
            G = sp.vstack([g.widen(prog.nvars).A for _, g in prog.nonneg], format="csr")
            h = np.array([g.b[0] for _, g in prog.nonneg])
            A_parts.append(-G)
            b_parts.append(h)
            cones.append(clarabel.NonnegativeConeT(len(prog.nonneg)))
        for c in prog.psd:
            L, h = prog.psd_svec(c)
            A_parts.append(-L)
            b_parts.append(h)
            cones.append(clarabel.PSDTriangleConeT(c.expr.shape[0]))
        A = sp.vstack(A_parts, format="csc")
        b = np.concatenate(b_parts)
        cvec = np.zeros(prog.nvars) if prog.objective is None else prog.objective.copy()
        if prog.maximize:
            cvec = -cvec
        s = clarabel.DefaultSettings()
        s.verbose = self.verbose
        s.max_iter = self.max_iter
        s.tol_gap_abs = self.tol
        s.tol_gap_rel = self.tol
        s.tol_feas = self.tol
        s.tol_infeas_abs = 1e-10
        s.tol_infeas_rel = 1e-10
        solver = clarabel.DefaultSolver(sp.csc_matrix((prog.nvars, prog.nvars)), cvec, A, b, cones, s)
        sol = solver.solve()
        status = str(sol.status)
        diag = {
            "backend": self.name,
            "solver_status": status,
            "iterations": int(sol.iterations),
            "solve_time": float(sol.solve_time),
            "r_prim": float(sol.r_prim),
            "r_dual": float(sol.r_dual),
        }
        z = np.asarray(sol.x, dtype=float)
        if status in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
            return SolveResult(INFEASIBLE, None, None, diag)
        obj = float(np.dot(prog.objective, z)) if prog.objective is not None else 0.0
        return SolveResult(status, z, obj, diag)


class SCSBackend:
    """Optional second backend (requires the ``scs`` package)."""

    name = "scs"

    def __init__(self, eps: float = 1e-8, max_iters: int = 200000, verbose: bool = False):
        self.eps = eps
        self.max_iters = max_iters
        self.verbose = verbose

    def solve(self, prog: ConicProgram) -> SolveResult:
        import scs

        E, f = prog.equality_system()
        A_parts, b_parts = [E], [f]
        cone = {"z": E.shape[0]}
        if prog.nonneg:
            G = sp.vstack([g.widen(prog.nvars).A for _, g in prog.nonneg], format="csr")
            A_parts.append(-G)
            b_parts.append(np.array([g.b[0] for _, g in prog.nonneg]))
            cone["l"] = len(prog.nonneg)
        sdims = []
        for c in prog.psd:
            # scs wants lower-triangular column-major == upper-triangular row-major
            d = c.expr.shape[0]
            r, cc, w = svec_indices(d)
            order = np.lexsort((cc, r))
            L, h = prog.psd_svec(c)
            A_parts.append(-L[order])
            b_parts.append(h[order])
            sdims.append(d)
        if sdims:
            cone["s"] = sdims
        cvec = np.zeros(prog.nvars) if prog.objective is None else prog.objective.copy()
        if prog.maximize:
            cvec = -cvec
        data = {"A": sp.vstack(A_parts, format="csc"), "b": np.concatenate(b_parts), "c": cvec}
        solver = scs.SCS(data, cone, eps_abs=self.eps, eps_rel=self.eps, max_iters=self.max_iters, verbose=self.verbose)
        sol = solver.solve()
        status = sol["info"]["status"]
        diag = {"backend": self.name, "solver_status": status, "iterations": int(sol["info"]["iter"])}
        if "infeasible" in status:
            return SolveResult(INFEASIBLE, None, None, diag)
        z = np.asarray(sol["x"], dtype=float)
        obj = float(np.dot(prog.objective, z)) if prog.objective is not None else 0.0
        return SolveResult("Solved" if status == "solved" else status, z, obj, diag)


BACKENDS = {"clarabel": ClarabelBackend, "scs": SCSBackend}


def get_backend(name: Optional[str] = None, **kwargs):
    """Backend by name; defaults to ``$RCBC_BACKEND`` or clarabel."""
    name = (name or os.environ.get("RCBC_BACKEND") or "clarabel").lower()
    if name not in BACKENDS:
        raise ValueError(f"unknown backend {name!r}; choose from {sorted(BACKENDS)}")
    return BACKENDS[name](**kwargs)


def solve_program(prog: ConicProgram, backend=None, psd_tol: float = 1e-7, eq_tol: float = 1e-7) -> SolveResult:
    """Solve and classify: feasible only if the independent audit passes."""
    backend = backend or get_backend()
    res = backend.solve(prog)
    if res.status == INFEASIBLE:
        return res
    rep = audit(prog, res.z, psd_tol, eq_tol)
    res.diagnostics["audit"] = rep
    if rep["passed"]:
        return SolveResult(FEASIBLE, res.z, res.objective, res.diagnostics)
    return SolveResult(NUMERICAL_FAILURE, res.z, res.objective, res.diagnostics)
