"""Barrier-certificate synthesis as a semidefinite program.

The polynomial matrix inequality is compiled to coefficient-matching
equalities against a Gram matrix: for every exponent ``a`` and entry
``(p, r)`` with ``p <= r``

    F_a[p, r] - (ball terms) = sum_{(k, l): m_k + m_l = a} G[(p, k), (r, l)]

where ``m`` is the half-degree monomial basis and ``G`` is PSD.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .conic import (
    FEASIBLE,
    INFEASIBLE,
    NUMERICAL_FAILURE,
    Affine,
    ConicProgram,
    bmat,
    SymVar,
    get_backend,
    solve_program,
)
from .data import ConformitySet, PhysicsSet
from .poly import (
    Exponent,
    MonomialDict,
    PolyMatrix,
    factor_C,
    gram_basis_matrix,
    gram_basis_scalar,
    gram_form,
    gram_product_index,
    monomials_upto,
)
from .system import NoiseSpec, TimeKind


class Mode(str, enum.Enum):
    PHYSICS_INFORMED = "pi"
    DATA_DRIVEN = "dd"

    @classmethod
    def parse(cls, s) -> "Mode":
        if isinstance(s, Mode):
            return s
        aliases = {"pi": cls.PHYSICS_INFORMED, "physics_informed": cls.PHYSICS_INFORMED,
                   "physics-informed": cls.PHYSICS_INFORMED, "dd": cls.DATA_DRIVEN,
                   "data_driven": cls.DATA_DRIVEN, "data-driven": cls.DATA_DRIVEN}
        try:
            return aliases[str(s).lower()]
        except KeyError:
            raise ValueError(f"unknown mode {s!r}") from None


@dataclass(frozen=True)
class SynthesisConfig:
    lam: float = 0.99
    mu: float = 0.01
    deg_Kbar: int = 1
    deg_kappa: int = 2
    r_i: float = 1.0
    r_u: float = 2.0
    require_infinite_horizon: bool = True
    mode: Mode = Mode.PHYSICS_INFORMED
    domain: str = "state_ball"  # or "global"
    r_X: Optional[float] = None  # ball radius; defaults to r_u
    psd_margin: float = 1e-6
    gamma_gap: float = 1e-3
    normalize: bool = True  # fix gamma_u_bar = 1 (the program is homogeneous)
    weigh_lifted: bool = True  # congruence-rescale [M; Qu] by data RMS
    gain_bound: Optional[float] = None  # spectral-norm cap on each Kbar coefficient
    lambda_grid: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        if not 0 < self.r_i < self.r_u:
            raise ValueError("need 0 < r_i < r_u")
        if self.deg_kappa < 0 or self.deg_kappa % 2:
            raise ValueError("deg_kappa must be a non-negative even integer")
        if self.deg_Kbar < 0:
            raise ValueError("deg_Kbar must be non-negative")
        if not 0 < self.lam < 1:
            raise ValueError("lambda must lie in (0, 1)")
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.gain_bound is not None and not self.gain_bound > 0:
            raise ValueError("gain_bound must be positive")
        if self.domain not in ("global", "state_ball"):
            raise ValueError("domain must be 'global' or 'state_ball'")
        if self.lambda_grid is not None:
            g = tuple(float(v) for v in self.lambda_grid)
            if not g or any(not 0 < v < 1 for v in g) or list(g) != sorted(g):
                raise ValueError("lambda grid must be ascending inside (0, 1)")
            object.__setattr__(self, "lambda_grid", g)

    @property
    def ball_radius(self) -> float:
        return self.r_u if self.r_X is None else self.r_X

    def with_(self, **kw) -> "SynthesisConfig":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(kw)
        return SynthesisConfig(**d)


# ---------------------------------------------------------------- polynomial affine matrices

PolyAffine = Dict[Exponent, Affine]


def _padd(acc: PolyAffine, e: Exponent, term: Affine):
    acc[e] = term if e not in acc else acc[e] + term


def _embed(expr: Affine, D: int, r0: int, c0: int) -> Affine:
    """Place ``expr`` at offset (r0, c0) inside a zero D x D matrix."""
    r, c = expr.shape
    rr, cc = np.meshgrid(np.arange(r) + r0, np.arange(c) + c0, indexing="ij")
    dest = (rr * D + cc).reshape(-1)
    A = expr.A.tocoo()
    M = sp.csr_matrix((A.data, (dest[A.row], A.col)), shape=(D * D, expr.nvars))
    b = np.zeros(D * D)
    b[dest] = expr.b
    return Affine((D, D), M, b)


def _embed_sym(expr: Affine, D: int, r0: int, c0: int) -> Affine:
    """``expr`` at (r0, c0) plus its transpose at (c0, r0)."""
    return _embed(expr, D, r0, c0) + _embed(expr.T, D, c0, r0)


def _pad_const(N: np.ndarray, D: int) -> np.ndarray:
    out = np.zeros((D, D))
    k = N.shape[0]
    out[:k, :k] = N
    return out


@dataclass
class SOSConstraint:
    """Bookkeeping for one compiled matrix-SOS constraint."""

    name: str
    F: PolyAffine
    gram: SymVar
    basis_half: Tuple[Exponent, ...]
    dim: int
    ball: Optional[Tuple[SymVar, float]]  # (multiplier S, radius in scaled coordinates)
    state_scale: float = 1.0  # F is stored in xi = x / state_scale


@dataclass
class SynthesisProblem:
    program: ConicProgram
    kind: TimeKind
    cfg: SynthesisConfig
    n: int
    m: int
    q: int
    l: int  # noqa: E741
    T: int
    kbar_monomials: Tuple[Exponent, ...]
    kappa_half: Tuple[Exponent, ...]
    sos: List[SOSConstraint]
    handles: Dict[str, object]
    block_scales: Dict[str, float]

    @property
    def master_dim(self) -> int:
        return self.sos[0].dim

    @property
    def gram_dim(self) -> int:
        return self.sos[0].gram.dim


@dataclass
class SolverOutcome:
    status: str
    values: Dict[str, object] = field(default_factory=dict)
    diagnostics: Dict[str, object] = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE


def _compile_sos(prog: ConicProgram, name: str, F: PolyAffine, D: int, n: int, ball_r: Optional[float]) -> SOSConstraint:
    """Add ``F(r xi) - (1 - |xi|^2) S`` = Gram form in the scaled state ``xi = x / r``.

    Without a ball the state is left unscaled (r = 1, no S term).  Working on
    the unit ball keeps coefficients of different degrees comparable.
    """
    r = 1.0 if ball_r is None else float(ball_r)
    F = {e: a * (r ** sum(e)) for e, a in F.items()}
    max_deg = max(sum(e) for e in F)
    if ball_r is not None:
        max_deg = max(max_deg, 2)
    basis = gram_basis_matrix(D, n, max_deg)
    half = basis.half
    h = len(half)
    prods = gram_product_index(half)
    for e in F:
        if e not in prods:
            raise ValueError(
                f"{name}: entry degree {sum(e)} exceeds Gram basis capacity {2 * max(sum(m) for m in half)}"
            )
    G = prog.sym_var(f"{name}.gram", D * h)
    S = prog.sym_var(f"{name}.ball", D) if ball_r is not None else None
    ti, tj = np.triu_indices(D)
    flat = ti * D + tj
    nt = len(ti)
    zero = (0,) * n
    sq = {tuple(2 if k == i else 0 for k in range(n)) for i in range(n)}
    A_parts, rhs_parts = [], []
    for e in sorted(prods, key=lambda a: (sum(a), a)):
        rows, cols, vals = [], [], []
        for k, l in prods[e]:
            idx = G.index(ti * h + k, tj * h + l)
            rows.append(np.arange(nt))
            cols.append(idx)
            vals.append(-np.ones(nt))
        if S is not None and (e == zero or e in sq):
            rows.append(np.arange(nt))
            cols.append(S.index(ti, tj))
            vals.append(np.full(nt, -1.0 if e == zero else 1.0))
        Mg = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nt, prog.nvars)
        )
        if e in F:
            Fa = F[e].widen(prog.nvars)
            Mf, bf = Fa.A[flat], Fa.b[flat]
        else:
            Mf, bf = sp.csr_matrix((nt, prog.nvars)), np.zeros(nt)
        A_parts.append(Mf + Mg)
        rhs_parts.append(-bf)
    prog.add_eq(f"{name}.coeffs", sp.vstack(A_parts, format="csr"), np.concatenate(rhs_parts))
    prog.add_psd(f"{name}.gram", prog.expr(G))
    if S is not None:
        prog.add_psd(f"{name}.ball", prog.expr(S))
    return SOSConstraint(name, F, G, tuple(half), D, (S, 1.0) if S is not None else None, r)


def _common(prog: ConicProgram, n: int, cfg: SynthesisConfig):
    Pbar = prog.sym_var("Pbar", n)
    gi = prog.mat_var("gamma_i_bar", (1, 1))
    gu = prog.mat_var("gamma_u_bar", (1, 1))
    db = prog.mat_var("delta_bar", (1, 1))
    P = prog.expr(Pbar)
    I = np.eye(n)
    g_i, g_u, d = prog.scalar(gi), prog.scalar(gu), prog.scalar(db)
    prog.add_psd("init_bound", P - Affine.constant(I).scale_by(g_i) * (cfg.r_i**2))
    prog.add_psd("unsafe_bound", Affine.constant(I).scale_by(g_u) * (cfg.r_u**2) - P)
    prog.add_psd("P_margin", P - cfg.psd_margin * I)
    prog.add_nonneg("gamma_gap", g_i - g_u * (1 + cfg.gamma_gap))
    prog.add_nonneg("delta_nonneg", d)
    if cfg.normalize:
        prog.add_eq_expr("gamma_u_norm", g_u - 1.0)
    else:
        prog.add_nonneg("gamma_u_pos", g_u)
    return Pbar, gi, gu, db


def _kappas(prog: ConicProgram, count: int, n: int, deg: int):
    """Scalar SOS multipliers; returns (Gram vars, half basis, coefficient map)."""
    basis = gram_basis_scalar(n, deg)
    half = basis.half
    prods = gram_product_index(half)
    grams = []
    for j in range(count):
        G = prog.sym_var(f"kappa{j}", len(half))
        prog.add_psd(f"kappa{j}.gram", prog.expr(G))
        grams.append(G)
    return grams, half, prods


def _kappa_coeff(prog: ConicProgram, G: SymVar, pairs) -> Affine:
    cols = [G.index(k, l) for k, l in pairs]
    A = sp.csr_matrix((np.ones(len(cols)), (np.zeros(len(cols), dtype=int), cols)), shape=(1, prog.nvars))
    return Affine((1, 1), A, np.zeros(1))


def lifted_weights(dc: ConformitySet, n: int) -> np.ndarray:
    """Inverse RMS of each lifted coordinate over the data (1 where unexcited).

    Rescaling the ``[M; Qu]`` coordinates by these weights is a congruence
    of the whole master matrix, so it leaves feasibility unchanged while
    keeping ``eps^2`` visible next to ``y y^T`` in every conformity block.
    """
    if not len(dc):
        return None
    ss = np.sqrt(sum(np.diag(N)[n:] for N in dc.blocks) / len(dc))
    top = ss.max() if ss.size else 0.0
    w = np.ones_like(ss)
    ok = ss > 1e-12 * max(top, 1e-300)
    w[ok] = 1.0 / ss[ok]
    return w


def _weigh(N: np.ndarray, w: Optional[np.ndarray], n: int) -> np.ndarray:
    if w is None:
        return N
    d = np.concatenate([np.ones(n), w])
    return N * d[:, None] * d[None, :]


def _multiplier_terms(prog, F, D, dc: ConformitySet, pi: Optional[PhysicsSet], cfg, n, scales, w=None):
    use_pi = cfg.mode is Mode.PHYSICS_INFORMED
    if use_pi and pi is None:
        raise ValueError("physics-informed mode needs a PhysicsSet")
    mats = []
    if use_pi:
        Nw = _weigh(pi.block, w, n)
        s = float(np.abs(Nw).max())
        scales["pi"] = s
        mats.append(Nw / s)
    for j, N in enumerate(dc.blocks):
        N = _weigh(N, w, n)
        s = float(np.abs(N).max()) or 1.0
        scales[f"dc{j}"] = s
        mats.append(N / s)
    grams, half, prods = _kappas(prog, len(mats), n, cfg.deg_kappa)
    for G, N in zip(grams, mats):
        Np = Affine.constant(_pad_const(N, D))
        for e, pairs in prods.items():
            _padd(F, e, Np.scale_by(_kappa_coeff(prog, G, pairs)))
    return grams, half


def _kbar(prog: ConicProgram, n: int, l: int, deg: int, bound: Optional[float] = None):  # noqa: E741
    monos = tuple(monomials_upto(n, deg))
    kvars = [prog.mat_var(f"Kbar{k}", (l, n)) for k in range(len(monos))]
    if bound is not None:
        # ||K||_2 <= bound  <=>  [[bound I, K], [K^T, bound I]] >= 0
        for k, kv in enumerate(kvars):
            K = prog.expr(kv)
            prog.add_psd(f"Kbar{k}.gain", bmat([[Affine.constant(bound * np.eye(l)), K],
                                                [K.T, Affine.constant(bound * np.eye(n))]]))
    return monos, kvars


def _zbar_terms(prog, P, C: PolyMatrix, Q: PolyMatrix, kmonos, kvars, w=None) -> PolyAffine:
    """diag(w) [C(x) Pbar; Q(x) Kbar(x)] as exponent -> (m+q) x n affine."""
    m, q = C.rows, Q.rows
    n = C.cols
    wm = np.ones(m) if w is None else w[:m]
    wq = np.ones(q) if w is None else w[m:]
    out: PolyAffine = {}
    for e, Ce in C.coeffs().items():
        top = P.lmul(wm[:, None] * Ce)
        _padd(out, e, _stack(top, Affine.zeros((q, n))))
    Qc = Q.coeffs()
    for f, kv in zip(kmonos, kvars):
        K = prog.expr(kv)
        for g, Qg in Qc.items():
            e = tuple(a + b for a, b in zip(f, g))
            _padd(out, e, _stack(Affine.zeros((m, n)), K.lmul(wq[:, None] * Qg)))
    return out


def _stack(top: Affine, bot: Affine) -> Affine:
    nv = max(top.nvars, bot.nvars)
    t, b = top.widen(nv), bot.widen(nv)
    return Affine((top.shape[0] + bot.shape[0], top.shape[1]), sp.vstack([t.A, b.A]), np.concatenate([t.b, b.b]))


def _check_inputs(dc: ConformitySet, dicts, noise: NoiseSpec):
    d, Q, C = dicts
    n, m, q = d.n_vars, len(d), Q.rows
    for N in dc.blocks:
        if N.shape != (n + m + q, n + m + q):
            raise ValueError(f"conformity block has shape {N.shape}, expected {(n + m + q,) * 2}")
    if C.shape != (m, n):
        raise ValueError("C must be m x n")
    if noise.n != n:
        raise ValueError("noise spec dimension does not match the state")
    return n, m, q, Q.cols


def assemble_dt(dc: ConformitySet, pi: Optional[PhysicsSet], dicts, cfg: SynthesisConfig, noise: NoiseSpec) -> SynthesisProblem:
    """Discrete-time program; ``dicts = (MonomialDict, Q, C)``."""
    d, Q, C = dicts
    n, m, q, l = _check_inputs(dc, dicts, noise)
    k = n + m + q
    D = 2 * n + m + q
    prog = ConicProgram()
    Pbar, gi, gu, db = _common(prog, n, cfg)
    kmonos, kvars = _kbar(prog, n, l, cfg.deg_Kbar, cfg.gain_bound)
    P = prog.expr(Pbar)
    # delta_bar is solved for in units of its largest value allowed by the
    # noise bound, keeping the variable O(1)
    dscale = cfg.r_u**2 / ((1 + 1 / cfg.mu) * noise.eps_omega**2 * np.linalg.eigvalsh(noise.Phi_inv)[-1])
    dbar = prog.scalar(db) * dscale
    prog.add_psd(
        "noise_bound",
        P - Affine.constant(noise.Phi_inv).scale_by(dbar) * ((1 + 1 / cfg.mu) * noise.eps_omega**2),
    )
    if cfg.require_infinite_horizon:
        prog.add_nonneg("infinite_horizon", dbar - prog.scalar(gu) * (1 / (1 - cfg.lam)))
    F: PolyAffine = {}
    zero = (0,) * n
    _padd(F, zero, _embed(P * cfg.lam, D, 0, 0) + _embed(P * (1 / (1 + cfg.mu)), D, k, k))
    w = lifted_weights(dc, n) if cfg.weigh_lifted else None
    for e, Z in _zbar_terms(prog, P, C, Q, kmonos, kvars, w).items():
        _padd(F, e, _embed_sym(-Z, D, n, k))
    scales: Dict[str, float] = {}
    grams, half = _multiplier_terms(prog, F, D, dc, pi, cfg, n, scales, w)
    ball = cfg.ball_radius if cfg.domain == "state_ball" else None
    sos = _compile_sos(prog, "master", F, D, n, ball)
    prog.set_objective(prog.scalar(db), maximize=True)
    handles = {"Pbar": Pbar, "gamma_i_bar": gi, "gamma_u_bar": gu, "delta_bar": db,
               "delta_scale": dscale, "Kbar": kvars, "kappa": grams}
    return SynthesisProblem(prog, TimeKind.DISCRETE, cfg, n, m, q, l, len(dc), kmonos, half, [sos], handles, scales)


def assemble_ct(dc: ConformitySet, pi: Optional[PhysicsSet], dicts, cfg: SynthesisConfig, noise: NoiseSpec) -> SynthesisProblem:
    """Continuous-time program (no lambda, mu)."""
    d, Q, C = dicts
    n, m, q, l = _check_inputs(dc, dicts, noise)
    D = n + m + q
    prog = ConicProgram()
    Pbar, gi, gu, db = _common(prog, n, cfg)
    kmonos, kvars = _kbar(prog, n, l, cfg.deg_Kbar, cfg.gain_bound)
    P = prog.expr(Pbar)
    dscale = cfg.r_u**2 / (noise.eps_omega**2 * np.linalg.eigvalsh(noise.Phi_inv)[-1])
    dbar = prog.scalar(db) * dscale
    F: PolyAffine = {}
    zero = (0,) * n
    _padd(F, zero, _embed(-Affine.constant(noise.Phi_inv).scale_by(dbar) * noise.eps_omega**2, D, 0, 0))
    w = lifted_weights(dc, n) if cfg.weigh_lifted else None
    for e, Z in _zbar_terms(prog, P, C, Q, kmonos, kvars, w).items():
        _padd(F, e, _embed_sym(-Z, D, n, 0))
    scales: Dict[str, float] = {}
    grams, half = _multiplier_terms(prog, F, D, dc, pi, cfg.with_(require_infinite_horizon=False), n, scales, w)
    ball = cfg.ball_radius if cfg.domain == "state_ball" else None
    sos = _compile_sos(prog, "master", F, D, n, ball)
    prog.set_objective(prog.scalar(db), maximize=True)
    handles = {"Pbar": Pbar, "gamma_i_bar": gi, "gamma_u_bar": gu, "delta_bar": db,
               "delta_scale": dscale, "Kbar": kvars, "kappa": grams}
    return SynthesisProblem(prog, TimeKind.CONTINUOUS, cfg, n, m, q, l, len(dc), kmonos, half, [sos], handles, scales)


def assemble(kind: TimeKind, dc, pi, dicts, cfg, noise) -> SynthesisProblem:
    fn = assemble_dt if TimeKind(kind) is TimeKind.DISCRETE else assemble_ct
    return fn(dc, pi, dicts, cfg, noise)


# ---------------------------------------------------------------- solving


def _extract(prob: SynthesisProblem, z: np.ndarray) -> Dict[str, object]:
    h = prob.handles
    n = prob.n
    Kbar = {e: v.value(z) for e, v in zip(prob.kbar_monomials, h["Kbar"])}
    return {
        "Pbar": h["Pbar"].value(z),
        "gamma_i_bar": float(h["gamma_i_bar"].value(z)[0, 0]),
        "gamma_u_bar": float(h["gamma_u_bar"].value(z)[0, 0]),
        "delta_bar": float(h["delta_bar"].value(z)[0, 0]) * h["delta_scale"],
        "Kbar": PolyMatrix.from_coeffs(n, Kbar) if Kbar else PolyMatrix.zeros(n, prob.l, n),
        "kappa": [g.value(z) for g in h["kappa"]],
        "z": z,
    }


def solve(prob: SynthesisProblem, backend=None) -> SolverOutcome:
    t0 = time.perf_counter()
    res = solve_program(prob.program, backend)
    diag = dict(res.diagnostics)
    diag["wall_time"] = time.perf_counter() - t0
    diag["size"] = prob.program.stats()
    if res.status == FEASIBLE:
        diag["sos_roundtrip"] = roundtrip_error(prob, res.z)
        return SolverOutcome(FEASIBLE, _extract(prob, res.z), diag)
    return SolverOutcome(res.status, {}, diag)


def reconstruct(prob: SynthesisProblem, z: np.ndarray, idx: int = 0) -> Tuple[PolyMatrix, PolyMatrix]:
    """(constraint matrix F(x), certificate Gram form + ball term) at solution ``z``."""
    c = prob.sos[idx]
    n = prob.n
    F = PolyMatrix.from_coeffs(n, {e: a.value(z) for e, a in c.F.items()})
    basis = gram_basis_matrix(c.dim, n, 2 * max(sum(m) for m in c.basis_half))
    R = gram_form(c.gram.value(z), basis)
    if c.ball is not None:
        S_var, r = c.ball
        S = S_var.value(z)
        ball = {(0,) * n: r**2 * S}
        for i in range(n):
            ball[tuple(2 if k == i else 0 for k in range(n))] = -S
        R = R + PolyMatrix.from_coeffs(n, ball)
    return F, R


def roundtrip_error(prob: SynthesisProblem, z: np.ndarray) -> float:
    """Max relative coefficient mismatch between F(x) and its SOS certificate."""
    worst = 0.0
    for i in range(len(prob.sos)):
        F, R = reconstruct(prob, z, i)
        fc, rc = F.coeffs(), R.coeffs()
        scale = max([np.abs(v).max() for v in fc.values()] + [np.abs(v).max() for v in rc.values()] + [1e-300])
        for e in set(fc) | set(rc):
            diff = fc.get(e, 0.0) - rc.get(e, 0.0)
            worst = max(worst, float(np.abs(diff).max()) / scale)
    return worst


# ---------------------------------------------------------------- searches


@dataclass
class LambdaSearchResult:
    lam: Optional[float]
    outcome: Optional[SolverOutcome]
    trials: List[Tuple[float, str, Optional[float]]]

    @property
    def feasible(self) -> bool:
        return self.lam is not None


def lambda_search(
    assemble_at: Callable[[float], SynthesisProblem],
    grid: Sequence[float],
    stop: str = "first_feasible",
    backend=None,
) -> LambdaSearchResult:
    """Scan an ascending lambda grid.

    ``first_feasible`` stops at the smallest feasible value; ``best_delta``
    scans everything and keeps the largest ``delta_bar``.
    """
    grid = [float(v) for v in grid]
    if not grid or any(not 0 < v < 1 for v in grid) or grid != sorted(grid):
        raise ValueError("lambda grid must be ascending inside (0, 1)")
    if stop not in ("first_feasible", "best_delta"):
        raise ValueError("stop must be 'first_feasible' or 'best_delta'")
    trials = []
    best: Tuple[Optional[float], Optional[SolverOutcome]] = (None, None)
    for lam in grid:
        out = solve(assemble_at(lam), backend)
        db = out.values.get("delta_bar") if out.feasible else None
        trials.append((lam, out.status, db))
        if out.feasible:
            if stop == "first_feasible":
                return LambdaSearchResult(lam, out, trials)
            if best[1] is None or db > best[1].values["delta_bar"]:
                best = (lam, out)
    return LambdaSearchResult(best[0], best[1], trials)


@dataclass
class MinTResult:
    T: Optional[int]
    outcome: Optional[SolverOutcome]
    trials: Dict[int, str]


def min_feasible_T(
    solve_at: Callable[[int], SolverOutcome],
    T_max: int,
    T_min: int = 1,
    strategy: str = "linear",
) -> MinTResult:
    """Smallest prefix length T in [T_min, T_max] whose program is feasible.

    ``linear`` tries T = T_min, T_min+1, ...; ``bisect`` relies on
    monotonicity in T (extra samples only add multiplier terms) and probes
    O(log T_max) prefixes.
    """
    if T_max < 1 or T_min < 1:
        raise ValueError("T_max and T_min must be >= 1")
    trials: Dict[int, str] = {}
    outs: Dict[int, SolverOutcome] = {}

    def probe(T):
        if T not in outs:
            outs[T] = solve_at(T)
            trials[T] = outs[T].status
        return outs[T].feasible

    if strategy == "linear":
        for T in range(T_min, T_max + 1):
            if probe(T):
                return MinTResult(T, outs[T], trials)
        return MinTResult(None, None, trials)
    if strategy != "bisect":
        raise ValueError("strategy must be 'linear' or 'bisect'")
    if T_min > T_max or not probe(T_max):
        return MinTResult(None, None, trials)
    lo, hi = T_min - 1, T_max  # lo infeasible (or below range), hi feasible
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if probe(mid):
            hi = mid
        else:
            lo = mid
    return MinTResult(hi, outs[hi], trials)
