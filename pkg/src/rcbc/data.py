"""Single-trajectory data, monomial lifting, and the quadratic-matrix-inequality
blocks that describe every Omega consistent with the data or the physics prior.

Both kinds of block ``N`` encode sets ``{Omega : [I Omega] N [I Omega]^T <= 0}``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .poly import MonomialDict, PolyMatrix
from .system import (
    DisturbanceSampler,
    LiftedSystem,
    NoiseSpec,
    SimulationDiverged,
    TimeKind,
    make_rng,
    rk4_step,
)

DATASET_FORMAT = "rcbc-dataset/1"


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``[lo_1, hi_1] x ... x [lo_n, hi_n]``."""

    lo: Tuple[float, ...]
    hi: Tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != len(hi) or not lo:
            raise ValueError("box bounds must be non-empty and of equal length")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError("empty box: some lo > hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def from_intervals(cls, intervals: Sequence[Sequence[float]]) -> "Box":
        return cls(tuple(i[0] for i in intervals), tuple(i[1] for i in intervals))

    def intervals(self) -> List[List[float]]:
        return [[a, b] for a, b in zip(self.lo, self.hi)]

    @property
    def dim(self) -> int:
        return len(self.lo)

    def corners(self) -> np.ndarray:
        return np.array(list(itertools.product(*zip(self.lo, self.hi))))

    def max_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.corners(), axis=1)))

    def min_norm(self) -> float:
        nearest = np.clip(0.0, self.lo, self.hi)
        return float(np.linalg.norm(nearest))

    def contains(self, X, tol: float = 0.0) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.all((X >= np.array(self.lo) - tol) & (X <= np.array(self.hi) + tol), axis=-1)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        lo, hi = np.array(self.lo), np.array(self.hi)
        return lo + (hi - lo) * rng.random((size, self.dim))


def set_radii(X_i: Sequence[Box], X_u: Sequence[Box]) -> Tuple[float, float]:
    """Concentric radii: r_i covers every initial box, r_u stays inside every unsafe box's complement."""
    if not X_i or not X_u:
        raise ValueError("need at least one initial and one unsafe box")
    r_i = max(b.max_norm() for b in X_i)
    r_u = min(b.min_norm() for b in X_u)
    if r_i >= r_u:
        raise ValueError(f"r_i = {r_i:.6g} >= r_u = {r_u:.6g}: sets are not separable by concentric balls")
    return r_i, r_u


@dataclass(frozen=True)
class InputPolicy:
    """I.i.d. uniform excitation on a box, optionally plus linear feedback.

    With ``feedback`` set the applied input is ``F x + e``.  The feedback only
    keeps an open-loop unstable experiment bounded; the recorded input is
    whatever was applied, so the data stay valid for any policy.
    """

    box: np.ndarray
    feedback: Optional[np.ndarray] = None

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.box, dtype=float))
        if b.shape[1] != 2 or np.any(b[:, 0] > b[:, 1]):
            raise ValueError("input box must be rows of [lo, hi]")
        object.__setattr__(self, "box", b)
        if self.feedback is not None:
            F = np.atleast_2d(np.asarray(self.feedback, dtype=float))
            if F.shape[0] != b.shape[0]:
                raise ValueError("feedback must have one row per input channel")
            object.__setattr__(self, "feedback", F)

    @classmethod
    def symmetric(cls, l: int, amplitude: float, feedback=None) -> "InputPolicy":  # noqa: E741
        return cls(np.tile([-amplitude, amplitude], (l, 1)), feedback)

    def apply(self, x: np.ndarray, e: np.ndarray) -> np.ndarray:
        return e if self.feedback is None else self.feedback @ x + e

    def draw(self, rng: np.random.Generator, T: int) -> np.ndarray:
        lo, hi = self.box[:, 0], self.box[:, 1]
        return (lo + (hi - lo) * rng.random((T, len(lo)))).T


@dataclass(eq=False)
class TrajectoryData:
    """``X_next`` holds successors (dt) or noisy derivatives (ct); all n x T / l x T."""

    time_kind: TimeKind
    X_next: np.ndarray
    X: np.ndarray
    U: np.ndarray
    tau: Optional[float] = None
    seed: Optional[int] = None
    benchmark: Optional[str] = None
    noise: Optional[NoiseSpec] = None

    def __post_init__(self):
        self.time_kind = TimeKind(self.time_kind)
        self.X_next = np.atleast_2d(np.asarray(self.X_next, dtype=float))
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.U = np.atleast_2d(np.asarray(self.U, dtype=float))
        T = self.X.shape[1]
        if self.X_next.shape != self.X.shape or self.U.shape[1] != T:
            raise ValueError("X, X_next and U must share the column count T")
        if self.time_kind is TimeKind.CONTINUOUS and not (self.tau and self.tau > 0):
            raise ValueError("continuous-time data needs a positive sampling time")

    @property
    def T(self) -> int:
        return self.X.shape[1]

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def head(self, T: int) -> "TrajectoryData":
        """The first ``T`` samples."""
        if not 1 <= T <= self.T:
            raise ValueError(f"T must be in [1, {self.T}]")
        return TrajectoryData(self.time_kind, self.X_next[:, :T], self.X[:, :T], self.U[:, :T],
                              self.tau, self.seed, self.benchmark, self.noise)

    # persistence -----------------------------------------------------------

    def to_json(self) -> dict:
        out = {
            "format": DATASET_FORMAT,
            "time_kind": self.time_kind.value,
            "T": self.T,
            "X": self.X.tolist(),
            ("X_next" if self.time_kind is TimeKind.DISCRETE else "Xdot"): self.X_next.tolist(),
            "U": self.U.tolist(),
            "tau": self.tau,
            "seed": self.seed,
            "benchmark": self.benchmark,
        }
        if self.noise is not None:
            out["noise"] = {
                "Upsilon": self.noise.Upsilon.tolist(),
                "eps_omega": self.noise.eps_omega,
                "eps_varpi": self.noise.eps_varpi,
            }
        return out

    @classmethod
    def from_json(cls, d: dict) -> "TrajectoryData":
        if d.get("format") != DATASET_FORMAT:
            raise ValueError(f"not a dataset file (format {d.get('format')!r})")
        kind = TimeKind(d["time_kind"])
        nxt = d["X_next"] if kind is TimeKind.DISCRETE else d["Xdot"]
        noise = None
        if d.get("noise"):
            nz = d["noise"]
            noise = NoiseSpec(np.array(nz["Upsilon"]), nz["eps_omega"], nz.get("eps_varpi", 0.0))
        return cls(kind, np.array(nxt), np.array(d["X"]), np.array(d["U"]),
                   d.get("tau"), d.get("seed"), d.get("benchmark"), noise)

    def dumps(self) -> str:
        # float repr is the shortest string that round-trips exactly
        return json.dumps(self.to_json(), indent=1)

    @classmethod
    def loads(cls, text: str) -> "TrajectoryData":
        return cls.from_json(json.loads(text))


@dataclass(eq=False)
class LiftedData:
    M: np.ndarray
    Qu: np.ndarray

    @property
    def Y(self) -> np.ndarray:
        """Columns ``Y_j = [M(x_j); Q(x_j) u_j]``."""
        return np.vstack([self.M, self.Qu])


@dataclass(eq=False)
class ConformitySet:
    blocks: List[np.ndarray]
    eps: float

    def __len__(self):
        return len(self.blocks)


@dataclass(eq=False)
class PhysicsSet:
    block: np.ndarray
    Omega_tilde: np.ndarray
    eps_Omega: float


def qform(N: np.ndarray, Omega: np.ndarray) -> np.ndarray:
    """``[I Omega] N [I Omega]^T``."""
    n = Omega.shape[0]
    L = np.hstack([np.eye(n), Omega])
    return L @ N @ L.T


def collect_dt(
    sys: LiftedSystem,
    x0,
    policy: InputPolicy,
    T: int,
    dist: DisturbanceSampler,
    seed: int = 0,
) -> TrajectoryData:
    """One experiment of ``T`` steps; disturbances are drawn and discarded."""
    if sys.time_kind is not TimeKind.DISCRETE:
        raise ValueError("collect_dt needs a discrete-time system")
    if T < 1:
        raise ValueError("T must be >= 1")
    rng_u, rng_w = make_rng(seed, 10), make_rng(seed, 11)
    U = policy.draw(rng_u, T)
    if U.shape[0] != sys.l:
        raise ValueError("input policy dimension does not match the system")
    W = dist.draw(rng_w, (T,))
    X = np.empty((sys.n, T + 1))
    X[:, 0] = x0
    for k in range(T):
        U[:, k] = policy.apply(X[:, k], U[:, k])
        X[:, k + 1] = sys.rhs(X[:, k], U[:, k], W[k])
        if not np.all(np.isfinite(X[:, k + 1])):
            raise SimulationDiverged(k + 1, f"data trajectory diverged at step {k + 1}")
    return TrajectoryData(TimeKind.DISCRETE, X[:, 1:], X[:, :T], U, None, seed)


def collect_ct(
    sys: LiftedSystem,
    x0,
    policy: InputPolicy,
    T: int,
    tau: float,
    dist: DisturbanceSampler,
    deriv_noise: DisturbanceSampler,
    seed: int = 0,
    substeps: int = 10,
) -> TrajectoryData:
    """Sample ``T`` instants ``t_j = j tau`` of one continuous experiment.

    Inputs are held over each sampling interval; the state is integrated with
    RK4 at ``tau / substeps`` with one disturbance draw per sub-step.  The
    recorded derivative is the true field at the instant plus a draw of the
    derivative noise.
    """
    if sys.time_kind is not TimeKind.CONTINUOUS:
        raise ValueError("collect_ct needs a continuous-time system")
    if T < 1 or not tau > 0:
        raise ValueError("need T >= 1 and tau > 0")
    rng_u, rng_w, rng_v = make_rng(seed, 10), make_rng(seed, 11), make_rng(seed, 12)
    U = policy.draw(rng_u, T)
    if U.shape[0] != sys.l:
        raise ValueError("input policy dimension does not match the system")
    W = dist.draw(rng_w, (T, substeps))
    V = deriv_noise.draw(rng_v, (T,))
    h = tau / substeps
    X = np.empty((sys.n, T))
    Xd = np.empty((sys.n, T))
    x = np.asarray(x0, dtype=float).copy()
    for j in range(T):
        X[:, j] = x
        U[:, j] = policy.apply(x, U[:, j])
        Xd[:, j] = sys.rhs(x, U[:, j], W[j, 0]) + V[j]
        for s in range(substeps):
            x = rk4_step(lambda z: sys.rhs(z, U[:, j], W[j, s]), x, h)
        if not np.all(np.isfinite(x)):
            raise SimulationDiverged(j + 1, f"data trajectory diverged after sample {j}")
    return TrajectoryData(TimeKind.CONTINUOUS, Xd, X, U, tau, seed)


def lift(data: TrajectoryData, dict_M: MonomialDict, Q: PolyMatrix) -> LiftedData:
    if dict_M.n_vars != data.n or Q.n_vars != data.n:
        raise ValueError("dictionary/Q state dimension does not match the data")
    if Q.cols != data.U.shape[0]:
        raise ValueError(f"Q has {Q.cols} columns but data has {data.U.shape[0]} inputs")
    Xt = data.X.T
    M = dict_M.evaluate(Xt).T
    Qx = Q.evaluate(Xt)  # (T, q, l)
    Qu = np.einsum("tql,lt->qt", Qx, data.U)
    return LiftedData(M, Qu)


def dc_blocks(data: TrajectoryData, lifted: LiftedData, noise: NoiseSpec) -> ConformitySet:
    """One block per sample: ``[[x x^T - eps^2 Phi^-1, -x Y^T], [-Y x^T, Y Y^T]]``."""
    eps = noise.eps_omega if data.time_kind is TimeKind.DISCRETE else noise.eps_e
    Pinv = noise.Phi_inv
    Y = lifted.Y
    blocks = []
    for j in range(data.T):
        x = data.X_next[:, j : j + 1]
        y = Y[:, j : j + 1]
        top = np.hstack([x @ x.T - eps**2 * Pinv, -x @ y.T])
        bot = np.hstack([-y @ x.T, y @ y.T])
        blocks.append(np.vstack([top, bot]))
    return ConformitySet(blocks, eps)


def pi_block(Omega_tilde, eps_Omega: float, noise: NoiseSpec) -> PhysicsSet:
    """``[[W W^T - eps^2 Phi^-1, -W], [-W^T, I]]`` with ``W`` the nominal matrix."""
    if not eps_Omega > 0:
        raise ValueError("eps_Omega must be positive")
    W = np.atleast_2d(np.asarray(Omega_tilde, dtype=float))
    k = W.shape[1]
    top = np.hstack([W @ W.T - eps_Omega**2 * noise.Phi_inv, -W])
    bot = np.hstack([-W.T, np.eye(k)])
    return PhysicsSet(np.vstack([top, bot]), W.copy(), float(eps_Omega))
