"""Input-affine polynomial systems: benchmark models, ground truth, simulation.

A system is ``x+ = Omega [M(x); Q(x) u] + w`` (discrete) or
``dx/dt = Omega [M(x); Q(x) u] + w`` (continuous), with ``Omega = [A B]``.
"""

from __future__ import annotations

import csv
import enum
import io
import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .poly import MonomialDict, PolyMatrix, Polynomial, build_dict

QUADRATIC_ORDER: Tuple[Tuple[int, int, int], ...] = (
    (1, 0, 0),
    (0, 1, 0),
    (0, 0, 1),
    (1, 1, 0),
    (0, 1, 1),
    (1, 0, 1),
    (2, 0, 0),
    (0, 2, 0),
    (0, 0, 2),
)
"""Degree-2 dictionary in the order x1, x2, x3, x1x2, x2x3, x1x3, x1^2, x2^2, x3^2."""

BENCHMARKS = ("lorenz", "spacecraft", "higher_degree", "chen")


class TimeKind(str, enum.Enum):
    DISCRETE = "discrete"
    CONTINUOUS = "continuous"


class SimulationDiverged(RuntimeError):
    """A simulated state became non-finite."""

    def __init__(self, step: int, message: str = ""):
        super().__init__(message or f"non-finite state at step {step}")
        self.step = step


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based generator; ``stream`` separates independent tasks."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, stream)])))


@dataclass(frozen=True, eq=False)
class LiftedSystem:
    dict_M: MonomialDict
    Q: PolyMatrix
    Omega: np.ndarray
    time_kind: TimeKind = TimeKind.DISCRETE

    def __post_init__(self):
        Om = np.array(self.Omega, dtype=float)
        Om.setflags(write=False)
        object.__setattr__(self, "Omega", Om)
        object.__setattr__(self, "time_kind", TimeKind(self.time_kind))
        if self.dict_M.includes_constant:
            raise ValueError("dictionary must not contain the constant monomial")
        if self.Q.n_vars != self.dict_M.n_vars:
            raise ValueError("Q and dictionary disagree on the number of states")
        if Om.ndim != 2 or Om.shape != (self.n, self.m + self.q):
            raise ValueError(f"Omega must be {self.n}x{self.m + self.q}, got {Om.shape}")

    @property
    def n(self) -> int:
        return self.dict_M.n_vars

    @property
    def m(self) -> int:
        return len(self.dict_M)

    @property
    def q(self) -> int:
        return self.Q.rows

    @property
    def l(self) -> int:  # noqa: E743
        return self.Q.cols

    @property
    def A(self) -> np.ndarray:
        return self.Omega[:, : self.m]

    @property
    def B(self) -> np.ndarray:
        return self.Omega[:, self.m :]

    def with_omega(self, Omega) -> "LiftedSystem":
        return LiftedSystem(self.dict_M, self.Q, Omega, self.time_kind)

    def rhs(self, x, u, w=None) -> np.ndarray:
        """Omega [M(x); Q(x)u] + w at a single point."""
        x = np.asarray(x, dtype=float)
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if x.shape != (self.n,):
            raise ValueError(f"state must have shape ({self.n},), got {x.shape}")
        if u.shape != (self.l,):
            raise ValueError(f"input must have shape ({self.l},), got {u.shape}")
        v = np.concatenate([self.dict_M.evaluate(x), self.Q.evaluate(x) @ u])
        out = self.Omega @ v
        if w is not None:
            w = np.asarray(w, dtype=float)
            if w.shape != (self.n,):
                raise ValueError(f"disturbance must have shape ({self.n},), got {w.shape}")
            out = out + w
        return out

    def to_json(self) -> dict:
        return {
            "time_kind": self.time_kind.value,
            "dictionary": self.dict_M.to_list(),
            "Q": self.Q.to_json(),
            "Omega": self.Omega.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "LiftedSystem":
        d = MonomialDict(len(data["dictionary"][0]), tuple(map(tuple, data["dictionary"])))
        return cls(d, PolyMatrix.from_json(d.n_vars, data["Q"]), np.array(data["Omega"]), data["time_kind"])


@dataclass(frozen=True, eq=False)
class NoiseSpec:
    """Weighted-norm disturbance bounds ``|Upsilon w| <= eps``."""

    Upsilon: np.ndarray
    eps_omega: float
    eps_varpi: float = 0.0

    def __post_init__(self):
        U = np.atleast_2d(np.array(self.Upsilon, dtype=float))
        object.__setattr__(self, "Upsilon", U)
        if self.eps_omega <= 0:
            raise ValueError("eps_omega must be positive")
        if self.eps_varpi < 0:
            raise ValueError("eps_varpi must be non-negative")
        if np.linalg.matrix_rank(U) < U.shape[1]:
            raise ValueError("Upsilon must have full column rank")

    @classmethod
    def identity(cls, n: int, eps_omega: float, eps_varpi: float = 0.0) -> "NoiseSpec":
        return cls(np.eye(n), eps_omega, eps_varpi)

    @property
    def n(self) -> int:
        return self.Upsilon.shape[1]

    @property
    def Phi(self) -> np.ndarray:
        return self.Upsilon.T @ self.Upsilon

    @property
    def Phi_inv(self) -> np.ndarray:
        return np.linalg.inv(self.Phi)

    @property
    def eps_e(self) -> float:
        return self.eps_omega + self.eps_varpi

    def weighted_norm(self, w) -> np.ndarray:
        """``|Upsilon w|`` for one vector or each row of a batch."""
        return np.linalg.norm(np.asarray(w, dtype=float) @ self.Upsilon.T, axis=-1)


def _interval_array(r, n: int) -> np.ndarray:
    """Normalise an interval spec to an ``(n, 2)`` array of [lo, hi] rows.

    Accepts a half-width ``a`` (meaning [-a, a]), a pair ``[lo, hi]`` or a
    per-component list of pairs.
    """
    a = np.asarray(r, dtype=float)
    if a.ndim == 0:
        a = np.array([-abs(a), abs(a)])
    if a.ndim == 1:
        if a.shape != (2,):
            raise ValueError("interval must be a half-width, [lo, hi] or a list of [lo, hi]")
        a = np.tile(a, (n, 1))
    if a.shape != (n, 2):
        raise ValueError(f"expected {n} intervals, got shape {a.shape}")
    if not np.all(np.isfinite(a)) or np.any(a[:, 0] > a[:, 1]):
        raise ValueError("intervals must be finite with lo <= hi")
    return a


@dataclass(frozen=True)
class PerturbSpec:
    omega_range: object = 0.0
    dist_range: object = 0.0
    seed: int = 0


@dataclass(frozen=True, eq=False)
class Controller:
    """State feedback ``u = K(x) x``."""

    K: PolyMatrix

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        Kx = self.K.evaluate(x)
        if x.ndim == 1:
            return Kx @ x
        return np.einsum("rln,rn->rl", Kx, x)

    @property
    def n_vars(self) -> int:
        return self.K.n_vars

    @classmethod
    def zero(cls, n: int, l: int) -> "Controller":  # noqa: E741
        return cls(PolyMatrix.zeros(n, l, n))


@dataclass(frozen=True)
class IntegrationConfig:
    """Continuous-time integration: RK4 sub-step and recording interval."""

    step: float
    sample: float

    def __post_init__(self):
        if not (self.step > 0 and self.sample > 0):
            raise ValueError("integration step and sample interval must be positive")

    @property
    def record_every(self) -> int:
        k = int(round(self.sample / self.step))
        if k < 1 or abs(k * self.step - self.sample) > 1e-9 * self.sample:
            raise ValueError("sample interval must be an integer multiple of the step")
        return k


class DisturbanceSampler:
    """Uniform draws on a box that lies inside ``{w : |Upsilon w| <= eps}``."""

    def __init__(self, box, Upsilon=None, eps: Optional[float] = None):
        b = np.asarray(box, dtype=float)
        if b.ndim != 2 or b.shape[1] != 2:
            raise ValueError("box must be an (n, 2) array of [lo, hi]")
        self.box = b
        self.n = b.shape[0]
        self.Upsilon = np.eye(self.n) if Upsilon is None else np.atleast_2d(np.asarray(Upsilon, dtype=float))
        self.eps = eps
        if eps is not None:
            worst = self.worst_corner_norm()
            if worst > eps * (1 + 1e-12):
                raise ValueError(
                    f"disturbance box corner has weighted norm {worst:.6g} > bound {eps:.6g}"
                )

    def worst_corner_norm(self) -> float:
        corners = np.array(list(itertools.product(*self.box)))
        return float(np.max(np.linalg.norm(corners @ self.Upsilon.T, axis=1)))

    @property
    def is_zero(self) -> bool:
        return not np.any(self.box)

    def draw(self, rng: np.random.Generator, size: Tuple[int, ...] = ()) -> np.ndarray:
        lo, hi = self.box[:, 0], self.box[:, 1]
        shape = tuple(size) + (self.n,)
        if self.is_zero:
            return np.zeros(shape)
        return lo + (hi - lo) * rng.random(shape)

    @classmethod
    def zero(cls, n: int) -> "DisturbanceSampler":
        return cls(np.zeros((n, 2)))


def sample_disturbance(spec: PerturbSpec, noise: NoiseSpec, eps: Optional[float] = None) -> DisturbanceSampler:
    """Sampler for the configured disturbance box, validated against the noise ball.

    ``eps`` defaults to ``noise.eps_omega``.
    """
    box = _interval_array(spec.dist_range, noise.n)
    return DisturbanceSampler(box, noise.Upsilon, noise.eps_omega if eps is None else eps)


# ---------------------------------------------------------------- benchmarks


def _poly(n: int, terms: dict) -> Polynomial:
    return Polynomial(n, terms)


def _omega_from_rows(d: MonomialDict, rows: Sequence[dict], B: np.ndarray) -> np.ndarray:
    """Read A off polynomial right-hand sides (``{exponent: coeff}`` per row)."""
    index = {e: k for k, e in enumerate(d.entries)}
    A = np.zeros((len(rows), len(d)))
    for i, r in enumerate(rows):
        for e, c in r.items():
            if e not in index:
                raise ValueError(f"monomial {e} missing from dictionary")
            A[i, index[e]] += c
    return np.hstack([A, B])


def nominal_benchmark(name: str) -> LiftedSystem:
    """Nominal lifted model of a named benchmark (Omega = nominal matrix)."""
    h = 0.02
    if name == "lorenz":
        d = MonomialDict(3, QUADRATIC_ORDER)
        rows = [
            {(1, 0, 0): 1 - 10 * h, (0, 1, 0): 10 * h},
            {(1, 0, 0): 28 * h, (0, 1, 0): 1 - h, (1, 1, 0): -h},
            {(0, 0, 1): 1 - h * 8 / 3, (1, 0, 1): h},
        ]
        B = np.array([[0.0], [h], [0.0]])
        return LiftedSystem(d, PolyMatrix.identity(3, 1), _omega_from_rows(d, rows, B), TimeKind.DISCRETE)
    if name in ("spacecraft", "higher_degree"):
        J1, J2, J3 = 0.5, 1.0, 1.3
        rows = [
            {(1, 0, 0): 1.0, (0, 1, 1): h * (J2 - J3) / J1},
            {(0, 1, 0): 1.0, (1, 0, 1): h * (J3 - J1) / J2},
            {(0, 0, 1): 1.0, (1, 1, 0): h * (J1 - J2) / J3},
        ]
        B = np.diag([h / J1, h / J2, h / J3])
        if name == "spacecraft":
            d = MonomialDict(3, QUADRATIC_ORDER)
        else:
            d = build_dict(3, 3)
            # degree-3 augmentation: x1^3, x2 x3^2, x1 x2 x3
            rows[0][(3, 0, 0)] = -0.01 * h
            rows[1][(0, 1, 2)] = -0.01 * h
            rows[2][(1, 1, 1)] = 0.01 * h
        return LiftedSystem(d, PolyMatrix.identity(3, 3), _omega_from_rows(d, rows, B), TimeKind.DISCRETE)
    if name == "chen":
        d = MonomialDict(3, QUADRATIC_ORDER)
        rows = [
            {(1, 0, 0): -35.0, (0, 1, 0): 35.0},
            {(1, 0, 0): -7.0, (0, 1, 0): 28.0, (1, 0, 1): -1.0},
            {(0, 0, 1): -3.0, (1, 1, 0): 1.0},
        ]
        return LiftedSystem(d, PolyMatrix.identity(3, 3), _omega_from_rows(d, rows, np.eye(3)), TimeKind.CONTINUOUS)
    raise ValueError(f"unknown benchmark {name!r}; expected one of {', '.join(BENCHMARKS)}")


def perturb_truth(nominal: LiftedSystem, spec: PerturbSpec) -> LiftedSystem:
    """Ground truth: every Omega entry shifted by an i.i.d. uniform draw."""
    r = np.asarray(spec.omega_range, dtype=float)
    if r.ndim == 0:
        lo, hi = -abs(float(r)), abs(float(r))
    else:
        lo, hi = map(float, r)
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
        raise ValueError("omega_range must be a finite interval")
    if lo == hi == 0.0:
        return nominal.with_omega(nominal.Omega.copy())
    rng = make_rng(spec.seed, 0)
    E = rng.uniform(lo, hi, size=nominal.Omega.shape)
    return nominal.with_omega(nominal.Omega + E)


# ---------------------------------------------------------------- dynamics


def step_dt(sys: LiftedSystem, x, u, omega=None) -> np.ndarray:
    if sys.time_kind is not TimeKind.DISCRETE:
        raise ValueError("step_dt needs a discrete-time system")
    return sys.rhs(x, u, omega)


def vector_field_ct(sys: LiftedSystem, x, u, omega=None) -> np.ndarray:
    if sys.time_kind is not TimeKind.CONTINUOUS:
        raise ValueError("vector_field_ct needs a continuous-time system")
    return sys.rhs(x, u, omega)


def rk4_step(f, x, h: float) -> np.ndarray:
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _kernel_args(sys: LiftedSystem, ctrl: Controller):
    if ctrl.K.shape != (sys.l, sys.n):
        raise ValueError(f"controller gain must be {sys.l}x{sys.n}, got {ctrl.K.shape}")
    qe, qc = sys.Q.stacked()
    ke, kc = ctrl.K.stacked()
    return (np.ascontiguousarray(sys.Omega), sys.dict_M.exponent_array(), qe, qc, ke, kc)


@dataclass
class Trajectory:
    """Closed-loop samples: ``t`` (steps or times), states ``X`` and inputs ``U``."""

    t: np.ndarray
    X: np.ndarray
    U: np.ndarray
    seed: int = 0
    time_kind: TimeKind = TimeKind.DISCRETE

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n, l = self.X.shape[1], self.U.shape[1]  # noqa: E741
        w.writerow(["k" if self.time_kind is TimeKind.DISCRETE else "t"]
                   + [f"x_{i + 1}" for i in range(n)] + [f"u_{i + 1}" for i in range(l)])
        for t, x, u in zip(self.t, self.X, self.U):
            tt = int(t) if self.time_kind is TimeKind.DISCRETE else repr(float(t))
            w.writerow([tt] + [repr(float(v)) for v in x] + [repr(float(v)) for v in u])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text


def simulate_batch(
    sys: LiftedSystem,
    ctrl: Controller,
    X0,
    n_steps: int,
    W,
    integ: Optional[IntegrationConfig] = None,
):
    """Run many closed-loop trajectories at once through the hot kernel.

    ``W`` holds one disturbance per step (dt) or per integration sub-step (ct)
    with shape ``(R, S, n)``.  Returns ``(traj, first_bad)``.
    """
    args = _kernel_args(sys, ctrl)
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    W = np.asarray(W, dtype=float)
    if sys.time_kind is TimeKind.DISCRETE:
        if W.shape != (X0.shape[0], n_steps, sys.n):
            raise ValueError("disturbance array has the wrong shape")
        return kernels.closed_loop_dt(*args, X0, W)
    if integ is None:
        raise ValueError("continuous-time simulation needs an IntegrationConfig")
    return kernels.closed_loop_ct(*args, X0, W, float(integ.step), integ.record_every)


def simulate_closed_loop(
    sys: LiftedSystem,
    ctrl: Controller,
    x0,
    horizon,
    dist: Optional[DisturbanceSampler] = None,
    integ: Optional[IntegrationConfig] = None,
    seed: int = 0,
) -> Trajectory:
    """Closed-loop run under ``u = K(x)x``.

    ``horizon`` is a step count (dt) or a duration (ct).  For ct the state is
    integrated with RK4 at ``integ.step`` holding each disturbance draw over
    one sub-step, and recorded every ``integ.sample``.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (sys.n,):
        raise ValueError(f"initial state must have shape ({sys.n},)")
    dist = dist or DisturbanceSampler.zero(sys.n)
    rng = make_rng(seed, 1)
    if sys.time_kind is TimeKind.DISCRETE:
        S = int(horizon)
        W = dist.draw(rng, (1, S))
        traj, bad = simulate_batch(sys, ctrl, x0[None], S, W)
        t = np.arange(S + 1)
    else:
        if integ is None:
            raise ValueError("continuous-time simulation needs an IntegrationConfig")
        rec = integ.record_every
        n_rec = int(round(float(horizon) / integ.sample))
        S = n_rec * rec
        W = dist.draw(rng, (1, S))
        traj, bad = simulate_batch(sys, ctrl, x0[None], S, W, integ)
        t = np.arange(n_rec + 1) * integ.sample
    if bad[0] >= 0:
        raise SimulationDiverged(int(bad[0]))
    X = traj[0]
    return Trajectory(t, X, np.atleast_2d(ctrl(X)).reshape(len(X), sys.l), seed, sys.time_kind)
