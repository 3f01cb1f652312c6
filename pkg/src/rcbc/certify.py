"""Certificate recovery, horizon classification and sampled validation.

The synthesized decision variables live in "bar" coordinates (``Pbar`` is
the inverse of the barrier matrix, ``gamma_bar = 1 / gamma``).  ``recover``
maps them back to ``B(x) = x^T P x`` and ``u = K(x) x``; the rest of the
module checks such certificates numerically.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .data import Box, ConformitySet, PhysicsSet, qform
from .poly import MonomialDict, PolyMatrix
from .system import (
    Controller,
    DisturbanceSampler,
    IntegrationConfig,
    LiftedSystem,
    NoiseSpec,
    TimeKind,
    make_rng,
    simulate_batch,
)

MAX_CONDITION = 1e12
RECOVERY_RTOL = 1e-8
CERT_FORMAT = "rcbc-certificate/1"


class CertificateError(ValueError):
    pass


def _rel(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = max(float(np.abs(b).max(initial=0.0)), 1e-300)
    return float(np.abs(a - b).max(initial=0.0)) / scale


def _kbar_to_k(Kbar: PolyMatrix, P: np.ndarray) -> PolyMatrix:
    return PolyMatrix.from_coeffs(Kbar.n_vars, {e: c @ P for e, c in Kbar.coeffs().items()}) if Kbar.coeffs() \
        else PolyMatrix.zeros(Kbar.n_vars, Kbar.rows, Kbar.cols)


@dataclass(eq=False)
class Certificate:
    """Barrier ``B(x) = x^T P x`` with level sets and controller ``u = K(x) x``."""

    P: np.ndarray
    K: PolyMatrix
    gamma_i: float
    gamma_u: float
    delta: float
    lam: Optional[float]
    time_kind: TimeKind
    mu: Optional[float] = None
    mode: str = ""
    T_data: Optional[int] = None
    seed: Optional[int] = None
    # synthesis-side values the certificate was recovered from
    Pbar: Optional[np.ndarray] = None
    Kbar: Optional[PolyMatrix] = None
    gamma_i_bar: Optional[float] = None
    gamma_u_bar: Optional[float] = None
    delta_bar: Optional[float] = None

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @property
    def controller(self) -> Controller:
        return Controller(self.K)

    def B(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.einsum("...i,ij,...j->...", X, self.P, X)

    def recovery_error(self) -> float:
        """Worst relative error of the bar/plain identities (0 if no bar values)."""
        if self.Pbar is None:
            return 0.0
        errs = [_rel(self.P @ self.Pbar, np.eye(self.n))]
        for plain, bar in ((self.gamma_i, self.gamma_i_bar), (self.gamma_u, self.gamma_u_bar), (self.delta, self.delta_bar)):
            if bar is not None:
                errs.append(abs(plain * bar - 1.0))
        if self.Kbar is not None:
            want = _kbar_to_k(self.Kbar, self.P).coeffs()
            got = self.K.coeffs()
            scale = max([np.abs(v).max() for v in want.values()] + [1e-300])
            for e in set(want) | set(got):
                errs.append(float(np.abs(want.get(e, 0.0) - got.get(e, 0.0)).max()) / scale)
        return max(errs)

    def to_json(self) -> dict:
        def mat(a):
            return None if a is None else [[float(v) for v in row] for row in np.asarray(a)]

        return {
            "format": CERT_FORMAT,
            "time_kind": self.time_kind.value,
            "mode": self.mode,
            "T_data": self.T_data,
            "seed": self.seed,
            "P": mat(self.P),
            "K": self.K.to_json(),
            "gamma_i": float(self.gamma_i),
            "gamma_u": float(self.gamma_u),
            "delta": float(self.delta),
            "lambda": None if self.lam is None else float(self.lam),
            "mu": None if self.mu is None else float(self.mu),
            "synthesis": None if self.Pbar is None else {
                "Pbar": mat(self.Pbar),
                "Kbar": None if self.Kbar is None else self.Kbar.to_json(),
                "gamma_i_bar": self.gamma_i_bar,
                "gamma_u_bar": self.gamma_u_bar,
                "delta_bar": self.delta_bar,
            },
        }

    def dumps(self) -> str:
        # json emits the shortest repr of each float, so this is byte-stable
        return json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, d: dict) -> "Certificate":
        if d.get("format") != CERT_FORMAT:
            raise CertificateError(f"not a certificate file (format={d.get('format')!r})")
        try:
            syn = d.get("synthesis") or {}
            n = len(d["P"])
            return cls(
                P=np.array(d["P"], dtype=float),
                K=PolyMatrix.from_json(n, d["K"]),
                gamma_i=float(d["gamma_i"]),
                gamma_u=float(d["gamma_u"]),
                delta=float(d["delta"]),
                lam=None if d.get("lambda") is None else float(d["lambda"]),
                time_kind=TimeKind(d["time_kind"]),
                mu=None if d.get("mu") is None else float(d["mu"]),
                mode=d.get("mode", ""),
                T_data=d.get("T_data"),
                seed=d.get("seed"),
                Pbar=None if syn.get("Pbar") is None else np.array(syn["Pbar"], dtype=float),
                Kbar=None if syn.get("Kbar") is None else PolyMatrix.from_json(n, syn["Kbar"]),
                gamma_i_bar=syn.get("gamma_i_bar"),
                gamma_u_bar=syn.get("gamma_u_bar"),
                delta_bar=syn.get("delta_bar"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CertificateError(f"malformed certificate: {exc}") from exc

    @classmethod
    def loads(cls, text: str) -> "Certificate":
        return cls.from_json(json.loads(text))


def recover(values: Dict[str, object], kind: TimeKind, lam: Optional[float] = None, mu: Optional[float] = None,
            mode: str = "", T_data: Optional[int] = None, seed: Optional[int] = None) -> Certificate:
    """Invert the synthesis variables of a feasible solve.

    ``values`` is ``SolverOutcome.values``.  Raises ``CertificateError`` when
    ``Pbar`` is not safely invertible.
    """
    Pbar = np.asarray(values["Pbar"], dtype=float)
    Pbar = 0.5 * (Pbar + Pbar.T)
    ev = np.linalg.eigvalsh(Pbar)
    if ev[0] <= 0 or ev[-1] / ev[0] > MAX_CONDITION:
        raise CertificateError(f"Pbar is ill-conditioned (eigenvalues {ev[0]:.3g} .. {ev[-1]:.3g})")
    P = np.linalg.inv(Pbar)
    P = 0.5 * (P + P.T)
    Kbar = values["Kbar"]
    gi, gu, db = (float(values[k]) for k in ("gamma_i_bar", "gamma_u_bar", "delta_bar"))
    if min(gi, gu, db) <= 0:
        raise CertificateError("level-set and delta variables must be positive")
    return Certificate(
        P=P, K=_kbar_to_k(Kbar, P), gamma_i=1.0 / gi, gamma_u=1.0 / gu, delta=1.0 / db,
        lam=None if kind is TimeKind.CONTINUOUS else lam, time_kind=kind,
        mu=mu, mode=mode, T_data=T_data, seed=seed,
        Pbar=Pbar, Kbar=Kbar, gamma_i_bar=gi, gamma_u_bar=gu, delta_bar=db,
    )


# ---------------------------------------------------------------- horizons


@dataclass(frozen=True)
class HorizonVerdict:
    kind: str  # "infinite" | "finite" | "invalid"
    T: Optional[float] = None
    witness: str = ""

    @property
    def display(self) -> str:
        if self.kind == "finite":
            return str(math.floor(self.T))
        return self.kind

    def to_json(self) -> dict:
        return {"kind": self.kind, "T": self.T, "display": self.display, "witness": self.witness}


def finite_bound(gamma_i: float, gamma_u: float, lam: float, T: int) -> float:
    """Largest delta allowed for a horizon of ``T`` steps."""
    lt = lam**T
    return (gamma_u - lt * gamma_i) * (1 - lam) / (1 - lt)


def horizon_dt(gamma_i: float, gamma_u: float, delta: float, lam: float) -> HorizonVerdict:
    if not 0 < lam < 1:
        raise ValueError("lambda must lie in (0, 1)")
    limit = gamma_u * (1 - lam)
    if delta <= limit:
        return HorizonVerdict("infinite", None, f"delta={delta!r} <= gamma_u*(1-lambda)={limit!r}")
    if delta > finite_bound(gamma_i, gamma_u, lam, 1):
        return HorizonVerdict("invalid", None, f"delta={delta!r} > bound at T=1 ({finite_bound(gamma_i, gamma_u, lam, 1)!r})")
    lo, hi = 1, 2
    # the bound decreases to gamma_u*(1-lambda) < delta, so doubling terminates
    while delta <= finite_bound(gamma_i, gamma_u, lam, hi):
        lo, hi = hi, hi * 2
        if hi > 2**62:
            break
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if delta <= finite_bound(gamma_i, gamma_u, lam, mid):
            lo = mid
        else:
            hi = mid
    return HorizonVerdict("finite", float(lo),
                          f"delta={delta!r} <= {finite_bound(gamma_i, gamma_u, lam, lo)!r} at T={lo}, "
                          f"> {finite_bound(gamma_i, gamma_u, lam, lo + 1)!r} at T={lo + 1}")


def horizon_ct(gamma_i: float, gamma_u: float, delta: float) -> HorizonVerdict:
    if not delta > 0:
        raise ValueError("delta must be positive for a continuous-time horizon")
    if not gamma_i < gamma_u:
        return HorizonVerdict("invalid", None, f"gamma_i={gamma_i!r} >= gamma_u={gamma_u!r}")
    T = (gamma_u - gamma_i) / delta
    return HorizonVerdict("finite", T, f"(gamma_u - gamma_i) / delta = {T!r}")


def horizon(cert: Certificate) -> HorizonVerdict:
    if cert.time_kind is TimeKind.DISCRETE:
        return horizon_dt(cert.gamma_i, cert.gamma_u, cert.delta, cert.lam)
    return horizon_ct(cert.gamma_i, cert.gamma_u, cert.delta)


# ---------------------------------------------------------------- admissible matrices


def admissible(Omega: np.ndarray, dc: Optional[ConformitySet], pi: Optional[PhysicsSet], rtol: float = 1e-9) -> bool:
    """True when ``Omega`` satisfies every conformity block and the physics ball."""
    blocks = list(dc.blocks) if dc is not None else []
    if pi is not None:
        blocks.append(pi.block)
    for N in blocks:
        Qf = qform(N, Omega)
        scale = max(float(np.abs(N).max()), 1.0)
        if np.linalg.eigvalsh(0.5 * (Qf + Qf.T))[-1] > rtol * scale:
            return False
    return True


def _center(dc: Optional[ConformitySet], pi: Optional[PhysicsSet], n: int) -> Optional[np.ndarray]:
    """Ridge least-squares estimate read off the conformity blocks."""
    if dc is None or not len(dc):
        return None if pi is None else pi.Omega_tilde
    S = sum(dc.blocks)
    XY = -S[:n, n:]
    YY = S[n:, n:]
    k = YY.shape[0]
    rho = 1e-9 * max(np.trace(YY), 1.0)
    prior = pi.Omega_tilde if pi is not None else np.zeros((n, k))
    return np.linalg.solve(YY + rho * np.eye(k), (XY + rho * prior).T).T


def sample_admissible(
    dc: Optional[ConformitySet],
    pi: Optional[PhysicsSet],
    count: int,
    rng: np.random.Generator,
    truth: Optional[np.ndarray] = None,
    n: Optional[int] = None,
) -> List[np.ndarray]:
    """Draw matrices from the admissible set by line searches from a centre.

    Directions are random; half the draws sit on the boundary of the set and
    half uniformly inside the chord.  Returns ``[]`` when no admissible centre
    is found.
    """
    if n is None:
        n = (pi.Omega_tilde.shape[0] if pi is not None else None)
        if n is None:
            raise ValueError("cannot infer state dimension")
    cands = [c for c in (_center(dc, pi, n), None if pi is None else pi.Omega_tilde, truth) if c is not None]
    c = next((c for c in cands if admissible(c, dc, pi)), None)
    if c is None:
        return []
    out = [c.copy()]
    span = max(float(np.abs(c).max()), 1.0)
    for i in range(count - 1):
        E = rng.standard_normal(c.shape)
        E *= span / np.linalg.norm(E)
        lo, hi = 0.0, 1.0
        while admissible(c + hi * E, dc, pi) and hi < 1e6:
            lo, hi = hi, hi * 2
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            if admissible(c + mid * E, dc, pi):
                lo = mid
            else:
                hi = mid
        t = lo if i % 2 == 0 else lo * rng.random()
        out.append(c + t * E)
    return out


# ---------------------------------------------------------------- sampled conditions


@dataclass
class ConditionResult:
    name: str
    samples: int
    passed_samples: int
    worst_margin: float
    witness: Optional[List[float]] = None

    def passed(self, tol: float) -> bool:
        return self.samples > 0 and self.worst_margin >= -tol

    def to_json(self, tol: float) -> dict:
        return {
            "samples": self.samples,
            "pass_rate": self.passed_samples / self.samples if self.samples else 0.0,
            "worst_margin": self.worst_margin,
            "pass": self.passed(tol),
            "witness": self.witness,
        }


@dataclass
class MonteCarloResult:
    runs: int
    safe: int
    diverged: int
    horizon: float
    capped: bool
    first_violation: Optional[dict]
    recursion_margin: float

    def passed(self, tol: float) -> bool:
        return self.safe == self.runs and self.recursion_margin >= -tol

    def to_json(self, tol: float) -> dict:
        return {
            "runs": self.runs,
            "safe": self.safe,
            "diverged": self.diverged,
            "horizon": self.horizon,
            "capped": self.capped,
            "first_violation": self.first_violation,
            "recursion_margin": self.recursion_margin,
            "pass": self.passed(tol),
        }


@dataclass
class SafetyReport:
    time_kind: TimeKind
    tol: float
    seed: int
    conditions: Dict[str, ConditionResult] = field(default_factory=dict)
    monte_carlo: Optional[MonteCarloResult] = None
    recovery_error: float = 0.0
    notes: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        ok = self.recovery_error <= RECOVERY_RTOL and all(c.passed(self.tol) for c in self.conditions.values())
        if self.monte_carlo is not None:
            ok = ok and self.monte_carlo.passed(self.tol)
        return ok

    def worst(self, name: str) -> float:
        return self.conditions[name].worst_margin

    def merge(self, other: "SafetyReport") -> "SafetyReport":
        out = SafetyReport(self.time_kind, self.tol, self.seed, dict(self.conditions), self.monte_carlo,
                           max(self.recovery_error, other.recovery_error), self.notes + other.notes)
        out.conditions.update(other.conditions)
        if other.monte_carlo is not None:
            out.monte_carlo = other.monte_carlo
        return out

    def to_json(self) -> dict:
        return {
            "format": "rcbc-safety-report/1",
            "time_kind": self.time_kind.value,
            "tol": self.tol,
            "seed": self.seed,
            "recovery_error": self.recovery_error,
            "conditions": {k: v.to_json(self.tol) for k, v in sorted(self.conditions.items())},
            "monte_carlo": None if self.monte_carlo is None else self.monte_carlo.to_json(self.tol),
            "notes": list(self.notes),
            "pass": self.passed,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n"


def _sample_boxes(boxes: Sequence[Box], count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform over the union by volume, plus every corner and the point nearest 0."""
    vols = np.array([np.prod(np.subtract(b.hi, b.lo)) for b in boxes], dtype=float)
    w = vols / vols.sum() if vols.sum() > 0 else np.full(len(boxes), 1.0 / len(boxes))
    which = rng.choice(len(boxes), size=count, p=w)
    pts = [boxes[k].sample(rng, int(np.sum(which == k))) for k in range(len(boxes))]
    extra = []
    for b in boxes:
        extra.append(b.corners())
        extra.append(np.clip(np.zeros(b.dim), b.lo, b.hi)[None])
    return np.vstack(pts + extra)


def _sample_sublevel(P: np.ndarray, level: float, count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draws in ``{x : x^T P x < level}``."""
    n = P.shape[0]
    d = rng.standard_normal((count, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = rng.random(count) ** (1.0 / n)
    ev, V = np.linalg.eigh(P)
    root_inv = V @ np.diag(1 / np.sqrt(ev)) @ V.T
    return (np.sqrt(level) * r[:, None] * d) @ root_inv.T


def _disturbances(noise: NoiseSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    """Half on the weighted-ball boundary, half uniform inside it."""
    n = noise.n
    d = rng.standard_normal((count, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    rad = np.ones(count)
    half = count // 2
    rad[half:] = rng.random(count - half) ** (1.0 / n)
    Ui = np.linalg.inv(noise.Upsilon)
    return (noise.eps_omega * rad[:, None] * d) @ Ui.T


def _lifted(dict_M: MonomialDict, Q: PolyMatrix, ctrl: Controller, X: np.ndarray) -> np.ndarray:
    """Rows ``[M(x); Q(x) K(x) x]`` for each row of ``X``."""
    M = dict_M.evaluate(X)
    u = np.atleast_2d(ctrl(X)).reshape(len(X), -1)
    Qu = np.einsum("rql,rl->rq", Q.evaluate(X), u)
    return np.hstack([M, Qu])


def check_conditions(
    cert: Certificate,
    dict_M: MonomialDict,
    Q: PolyMatrix,
    X_i: Sequence[Box],
    X_u: Sequence[Box],
    noise: NoiseSpec,
    count: int = 10_000,
    dc: Optional[ConformitySet] = None,
    pi: Optional[PhysicsSet] = None,
    truth: Optional[np.ndarray] = None,
    n_matrices: int = 32,
    seed: int = 0,
    tol: Optional[float] = None,
) -> SafetyReport:
    """Sample the initial, unsafe and decrease conditions.

    The decrease condition is evaluated on states drawn uniformly from
    ``{B < gamma_u}`` against matrices drawn from the admissible set and
    disturbances on and inside the noise ball.  Margins are signed: negative
    means a violated sample.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    tol = 1e-6 * cert.gamma_u if tol is None else tol
    rep = SafetyReport(cert.time_kind, tol, seed, recovery_error=cert.recovery_error())
    if rep.recovery_error > RECOVERY_RTOL:
        rep.notes.append(f"recovery identities violated (relative error {rep.recovery_error:.3g})")

    rng = make_rng(seed, 20)
    Xs = _sample_boxes(X_i, count, rng)
    Bi = cert.B(Xs)
    m = cert.gamma_i - Bi
    k = int(np.argmin(m))
    rep.conditions["initial"] = ConditionResult("initial", len(Xs), int(np.sum(m >= -tol)), float(m[k]), Xs[k].tolist())

    rng = make_rng(seed, 21)
    Xs = _sample_boxes(X_u, count, rng)
    m = cert.B(Xs) - cert.gamma_u
    k = int(np.argmin(m))
    rep.conditions["unsafe"] = ConditionResult("unsafe", len(Xs), int(np.sum(m >= -tol)), float(m[k]), Xs[k].tolist())

    rng = make_rng(seed, 22)
    mats = sample_admissible(dc, pi, n_matrices, rng, truth, n=cert.n)
    if not mats:
        if truth is None:
            rep.notes.append("no admissible matrix found; decrease condition not sampled")
            rep.conditions["decrease"] = ConditionResult("decrease", 0, 0, -math.inf)
            return rep
        rep.notes.append("no admissible matrix found by sampling; using the true matrix")
        mats = [np.asarray(truth, dtype=float)]
    mats = np.array(mats)
    X = _sample_sublevel(cert.P, cert.gamma_u, count, rng)
    W = _disturbances(noise, count, rng)
    pick = rng.integers(0, len(mats), size=count)
    V = _lifted(dict_M, Q, cert.controller, X)
    F = np.einsum("rij,rj->ri", mats[pick], V) + W
    if cert.time_kind is TimeKind.DISCRETE:
        m = cert.lam * cert.B(X) + cert.delta - cert.B(F)
    else:
        m = cert.delta - 2 * np.einsum("ri,ij,rj->r", X, cert.P, F)
    k = int(np.argmin(m))
    rep.conditions["decrease"] = ConditionResult("decrease", count, int(np.sum(m >= -tol)), float(m[k]),
                                                 X[k].tolist() + W[k].tolist())
    return rep


# ---------------------------------------------------------------- Monte Carlo


def monte_carlo_safety(
    cert: Certificate,
    truth: LiftedSystem,
    X_i: Sequence[Box],
    X_u: Sequence[Box],
    dist: DisturbanceSampler,
    runs: int = 200,
    verdict: Optional[HorizonVerdict] = None,
    step_cap: int = 1000,
    time_cap: float = 1000.0,
    integ: Optional[IntegrationConfig] = None,
    seed: int = 0,
    tol: Optional[float] = None,
) -> SafetyReport:
    """Closed-loop runs from uniform initial states in ``X_i``.

    Counts runs that enter any unsafe box and checks the integrated decrease
    bound along every recorded trajectory.
    """
    tol = 1e-6 * cert.gamma_u if tol is None else tol
    verdict = verdict or horizon(cert)
    rng = make_rng(seed, 30)
    X0 = _sample_boxes(X_i, runs, rng)[:runs]
    ctrl = cert.controller
    dt = cert.time_kind is TimeKind.DISCRETE
    if dt:
        capped = verdict.kind != "finite" or verdict.T > step_cap
        H = step_cap if capped else int(verdict.T)
        W = dist.draw(make_rng(seed, 31), (runs, H))
        traj, bad = simulate_batch(truth, ctrl, X0, H, W)
        t = np.arange(H + 1, dtype=float)
    else:
        if integ is None:
            raise ValueError("continuous-time Monte Carlo needs an IntegrationConfig")
        capped = verdict.kind != "finite" or verdict.T > time_cap
        H = time_cap if capped else float(verdict.T)
        rec = integ.record_every
        n_rec = int(math.floor(H / integ.sample + 1e-9))
        W = dist.draw(make_rng(seed, 31), (runs, n_rec * rec))
        traj, bad = simulate_batch(truth, ctrl, X0, n_rec * rec, W, integ)
        t = np.arange(n_rec + 1) * integ.sample
    diverged = int(np.sum(bad >= 0))
    unsafe = np.zeros(traj.shape[:2], dtype=bool)
    for b in X_u:
        unsafe |= b.contains(traj)
    hit = unsafe.any(axis=1) | (bad >= 0)
    first = None
    if hit.any():
        r = int(np.argmax(hit))
        if unsafe[r].any():
            s = int(np.argmax(unsafe[r]))
            first = {"run": r, "step": s, "t": float(t[s]), "x0": X0[r].tolist(), "state": traj[r, s].tolist()}
        else:
            first = {"run": r, "step": int(bad[r]), "diverged": True, "x0": X0[r].tolist()}
    # integrated decrease bound along every run
    Bt = cert.B(np.nan_to_num(traj, nan=0.0))
    B0 = Bt[:, :1]
    if dt:
        lk = cert.lam ** t
        bound = lk * B0 + cert.delta * (1 - lk) / (1 - cert.lam)
    else:
        bound = B0 + cert.delta * t
    ok = np.isfinite(traj).all(axis=2)
    slack = np.where(ok, bound - Bt, np.inf)
    rep = SafetyReport(cert.time_kind, tol, seed, recovery_error=cert.recovery_error())
    rep.monte_carlo = MonteCarloResult(
        runs=runs, safe=int(runs - hit.sum()), diverged=diverged, horizon=float(H), capped=bool(capped),
        first_violation=first, recursion_margin=float(slack.min()) if slack.size else 0.0,
    )
    return rep


def noise_bound_margin(cert: Certificate, noise: NoiseSpec, count: int = 10_000, seed: int = 0) -> float:
    """``delta - (1 + 1/mu) w^T P w`` minimised over boundary disturbances (dt)."""
    if cert.mu is None:
        raise ValueError("certificate carries no mu")
    rng = make_rng(seed, 23)
    d = rng.standard_normal((count, noise.n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    W = (noise.eps_omega * d) @ np.linalg.inv(noise.Upsilon).T
    return float(np.min(cert.delta - (1 + 1 / cert.mu) * cert.B(W)))
