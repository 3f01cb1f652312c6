"""End-to-end stages shared by the command line and the acceptance tests."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .certify import (
    Certificate,
    CertificateError,
    HorizonVerdict,
    SafetyReport,
    check_conditions,
    horizon,
    monte_carlo_safety,
)
from .config import RunConfig
from .data import ConformitySet, PhysicsSet, TrajectoryData, collect_ct, collect_dt, dc_blocks, lift, pi_block
from .poly import factor_C
from .synth import (
    Mode,
    SolverOutcome,
    assemble,
    lambda_search,
    min_feasible_T,
    solve,
)
from .system import LiftedSystem, TimeKind, perturb_truth, simulate_closed_loop

log = logging.getLogger("rcbc")

SLOW_SOLVE_SECONDS = 600.0


class StageError(RuntimeError):
    """Operational failure tagged with the pipeline stage it came from."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def truth_of(cfg: RunConfig) -> LiftedSystem:
    return perturb_truth(cfg.system, cfg.perturb)


def collect(cfg: RunConfig, T: Optional[int] = None) -> TrajectoryData:
    T = cfg.T if T is None else T
    truth = truth_of(cfg)
    try:
        if cfg.kind is TimeKind.DISCRETE:
            return collect_dt(truth, cfg.x0, cfg.policy, T, cfg.dist, seed=cfg.seed)
        return collect_ct(truth, cfg.x0, cfg.policy, T, cfg.tau, cfg.dist, cfg.deriv_noise,
                          seed=cfg.seed, substeps=cfg.substeps)
    except Exception as exc:  # divergence, shape errors
        raise StageError("collect", str(exc)) from exc


def sets_for(cfg: RunConfig, data: TrajectoryData) -> Tuple[ConformitySet, PhysicsSet]:
    lifted = lift(data, cfg.system.dict_M, cfg.system.Q)
    return dc_blocks(data, lifted, cfg.noise), pi_block(cfg.system.Omega, cfg.eps_Omega, cfg.noise)


def _dicts(cfg: RunConfig):
    return cfg.system.dict_M, cfg.system.Q, factor_C(cfg.system.dict_M)


@dataclass
class SynthRecord:
    mode: Mode
    T: int
    outcome: SolverOutcome
    lam: Optional[float]
    certificate: Optional[Certificate]
    verdict: Optional[HorizonVerdict]
    runtime: float
    note: str = ""

    @property
    def feasible(self) -> bool:
        return self.certificate is not None


def synthesize(cfg: RunConfig, data: TrajectoryData, T: int, mode: Mode) -> SynthRecord:
    """Assemble and solve on the first ``T`` samples, then recover."""
    from .certify import recover

    t0 = time.perf_counter()
    d = data.head(T)
    dc, pi = sets_for(cfg, d)
    scfg = cfg.synthesis.with_(mode=mode)
    lam = None
    try:
        if cfg.kind is TimeKind.DISCRETE and cfg.lambda_grid:
            res = lambda_search(lambda v: assemble(cfg.kind, dc, pi, _dicts(cfg), scfg.with_(lam=v), cfg.noise),
                                sorted(cfg.lambda_grid))
            out = res.outcome if res.outcome is not None else SolverOutcome(
                res.trials[-1][1] if res.trials else "infeasible", {}, {"lambda_trials": res.trials})
            lam = res.lam
        else:
            out = solve(assemble(cfg.kind, dc, pi, _dicts(cfg), scfg, cfg.noise))
            lam = scfg.lam if cfg.kind is TimeKind.DISCRETE else None
    except ValueError as exc:
        raise StageError("assemble", str(exc)) from exc
    runtime = time.perf_counter() - t0
    if runtime > SLOW_SOLVE_SECONDS:
        log.warning("solve for T=%d (%s) took %.0f s", T, mode.value, runtime)
    cert = verdict = None
    note = ""
    if out.feasible:
        try:
            cert = recover(out.values, cfg.kind, lam, scfg.mu if cfg.kind is TimeKind.DISCRETE else None,
                           mode.value, T, cfg.seed)
            verdict = horizon(cert)
        except CertificateError as exc:
            note = str(exc)
    return SynthRecord(mode, T, out, lam, cert, verdict, runtime, note)


def _diag(out: SolverOutcome) -> dict:
    keep = ("solver_status", "iterations", "primal_objective", "equality_residual", "min_psd_eig", "sos_roundtrip", "size")
    return {k: out.diagnostics[k] for k in keep if k in out.diagnostics}


def result_document(cfg: RunConfig, rec: SynthRecord) -> dict:
    """Deterministic run result (no wall-clock fields)."""
    return {
        "format": "rcbc-result/1",
        "config": cfg.raw,
        "mode": rec.mode.value,
        "T": rec.T,
        "status": rec.outcome.status if rec.feasible or rec.note == "" else "numerical_failure",
        "lambda": rec.lam,
        "certificate": None if rec.certificate is None else rec.certificate.to_json(),
        "horizon": None if rec.verdict is None else rec.verdict.to_json(),
        "solver": _diag(rec.outcome),
        "note": rec.note,
    }


# ---------------------------------------------------------------- sweep


SWEEP_COLUMNS = ("benchmark", "mode", "min_T", "lambda", "gamma_i", "gamma_u", "delta", "horizon", "runtime")


def _sweep_one(args):
    cfg, data, mode, T_max, T_min, strategy = args
    t0 = time.perf_counter()
    recs: Dict[int, SynthRecord] = {}

    def at(T):
        recs[T] = synthesize(cfg, data, T, mode)
        # a solver "feasible" whose certificate cannot be recovered does not count
        return recs[T].outcome if recs[T].feasible else SolverOutcome("infeasible", {}, recs[T].outcome.diagnostics)

    res = min_feasible_T(at, T_max, T_min=T_min, strategy=strategy)
    rec = recs.get(res.T) if res.T is not None else None
    return mode, res, rec, time.perf_counter() - t0


def sweep(cfg: RunConfig, T_max: Optional[int] = None, jobs: int = 1, modes=(Mode.PHYSICS_INFORMED, Mode.DATA_DRIVEN)):
    """Minimal feasible prefix length per mode on one shared experiment."""
    T_max = int(T_max or cfg.sweep["T_max"])
    data = collect(cfg, T_max)
    tasks = [(cfg, data, m, T_max, int(cfg.sweep["T_min"]), cfg.sweep["strategy"]) for m in modes]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as ex:
            results = list(ex.map(_sweep_one, tasks))
    else:
        results = [_sweep_one(t) for t in tasks]
    rows = []
    for mode, res, rec, rt in results:
        c = rec.certificate if rec is not None else None
        rows.append({
            "benchmark": cfg.name,
            "mode": mode.value,
            "min_T": res.T if res.T is not None else "none",
            "lambda": "" if c is None or c.lam is None else repr(c.lam),
            "gamma_i": "" if c is None else repr(c.gamma_i),
            "gamma_u": "" if c is None else repr(c.gamma_u),
            "delta": "" if c is None else repr(c.delta),
            "horizon": "" if rec is None or rec.verdict is None else rec.verdict.display,
            "runtime": f"{rt:.2f}",
            "_trials": res.trials,
            "_record": rec,
        })
    return rows


def sweep_csv(rows, include_runtime: bool = True) -> str:
    buf = io.StringIO()
    cols = SWEEP_COLUMNS if include_runtime else SWEEP_COLUMNS[:-1]
    w = csv.DictWriter(buf, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


# ---------------------------------------------------------------- verify / simulate


def verify(cert: Certificate, cfg: RunConfig, runs: Optional[int] = None, samples: Optional[int] = None) -> SafetyReport:
    """Sampled conditions plus Monte Carlo on the configured ground truth."""
    if cert.time_kind is not cfg.kind:
        raise StageError("verify", "certificate and config disagree on the time kind")
    if cert.n != cfg.system.n or cert.K.shape != (cfg.system.l, cfg.system.n):
        raise StageError("verify", "certificate dimensions do not match the system")
    v = cfg.verification
    truth = truth_of(cfg)
    T = cert.T_data or cfg.T
    dc = pi = None
    try:
        data = collect(cfg, T)
        dc, pi = sets_for(cfg, data)
    except StageError:
        pass
    if Mode.parse(cert.mode or "pi") is Mode.DATA_DRIVEN:
        pi = None
    rep = check_conditions(cert, cfg.system.dict_M, cfg.system.Q, cfg.X_i, cfg.X_u, cfg.noise,
                           count=samples or v["samples"], dc=dc, pi=pi, truth=truth.Omega,
                           n_matrices=v["matrices"], seed=cfg.seed)
    mc = monte_carlo_safety(cert, truth, cfg.X_i, cfg.X_u, cfg.dist, runs=runs or v["runs"],
                            step_cap=v["step_cap"], time_cap=v["time_cap"], integ=cfg.integration, seed=cfg.seed)
    return rep.merge(mc)


def simulate(cert: Certificate, cfg: RunConfig, runs: int, horizon_len: Optional[float] = None,
             zero_disturbance: bool = False):
    """Closed-loop trajectories plus plot data (no rendering)."""
    from .certify import _sample_boxes
    from .system import DisturbanceSampler, make_rng

    truth = truth_of(cfg)
    X0 = _sample_boxes(cfg.X_i, runs, make_rng(cfg.seed, 40))[:runs]
    verdict = horizon(cert)
    v = cfg.verification
    if horizon_len is None:
        if cfg.kind is TimeKind.DISCRETE:
            horizon_len = v["step_cap"] if verdict.kind != "finite" else min(int(verdict.T), v["step_cap"])
        else:
            horizon_len = v["time_cap"] if verdict.kind != "finite" else min(verdict.T, v["time_cap"])
    dist = DisturbanceSampler.zero(cfg.system.n) if zero_disturbance else cfg.dist
    trajs = []
    for r, x0 in enumerate(X0):
        trajs.append(simulate_closed_loop(truth, cert.controller, x0, horizon_len, dist, cfg.integration,
                                          seed=cfg.seed * 100003 + r))
    return trajs, plot_data(cert, cfg, verdict)


def plot_data(cert: Certificate, cfg: RunConfig, verdict: HorizonVerdict) -> dict:
    """Ellipsoid ``{x^T P x = c}`` semi-axes for the two level sets plus box geometry."""
    ev, V = np.linalg.eigh(cert.P)

    def ellipsoid(level):
        return {"level": level, "axes": V.T.tolist(), "semi_axes": [math.sqrt(level / e) for e in ev]}

    return {
        "format": "rcbc-plot/1",
        "benchmark": cfg.name,
        "time_kind": cert.time_kind.value,
        "P": cert.P.tolist(),
        "eigenvalues": ev.tolist(),
        "initial_level_set": ellipsoid(cert.gamma_i),
        "unsafe_level_set": ellipsoid(cert.gamma_u),
        "X_i": [b.intervals() for b in cfg.X_i],
        "X_u": [b.intervals() for b in cfg.X_u],
        "horizon": verdict.to_json(),
    }


def dumps(doc) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"
