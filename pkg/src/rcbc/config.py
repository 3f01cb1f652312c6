"""Run configuration: JSON schema, validation and typed access.

A config names a shipped benchmark (or inlines a lifted system) and carries
the set geometry, noise bounds, data-collection recipe, synthesis options and
verification budget.  Everything downstream is a pure function of the config
and its seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import jsonschema
import numpy as np

from .data import Box, InputPolicy, set_radii
from .synth import Mode, SynthesisConfig
from .system import (
    BENCHMARKS,
    DisturbanceSampler,
    IntegrationConfig,
    LiftedSystem,
    NoiseSpec,
    PerturbSpec,
    TimeKind,
    nominal_benchmark,
)

_interval = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_box = {"type": "array", "items": _interval, "minItems": 1}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_range = {"oneOf": [_nonneg, _interval]}

SCHEMA: Dict[str, Any] = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "rcbc run configuration",
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "sets", "noise", "data", "synthesis"],
    "oneOf": [{"required": ["benchmark"]}, {"required": ["system"]}],
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "benchmark": {"enum": list(BENCHMARKS)},
        "system": {
            "type": "object",
            "required": ["time_kind", "dictionary", "Q", "Omega"],
            "additionalProperties": False,
            "properties": {
                "time_kind": {"enum": ["discrete", "continuous"]},
                "dictionary": {"type": "array", "minItems": 1,
                               "items": {"type": "array", "items": {"type": "integer", "minimum": 0}}},
                "Q": {"type": "array", "minItems": 1},
                "Omega": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
            },
        },
        "seed": {"type": "integer", "minimum": 0},
        "sets": {
            "type": "object",
            "required": ["X_i", "X_u"],
            "additionalProperties": False,
            "properties": {
                "X_i": {"type": "array", "items": _box, "minItems": 1},
                "X_u": {"type": "array", "items": _box, "minItems": 1},
                "X": _box,
            },
        },
        "noise": {
            "type": "object",
            "required": ["eps_omega", "eps_Omega"],
            "additionalProperties": False,
            "properties": {
                "eps_omega": _pos,
                "eps_varpi": _nonneg,
                "eps_Omega": _pos,
                "Upsilon": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
            },
        },
        "perturbation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"omega_range": _range, "dist_range": _range, "varpi_range": _range},
        },
        "data": {
            "type": "object",
            "required": ["x0", "input_amplitude", "T"],
            "additionalProperties": False,
            "properties": {
                "x0": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                "input_amplitude": _pos,
                "input_feedback": _nonneg,
                "T": {"type": "integer", "minimum": 1},
                "tau": _pos,
                "substeps": {"type": "integer", "minimum": 1},
            },
        },
        "synthesis": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["pi", "dd", "physics-informed", "data-driven"]},
                "lambda": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "lambda_grid": {"type": "array", "minItems": 1,
                                "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}},
                "mu": _pos,
                "deg_Kbar": {"type": "integer", "minimum": 0},
                "deg_kappa": {"type": "integer", "minimum": 0},
                "require_infinite_horizon": {"type": "boolean"},
                "domain": {"enum": ["state_ball", "global"]},
                "psd_margin": _nonneg,
                "gamma_gap": _nonneg,
                "gain_bound": _pos,
            },
        },
        "verification": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "samples": {"type": "integer", "minimum": 1},
                "runs": {"type": "integer", "minimum": 1},
                "matrices": {"type": "integer", "minimum": 1},
                "step_cap": {"type": "integer", "minimum": 1},
                "time_cap": _pos,
                "integration_step": _pos,
                "sample_interval": _pos,
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "T_max": {"type": "integer", "minimum": 1},
                "T_min": {"type": "integer", "minimum": 1},
                "strategy": {"enum": ["linear", "bisect"]},
            },
        },
    },
}


class ConfigError(ValueError):
    """Schema or semantic problem; ``path`` locates the offending field."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def _path(err: jsonschema.ValidationError) -> str:
    return "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)


def validate(doc: Any) -> None:
    errors = sorted(jsonschema.Draft7Validator(SCHEMA).iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError(e.message, _path(e))


def _boxes(spec: Sequence) -> List[Box]:
    return [Box.from_intervals(b) for b in spec]


@dataclass
class RunConfig:
    raw: Dict[str, Any]
    system: LiftedSystem
    X_i: List[Box]
    X_u: List[Box]
    noise: NoiseSpec
    eps_Omega: float
    perturb: PerturbSpec
    varpi_range: Any
    seed: int
    x0: np.ndarray
    policy: InputPolicy
    T: int
    tau: Optional[float]
    substeps: int
    synthesis: SynthesisConfig
    lambda_grid: Optional[List[float]]
    verification: Dict[str, Any] = field(default_factory=dict)
    sweep: Dict[str, Any] = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.raw["name"]

    @property
    def kind(self) -> TimeKind:
        return self.system.time_kind

    @property
    def dist(self) -> DisturbanceSampler:
        return DisturbanceSampler(_box_array(self.perturb.dist_range, self.system.n), self.noise.Upsilon,
                                  self.noise.eps_omega)

    @property
    def deriv_noise(self) -> DisturbanceSampler:
        return DisturbanceSampler(_box_array(self.varpi_range, self.system.n), self.noise.Upsilon,
                                  max(self.noise.eps_varpi, 0.0))

    @property
    def integration(self) -> Optional[IntegrationConfig]:
        if self.kind is TimeKind.DISCRETE:
            return None
        v = self.verification
        return IntegrationConfig(v["integration_step"], v["sample_interval"])

    def with_overrides(self, **kw) -> "RunConfig":
        """Copy with command-line overrides (mode, T, seed) applied to the raw document."""
        raw = json.loads(json.dumps(self.raw))
        if kw.get("mode") is not None:
            raw["synthesis"]["mode"] = Mode.parse(kw["mode"]).value
        if kw.get("T") is not None:
            raw["data"]["T"] = int(kw["T"])
        if kw.get("seed") is not None:
            raw["seed"] = int(kw["seed"])
        if kw.get("T_max") is not None:
            raw.setdefault("sweep", {})["T_max"] = int(kw["T_max"])
        return from_dict(raw)


def _box_array(r, n: int) -> np.ndarray:
    a = np.asarray(r, dtype=float)
    if a.ndim == 0:
        return np.tile([-abs(float(a)), abs(float(a))], (n, 1))
    return np.tile(a, (n, 1))


def _feedback(system: LiftedSystem, alpha: float) -> Optional[np.ndarray]:
    """``-alpha pinv(B Q(0))``: pulls the nominal state towards 0 during data collection."""
    if not alpha:
        return None
    BQ = system.B @ system.Q.evaluate(np.zeros(system.n))
    return -alpha * np.linalg.pinv(BQ)


def from_dict(doc: Dict[str, Any]) -> RunConfig:
    validate(doc)
    if "benchmark" in doc:
        system = nominal_benchmark(doc["benchmark"])
    else:
        try:
            system = LiftedSystem.from_json(doc["system"])
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(str(exc), "$.system") from exc
    n = system.n
    X_i, X_u = _boxes(doc["sets"]["X_i"]), _boxes(doc["sets"]["X_u"])
    for key, boxes in (("X_i", X_i), ("X_u", X_u)):
        for k, b in enumerate(boxes):
            if b.dim != n:
                raise ConfigError(f"box has dimension {b.dim}, system has {n}", f"$.sets.{key}[{k}]")
    try:
        r_i, r_u = set_radii(X_i, X_u)
    except ValueError as exc:
        raise ConfigError(str(exc), "$.sets") from exc
    nz = doc["noise"]
    Ups = np.eye(n) if "Upsilon" not in nz else np.array(nz["Upsilon"], dtype=float)
    try:
        noise = NoiseSpec(Ups, nz["eps_omega"], nz.get("eps_varpi", 0.0))
    except ValueError as exc:
        raise ConfigError(str(exc), "$.noise") from exc
    if noise.n != n:
        raise ConfigError(f"Upsilon acts on {noise.n} states, system has {n}", "$.noise.Upsilon")
    pt = doc.get("perturbation", {})
    seed = int(doc.get("seed", 0))
    perturb = PerturbSpec(pt.get("omega_range", 0.0), pt.get("dist_range", 0.0), seed)
    dat = doc["data"]
    if len(dat["x0"]) != n:
        raise ConfigError(f"x0 has {len(dat['x0'])} entries, system has {n}", "$.data.x0")
    tau = dat.get("tau")
    if system.time_kind is TimeKind.CONTINUOUS and tau is None:
        raise ConfigError("continuous-time data needs a sampling period", "$.data.tau")
    sy = doc["synthesis"]
    lam = sy.get("lambda", 0.99)
    grid = sy.get("lambda_grid")
    try:
        scfg = SynthesisConfig(
            lam=lam, mu=sy.get("mu", 0.01), deg_Kbar=sy.get("deg_Kbar", 0), deg_kappa=sy.get("deg_kappa", 0),
            r_i=r_i, r_u=r_u, require_infinite_horizon=sy.get("require_infinite_horizon", True),
            mode=Mode.parse(sy.get("mode", "pi")), domain=sy.get("domain", "state_ball"),
            psd_margin=sy.get("psd_margin", 1e-6), gamma_gap=sy.get("gamma_gap", 1e-3),
            gain_bound=sy.get("gain_bound"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), "$.synthesis") from exc
    ver = {"samples": 10_000, "runs": 200, "matrices": 32, "step_cap": 1000, "time_cap": 1000.0}
    ver.update(doc.get("verification", {}))
    if system.time_kind is TimeKind.CONTINUOUS:
        ver.setdefault("integration_step", (tau or 1e-3) / 10)
        ver.setdefault("sample_interval", ver["integration_step"] * 10)
    sw = {"T_max": dat["T"], "T_min": 1, "strategy": "bisect"}
    sw.update(doc.get("sweep", {}))
    cfg = RunConfig(
        raw=doc, system=system, X_i=X_i, X_u=X_u, noise=noise, eps_Omega=float(nz["eps_Omega"]),
        perturb=perturb, varpi_range=pt.get("varpi_range", 0.0), seed=seed,
        x0=np.array(dat["x0"], dtype=float),
        policy=InputPolicy.symmetric(system.l, dat["input_amplitude"], _feedback(system, dat.get("input_feedback", 0.0))),
        T=int(dat["T"]), tau=tau, substeps=int(dat.get("substeps", 10)),
        synthesis=scfg, lambda_grid=grid, verification=ver, sweep=sw,
    )
    try:
        cfg.dist
        cfg.deriv_noise
    except ValueError as exc:
        raise ConfigError(str(exc), "$.perturbation") from exc
    return cfg


def load(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    return from_dict(doc)


def shipped(name: str) -> Path:
    """Path of a benchmark config bundled with the package."""
    ref = resources.files("rcbc") / "benchmarks" / f"{name}.json"
    with resources.as_file(ref) as p:
        return Path(p)


def resolve(path_or_name: str) -> Path:
    """Accept a file path or the bare name of a shipped benchmark."""
    p = Path(path_or_name)
    if p.exists():
        return p
    stem = p.stem if p.suffix == ".json" else str(p)
    if stem in BENCHMARKS:
        return shipped(stem)
    return p
