"""Command-line entry point.

    rcbc synth    --config lorenz [--mode pi|dd] [--T N] [--seed S] [--out DIR]
    rcbc sweep    --config lorenz [--T-max N] [--jobs J] [--out DIR]
    rcbc verify   --certificate cert.json --config lorenz [--out DIR]
    rcbc simulate --certificate cert.json --config lorenz [--runs R] [--out DIR]

Exit codes: 0 feasible / pass, 2 infeasible / fail, 1 operational error.
``RCBC_BACKEND`` selects the conic solver (default ``clarabel``).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from pathlib import Path
from typing import List, Optional

from . import config as config_mod
from . import pipeline
from .certify import Certificate, CertificateError
from .synth import Mode

EXIT_OK, EXIT_ERROR, EXIT_NEGATIVE = 0, 1, 2

log = logging.getLogger("rcbc")


def atomic_write(path: Path, text: str) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_config(args) -> config_mod.RunConfig:
    cfg = config_mod.load(config_mod.resolve(args.config))
    return cfg.with_overrides(mode=getattr(args, "mode", None), T=getattr(args, "T", None),
                              seed=getattr(args, "seed", None), T_max=getattr(args, "T_max", None))


def _out_dir(args, cfg) -> Path:
    return Path(args.out) if args.out else Path("results") / cfg.name


def cmd_synth(args) -> int:
    cfg = _load_config(args)
    data = pipeline.collect(cfg)
    rec = pipeline.synthesize(cfg, data, cfg.T, cfg.synthesis.mode)
    out = _out_dir(args, cfg)
    doc = pipeline.result_document(cfg, rec)
    atomic_write(out / "result.json", pipeline.dumps(doc))
    if rec.feasible:
        atomic_write(out / "certificate.json", rec.certificate.dumps())
        print(f"{cfg.name}: feasible (T={rec.T}, mode={rec.mode.value}), horizon {rec.verdict.display}, "
              f"{rec.runtime:.1f} s -> {out}")
        return EXIT_OK
    why = rec.note or rec.outcome.status
    print(f"{cfg.name}: {why} (T={rec.T}, mode={rec.mode.value}) -> {out}")
    return EXIT_ERROR if rec.outcome.status == "numerical_failure" and not rec.note else EXIT_NEGATIVE


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    rows = pipeline.sweep(cfg, args.T_max, jobs=args.jobs)
    out = _out_dir(args, cfg)
    # wall-clock numbers live in their own file so sweep.csv is reproducible
    atomic_write(out / "sweep.csv", pipeline.sweep_csv(rows, include_runtime=False))
    trials = {r["mode"]: {str(k): v for k, v in sorted(r["_trials"].items())} for r in rows}
    atomic_write(out / "sweep_trials.json", pipeline.dumps({"benchmark": cfg.name, "trials": trials}))
    atomic_write(out / "sweep_timing.json",
                 pipeline.dumps({"benchmark": cfg.name, "seconds": {r["mode"]: float(r["runtime"]) for r in rows}}))
    for r in rows:
        rec = r["_record"]
        if rec is not None and rec.feasible:
            atomic_write(out / f"certificate_{r['mode']}.json", rec.certificate.dumps())
    for r in rows:
        print(f"{r['benchmark']:>14} {r['mode']:>3} min_T={r['min_T']} horizon={r['horizon'] or '-'} ({r['runtime']} s)")
    return EXIT_OK if all(r["min_T"] != "none" for r in rows) else EXIT_NEGATIVE


def _load_cert(path) -> Certificate:
    try:
        return Certificate.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CertificateError(f"cannot read certificate: {exc}") from exc
    except ValueError as exc:
        raise CertificateError(f"invalid certificate file: {exc}") from exc


def cmd_verify(args) -> int:
    cfg = _load_config(args)
    cert = _load_cert(args.certificate)
    rep = pipeline.verify(cert, cfg, runs=args.runs, samples=args.samples)
    out = _out_dir(args, cfg)
    atomic_write(out / "safety_report.json", rep.dumps())
    mc = rep.monte_carlo
    print(f"{cfg.name}: {'PASS' if rep.passed else 'FAIL'} "
          + " ".join(f"{k}={v.worst_margin:.3g}" for k, v in sorted(rep.conditions.items()))
          + (f" monte_carlo={mc.safe}/{mc.runs}" if mc else ""))
    return EXIT_OK if rep.passed else EXIT_NEGATIVE


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    cert = _load_cert(args.certificate)
    trajs, plot = pipeline.simulate(cert, cfg, args.runs, args.horizon, zero_disturbance=args.no_disturbance)
    out = _out_dir(args, cfg)
    width = len(str(len(trajs)))
    for k, tr in enumerate(trajs):
        atomic_write(out / "trajectories" / f"run_{k:0{width}d}.csv", tr.to_csv())
    atomic_write(out / "plot_data.json", pipeline.dumps(plot))
    print(f"{cfg.name}: wrote {len(trajs)} trajectories and plot data -> {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rcbc", description="Robust barrier certificates from data and physics.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, cert=False):
        sp.add_argument("--config", required=True, help="config file or shipped benchmark name")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory (default results/<name>)")
        if cert:
            sp.add_argument("--certificate", required=True)

    s = sub.add_parser("synth", help="synthesize a certificate and controller")
    common(s)
    s.add_argument("--mode", choices=["pi", "dd", "physics-informed", "data-driven"])
    s.add_argument("--T", type=int, help="number of data samples")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("sweep", help="minimal sample count per mode")
    common(s)
    s.add_argument("--T-max", dest="T_max", type=int)
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("verify", help="sampled conditions and Monte Carlo")
    common(s, cert=True)
    s.add_argument("--runs", type=int)
    s.add_argument("--samples", type=int)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("simulate", help="trajectory CSVs and plot data")
    common(s, cert=True)
    s.add_argument("--runs", type=int, default=200)
    s.add_argument("--horizon", type=float, help="steps (dt) or time units (ct)")
    s.add_argument("--no-disturbance", action="store_true")
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if getattr(args, "mode", None):
            args.mode = Mode.parse(args.mode).value
        return args.func(args)
    except config_mod.ConfigError as exc:
        print(f"error: config {exc}", file=sys.stderr)
    except CertificateError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except pipeline.StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
