import json

import pytest

from rcbc import config
from rcbc.cli import EXIT_ERROR, EXIT_NEGATIVE, EXIT_OK, atomic_write, main
from rcbc.system import BENCHMARKS

from conftest import toy_system


def toy_doc(**over):
    doc = {
        "name": "toy",
        "system": toy_system().to_json(),
        "seed": 0,
        "sets": {"X_i": [[[-1, 1]]], "X_u": [[[2, 4]], [[-4, -2]]]},
        "noise": {"eps_omega": 0.01, "eps_Omega": 0.05},
        "perturbation": {"dist_range": 0.01},
        "data": {"x0": [0.5], "input_amplitude": 1.0, "T": 3},
        "synthesis": {"mode": "pi", "lambda": 0.9, "mu": 0.1, "deg_Kbar": 0, "deg_kappa": 0},
        "verification": {"samples": 2000, "runs": 50, "step_cap": 200},
        "sweep": {"T_max": 3, "strategy": "linear"},
    }
    for k, v in over.items():
        if "__" in k:
            a, b = k.split("__")
            doc[a][b] = v
        else:
            doc[k] = v
    return doc


@pytest.fixture
def cfg_file(tmp_path):
    def make(**over):
        p = tmp_path / "toy.json"
        p.write_text(json.dumps(toy_doc(**over)))
        return str(p)

    return make


def test_synth_writes_certificate(cfg_file, tmp_path, capsys):
    out = tmp_path / "r"
    assert main(["synth", "--config", cfg_file(), "--out", str(out)]) == EXIT_OK
    assert (out / "certificate.json").exists()
    res = json.loads((out / "result.json").read_text())
    assert res["status"] == "feasible"
    assert res["horizon"]["kind"] == "infinite"
    assert "feasible" in capsys.readouterr().out


def test_synth_is_byte_deterministic(cfg_file, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["synth", "--config", cfg_file(), "--out", str(a)])
    main(["synth", "--config", cfg_file(), "--out", str(b)])
    assert (a / "certificate.json").read_bytes() == (b / "certificate.json").read_bytes()
    assert (a / "result.json").read_bytes() == (b / "result.json").read_bytes()


def test_infeasible_exits_2(cfg_file, tmp_path):
    # one sample leaves the toy unidentified without the physics prior
    rc = main(["synth", "--config", cfg_file(seed=2), "--mode", "data-driven", "--T", "1", "--out", str(tmp_path)])
    assert rc == EXIT_NEGATIVE
    assert not (tmp_path / "certificate.json").exists()


def test_malformed_config_reports_field(cfg_file, tmp_path, capsys):
    rc = main(["synth", "--config", cfg_file(data__T=0), "--out", str(tmp_path)])
    assert rc == EXIT_ERROR
    assert "$.data.T" in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert main(["synth", "--config", str(tmp_path / "nope.json")]) == EXIT_ERROR
    assert "cannot read config" in capsys.readouterr().err


def test_wrong_box_dimension(tmp_path, capsys):
    doc = toy_doc()
    doc["sets"]["X_i"] = [[[-1, 1], [0, 1]]]
    p = tmp_path / "c.json"
    p.write_text(json.dumps(doc))
    assert main(["synth", "--config", str(p)]) == EXIT_ERROR
    assert "$.sets.X_i[0]" in capsys.readouterr().err


def test_verify_and_simulate(cfg_file, tmp_path):
    out = tmp_path / "r"
    main(["synth", "--config", cfg_file(), "--out", str(out)])
    cert = str(out / "certificate.json")
    assert main(["verify", "--config", cfg_file(), "--certificate", cert, "--out", str(out)]) == EXIT_OK
    rep = json.loads((out / "safety_report.json").read_text())
    assert rep["pass"] and rep["monte_carlo"]["safe"] == 50
    assert main(["simulate", "--config", cfg_file(), "--certificate", cert, "--runs", "7", "--out", str(out)]) == EXIT_OK
    assert len(list((out / "trajectories").glob("run_*.csv"))) == 7
    plot = json.loads((out / "plot_data.json").read_text())
    assert plot["unsafe_level_set"]["level"] == pytest.approx(json.loads(open(cert).read())["gamma_u"])


def test_verify_flags_corrupted_certificate(cfg_file, tmp_path):
    out = tmp_path / "r"
    main(["synth", "--config", cfg_file(), "--out", str(out)])
    doc = json.loads((out / "certificate.json").read_text())
    doc["gamma_u"] *= 100
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert main(["verify", "--config", cfg_file(), "--certificate", str(bad), "--out", str(out)]) == EXIT_NEGATIVE
    rep = json.loads((out / "safety_report.json").read_text())
    assert rep["conditions"]["unsafe"]["witness"] is not None


def test_garbage_certificate(cfg_file, tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    assert main(["verify", "--config", cfg_file(), "--certificate", str(p)]) == EXIT_ERROR
    assert "certificate" in capsys.readouterr().err


def test_sweep_csv_is_reproducible(cfg_file, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["sweep", "--config", cfg_file(seed=2), "--out", str(a)]) == EXIT_OK
    main(["sweep", "--config", cfg_file(seed=2), "--out", str(b)])
    assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()
    rows = (a / "sweep.csv").read_text().splitlines()
    assert rows[0].startswith("benchmark,mode,min_T")
    mins = {r.split(",")[1]: r.split(",")[2] for r in rows[1:]}
    assert int(mins["pi"]) < int(mins["dd"])


def test_sweep_cap_below_feasibility_gives_none(cfg_file, tmp_path):
    doc = cfg_file(seed=2, synthesis__mode="dd")
    assert main(["sweep", "--config", doc, "--T-max", "1", "--out", str(tmp_path)]) == EXIT_NEGATIVE
    assert "none" in (tmp_path / "sweep.csv").read_text()


def test_atomic_write_replaces(tmp_path):
    p = tmp_path / "x" / "f.txt"
    atomic_write(p, "one")
    atomic_write(p, "two")
    assert p.read_text() == "two"
    assert [q.name for q in p.parent.iterdir()] == ["f.txt"]


@pytest.mark.parametrize("name", BENCHMARKS)
def test_shipped_configs_validate(name):
    cfg = config.load(config.resolve(name))
    assert cfg.name == name
    assert cfg.system.n == 3


def test_override_applies():
    cfg = config.load(config.resolve("spacecraft")).with_overrides(mode="dd", T=4, seed=9)
    assert cfg.T == 4 and cfg.seed == 9 and cfg.synthesis.mode.value == "dd"
