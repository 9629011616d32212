import json

import pytest

from stellarprep import cli

SMALL_OSC = {
    "physics": {"model": "oscillator", "sigma": 1.0, "lambda_coupling": 0.3},
    "ansatz": {"R": 2, "Q": 1},
    "optimization": {"preset": "columns", "column": 0, "restarts": 2},
    "circuit": {"F0": 0.9, "lam_max": 40},
}

SMALL_LATTICE = {
    "physics": {"model": "lattice", "m_sq": 0.6, "lambda_coupling": 1.5, "N": 4},
    "pimc": {"theta": [0.4, 0.2, 0.1], "n_samples": 400, "n_bootstrap": 100, "burn_in": 300},
    "ansatz": {"R": 2, "Q": 1},
}


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


@pytest.mark.parametrize(
    "cfg,path",
    [
        ({"physics": {"N": 10}, "ansatz": {"Q": 6}}, "ansatz.Q"),
        ({"ansatz": {"R": 3}}, "ansatz.R"),
        ({"pimc": {"theta": [0.3]}}, "pimc.theta[0]"),
        ({"physics": {"lambda_coupling": -1}}, "physics.lambda_coupling"),
        ({"physics": {"colour": 1}}, "physics.colour"),
        ({"circuit": {"F0": 1.5}}, "circuit.F0"),
    ],
)
def test_config_errors_name_the_field(cfg, path):
    with pytest.raises(cli.ConfigError) as exc:
        cli.validate_config(cfg)
    assert str(exc.value).startswith(path + ":")


def test_bad_config_exits_nonzero(tmp_path, capsys):
    rc = cli.main(["exact", "--config", _write(tmp_path, {"ansatz": {"R": 3}}), "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "ansatz.R" in capsys.readouterr().err


def test_substreams_are_distinct_and_stable():
    a = cli.substream(1, "chain")
    assert a == cli.substream(1, "chain")
    assert a != cli.substream(1, "bootstrap") != cli.substream(2, "chain")


def test_exact_oscillator_outputs(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["exact", "--config", _write(tmp_path, SMALL_OSC), "--out", str(out)]) == 0
    first = (out / "exact_moments.csv").read_text().splitlines()[0]
    assert first.startswith("# config_hash=") and "seed=" in first
    rows = cli.read_csv(out / "exact_spectrum.csv")
    assert float(rows[0]["energy"]) < float(rows[1]["energy"])
    manifest = json.loads((out / "manifest_exact.json").read_text())
    assert manifest["status"] == "ok" and "exact_moments.csv" in manifest["outputs"]


def test_pipeline_single_mode_verifies(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["pipeline", "--config", _write(tmp_path, SMALL_OSC), "--out", str(out)]) == 0
    rep = cli.read_csv(out / "verify.csv")[0]
    assert rep["status"] == "ok"
    assert float(rep["fidelity"]) >= float(rep["fidelity_lower"])
    assert (out / "circuit.qasm").read_text().startswith("OPENQASM 2.0;")
    # standalone verify on the written artefacts
    out2 = tmp_path / "v"
    rc = cli.main(["verify", "--qasm", str(out / "circuit.qasm"), "--params", str(out / "params.txt"),
                   "--budget", str(out / "budget.csv"), "--out", str(out2)])
    assert rc == 0


def test_unreachable_budget_fails(tmp_path):
    cfg = dict(SMALL_OSC, physics={"model": "oscillator", "sigma": 1.0, "lambda_coupling": 5.0},
               ansatz={"R": 4, "Q": 1}, circuit={"F0": 0.9, "lam_max": 12})
    out = tmp_path / "o"
    assert cli.main(["pipeline", "--config", _write(tmp_path, cfg), "--out", str(out)]) == 1
    assert cli.read_csv(out / "budget.csv")[0]["status"] == "unreachable"
    assert json.loads((out / "manifest_pipeline.json").read_text())["status"] == "failed"


def test_pimc_is_deterministic(tmp_path, monkeypatch):
    monkeypatch.setenv("STELLARPREP_THREADS", "2")
    cfg = _write(tmp_path, SMALL_LATTICE)
    for name in ("a", "b"):
        assert cli.main(["pimc", "--config", cfg, "--out", str(tmp_path / name), "--seed", "7"]) == 0
    a = (tmp_path / "a" / "pimc_moments.csv").read_text()
    assert a == (tmp_path / "b" / "pimc_moments.csv").read_text()
    table = json.loads((tmp_path / "a" / "pimc_table.json").read_text())
    assert {"phi6", "phi8", "phi10", "R4", "pi2"} <= set(table)
    manifest = json.loads((tmp_path / "a" / "manifest_pimc.json").read_text())
    assert manifest["threads"] == 2 and manifest["seed"] == 7


def test_optimize_from_pimc_table(tmp_path):
    table = {"phi6": [0.27, 0.006], "phi8": [0.45, 0.013], "phi10": [0.94, 0.04]}
    tpath = tmp_path / "table.json"
    tpath.write_text(json.dumps(table))
    cfg = dict(SMALL_LATTICE, optimization={"preset": "moment_ratio", "weights": [10.0], "restarts": 1})
    out = tmp_path / "o"
    assert cli.main(["optimize", "--config", _write(tmp_path, cfg), "--pimc-table", str(tpath), "--out", str(out)]) == 0
    rows = cli.read_csv(out / "optimize.csv")
    assert [float(r["weight"]) for r in rows] == [0.0, 10.0]
    assert float(rows[1]["sq_discrepancy"]) <= float(rows[0]["sq_discrepancy"])
