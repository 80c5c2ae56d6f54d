"""End-to-end tests for the critical-arm command line interface."""

import csv
import json

from click.testing import CliRunner

from critarm.cli import EXIT_GATE, EXIT_VALIDATION, main
from critarm.spin_fk_mc import CSV_COLUMNS


def _write_config(tmp_path, cfg):
    path = tmp_path / "config.json"
    payload = {"schema-version": 1}
    payload.update(cfg)
    path.write_text(json.dumps(payload))
    return str(path)


def _invoke(args):
    return CliRunner().invoke(main, args, catch_exceptions=False)


def test_verify_all_pass(tmp_path):
    cfg = _write_config(tmp_path, {
        "verify": {"inequalities": ["griffiths", "ghs"],
                   "instances": 5},
    })
    out = tmp_path / "ineq.csv"
    result = _invoke(["verify", "--config", cfg, "--out", str(out),
                      "--seed", "3"])
    assert result.exit_code == 0
    assert "10/10 instances passed" in result.output
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "name,instance_seed,lhs,rhs,margin,pass"
    assert len(lines) == 11
    assert all(line.endswith(",1") for line in lines[1:])


def test_verify_unknown_inequality(tmp_path):
    cfg = _write_config(tmp_path, {
        "verify": {"inequalities": ["no_such_inequality"], "instances": 1},
    })
    result = _invoke(["verify", "--config", cfg])
    assert result.exit_code == EXIT_VALIDATION


def test_missing_schema_version(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"verify": {}}))
    result = _invoke(["verify", "--config", str(path)])
    assert result.exit_code == EXIT_VALIDATION


def test_malformed_json(tmp_path):
    path = tmp_path / "config.json"
    path.write_text("{not json")
    result = _invoke(["verify", "--config", str(path)])
    assert result.exit_code == EXIT_VALIDATION


def test_onearm_rows_and_determinism(tmp_path):
    cfg = _write_config(tmp_path, {
        "onearm": {"d": 2, "ms": [1, 2], "N": 4, "beta": 0.35,
                   "chains": 2, "sweeps": 200},
    })
    outputs = []
    for run in range(2):
        out = tmp_path / f"run{run}.csv"
        result = _invoke(["onearm", "--config", cfg, "--out", str(out),
                          "--seed", "11"])
        assert result.exit_code == 0
        with open(out, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert [r["observable"] for r in rows] == ["one_arm", "one_arm"]
        assert list(rows[0]) == CSV_COLUMNS
        stripped = [{k: v for k, v in r.items() if k != "walltime_s"}
                    for r in rows]
        outputs.append(stripped)
    assert outputs[0] == outputs[1]


def test_onearm_gate_failure(tmp_path):
    # At high temperature the one-arm probability decays much faster than
    # the configured slope, so the gate must trip.
    cfg = _write_config(tmp_path, {
        "onearm": {"d": 2, "ms": [1, 2, 4], "N": 4, "beta": 0.1,
                   "chains": 2, "sweeps": 300,
                   "gate": {"slope": -0.125, "tol": 0.05}},
    })
    result = _invoke(["onearm", "--config", cfg, "--gate", "--seed", "5"])
    assert result.exit_code == EXIT_GATE
    # Without --gate the same run reports the failure but exits 0.
    result = _invoke(["onearm", "--config", cfg, "--seed", "5"])
    assert result.exit_code == 0


def test_onearm_bad_ms(tmp_path):
    cfg = _write_config(tmp_path, {
        "onearm": {"d": 2, "ms": [0], "N": 4, "beta": 0.3},
    })
    result = _invoke(["onearm", "--config", cfg])
    assert result.exit_code == EXIT_VALIDATION


def test_magnetisation_runs(tmp_path):
    cfg = _write_config(tmp_path, {
        "magnetisation": {"d": 2, "N": 3, "hs": [0.1, 0.2], "beta": 0.3,
                          "chains": 2, "sweeps": 200},
    })
    out = tmp_path / "mag.csv"
    result = _invoke(["magnetisation", "--config", cfg, "--out", str(out)])
    assert result.exit_code == 0
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2
    assert all(r["observable"] == "magnetisation_vs_h" for r in rows)
    assert float(rows[0]["h"]) == 0.1


def test_volume_thresholds_must_ascend(tmp_path):
    cfg = _write_config(tmp_path, {
        "volume": {"d": 2, "N": 3, "thresholds": [4, 2], "beta": 0.3},
    })
    result = _invoke(["volume", "--config", cfg])
    assert result.exit_code == EXIT_VALIDATION


def test_drc_runs(tmp_path):
    cfg = _write_config(tmp_path, {
        "drc": {"d": 2, "N": 3, "ms": [1], "beta": 0.35,
                "chains": 2, "sweeps": 300},
    })
    result = _invoke(["drc", "--config", cfg, "--seed", "2"])
    assert result.exit_code == 0
    assert "drc_one_arm d=2 m=1" in result.output


def test_betac_named_beta_resolves(tmp_path):
    # "betac" in a config resolves through the cached estimate.
    cfg = _write_config(tmp_path, {
        "onearm": {"d": 2, "ms": [1], "N": 3, "beta": "betac",
                   "chains": 2, "sweeps": 100},
    })
    result = _invoke(["onearm", "--config", cfg])
    assert result.exit_code == 0


def test_report_roundtrip(tmp_path):
    onearm_cfg = _write_config(tmp_path, {
        "onearm": {"d": 2, "ms": [1, 2, 3], "N": 4, "beta": 0.42,
                   "chains": 2, "sweeps": 400},
    })
    out = tmp_path / "results.csv"
    result = _invoke(["onearm", "--config", onearm_cfg, "--out", str(out)])
    assert result.exit_code == 0
    report_cfg = tmp_path / "report.json"
    report_cfg.write_text(json.dumps({
        "schema-version": 1,
        "report": {"csv": str(out), "tolerance": 10.0},
    }))
    report_out = tmp_path / "report.csv"
    result = _invoke(["report", "--config", str(report_cfg),
                      "--out", str(report_out)])
    assert result.exit_code == 0
    assert "one_arm d=2 bc=wired" in result.output
    assert report_out.read_text().startswith("observable,")


def test_report_missing_csv(tmp_path):
    cfg = _write_config(tmp_path, {
        "report": {"csv": str(tmp_path / "absent.csv")},
    })
    result = _invoke(["report", "--config", cfg])
    assert result.exit_code == EXIT_VALIDATION
