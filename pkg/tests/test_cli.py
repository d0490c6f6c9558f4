import json
import math

import pandas as pd
import pytest

from app.cli import EXIT_INVALID, EXIT_USAGE, main
from app.config import settings
from app.services.param_service import param_service


def _run(capsys, *argv):
    status = main(list(argv))
    out = capsys.readouterr().out
    return status, json.loads(out) if out.strip() else None


def test_check_beta_accepted(capsys):
    status, report = _run(capsys, "check-beta", "--n", "4", "--k0", "3", "--beta", "0.25,0.25")
    assert status == 0
    assert report["schema_version"] == 1
    assert report["command"] == "check-beta"
    assert report["result"]["verdict"] == "accepted"
    assert report["result"]["alpha"]["values"] == [0.0, 0.0]


def test_check_beta_rejected(capsys):
    status, report = _run(capsys, "check-beta", "--n", "3", "--beta", "0.3")
    assert status == 2
    assert report["result"]["verdict"] == "rejected"
    assert report["result"]["fail_index"] == 3


def test_exponents_alpha_n_zero(capsys):
    status, report = _run(capsys, "exponents", "--n", "3", "--Q", "6", "--alpha", "0")
    assert status == 2
    assert report["result"]["valid"] is False
    assert "alpha_n = 0" in report["result"]["reason"]


def test_alpha2beta_and_gamma(capsys):
    status, report = _run(capsys, "alpha2beta", "--n", "4", "--alpha", "-0.5,0")
    assert status == 0
    assert report["result"]["beta"] == [0.0, 1.0]
    status, report = _run(capsys, "gamma", "--n", "4", "--alpha", "-0.5,0")
    assert report["result"]["gamma"] == [0.0, 1.0]


@pytest.mark.parametrize("argv, key, expected", [
    (("alpha2beta", "--n", "4", "--alpha", "-0.5,0"), "beta", [0.0, 1.0]),
    (("alpha2beta", "--n", "3", "--alpha", "-.5"), "beta", [0.0]),
    (("gamma", "--n", "5", "--alpha", "-0.5,-1,0"), "gamma", [0.0, 0.0, 1.5]),
    (("alpha2beta", "--n", "4", "--alpha=-0.5,0"), "beta", [0.0, 1.0]),
])
def test_negative_leading_values(capsys, argv, key, expected):
    status, report = _run(capsys, *argv)
    assert status == 0
    assert report["result"][key] == expected


def test_negative_beta_value(capsys):
    status, report = _run(capsys, "check-beta", "--n", "3", "--beta", "-0.75")
    assert status == 0
    assert report["result"]["verdict"] == "accepted"
    assert report["result"]["alpha"]["values"] == [-1.0]


def test_half_space_exponents(capsys):
    status, report = _run(
        capsys, "exponents", "--n", "4", "--k0", "1", "--Q", "3.5",
        "--alpha", "-0.5,-0.25,-0.1,-0.2", "--weight", "x1"
    )
    assert status == 0
    assert report["result"]["valid"] is True
    assert report["result"]["b"] == pytest.approx(report["result"]["B"], abs=1e-14)
    assert len(report["result"]["c"]) == 4


def test_canonical(capsys):
    status, report = _run(capsys, "canonical", "--n", "5", "--k", "4", "--variant", "cor1")
    assert status == 0
    assert report["result"]["alpha"] == [-0.5, 0.0, 0.0]
    assert report["result"]["beta"] == [0.0, 1.0, 0.25]


def test_sn(capsys):
    status, report = _run(capsys, "sn", "--n", "3")
    assert status == 0
    assert report["result"]["S_n"] == param_service.sobolev_constant(3)


def test_output_is_deterministic(capsys):
    main(["canonical", "--n", "6", "--k", "4", "--variant", "cor2"])
    first = capsys.readouterr().out
    main(["canonical", "--n", "6", "--k", "4", "--variant", "cor2"])
    assert capsys.readouterr().out == first


def test_non_finite_config_values_are_strings(capsys):
    status, report = _run(capsys, "sn", "--n", "4")
    assert report["config"]["k3"] == "inf"


def test_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["check-beta", "--n", "three"])
    assert excinfo.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as excinfo:
        main([])
    assert excinfo.value.code == EXIT_USAGE


def test_numeric_validation_exit_code(capsys):
    assert main(["check-beta", "--n", "2", "--beta", "0.25"]) == EXIT_INVALID
    assert main(["check-beta", "--n", "4"]) == EXIT_INVALID
    assert main(["check-beta", "--n", "4", "--beta", "0.25"]) == EXIT_INVALID
    assert "error:" in capsys.readouterr().err


def test_config_file_with_flag_override(capsys, tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"n": 3, "beta": [0.3]}), encoding="utf-8")
    status, report = _run(capsys, "check-beta", "--config", str(path))
    assert status == 2
    status, report = _run(capsys, "check-beta", "--config", str(path), "--beta", "0.2")
    assert status == 0
    assert report["config"]["beta"] == [0.2]


def test_missing_config_file(capsys, tmp_path):
    assert main(["sn", "--config", str(tmp_path / "absent.json")]) == EXIT_INVALID


def test_oracle_writes_json_and_csv(capsys, tmp_path, monkeypatch):
    monkeypatch.setattr(settings, "REPORT_DIR", str(tmp_path))
    status, report = _run(capsys, "oracle", "--n", "3", "--cells", "8,12", "--save")
    assert status == 0
    saved = json.loads((tmp_path / "oracle.json").read_text(encoding="utf-8"))
    assert saved == report

    table = pd.read_csv(tmp_path / "oracle.csv")
    assert list(table["cells_per_axis"]) == [8, 12]
    lambdas = [e["lambda_min"] for e in report["result"]["estimates"]]
    assert list(table["value"]) == lambdas
    assert all(math.isfinite(v) for v in lambdas)


def test_explicit_output_paths(capsys, tmp_path):
    out = tmp_path / "nested" / "report.json"
    status, report = _run(capsys, "oracle", "--n", "3", "--cells", "8", "--mass", "identity",
                          "--output", str(out), "--csv", str(tmp_path / "table.csv"))
    assert status == 0
    assert json.loads(out.read_text(encoding="utf-8")) == report
    assert (tmp_path / "table.csv").exists()


def test_rayleigh_step3(capsys):
    status, report = _run(capsys, "rayleigh", "--n", "3", "--level", "1000", "--tol", "1e-7")
    assert status == 0
    assert report["result"]["value"] > 0.25
    assert report["result"]["numerator"] > 0
