import json

import pytest

from contactcx.cli import main
from contactcx.scenarios import BUILTIN_NAMES, builtin


def test_list(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert out == list(BUILTIN_NAMES)


def test_verify_builtin_json(capsys):
    code = main(["verify", "--builtin", "E1_R3_standard", "--format", "json"])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert list(doc.keys()) == ["scenario", "verdict", "checks", "seed", "version"]
    assert doc["verdict"] == "pass"
    assert doc["seed"] == 42
    ids = [c["id"] for c in doc["checks"]]
    assert "extension_pullback" in ids
    for c in doc["checks"]:
        assert list(c.keys()) == ["id", "residual", "tolerance", "status", "samples", "ms"]


def test_verify_e4_contact_reduce_residual(capsys):
    code = main(["verify", "--builtin", "E4_heisenberg_translation", "--format", "json"])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    rec = next(c for c in doc["checks"] if c["id"] == "contact_reduce")
    assert rec["status"] == "pass"
    assert rec["residual"] < 1e-8


def test_text_and_json_report_identical_residuals(capsys):
    assert main(["verify", "--builtin", "E1_R3_standard", "--format", "json", "--seed", "7"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert main(["verify", "--builtin", "E1_R3_standard", "--format", "text", "--seed", "7"]) == 0
    text = capsys.readouterr().out
    for c in doc["checks"]:
        assert f"{c['residual']:.3e}" in text


def test_missing_scenario_file(capsys):
    code = main(["verify", "--scenario", "missing.json"])
    assert code == 2
    assert "not found" in capsys.readouterr().err


def test_unknown_flag_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["verify", "--builtin", "E1_R3_standard", "--frobnicate"])
    assert exc.value.code == 2


def test_no_command_exits_2(capsys):
    assert main([]) == 2


def test_describe_builtin(capsys):
    assert main(["describe", "--builtin", "E2_circle"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["name"] == "E2_circle"
    assert doc["complexification"]["quadrature_n"] == 64


def test_report_written_to_file(tmp_path, capsys):
    out = tmp_path / "report.json"
    code = main(
        ["verify", "--builtin", "E7_symplectification_line", "--format", "json", "--report", str(out)]
    )
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["scenario"] == "E7_symplectification_line"


def test_failing_scenario_exits_1(tmp_path):
    raw = json.loads(builtin("E1_R3_standard").to_json())
    raw["one_form"]["c"] = ["0", "x", "0"]  # x dy is not contact
    raw["checks"] = ["contact"]
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(raw))
    assert main(["verify", "--scenario", str(p), "--format", "text"]) == 1


def test_tolerance_override_flag(capsys):
    code = main(
        [
            "verify",
            "--builtin",
            "E1_R3_standard",
            "--format",
            "json",
            "--tol",
            "extension_pullback=1e-3",
        ]
    )
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    rec = next(c for c in doc["checks"] if c["id"] == "extension_pullback")
    assert rec["tolerance"] == 1e-3


def test_samples_scale_flag(capsys):
    assert main(["verify", "--builtin", "E1_R3_standard", "--samples", "0.5"]) == 0
