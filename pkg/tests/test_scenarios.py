import json

import numpy as np
import pytest

from contactcx.errors import ScenarioError
from contactcx.scenarios import BUILTIN_NAMES, builtin, builtin_dict, load, load_dict, run


def test_builtin_names():
    assert BUILTIN_NAMES == (
        "E1_R3_standard",
        "E2_circle",
        "E3_T3",
        "E4_heisenberg_translation",
        "E5_Z2_stratified",
        "E6_S1_on_S3",
        "E7_symplectification_line",
    )


def test_unknown_builtin():
    with pytest.raises(ScenarioError):
        builtin("nope")


def test_expression_typo_names_field():
    raw = builtin_dict("E1_R3_standard")
    raw["one_form"]["c"][0] = "coz(z)"
    with pytest.raises(ScenarioError) as exc:
        load_dict(raw)
    assert "one_form.c[0]" in str(exc.value)


def test_missing_section_named_by_check():
    raw = builtin_dict("E4_heisenberg_translation")
    del raw["quotient"]["contact"]
    with pytest.raises(ScenarioError) as exc:
        load_dict(raw)
    assert "quotient" in str(exc.value) and "required by check" in str(exc.value)


def test_undeclared_chart_in_action():
    raw = builtin_dict("E3_T3")
    raw["action"]["maps"] = {"other": ["x", "y", "z"]}
    with pytest.raises(ScenarioError):
        load_dict(raw)


def test_box_length_mismatch():
    raw = builtin_dict("E1_R3_standard")
    raw["atlas"]["charts"][0]["box"] = [[-1, 1]]
    with pytest.raises(ScenarioError) as exc:
        load_dict(raw)
    assert "box" in str(exc.value)


def test_unknown_check_id():
    raw = builtin_dict("E1_R3_standard")
    raw["checks"].append("made_up")
    with pytest.raises(ScenarioError):
        load_dict(raw)


def test_file_roundtrip_matches_builtin(tmp_path):
    """E4 exported to a user file reproduces the builtin's residuals exactly."""
    scn = builtin("E4_heisenberg_translation")
    path = tmp_path / "e4.json"
    path.write_text(scn.to_json())
    again = load(path)
    rep_a = run(scn, workers=1)
    rep_b = run(again, workers=1)
    assert rep_a.verdict == rep_b.verdict == "pass"
    for a, b in zip(rep_a.checks, rep_b.checks):
        assert a.id == b.id
        assert a.residual == b.residual  # bit identical
        assert a.samples == b.samples


def test_missing_file():
    with pytest.raises(ScenarioError) as exc:
        load("does_not_exist.json")
    assert "not found" in str(exc.value)


def test_bad_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ScenarioError):
        load(p)


def test_determinism_bit_identical_reports():
    scn = builtin("E4_heisenberg_translation")
    a = run(scn, workers=1)
    b = run(builtin("E4_heisenberg_translation"), workers=1)
    da, db = a.to_dict(), b.to_dict()
    for rec in da["checks"] + db["checks"]:
        rec.pop("ms")
    assert json.dumps(da, sort_keys=True) == json.dumps(db, sort_keys=True)


def test_worker_count_does_not_change_residuals():
    scn = builtin("E3_T3")
    serial = run(scn, workers=1)
    threaded = run(builtin("E3_T3"), workers=4)
    for a, b in zip(serial.checks, threaded.checks):
        assert a.id == b.id
        assert a.residual == b.residual


def test_empty_check_list_passes():
    raw = builtin_dict("E1_R3_standard")
    raw["checks"] = []
    rep = run(load_dict(raw), workers=1)
    assert rep.verdict == "pass"
    assert rep.checks == []


def test_lambda_sweep_finds_weight():
    raw = builtin_dict("E1_R3_standard")
    raw["complexification"]["lambda"] = 0.01
    raw["checks"] = ["spsh", "extension_pullback"]
    rep = run(load_dict(raw), workers=1)
    assert rep.verdict == "pass"
    spsh = next(c for c in rep.checks if c.id == "spsh")
    # doubling from 0.01 first clears 2*lambda - 1 > 0 at 0.64
    assert "lambda=0.64" in spsh.note
    assert spsh.residual == pytest.approx(2 * 0.64 - 1.0)


def test_sweep_failure_reports_and_skips():
    raw = builtin_dict("E1_R3_standard")
    # coefficient too large for any lambda <= 64: eigenvalue 2 lambda - 200
    raw["one_form"]["c"] = ["0", "200.0*x", "1"]
    raw["checks"] = ["spsh", "extension_pullback", "cr_levi"]
    rep = run(load_dict(raw), workers=1)
    assert rep.verdict == "fail"
    by_id = {c.id: c for c in rep.checks}
    assert by_id["spsh"].status == "fail"
    assert by_id["extension_pullback"].status == "skipped"
    assert by_id["cr_levi"].status == "skipped"


def test_tolerance_override_applies():
    scn = builtin("E1_R3_standard")
    rep = run(scn, workers=1, tolerances={"extension_pullback": 1e-30})
    rec = next(c for c in rep.checks if c.id == "extension_pullback")
    assert rec.tolerance == 1e-30
    assert rec.status == "pass"  # the residual is exactly 0 here


def test_samples_scale_keeps_verdicts():
    for name in ("E1_R3_standard", "E4_heisenberg_translation"):
        rep = run(builtin(name), workers=1, samples_scale=0.5)
        assert rep.verdict == "pass", rep.to_text()


def test_e6_vanishing_box_is_sound():
    """Inside the declared box every foreign bump vanishes on the whole tube.

    The split normalization of the partition relies on this: the inner term's
    denominator keeps home bumps only.
    """
    from contactcx.complexify import complexify, tube_scope
    from contactcx.expr.jet import values_vec
    from contactcx.potential import Bump, PartitionOfUnity

    scn = builtin("E6_S1_on_S3")
    comp = scn.complexification
    part = comp["partition"]
    bumps = tuple(Bump(chart=b["chart"], center=b["center"], halfwidth=b["halfwidth"], shape=b["shape"]) for b in part["bumps"])
    pou = PartitionOfUnity(atlas=scn.atlas, bumps=bumps, vanishing_box=part["vanishing_box"])
    r = comp["radius"]
    rng = np.random.default_rng(0)
    for name in ("n", "s"):
        scope = tube_scope(scn.atlas.chart(name).coords)
        _, foreign = pou._sums(name, scope)
        vbox = part["vanishing_box"][name]
        X = np.empty((4000, 6))
        for j, (lo, hi) in enumerate(vbox):
            X[:, j] = rng.uniform(lo, hi, size=4000)
        X[:, 3:] = rng.uniform(-r, r, size=(4000, 3))
        with np.errstate(all="ignore"):
            v = values_vec((foreign,), X, strict=False)[:, 0]
        v = np.nan_to_num(v, nan=0.0)  # the singular point itself is excluded by guards
        assert np.max(np.abs(v)) == 0.0


def test_report_json_is_strict_for_failures(tmp_path):
    raw = builtin_dict("E1_R3_standard")
    raw["one_form"]["c"] = ["0", "200.0*x", "1"]  # construction cannot succeed
    raw["checks"] = ["spsh", "cr_levi"]
    rep = run(load_dict(raw), workers=1)
    text = rep.to_json()
    doc = json.loads(text)
    assert "NaN" not in text
    skipped = next(c for c in doc["checks"] if c["status"] == "skipped")
    assert skipped["residual"] is None


def test_check_order_independence():
    """Reordering independent checks changes no residual."""
    raw = builtin_dict("E1_R3_standard")
    base = {c.id: c.residual for c in run(load_dict(raw), workers=1).checks}
    raw2 = builtin_dict("E1_R3_standard")
    raw2["checks"] = list(reversed(raw2["checks"]))
    flipped = {c.id: c.residual for c in run(load_dict(raw2), workers=1).checks}
    assert base == flipped
