import csv
import json

import pytest

from qfrob.cli import main


def run(tmp_path, *argv):
    code = main([*argv, "--out-dir", str(tmp_path)])
    return code


def report(tmp_path, cmd):
    return json.loads((tmp_path / f"{cmd}_report.json").read_text())


def test_catalog(tmp_path, capsys):
    assert run(tmp_path, "catalog") == 0
    assert "graph-rough3d" in capsys.readouterr().out
    assert any(e["name"] == "contact3d" for e in report(tmp_path, "catalog")["results"]["entries"])


def test_seminorm_rotation(tmp_path):
    assert run(tmp_path, "seminorm", "--catalog", "rotation2d", "--base-points", "60", "--pairs", "80") == 0
    rep = report(tmp_path, "seminorm")
    assert set(rep) == {"command", "config", "results", "timing", "provenance"}
    r = rep["results"]
    assert r["Q"]["value"] <= 1e-12 and r["Lipschitz"]["value"] == pytest.approx(1.0, rel=0.02)
    assert r["chain"]["verdict"] == "PASS"
    assert rep["provenance"]["catalog"] == "rotation2d"


def test_results_byte_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["seminorm", "--catalog", "xloga", "--base-points", "40", "--pairs", "40", "--seed", "3"]
    assert main([*args, "--out-dir", str(a), "--threads", "1"]) == 0
    assert main([*args, "--out-dir", str(b), "--threads", "4"]) == 0
    ra = json.dumps(report(a, "seminorm")["results"], sort_keys=True)
    rb = json.dumps(report(b, "seminorm")["results"], sort_keys=True)
    assert ra == rb


def test_involutivity_exit_codes(tmp_path):
    assert run(tmp_path, "involutivity", "--catalog", "contact3d", "--grid", "10", "--grid-scale", "1") == 4
    r = report(tmp_path, "involutivity")["results"]
    assert r["residual"]["p99"] >= 0.4 and r["exit_code"] == 4
    assert run(tmp_path, "involutivity", "--catalog", "graph-xy3d", "--grid", "10") == 0


def test_chart_outputs(tmp_path):
    assert run(tmp_path, "chart", "--catalog", "graph-parabola3d", "--slices", "3", "--point", "0,0,0") == 0
    meta = json.loads((tmp_path / "chart.json").read_text())
    assert meta["eps"] >= 0.1 and len(meta["slices"]) == 3
    assert {"p", "eps", "split", "lifted_seminorms"} <= set(meta)
    for s in meta["slices"]:
        rows = list(csv.reader((tmp_path / s["csv"]).open()))
        assert rows[0] == ["u1", "u2", "x1", "x2", "x3", "residual"] and len(rows) == 33 * 33 + 1


def test_chart_on_contact_is_property_violation(tmp_path):
    assert run(tmp_path, "chart", "--catalog", "contact3d", "--point", "0,0,0") == 4


def test_flow_and_trajectory_csv(tmp_path):
    assert run(tmp_path, "flow", "--catalog", "rotation2d", "--x0", "1,0", "--time", "1") == 0
    rows = list(csv.reader((tmp_path / "trajectory.csv").open()))
    assert rows[0] == ["t", "x1", "x2"] and float(rows[-1][0]) == pytest.approx(1.0)
    assert run(tmp_path, "flow", "--catalog", "linear", "--x0", "3,0", "--time", "2") == 3


def test_distortion_commute_mollify_bracket(tmp_path):
    assert run(tmp_path, "distortion", "--catalog", "rotation2d", "--times", "0.5,1") == 0
    assert report(tmp_path, "distortion")["results"]["liouville"]["passed"]
    assert run(tmp_path, "commute", "--catalog", "constant", "--other", "shear2d", "--s", "0.5", "--t", "0.5",
               "--grid", "3", "--grid-scale", "0.2") == 0
    assert report(tmp_path, "commute")["results"]["defects"][0]["defect"] == pytest.approx(0.25, rel=0.01)
    assert run(tmp_path, "mollify", "--catalog", "zero", "--eps", "0.2,0.1", "--grid", "3") == 0
    assert run(tmp_path, "bracket", "--catalog", "contact3d", "--grid", "3") == 0
    rows = list(csv.reader((tmp_path / "bracket.csv").open()))
    assert rows[0] == ["X", "Y", "x1", "x2", "x3", "b1", "b2", "b3"]
    assert [float(v) for v in rows[1][5:]] == pytest.approx([0.0, 0.0, -1.0])
    assert run(tmp_path, "bracket", "--field", "x2; x1", "--dim", "2", "--other", "rotation2d") == 0


def test_spec_file_input(tmp_path):
    spec = tmp_path / "f.json"
    spec.write_text(json.dumps({"n": 3, "k": 2, "frame": ["1;0;0", "0;1;0"]}))
    assert run(tmp_path, "involutivity", "--spec", str(spec)) == 0


@pytest.mark.parametrize("argv,code", [
    (["seminorm", "--field", "x1; x2 +", "--dim", "2"], 2),
    (["seminorm", "--catalog", "nosuch"], 2),
    (["seminorm", "--catalog", "contact3d"], 2),
    (["seminorm", "--bogus"], 1),
    (["frobnicate"], 1),
    ([], 1),
    (["seminorm"], 1),
    (["seminorm", "--field", "x1"], 1),
    (["bracket", "--catalog", "identity"], 1),
])
def test_error_exit_codes(tmp_path, argv, code, capsys):
    assert main([*argv, "--out-dir", str(tmp_path)] if argv else []) == code
