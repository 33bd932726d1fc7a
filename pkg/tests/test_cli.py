from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import jsonschema
import pytest

from affinelab.cli import main
from affinelab.report import ConfigError, dumps, load_schema, parse_grid, parse_tol, validate_report

DATA = Path(__file__).parent / "data"

GOLDEN = {
    "golden_invariants_sphere.json": ["invariants", "--surface", "sphere(1)", "--grid", "3x3@[-0.3,0.3]x[-0.3,0.3]", "--order", "5"],
    "golden_parallel_titeica.json": ["parallel", "--surface", "titeica", "--grid", "2x2", "--mu", "0.25,0.5"],
}


def run_cli(tmp_path, args, name="out.json"):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out


def assert_close(a, b, path="$"):
    if isinstance(a, dict):
        assert set(a) == set(b), path
        for k in a:
            assert_close(a[k], b[k], f"{path}.{k}")
    elif isinstance(a, list):
        assert len(a) == len(b), path
        for i, (x, y) in enumerate(zip(a, b)):
            assert_close(x, y, f"{path}[{i}]")
    elif isinstance(a, float) and isinstance(b, (int, float)):
        assert abs(a - b) <= 1e-10 * (1 + abs(b)), path
    else:
        assert a == b, path


def comparable(report):
    report = dict(report)
    report.pop("timings")
    report["config"] = {k: v for k, v in report["config"].items() if k != "output"}
    return report


@pytest.mark.parametrize("golden", sorted(GOLDEN))
def test_golden_reports(tmp_path, golden):
    code, out = run_cli(tmp_path, GOLDEN[golden])
    assert code == 0
    got = json.loads(out.read_text())
    want = json.loads((DATA / golden).read_text())
    validate_report(want)
    validate_report(got)
    assert_close(comparable(got), comparable(want))


def test_schema_rejects_missing_keys():
    want = json.loads((DATA / "golden_invariants_sphere.json").read_text())
    del want["schema_version"]
    with pytest.raises(jsonschema.ValidationError):
        validate_report(want)
    assert load_schema()["$schema"].startswith("https://json-schema.org/")


def test_isoparametric_sphere_scenario(tmp_path, capsys):
    code, out = run_cli(tmp_path, ["isoparametric", "--surface", "sphere(1)", "--grid", "3x3", "--mu", "0.25,0.5"])
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["verdict"] == "isoparametric"
    assert rep["certificate"]["lambda"] == pytest.approx([1.0, 1.0], abs=1e-9)
    assert "verdict: isoparametric" in capsys.readouterr().err


def test_parallel_perturbed_scenario(tmp_path, capsys):
    code, out = run_cli(tmp_path, ["parallel", "--surface", "perturbed(0.1)", "--grid", "3x3", "--mu", "0.1"])
    assert code == 1
    rep = json.loads(out.read_text())
    assert rep["parallel_test"][0]["spreads"]["detT"] >= 1e-3
    assert any("detT spread" in v for v in rep["violations"])
    assert "violation:" in capsys.readouterr().err


@pytest.mark.parametrize(
    "args",
    [
        ["invariants", "--surface", "custom:0.5*(u^2+"],
        ["invariants", "--surface", "nosuch"],
        ["invariants", "--order", "11"],
        ["invariants", "--grid", "3x"],
        ["invariants", "--grid", "3x3@[-2,2]x[-0.1,0.1]"],
        ["parallel", "--surface", "sphere(1)", "--mu", "1.0"],
        ["invariants", "--tol", "loose=abc"],
        ["bogus"],
    ],
)
def test_usage_errors_exit_2(tmp_path, args, capsys):
    assert main(args) == 2
    assert "error" in capsys.readouterr().err


def test_csv_row_counts(tmp_path):
    code, out = run_cli(tmp_path, ["parallel", "--surface", "sphere(1)", "--grid", "3x2", "--mu", "0.1,0.25", "--format", "csv"], "p.csv")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out.read_text())))
    assert len(rows) == 1 + 6 * 2
    assert rows[0][:3] == ["u", "v", "mu"]
    code, out = run_cli(tmp_path, ["invariants", "--surface", "sphere(1)", "--grid", "2x2", "--format", "csv"], "i.csv")
    rows = list(csv.reader(io.StringIO(out.read_text())))
    assert rows[0] == [
        "u", "v", "lambda_1", "lambda_2", "L_1", "L_2",
        "apolarity_residual", "gauss_residual", "codazzi_A_residual", "codazzi_B_residual",
    ]
    assert len(rows) == 5


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"surface": "paraboloid", "grid": "2x2", "mu_values": [0.5]}))
    code, out = run_cli(tmp_path, ["parallel", "--config", str(cfg), "--mu", "0.1,0.2"])
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["surface"] == "paraboloid"
    assert rep["config"]["mu_values"] == [0.1, 0.2]
    cfg.write_text(json.dumps({"surfac": "paraboloid"}))
    assert main(["parallel", "--config", str(cfg)]) == 2


def test_reproducible_bytes(tmp_path):
    args = ["parallel", "--surface", "titeica", "--grid", "2x2", "--mu", "0.25"]
    _, a = run_cli(tmp_path, args, "a.json")
    _, b = run_cli(tmp_path, [*args, "--jobs", "2"], "b.json")
    ra, rb = json.loads(a.read_text()), json.loads(b.read_text())
    for r in (ra, rb):
        r.pop("timings")
        r["config"].pop("output")
        r["config"].pop("jobs")
    assert dumps(ra) == dumps(rb)


def test_catalog_listing(capsys):
    assert main(["catalog"]) == 0
    assert "titeica" in capsys.readouterr().out


def test_grid_and_tol_parsing():
    g = parse_grid("5×4@[-0.3,0.3]×[0,0.2]")
    assert g.counts == (5, 4) and g.bounds == ((-0.3, 0.3), (0.0, 0.2))
    assert parse_grid(str(g)) == g
    assert parse_tol("1e-7") == {"loose": 1e-7}
    with pytest.raises(ConfigError):
        parse_tol("fuzzy=1")
