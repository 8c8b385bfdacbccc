import json
import subprocess
import sys

import pytest

from glvreduce.cli import main

TWO = {"b": [1.0, 0.9], "A": [[-1.0, 0.2], [-0.15, -1.1]], "x0": [0.3, 0.6]}
NESTED = {"b": [1.0, 0.8, 1.2], "A": [[-1.0, 0.2, 0.0], [0.1, -1.2, 0.25], [-0.2, 0.15, -0.9]],
          "x0": [0.3, 0.5, 0.7]}
DENSE3 = {"b": [1.0, 1.0, 1.0], "A": [[-1.0, -0.5, -0.5]] * 3, "x0": [0.5, 0.5, 0.5]}

GRID = ["--t-end", "1", "--dt", "0.01"]


def test_verify_memory_passes(write_json, tmp_path):
    out = tmp_path / "r.json"
    assert main(["verify", str(write_json("m.json", NESTED)), "--retain", "1", *GRID, "-o", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["pass"] and "runtime" not in report
    assert [r["role"] for r in report["comparison"]["species"]] == ["retained", "reconstructed", "reconstructed"]


def test_verify_is_byte_identical(write_json, tmp_path):
    path = str(write_json("m.json", NESTED))
    outs = [tmp_path / f"r{i}.json" for i in range(2)]
    for out in outs:
        main(["verify", path, "--retain", "1", *GRID, "-o", str(out)])
    assert outs[0].read_bytes() == outs[1].read_bytes()


def test_timing_flag_adds_runtime(write_json, tmp_path):
    out = tmp_path / "r.json"
    main(["verify", str(write_json("m.json", TWO)), "--retain", "1", *GRID, "--timing", "-o", str(out)])
    assert json.loads(out.read_text())["runtime"] >= 0


def test_pipeline_equivalence(write_json, tmp_path):
    model = str(write_json("m.json", NESTED))
    files = {name: str(tmp_path / name) for name in ("v.json", "red.json", "det.csv", "red.csv", "c.json")}
    assert main(["verify", model, "--retain", "1", *GRID, "-o", files["v.json"]]) == 0
    assert main(["reduce", model, "--retain", "1", "-o", files["red.json"]]) == 0
    assert main(["simulate", model, *GRID, "-o", files["det.csv"]]) == 0
    assert main(["solve-reduced", files["red.json"], *GRID, "-o", files["red.csv"]]) == 0
    assert main(["compare", files["det.csv"], files["red.csv"], "-o", files["c.json"]]) == 0
    verified = json.loads(open(files["v.json"]).read())
    compared = json.loads(open(files["c.json"]).read())
    assert verified["comparison"] == compared["comparison"]


def test_infeasible_exit_code_and_report(write_json, tmp_path, capsys):
    out = tmp_path / "r.json"
    code = main(["verify", str(write_json("d.json", DENSE3)), "--retain", "1", *GRID, "-o", str(out)])
    assert code == 5
    assert "a(1,3)" in capsys.readouterr().err
    report = json.loads(out.read_text())
    assert report["error"]["kind"] == "infeasible" and not report["pass"]


def test_zero_flag_makes_it_feasible(write_json, tmp_path):
    out = tmp_path / "r.json"
    code = main(["verify", str(write_json("d.json", DENSE3)), "--retain", "1", "--zero", "1,3",
                 *GRID, "-o", str(out)])
    assert code == 0
    assert json.loads(out.read_text())["modifications"] == [{"entry": [1, 3], "original": -0.5, "now": 0.0}]


def test_validation_failure_writes_nothing(write_json, tmp_path):
    out = tmp_path / "r.json"
    bad = {**TWO, "x0": [0.3, -1.0]}
    assert main(["verify", str(write_json("b.json", bad)), "--retain", "1", *GRID, "-o", str(out)]) == 4
    assert not out.exists()


def test_parse_error_code(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert main(["simulate", str(path), *GRID]) == 3


def test_missing_file_is_io_error(tmp_path):
    assert main(["simulate", str(tmp_path / "nope.json"), *GRID]) == 7


def test_usage_errors(write_json):
    path = str(write_json("m.json", TWO))
    assert main(["simulate", path, "--t-end", "1", "--dt", "0.3"]) == 2
    assert main(["verify", path, "--retain", "5", *GRID]) == 2
    with pytest.raises(SystemExit) as info:
        main(["verify", path])
    assert info.value.code == 2


def test_verify_tolerance_failure_exit_one(write_json, tmp_path):
    out = tmp_path / "r.json"
    code = main(["verify", str(write_json("m.json", TWO)), "--retain", "1", *GRID,
                 "--tol", "1e-30", "--tol-reconstructed", "1e-30", "-o", str(out)])
    assert code == 1


def test_algebraic_mode(write_json, tmp_path):
    out = tmp_path / "r.json"
    code = main(["verify", str(write_json("m.json", TWO)), "--retain", "1", "--method", "algebraic",
                 *GRID, "--stride", "50", "--solve-demo", "-o", str(out)])
    assert code == 0
    report = json.loads(out.read_text())
    assert report["residuals"]["max_rel"] <= 1e-10
    assert len(report["residuals"]["states"]) == 3
    assert main(["verify", str(write_json("n.json", NESTED)), "--retain", "1",
                 "--method", "algebraic", *GRID]) == 2


def test_analyze(write_json, tmp_path):
    out = tmp_path / "a.json"
    assert main(["analyze", str(write_json("d.json", DENSE3)), "--retain", "1", "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["feasible"] is False and doc["rho"] == "1/9"
    assert doc["plan"]["witness_violations"][0].startswith("a(1,3)")


def test_rho_outputs(capsys):
    assert main(["rho", "--S", "3", "--s", "1"]) == 0
    assert capsys.readouterr().out == "1/9 ≈ 0.111111\n"
    main(["rho", "--limit", "0"])
    assert capsys.readouterr().out == "0.5\n"
    main(["rho", "--curve", "3"])
    assert capsys.readouterr().out.splitlines()[2] == "0.5,0.125"
    assert main(["rho", "--S", "3"]) == 2


def test_solve_reduced_rejects_tampered(write_json, tmp_path):
    red = tmp_path / "red.json"
    main(["reduce", str(write_json("m.json", NESTED)), "--retain", "1", "-o", str(red)])
    doc = json.loads(red.read_text())
    doc["steps"][0]["coefficients"]["growth"] = 9.0
    red.write_text(json.dumps(doc))
    assert main(["solve-reduced", str(red), *GRID]) == 9


def test_batch_verify(write_json, tmp_path):
    paths = [str(write_json(f"m{i}.json", TWO)) for i in range(2)]
    out_dir = tmp_path / "out"
    assert main(["batch-verify", *paths, "--retain", "1", *GRID, "--out-dir", str(out_dir)]) == 0
    summary = json.loads((out_dir / "summary.json").read_text())
    assert set(summary.values()) == {0}
    assert (out_dir / "m0.report.json").read_bytes() == (out_dir / "m1.report.json").read_bytes()


def test_lorenz_command(tmp_path):
    out = tmp_path / "l.json"
    assert main(["lorenz", "--t-end", "1", "--dt", "0.01", "-o", str(out)]) == 0
    assert json.loads(out.read_text())["summary"]["printed_rederived_agree"]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "glvreduce", "rho", "--S", "10", "--s", "4"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.startswith("3/20")
