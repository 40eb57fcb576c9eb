import json
from pathlib import Path

import pytest

from pyoptswitch.model import ProblemDomain
from pyoptswitch.scripts.optswitch import RunConfig, main, parse_box, parse_grid


def _read_report(outfile: Path) -> dict:
    with open(outfile, encoding="utf-8") as f:
        return json.load(f)


def test_parse_options():
    """Test grid, box & point option parsing"""
    assert parse_grid("41;100") == ((41,), 100)
    assert parse_grid("11,21") == ((11, 21), None)
    assert parse_box("-1:1,0:2") == ((-1.0, 1.0), (0.0, 2.0))
    with pytest.raises(ValueError):
        parse_grid("a;b")
    with pytest.raises(ValueError):
        parse_box("-1,1")


def test_run_config_error():
    """Test run configuration validation"""
    # Case1. Neither problem nor instance
    with pytest.raises(ValueError):
        RunConfig("solve")
    # Case2. Unknown instance
    with pytest.raises(ValueError):
        RunConfig("solve", instance="nothing")
    # Case3. Invalid tolerance
    with pytest.raises(ValueError):
        RunConfig("solve", instance="m2", tol=0)
    assert RunConfig("catalog").instance is None


def test_catalog(tmp_path: Path):
    """Test catalog listing & export"""
    assert main(["catalog"]) == 0
    assert main(["catalog", "--instance", "m2", "-o", str(tmp_path)]) == 0
    assert (tmp_path / "m2.json").exists()
    # Exported problem file solves like the instance
    outdir = tmp_path / "solve"
    args = ["solve", "--problem", str(tmp_path / "m2.json"), "-o", str(outdir)]
    assert main(args) == 0


def test_solve(tmp_path: Path):
    """Test solve writes fields & reports"""
    args = ["solve", "--instance", "m2", "-o", str(tmp_path), "--format", "csv"]
    assert main(args) == 0
    for name in ("fields.osvf", "solve_report.json", "fields.csv", "residuals.csv"):
        assert (tmp_path / name).exists()
    report = _read_report(tmp_path / "solve_report.json")
    assert report["header"]["tool"] == "pyoptswitch"
    assert report["value"]["v"] == pytest.approx(0.5, abs=2e-2)
    assert report["iteration"]["converged"] is True


def test_solve_config_hash(tmp_path: Path):
    """Test identical configurations share the config hash"""
    assert main(["solve", "--instance", "m2", "-o", str(tmp_path / "a")]) == 0
    assert main(["solve", "--instance", "m2", "-o", str(tmp_path / "b")]) == 0
    assert main(["solve", "--instance", "m2", "-o", str(tmp_path / "c"), "--tol", "1e-7"]) == 0
    hashes = [
        _read_report(tmp_path / d / "solve_report.json")["header"]["config_hash"]
        for d in ("a", "b", "c")
    ]
    assert hashes[0] == hashes[1]
    assert hashes[0] != hashes[2]


def test_solve_not_converged(tmp_path: Path):
    """Test non-convergence exit status"""
    args = ["solve", "--instance", "m2", "-o", str(tmp_path), "--max_iter", "1"]
    assert main(args) == 3


def test_refused(tmp_path: Path, make_model):
    """Test refused model exit status"""
    model = make_model(["1", "0"], [["0", "0"], ["0", "0"]])
    problem_file = tmp_path / "free_loop.json"
    model.dump(problem_file, ProblemDomain(box=((-1.0, 1.0),), nodes=(5,)))
    outdir = tmp_path / "out"
    assert main(["check", "--problem", str(problem_file), "-o", str(outdir)]) == 2
    report = _read_report(outdir / "check_report.json")
    assert report["certified"] is False
    assert main(["solve", "--problem", str(problem_file), "-o", str(outdir)]) == 2
    # Decreasing scheme on an increasing-case model
    args = ["solve", "--instance", "coupled_increasing", "--scheme", "decreasing"]
    assert main(args + ["-o", str(outdir)]) == 2


def test_input_errors(tmp_path: Path):
    """Test input error exit status"""
    # Case1. Broken problem file
    problem_file = tmp_path / "broken.json"
    problem_file.write_text('{"name": ')
    assert main(["solve", "--problem", str(problem_file), "-o", str(tmp_path)]) == 1
    # Case2. Missing problem file
    assert main(["solve", "--problem", str(tmp_path / "none.json")]) == 1
    # Case3. Invalid choice
    assert main(["solve", "--instance", "m2", "--scheme", "newton"]) == 1
    # Case4. Unknown command
    assert main(["fly"]) == 1
    # Case5. Invalid grid
    args = ["solve", "--instance", "m2", "--grid", "2;10", "-o", str(tmp_path)]
    assert main(args) == 1


def test_dp(tmp_path: Path):
    """Test DP with enumeration on a tiny chain"""
    args = ["dp", "--instance", "m2", "--grid", "5;5", "-o", str(tmp_path)]
    assert main(args) == 0
    report = _read_report(tmp_path / "dp_report.json")
    assert report["value"]["v"] == pytest.approx(0.5)
    assert report["enumeration"]["value"] == pytest.approx(0.5)
    assert (tmp_path / "dp_fields.osvf").exists()


def test_simulate(tmp_path: Path):
    """Test Monte Carlo check & field reuse"""
    args = ["simulate", "--instance", "m2", "--paths", "100", "-o", str(tmp_path)]
    assert main(args) == 0
    report = _read_report(tmp_path / "mc_report.json")
    assert report["status"] == "PASS"
    assert report["mc_mean"] == pytest.approx(0.5)

    # Case1. Reuse solved fields
    fields_file = tmp_path / "fields.osvf"
    outdir = tmp_path / "reuse"
    args = ["simulate", "--instance", "m2", "--paths", "100", "-o", str(outdir)]
    assert main(args + ["--fields", str(fields_file)]) == 0
    # Case2. Corrupted field file
    data = bytearray(fields_file.read_bytes())
    data[60] ^= 0xFF
    fields_file.write_bytes(bytes(data))
    assert main(args + ["--fields", str(fields_file)]) == 1


def test_compare(tmp_path: Path):
    """Test PDE, DP & Monte Carlo agree on the two mode model"""
    args = ["compare", "--instance", "m2", "--paths", "100", "-o", str(tmp_path)]
    assert main(args) == 0
    report = _read_report(tmp_path / "compare_report.json")
    assert report["passed"] is True
    assert report["pde"] == pytest.approx(0.5, abs=2e-2)
    assert report["dp"]["value"] == pytest.approx(0.5)
    # Case1. Zero budget
    assert main(args + ["--budget", "0"]) == 4


def test_solve_init(tmp_path: Path):
    """Test decreasing scheme with the polynomial initialization"""
    args = ["solve", "--instance", "coupled_decreasing", "--scheme", "decreasing"]
    assert main(args + ["--init", "polynomial", "-o", str(tmp_path)]) == 0
    report = _read_report(tmp_path / "solve_report.json")
    assert report["iteration"]["sandwich"]["holds"] is True
    # Case1. Initialization of another scheme
    assert main(["solve", "--instance", "m2", "--init", "polynomial", "-o", str(tmp_path)]) == 1


def test_dp_refined(tmp_path: Path):
    """Test DP refines too coarse time steps of the chain"""
    args = ["dp", "--instance", "ou_two_mode", "--grid", "61;2", "-o", str(tmp_path)]
    assert main(args) == 0
    report = _read_report(tmp_path / "dp_report.json")
    assert report["grid"]["n_time"] > 2
    assert report["max_row_error"] <= 1e-9
    assert "enumeration" not in report
    assert (tmp_path / "dp_fields.osvf").exists()


def test_simulate_process_num(tmp_path: Path):
    """Test parallel path simulation reproduces the serial run"""
    args = ["simulate", "--instance", "ou_two_mode", "--paths", "40", "--seed", "3"]
    assert main(args + ["-o", str(tmp_path / "serial")]) in (0, 4)
    assert main(args + ["--process_num", "2", "-o", str(tmp_path / "parallel")]) in (0, 4)
    serial = _read_report(tmp_path / "serial" / "mc_report.json")
    parallel = _read_report(tmp_path / "parallel" / "mc_report.json")
    assert parallel["mc_mean"] == serial["mc_mean"]
    assert parallel["mc_se"] == serial["mc_se"]
    assert parallel["header"]["config_hash"] == serial["header"]["config_hash"]
    # Case1. Invalid process number
    assert main(args + ["--process_num", "0", "-o", str(tmp_path)]) == 1
