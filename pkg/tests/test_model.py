import json
from pathlib import Path

import numpy as np
import pytest

from pyoptswitch.model import (
    AssumptionReport,
    CheckEntry,
    DiffusionSpec,
    ProblemDomain,
    SwitchingModel,
    admits_scheme,
    check_assumptions,
    check_diffusion_regularity,
    check_no_free_loop,
    check_nonnegative_costs,
    check_terminal_consistency,
    classify_monotonicity,
    driver_lipschitz_constant,
    probe_box,
    sample_points,
)


def test_diffusion_spec():
    """Test diffusion parse & evaluation"""
    diffusion = DiffusionSpec.from_strings(1, 1, ["2*(1 - x1)"], [["0.5"]])
    points = np.array([[0.0], [1.0], [2.0]])
    assert np.allclose(diffusion.drift_at(0.0, points)[0], [2.0, 0.0, -2.0])
    assert diffusion.is_time_homogeneous
    assert not diffusion.is_deterministic
    # Case1. Driver variables are not allowed in the diffusion
    with pytest.raises(ValueError):
        DiffusionSpec.from_strings(1, 1, ["y1"], [["1"]])
    # Case2. Bad sigma shape
    with pytest.raises(ValueError):
        DiffusionSpec.from_strings(1, 1, ["0"], [["1", "1"]])


def test_switching_model_validation(make_model):
    """Test switching model validation"""
    model = make_model(["1", "0"], [["0", "0.5"], ["0.5", "0"]])
    assert model.dims == (1, 2, 1)
    assert not model.is_coupled
    # Case1. m < 2
    with pytest.raises(ValueError):
        make_model(["1"], [["0"]])
    # Case2. Nonzero diagonal cost
    with pytest.raises(ValueError):
        make_model(["1", "0"], [["0.1", "0.5"], ["0.5", "0"]])
    # Case3. Cost depends on mode values
    with pytest.raises(ValueError):
        make_model(["1", "0"], [["0", "y1"], ["0.5", "0"]])
    # Case4. Terminal payoff depends on time
    with pytest.raises(ValueError):
        make_model(["1", "0"], [["0", "1"], ["1", "0"]], terminal=["t", "0"])
    # Case5. Non-square costs
    with pytest.raises(ValueError):
        make_model(["1", "0"], [["0", "1"]])
    # Case6. Invalid horizon
    with pytest.raises(ValueError):
        make_model(["1", "0"], [["0", "1"], ["1", "0"]], horizon=0)


def test_driver_coupling(make_model):
    """Test driver coupling detection"""
    model = make_model(["1 + 0.2*y2", "x1 + zvar1"], [["0", "1"], ["1", "0"]])
    assert model.is_coupled
    assert model.driver_coupling(0) == ["y2"]
    assert model.driver_coupling(1) == ["zvar1"]


def test_evaluate(make_model):
    """Test evaluate drivers, costs & terminal payoffs"""
    model = make_model(
        ["x1 + y2", "t"], [["0", "1 + x1"], ["2", "0"]], terminal=["x1", "2*x1"]
    )
    points = np.array([[1.0], [2.0]])
    y = np.array([[0.0, 0.0], [3.0, 4.0]])
    assert np.allclose(model.evaluate_driver(0, 0.5, points, y), [4.0, 6.0])
    assert np.allclose(model.evaluate_driver(1, 0.5, points), [0.5, 0.5])
    costs = model.evaluate_costs(0.0, points)
    assert costs.shape == (2, 2, 2)
    assert np.allclose(costs[0, 1], [2.0, 3.0])
    assert np.allclose(costs[1, 0], [2.0, 2.0])
    assert np.all(costs[0, 0] == 0)
    assert np.allclose(model.evaluate_terminal(points), [[1.0, 2.0], [2.0, 4.0]])


def test_problem_file_io(tmp_path: Path, m2_model: SwitchingModel, m2_domain: ProblemDomain):
    """Test problem file dump & load"""
    problem_file = tmp_path / "problem.json"
    m2_model.dump(problem_file, m2_domain)
    model, domain = SwitchingModel.load(problem_file)
    assert model.to_dict() == m2_model.to_dict()
    assert domain == m2_domain

    # Case1. No domain section
    m2_model.dump(problem_file)
    _, domain = SwitchingModel.load(problem_file)
    assert domain is None


def test_problem_file_errors(tmp_path: Path, m2_model: SwitchingModel):
    """Test invalid problem files"""
    # Case1. Broken JSON
    problem_file = tmp_path / "broken.json"
    problem_file.write_text('{"name": "x",')
    with pytest.raises(ValueError):
        SwitchingModel.load(problem_file)
    # Case2. Missing key
    data = m2_model.to_dict()
    del data["costs"]
    problem_file.write_text(json.dumps(data))
    with pytest.raises(ValueError):
        SwitchingModel.load(problem_file)
    # Case3. Expression syntax error
    data = m2_model.to_dict()
    data["modes"]["drivers"] = ["1 +", "0"]
    with pytest.raises(ValueError):
        SwitchingModel.from_dict(data)


def test_problem_domain():
    """Test problem domain"""
    domain = ProblemDomain(box=((-1.0, 3.0),), nodes=(5,))
    assert domain.start == (1.0,)
    assert ProblemDomain.from_dict(domain.to_dict()) == domain
    with pytest.raises(ValueError):
        ProblemDomain(box=((-1.0, 3.0),), nodes=(5, 5))
    with pytest.raises(ValueError):
        ProblemDomain(box=((-1.0, 3.0),), nodes=(5,), x0=(0.0, 0.0))


def test_check_no_free_loop(make_model):
    """Test no-free-loop check"""
    times = np.array([0.0, 0.5])
    points = np.array([[0.0], [1.0]])
    # Case1. Zero costs (m=2)
    model = make_model(["0", "0"], [["0", "0"], ["0", "0"]])
    entry = check_no_free_loop(model, times, points)
    assert entry.is_refuted
    assert entry.witness["cycle"] == [1, 2, 1]
    assert entry.witness["t"] == 0.0
    # Case2. Zero cost 3-cycle with negative cost (m=3)
    costs = [["0", "1", "1"], ["1", "0", "1"], ["-2", "1", "0"]]
    model = make_model(["0", "0", "0"], costs)
    entry = check_no_free_loop(model, times, points)
    assert entry.is_refuted
    assert entry.witness["cycle"] == [1, 2, 3, 1]
    assert entry.witness["cost"] == 0.0
    # Case3. Positive costs
    model = make_model(["0", "0"], [["0", "0.5"], ["0.5", "0"]])
    assert check_no_free_loop(model, times, points).verdict == "certified-on-samples"
    # Case4. State dependent cycle cost
    model = make_model(["0", "0"], [["0", "x1"], ["0", "0"]])
    entry = check_no_free_loop(model, times, points)
    assert entry.is_refuted
    assert entry.witness["x"] == [0.0]


def test_check_terminal_consistency(make_model):
    """Test terminal consistency check"""
    x_samples = np.array([[-1.0], [-0.5], [0.0], [0.5], [1.0]])
    # Case1. h = (0, 2), g12 = 1
    model = make_model(["0", "0"], [["0", "1"], ["1", "0"]], terminal=["0", "2"])
    entry = check_terminal_consistency(model, x_samples)
    assert entry.is_refuted
    assert (entry.witness["i"], entry.witness["j"]) == (1, 2)
    assert entry.witness["slack"] == pytest.approx(-1.0)
    # Case2. h_i = i * x, g = 1
    model = make_model(["0", "0"], [["0", "1"], ["1", "0"]], terminal=["x1", "2*x1"])
    entry = check_terminal_consistency(model, x_samples)
    assert entry.verdict == "certified-on-samples"
    assert entry.info == []
    # Case3. Zero terminal cost flagged as info
    model = make_model(["0", "0"], [["0", "x1^2"], ["1", "0"]])
    entry = check_terminal_consistency(model, x_samples)
    assert entry.verdict == "certified-on-samples"
    assert len(entry.info) == 1


def test_check_nonnegative_costs(make_model):
    """Test nonnegative costs check"""
    times, points = np.array([0.0]), np.array([[0.0]])
    model = make_model(["0", "0"], [["0", "1"], ["-0.5", "0"]])
    entry = check_nonnegative_costs(model, times, points)
    assert entry.is_refuted
    assert (entry.witness["i"], entry.witness["j"]) == (2, 1)


def test_classify_monotonicity(make_model):
    """Test monotonicity classification"""
    costs = [["0", "1"], ["1", "0"]]
    box = ((-1.0, 1.0),)
    # Case1. Uncoupled
    model = make_model(["x1", "0"], costs)
    entry = classify_monotonicity(model, probe_box(model, box))
    assert entry.case == "increasing-case"
    assert entry.info == ["drivers do not depend on the other modes' values"]
    assert admits_scheme(entry, "increasing") and admits_scheme(entry, "decreasing")
    # Case2. Increasing
    model = make_model(["1 + 0.2*y2", "0.5*x1 + 0.2*y1"], costs)
    entry = classify_monotonicity(model, probe_box(model, box))
    assert entry.case == "increasing-case"
    assert entry.directions[0][1] == "nondecreasing"
    assert admits_scheme(entry, "increasing")
    assert not admits_scheme(entry, "decreasing")
    # Case3. Decreasing
    model = make_model(["1 - 0.2*y2", "-0.2*y1"], costs)
    entry = classify_monotonicity(model, probe_box(model, box))
    assert entry.case == "decreasing-case"
    assert admits_scheme(entry, "decreasing")
    # Case4. Mixed
    model = make_model(["abs(y2)", "0"], costs)
    entry = classify_monotonicity(model, probe_box(model, box))
    assert entry.verdict == "certified-on-samples"
    assert entry.case == "general"
    assert entry.directions[0][1] == "mixed"
    assert (entry.witness["i"], entry.witness["j"]) == (1, 2)
    assert not admits_scheme(entry, "increasing")
    # Case5. Own direction does not decide the case
    model = make_model(["-y1", "y2"], costs)
    entry = classify_monotonicity(model, probe_box(model, box))
    assert entry.directions[0][0] == "nonincreasing"
    assert entry.case == "increasing-case"


def test_sample_points(m2_model: SwitchingModel):
    """Test sample points reproducibility"""
    box = ((-1.0, 1.0),)
    times1, points1 = sample_points(m2_model, box, 50, seed=1)
    times2, points2 = sample_points(m2_model, box, 50, seed=1)
    assert np.array_equal(times1, times2) and np.array_equal(points1, points2)
    assert points1.shape == (50, 1)
    assert np.all((times1 >= 0) & (times1 <= 1))
    with pytest.raises(ValueError):
        sample_points(m2_model, ((-1.0, 1.0), (0.0, 1.0)))


def test_check_assumptions(m2_model: SwitchingModel, make_model):
    """Test full assumption report"""
    report = check_assumptions(m2_model, ((-1.0, 1.0),), n_samples=64)
    assert report.is_certified
    assert report.entry("monotonicity").case == "increasing-case"
    assert report.entry("driver-polynomial-growth").verdict == "skipped"
    data = report.to_dict()
    assert data["certified"] is True
    assert len(data["checks"]) == len(report.entries)
    json.dumps(data)

    # Case1. Free loop & inconsistent terminal payoffs
    model = make_model(["0", "0"], [["0", "0"], ["0", "0"]], terminal=["0", "1"])
    report = check_assumptions(model, ((-1.0, 1.0),), n_samples=64)
    names = [e.name for e in report.refuted]
    assert "no-free-loop" in names and "terminal-consistency" in names
    # Case2. Domain error in a driver
    model = make_model(["log(x1) + y2", "0"], [["0", "1"], ["1", "0"]])
    report = check_assumptions(model, ((-1.0, 1.0),), n_samples=64)
    assert report.entry("driver-lipschitz").is_refuted


def test_check_entry():
    """Test check entry validation"""
    with pytest.raises(ValueError):
        CheckEntry("x", "unknown")
    with pytest.raises(ValueError):
        CheckEntry("x", "refuted")
    report = AssumptionReport([CheckEntry("x", "skipped")])
    assert report.is_certified
    with pytest.raises(KeyError):
        report.entry("y")


def test_check_diffusion_regularity(make_model):
    """Test diffusion regularity probe"""
    model = make_model(["0", "0"], [["0", "1"], ["1", "0"]], drift="2*(1 - x1)", sigma="0.5")
    entry = check_diffusion_regularity(model.diffusion, probe_box(model, ((-1.0, 3.0),)))
    assert entry.verdict == "certified-on-samples"
    assert "Lipschitz constant in x: 2" in entry.detail
    # Case1. Domain error
    model = make_model(["0", "0"], [["0", "1"], ["1", "0"]], sigma="sqrt(x1)")
    entry = check_diffusion_regularity(model.diffusion, probe_box(model, ((-1.0, 1.0),)))
    assert entry.is_refuted


def test_driver_lipschitz_constant(make_model):
    """Test driver Lipschitz constant in the coupling variables"""
    box = ((-1.0, 1.0),)
    model = make_model(["1 + 0.2*y2", "x1 - 0.5*y1"], [["0", "1"], ["1", "0"]])
    assert driver_lipschitz_constant(model, probe_box(model, box)) == pytest.approx(0.5)
    model = make_model(["x1", "0"], [["0", "1"], ["1", "0"]])
    assert driver_lipschitz_constant(model, probe_box(model, box)) == 0.0
