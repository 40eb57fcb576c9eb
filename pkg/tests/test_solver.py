from pathlib import Path

import numpy as np
import pytest

from pyoptswitch.catalog import INSTANCES, load_instance
from pyoptswitch.grid import GridSpec, ValueFields
from pyoptswitch.model import SwitchingModel
from pyoptswitch.solver import (
    SCHEMES,
    ProjectionError,
    SchemeRefusedError,
    default_transform_rate,
    exponential_transform,
    obstacle,
    phi_step,
    picard_solve,
    project,
    residual_report,
    solve,
    solve_unreflected_bound,
)


def _instance_grid(name: str) -> tuple:
    model, domain = load_instance(name)
    return model, GridSpec(domain.box, domain.nodes, domain.n_time)


@pytest.mark.parametrize("scheme", SCHEMES)
def test_solve_m2(scheme: str, m2_model: SwitchingModel, m2_grid: GridSpec):
    """Test deterministic two mode values with every scheme"""
    fields, report = solve(m2_model, m2_grid, scheme=scheme)
    assert report.converged
    assert fields.converged
    assert fields.at_start(1, [0.0]) == pytest.approx(1.0, abs=2e-2)
    assert fields.at_start(2, [0.0]) == pytest.approx(0.5, abs=2e-2)


def test_picard_m2_exact(m2_model: SwitchingModel, m2_grid: GridSpec):
    """Test picard fixed point of the deterministic two mode model"""
    fields, report = picard_solve(m2_model, m2_grid)
    assert report.iterations == 2
    assert report.distances[-1] == 0.0
    times = m2_grid.times(1.0)
    assert np.allclose(fields.values[:, 0, :], (1 - times)[:, None])
    assert np.allclose(fields.values[0, 1, :], 0.5)
    assert np.allclose(fields.values[-1], 0.0)


def test_solve_martingale():
    """Test Brownian motion with prohibitive switching costs"""
    model, grid = _instance_grid("martingale")
    fields, report = solve(model, grid)
    assert report.converged
    x = grid.coordinates[:, 0]
    inner = np.abs(x) <= 5
    for mode in (0, 1):
        assert np.max(np.abs(fields.values[0, mode, inner] - x[inner])) <= 1e-3


def test_increasing_order():
    """Test increasing scheme iterates never decrease"""
    model, grid = _instance_grid("coupled_increasing")
    fields, report = solve(model, grid, scheme="increasing")
    assert report.converged
    assert report.violations == 0
    assert report.transform_rate == pytest.approx(-1.4, rel=1e-6)
    # Same limit as the picard scheme
    picard_fields, _ = solve(model, grid, scheme="picard")
    assert np.max(np.abs(fields.values[0] - picard_fields.values[0])) <= 0.1


def test_decreasing_sandwich():
    """Test decreasing scheme odd/even iterates enclose the limit"""
    model, grid = _instance_grid("coupled_decreasing")
    fields, report = solve(model, grid, scheme="decreasing", init="polynomial")
    assert report.converged
    assert report.sandwich is not None
    assert report.sandwich.start_dominates
    assert report.sandwich.holds
    data = report.to_dict()
    assert data["sandwich"]["holds"] is True


def test_scheme_refused(make_model):
    """Test monotone schemes refuse models of the wrong class"""
    costs = [["0", "0.5"], ["0.5", "0"]]
    grid = GridSpec(((-1.0, 1.0),), (5,), 20)
    # Case1. Mixed cross direction
    model = make_model(["abs(y2)", "0"], costs)
    for scheme in ("increasing", "decreasing"):
        with pytest.raises(SchemeRefusedError):
            solve(model, grid, scheme=scheme)
    # Case2. Decreasing scheme on an increasing-case model
    model = make_model(["1 + 0.2*y2", "0.2*y1"], costs)
    with pytest.raises(SchemeRefusedError):
        solve(model, grid, scheme="decreasing")
    # Case3. Free loop
    model = make_model(["1", "0"], [["0", "0"], ["0", "0"]])
    with pytest.raises(SchemeRefusedError):
        solve(model, grid)
    # Case4. Unknown scheme
    with pytest.raises(ValueError):
        solve(model, grid, scheme="newton")


def test_projection_error(make_model):
    """Test projection failure on negative cycle costs"""
    values = np.zeros((2, 3))
    costs = np.full((2, 2, 3), -1.0)
    with pytest.raises(ProjectionError):
        project(values, costs)

    model = make_model(["1", "0"], [["0", "-0.5"], ["-0.5", "0"]])
    grid = GridSpec(((-1.0, 1.0),), (5,), 10)
    with pytest.raises(ProjectionError):
        picard_solve(model, grid, check=False)


def test_project_and_obstacle():
    """Test obstacle & cyclic projection"""
    values = np.array([[0.0, 2.0], [1.0, 0.0], [0.5, 0.0]])
    costs = np.full((3, 3, 2), 0.25)
    barrier = obstacle(values, costs)
    assert np.allclose(barrier[:, 0], [0.75, 0.25, 0.75])
    projected = project(values, costs)
    assert np.allclose(projected[:, 0], [0.75, 1.0, 0.75])
    assert np.allclose(projected[:, 1], [2.0, 1.75, 1.75])
    assert np.all(projected >= obstacle(projected, costs) - 1e-12)


def test_comparison(m2_model: SwitchingModel, m2_grid: GridSpec, make_model):
    """Test larger drivers & terminal payoffs give larger values"""
    costs = [["0", "0.5"], ["0.5", "0"]]
    larger = make_model(["1.5", "0.2"], costs, terminal=["0.1", "0"])
    fields, _ = solve(m2_model, m2_grid)
    larger_fields, _ = solve(larger, m2_grid)
    assert np.all(larger_fields.values >= fields.values - 1e-12)


def test_unreflected_bounds(m2_model: SwitchingModel, m2_grid: GridSpec):
    """Test unreflected bounds enclose the solution"""
    fields, _ = solve(m2_model, m2_grid)
    upper = solve_unreflected_bound(m2_model, m2_grid, "upper")
    lower = solve_unreflected_bound(m2_model, m2_grid, "lower")
    assert upper.at_start(2, [0.0]) == pytest.approx(1.0)
    assert lower.at_start(1, [0.0]) == pytest.approx(0.0)
    assert np.all(lower.values <= fields.values + 1e-12)
    assert np.all(fields.values <= upper.values + 1e-12)
    with pytest.raises(ValueError):
        solve_unreflected_bound(m2_model, m2_grid, "middle")


def test_phi_step_fixed_point(m2_model: SwitchingModel, m2_grid: GridSpec):
    """Test solved fields are a fixed point of the frozen-driver map"""
    fields, _ = picard_solve(m2_model, m2_grid)
    image = phi_step(m2_model, m2_grid, fields)
    assert np.allclose(image.values, fields.values)
    with pytest.raises(ValueError):
        phi_step(m2_model, m2_grid, fields.decimate(10))


def test_exponential_transform(make_model):
    """Test transformed solution matches the original up to the time step"""
    model = make_model(["-y1 + y2 + 1", "0"], [["0", "0.5"], ["0.5", "0"]])
    grid = GridSpec(((-1.0, 1.0),), (5,), 400)
    fields, _ = solve(model, grid, tol=1e-9)
    transformed_fields, report = solve(model, grid, lam=-2.0, tol=1e-9)
    assert report.transform_rate == -2.0
    assert np.max(np.abs(transformed_fields.values - fields.values)) <= 5e-2

    transformed = exponential_transform(model, -2.0)
    assert transformed.transform_rate == -2.0
    assert exponential_transform(model, 0.0) is model
    # Driver slope in the own value is raised by the rate
    own = transformed.drivers[0].evaluate({"t": 0.3, "x1": 0.0, "y1": 1.0, "y2": 0.0})
    base = transformed.drivers[0].evaluate({"t": 0.3, "x1": 0.0, "y1": 0.0, "y2": 0.0})
    assert own - base == pytest.approx(1.0)
    with pytest.raises(ValueError):
        exponential_transform(model, float("nan"))


def test_non_convergence():
    """Test non-converged result is flagged"""
    model, grid = _instance_grid("coupled_increasing")
    fields, report = picard_solve(model, grid, max_iter=1)
    assert not report.converged
    assert not fields.converged
    assert report.iterations == 1
    with pytest.raises(ValueError):
        picard_solve(model, grid, tol=0)


def test_store_every(m2_model: SwitchingModel, m2_domain):
    """Test decimated output"""
    grid = GridSpec(m2_domain.box, m2_domain.nodes, m2_domain.n_time, store_every=10)
    fields, _ = solve(m2_model, grid)
    assert fields.n_slices == 21
    assert fields.times[-1] == 1.0


def test_residual_report(tmp_path: Path, m2_model: SwitchingModel, m2_grid: GridSpec):
    """Test min-form residual of the picard fixed point"""
    fields, _ = picard_solve(m2_model, m2_grid)
    report = residual_report(fields, m2_model, m2_grid)
    assert report.feasible
    assert report.min_slack >= -1e-12
    assert report.max_min_form <= 1e-8
    assert report.flagged == []
    assert report.to_dict()["flagged"] == 0

    outfile = tmp_path / "residuals.csv"
    report.write_csv(outfile, m2_grid, fields.times)
    lines = outfile.read_text().splitlines()
    assert lines[3] == "t,x1,mode,slack,pde,min_form,defect"
    # Interior nodes only (linear extrapolation boundary)
    assert len(lines) == 4 + 200 * 2 * 3

    # Case1. Perturbed fields are flagged
    values = fields.values.copy()
    values[:-1, 0, 2] += 0.1
    perturbed = ValueFields(values, fields.times, m2_grid)
    assert residual_report(perturbed, m2_model, m2_grid).flagged != []


def test_default_transform_rate():
    """Test default rate of the monotone schemes"""
    model, grid = _instance_grid("coupled_increasing")
    assert default_transform_rate(model, grid, "increasing") == pytest.approx(-1.4)
    model, grid = _instance_grid("coupled_decreasing")
    assert default_transform_rate(model, grid, "decreasing") == pytest.approx(1.4)


@pytest.mark.parametrize("name", list(INSTANCES.keys()))
def test_picard_contraction_catalog(name: str):
    """Test picard distances contract from the third iteration on"""
    model, grid = _instance_grid(name)
    fields, report = picard_solve(model, grid)
    assert report.converged
    assert fields.converged
    assert report.iterations <= 50
    assert all(r.ratio < 1 for r in report.records[3:])
    assert report.rho is None or report.rho < 1


@pytest.mark.parametrize("name", ["m2", "ou_two_mode"])
def test_transform_invariance_catalog(name: str):
    """Test unit-rate transformed solve maps back onto the direct solve"""
    model, grid = _instance_grid(name)
    gaps = []
    for n_time in (grid.n_time, 2 * grid.n_time):
        fine = grid.with_time_steps(n_time)
        fields, _ = solve(model, fine, tol=1e-8)
        transformed, report = solve(model, fine, lam=1.0, tol=1e-8)
        assert report.converged
        assert report.transform_rate == 1.0
        assert transformed.transform_rate == 0.0
        gaps.append(float(np.max(np.abs(transformed.values - fields.values))))
    # Gap is the first order time discretization error of the transform
    assert gaps[0] <= 5e-2
    assert gaps[1] <= 0.75 * gaps[0] + 2e-8
