import numpy as np
import pytest

from pyoptswitch.catalog import load_instance
from pyoptswitch.grid import GridSpec
from pyoptswitch.model import DiffusionSpec
from pyoptswitch.oracle import (
    ChainError,
    build_chain,
    dp_solve,
    enumerate_strategies,
    required_time_steps,
)
from pyoptswitch.solver import solve


@pytest.fixture
def tiny_grid() -> GridSpec:
    """Five nodes on [-1, 1], five time steps"""
    return GridSpec(((-1.0, 1.0),), (5,), 5)


def test_build_chain(make_model, tiny_grid: GridSpec):
    """Test transition kernel of a Brownian motion"""
    model = make_model(["x1", "0"], [["0", "0.2"], ["0.2", "0"]], sigma="1")
    chain = build_chain(model.diffusion, tiny_grid, model.horizon)
    assert chain.homogeneous
    assert chain.dt == pytest.approx(0.2)
    assert chain.max_row_error <= 1e-12
    row = chain.kernel(0).getrow(2).toarray().ravel()
    assert np.allclose(row, [0.0, 0.4, 0.2, 0.4, 0.0])
    # Boundary nodes are absorbing
    assert chain.kernel(3).getrow(0).toarray().ravel()[0] == pytest.approx(1.0)
    mean, cov = chain.moments(0, 2)
    assert mean == pytest.approx([0.0])
    assert cov[0, 0] == pytest.approx(0.2)


def test_chain_error(make_model):
    """Test CFL violation & negative coefficient refusal"""
    model = make_model(["0", "0"], [["0", "1"], ["1", "0"]], sigma="1")
    grid = GridSpec(((-1.0, 1.0),), (5,), 2)
    # Case1. dt * rate = 2
    with pytest.raises(ChainError) as e:
        build_chain(model.diffusion, grid, 1.0)
    assert "n_time >= 4" in str(e.value)
    assert required_time_steps(model.diffusion, grid, 1.0) == 4
    assert required_time_steps(model.diffusion, grid.with_time_steps(10), 1.0) == 10
    # Case2. Strong correlation
    diffusion = DiffusionSpec.from_strings(
        2, 2, ["0", "0"], [["1", "0"], ["0.9", "0.43589"]]
    )
    grid = GridSpec(((0.0, 4.0), (0.0, 0.4)), (5, 5), 1000)
    with pytest.raises(ChainError):
        build_chain(diffusion, grid, 1.0)


def test_dp_equals_enumeration(make_model, tiny_grid: GridSpec):
    """Test DP value equals exhaustive strategy search"""
    model = make_model(
        ["x1", "0.1"], [["0", "0.2"], ["0.3", "0"]], terminal=["x1^2", "0"], sigma="1"
    )
    chain = build_chain(model.diffusion, tiny_grid, model.horizon)
    fields = dp_solve(model, chain)
    for i0 in (1, 2):
        for x in tiny_grid.coordinates:
            result = enumerate_strategies(model, chain, i0, x)
            dp_value = fields.values[0, i0 - 1, result.node]
            assert result.value == pytest.approx(dp_value, abs=1e-12)

    result = enumerate_strategies(model, chain, 2)
    assert result.x0 == [0.0]
    assert len(result.path) == tiny_grid.n_time + 1
    assert result.path[0]["modes"][0] == 2
    assert result.to_dict()["value"] == result.value


def test_enumeration_caps(make_model):
    """Test enumeration refused beyond the size caps"""
    model = make_model(["0", "0"], [["0", "1"], ["1", "0"]])
    # Case1. Too many time steps
    grid = GridSpec(((-1.0, 1.0),), (5,), 7)
    chain = build_chain(model.diffusion, grid, 1.0)
    with pytest.raises(ValueError):
        enumerate_strategies(model, chain, 1)
    # Case2. Too many nodes
    grid = GridSpec(((-1.0, 1.0),), (11,), 5)
    chain = build_chain(model.diffusion, grid, 1.0)
    with pytest.raises(ValueError):
        enumerate_strategies(model, chain, 1)
    # Case3. Invalid mode
    grid = GridSpec(((-1.0, 1.0),), (5,), 5)
    chain = build_chain(model.diffusion, grid, 1.0)
    with pytest.raises(ValueError):
        enumerate_strategies(model, chain, 3)


def test_dp_m2(m2_model, m2_grid: GridSpec):
    """Test DP values of the deterministic two mode model"""
    chain = build_chain(m2_model.diffusion, m2_grid, m2_model.horizon)
    fields = dp_solve(m2_model, chain)
    assert fields.at_start(1, [0.0]) == pytest.approx(1.0)
    assert fields.at_start(2, [0.0]) == pytest.approx(0.5)


def test_pde_matches_dp(make_model):
    """Test PDE & DP values agree within 1%"""
    model = make_model(["x1^2", "0.6"], [["0", "0.1"], ["0.1", "0"]], sigma="1")
    grid = GridSpec(((-5.0, 5.0),), (101,), 400)
    chain = build_chain(model.diffusion, grid, model.horizon)
    dp_fields = dp_solve(model, chain)
    pde_fields, report = solve(model, grid)
    assert report.converged
    for mode in (1, 2):
        for x in (-0.5, 0.0, 0.5):
            dp_value = dp_fields.at_start(mode, [x])
            pde_value = pde_fields.at_start(mode, [x])
            assert abs(pde_value - dp_value) <= max(0.01 * abs(dp_value), 1e-3)


@pytest.mark.parametrize("name", ["ou_two_mode", "triangle", "power_plant"])
def test_pde_matches_dp_catalog(name: str):
    """Test PDE & DP values agree within 1% at the catalog start point"""
    model, domain = load_instance(name)
    grid = GridSpec(domain.box, domain.nodes, domain.n_time)
    pde_fields, report = solve(model, grid)
    assert report.converged
    n_time = required_time_steps(model.diffusion, grid, model.horizon)
    chain = build_chain(model.diffusion, grid.with_time_steps(n_time), model.horizon)
    dp_fields = dp_solve(model, chain)
    dp_value = dp_fields.at_start(domain.i0, domain.start)
    pde_value = pde_fields.at_start(domain.i0, domain.start)
    assert abs(pde_value - dp_value) <= max(0.01 * abs(dp_value), 1e-3)
