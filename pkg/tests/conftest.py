from pathlib import Path
from typing import Callable, Optional, Sequence

import pytest

from pyoptswitch.catalog import load_instance
from pyoptswitch.grid import GridSpec
from pyoptswitch.model import DiffusionSpec, ProblemDomain, SwitchingModel


@pytest.fixture
def m2_model() -> SwitchingModel:
    """Deterministic two mode model (v1(0) = 1, v2(0) = 0.5)"""
    model, _ = load_instance("m2")
    return model


@pytest.fixture
def m2_domain() -> ProblemDomain:
    """Working domain of the deterministic two mode model"""
    _, domain = load_instance("m2")
    return domain


@pytest.fixture
def m2_grid(m2_domain: ProblemDomain) -> GridSpec:
    """Grid of the deterministic two mode model"""
    return GridSpec(m2_domain.box, m2_domain.nodes, m2_domain.n_time)


@pytest.fixture
def make_model() -> Callable[..., SwitchingModel]:
    """One dimensional model factory"""

    def _make_model(
        drivers: Sequence[str],
        costs: Sequence[Sequence[str]],
        terminal: Optional[Sequence[str]] = None,
        drift: str = "0",
        sigma: str = "0",
        horizon: float = 1.0,
    ) -> SwitchingModel:
        m = len(drivers)
        diffusion = DiffusionSpec.from_strings(1, 1, [drift], [[sigma]])
        terminal = ["0"] * m if terminal is None else terminal
        return SwitchingModel.from_strings(m, horizon, drivers, costs, terminal, diffusion)

    return _make_model


@pytest.fixture
def m2_problem_file(tmp_path: Path, m2_model: SwitchingModel, m2_domain: ProblemDomain) -> Path:
    """Problem file of the deterministic two mode model"""
    problem_file = tmp_path / "m2.json"
    m2_model.dump(problem_file, m2_domain)
    return problem_file
