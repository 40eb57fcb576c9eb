from __future__ import annotations

import copy
from typing import Any, Dict, Tuple

from pyoptswitch.model import ProblemDomain, SwitchingModel

# Problem dicts in the problem file layout (see `SwitchingModel.from_dict`)
INSTANCES: Dict[str, Dict[str, Any]] = {
    # Deterministic closed form: v_1(0, x) = 1, v_2(0, x) = 0.5
    "m2": {
        "name": "m2",
        "horizon": 1.0,
        "diffusion": {"k": 1, "d": 1, "drift": ["0"], "sigma": [["0"]]},
        "modes": {"m": 2, "drivers": ["1", "0"]},
        "costs": [["0", "0.5"], ["0.5", "0"]],
        "terminal": ["0", "0"],
        "domain": {"box": [[-1, 1]], "nodes": [5], "n_time": 200, "x0": [0.0], "i0": 2},
    },
    # Brownian motion, prohibitive switching: v(t, x) = x
    "martingale": {
        "name": "martingale",
        "horizon": 1.0,
        "diffusion": {"k": 1, "d": 1, "drift": ["0"], "sigma": [["1"]]},
        "modes": {"m": 2, "drivers": ["0", "0"]},
        "costs": [["0", "1e6"], ["1e6", "0"]],
        "terminal": ["x1", "x1"],
        "domain": {"box": [[-10, 10]], "nodes": [201], "n_time": 100, "x0": [0.0], "i0": 1},
    },
    # Mean-reverting margin, producing (1) or idle (2)
    "ou_two_mode": {
        "name": "ou_two_mode",
        "horizon": 1.0,
        "diffusion": {"k": 1, "d": 1, "drift": ["2*(1 - x1)"], "sigma": [["0.5"]]},
        "modes": {"m": 2, "drivers": ["x1 - 1", "0"]},
        "costs": [["0", "0.2"], ["0.3", "0"]],
        "terminal": ["0", "0"],
        "domain": {"box": [[-2, 4]], "nodes": [61], "n_time": 100, "x0": [1.0], "i0": 2},
    },
    # Long (1), flat (2), short (3) positions on a driftless factor
    "triangle": {
        "name": "triangle",
        "horizon": 1.0,
        "diffusion": {"k": 1, "d": 1, "drift": ["0"], "sigma": [["0.3"]]},
        "modes": {"m": 3, "drivers": ["x1", "0.05", "-x1"]},
        "costs": [["0", "0.1", "0.15"], ["0.1", "0", "0.1"], ["0.15", "0.1", "0"]],
        "terminal": ["0", "0", "0"],
        "domain": {"box": [[-2, 2]], "nodes": [41], "n_time": 100, "x0": [0.0], "i0": 2},
    },
    # Gas-fired plant on a spark spread: off (1), half load (2), full load (3)
    "power_plant": {
        "name": "power_plant",
        "horizon": 1.0,
        "diffusion": {"k": 1, "d": 1, "drift": ["1.5*(0.5 - x1)"], "sigma": [["0.8"]]},
        "modes": {"m": 3, "drivers": ["-0.05", "0.5*x1 - 0.1", "x1 - 0.3"]},
        "costs": [["0", "0.2", "0.4"], ["0.1", "0", "0.2"], ["0.15", "0.1", "0"]],
        "terminal": ["0", "0", "0"],
        "domain": {"box": [[-3, 4]], "nodes": [71], "n_time": 200, "x0": [0.5], "i0": 1},
    },
    # Drivers nondecreasing in the other mode's value
    "coupled_increasing": {
        "name": "coupled_increasing",
        "horizon": 1.0,
        "diffusion": {"k": 1, "d": 1, "drift": ["0"], "sigma": [["0.5"]]},
        "modes": {"m": 2, "drivers": ["1 + 0.2*y2", "0.5*x1 + 0.2*y1"]},
        "costs": [["0", "0.3"], ["0.3", "0"]],
        "terminal": ["0", "0"],
        "domain": {"box": [[-2, 2]], "nodes": [41], "n_time": 100, "x0": [0.0], "i0": 1},
    },
    # Drivers nonincreasing in the other mode's value
    "coupled_decreasing": {
        "name": "coupled_decreasing",
        "horizon": 1.0,
        "diffusion": {"k": 1, "d": 1, "drift": ["0"], "sigma": [["0.5"]]},
        "modes": {"m": 2, "drivers": ["1 - 0.2*y2", "0.5*x1 - 0.2*y1"]},
        "costs": [["0", "0.3"], ["0.3", "0"]],
        "terminal": ["0", "0"],
        "domain": {"box": [[-2, 2]], "nodes": [41], "n_time": 100, "x0": [0.0], "i0": 1},
    },
}


def instance_dict(name: str) -> Dict[str, Any]:
    """Problem dict of a catalog instance (a copy, safe to modify)"""
    if name not in INSTANCES:
        err_msg = f"'{name}' instance not found. Available: {list(INSTANCES.keys())}"
        raise ValueError(err_msg)
    return copy.deepcopy(INSTANCES[name])


def load_instance(name: str) -> Tuple[SwitchingModel, ProblemDomain]:
    """Load catalog instance

    List of instance name
    - `m2`
    - `martingale`
    - `ou_two_mode`
    - `triangle`
    - `power_plant`
    - `coupled_increasing`
    - `coupled_decreasing`

    Parameters
    ----------
    name : str
        Instance name (e.g. `m2`)

    Returns
    -------
    model, domain : Tuple[SwitchingModel, ProblemDomain]
        Model & its working domain
    """
    data = instance_dict(name)
    return SwitchingModel.from_dict(data), ProblemDomain.from_dict(data["domain"])
