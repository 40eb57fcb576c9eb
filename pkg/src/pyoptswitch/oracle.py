from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import permutations
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from pyoptswitch.grid import GridSpec, ValueFields, build_generator, gradient_field
from pyoptswitch.model import DiffusionSpec, SwitchingModel
from pyoptswitch.solver import project

logger = logging.getLogger(__name__)

ENUMERATION_CAPS = {"n_time": 6, "m": 3, "nodes": 9}


class ChainError(ValueError):
    """Markov chain cannot be built (CFL violation or negative stencil coefficient)"""


@dataclass
class ChainKernel:
    """Markov Chain Kernel DataClass

    `kernels[n]` moves the chain from slice n to slice n+1
    (a single shared kernel when the diffusion is time homogeneous).
    """

    kernels: List[sp.csr_matrix]
    dt: float
    grid: GridSpec
    horizon: float

    @property
    def homogeneous(self) -> bool:
        """Check one kernel serves every slice"""
        return len(self.kernels) == 1

    def kernel(self, n: int) -> sp.csr_matrix:
        """Transition matrix from slice n to slice n+1"""
        return self.kernels[0] if self.homogeneous else self.kernels[n]

    @property
    def max_row_error(self) -> float:
        """Max |row sum - 1| over every kernel"""
        return max(
            float(np.max(np.abs(np.asarray(p.sum(axis=1)).ravel() - 1))) for p in self.kernels
        )

    def moments(self, n: int, node: int) -> Tuple[np.ndarray, np.ndarray]:
        """Conditional mean increment & covariance of one step from `node`

        Parameters
        ----------
        n : int
            Slice index
        node : int
            Flat node index

        Returns
        -------
        mean, cov : Tuple[np.ndarray, np.ndarray]
            Mean increment (k,) and covariance (k, k)
        """
        row = self.kernel(n).getrow(node)
        coords = self.grid.coordinates
        jumps = coords[row.indices] - coords[node]
        probs = row.data
        mean = probs @ jumps
        second = (jumps * probs[:, None]).T @ jumps
        return mean, second - np.outer(mean, mean)


def required_time_steps(diffusion: DiffusionSpec, grid: GridSpec, horizon: float) -> int:
    """Smallest n_time for which dt * max jump rate <= 1 on every slice"""
    times = grid.times(horizon)
    slices = [times[0]] if diffusion.is_time_homogeneous else times[:-1]
    rate = max(float(np.max(build_generator(diffusion, grid, t).rates, initial=0)) for t in slices)
    return max(grid.n_time, int(math.ceil(horizon * rate - 1e-12)))


def build_chain(diffusion: DiffusionSpec, grid: GridSpec, horizon: float) -> ChainKernel:
    """Turn generator rows into transition probabilities P = I + dt L

    Parameters
    ----------
    diffusion : DiffusionSpec
        Drift & volatility
    grid : GridSpec
        Space-time grid
    horizon : float
        Horizon T

    Returns
    -------
    chain : ChainKernel
        Per-slice kernels
    """
    dt = grid.dt(horizon)
    times = grid.times(horizon)
    slices = [times[0]] if diffusion.is_time_homogeneous else list(times[:-1])
    kernels = []
    for t in slices:
        generator = build_generator(diffusion, grid, t)
        if not generator.positive:
            err_msg = f"Negative stencil coefficient {generator.min_offdiag:.3g} at t={t} "
            err_msg += "(refine the grid so that a_qq/dx_q^2 dominates the mixed terms)."
            raise ChainError(err_msg)
        max_rate = float(np.max(generator.rates, initial=0))
        if dt * max_rate > 1 + 1e-12:
            needed = int(math.ceil(horizon * max_rate - 1e-12))
            err_msg = f"CFL violation at t={t}: dt * max rate = {dt * max_rate:.4g} > 1 "
            err_msg += f"(use n_time >= {needed})."
            raise ChainError(err_msg)
        kernel = sp.identity(grid.n_nodes, format="csr") + dt * generator.matrix
        kernel = sp.csr_matrix(kernel)
        kernel.data = np.clip(kernel.data, 0.0, 1.0)
        kernel.eliminate_zeros()
        kernel.sort_indices()
        kernels.append(kernel)
    return ChainKernel(kernels, dt, grid, horizon)


def dp_solve(model: SwitchingModel, chain: ChainKernel) -> ValueFields:
    """Backward dynamic programming on the chain

    c_i = E[Y_i(t+dt)] + dt f_i(t, x, Y(t+dt), z) followed by the obstacle projection.

    Parameters
    ----------
    model : SwitchingModel
        Target model
    chain : ChainKernel
        Markov chain approximation

    Returns
    -------
    fields : ValueFields
        DP values on every slice
    """
    grid = chain.grid
    if model.diffusion.k != grid.k:
        raise ValueError(f"model k={model.diffusion.k} != grid k={grid.k}.")
    times = grid.times(model.horizon)
    coords = grid.coordinates
    m = model.m
    uses_z = any(v.startswith("zvar") for i in range(m) for v in model.driver_coupling(i))
    values = np.empty((grid.n_time + 1, m, grid.n_nodes))
    values[-1] = model.evaluate_terminal(coords)
    for n in range(grid.n_time - 1, -1, -1):
        kernel = chain.kernel(n)
        y = values[n + 1]
        z = gradient_field(y, grid, model.diffusion, times[n + 1]) if uses_z else None
        continuation = np.empty((m, grid.n_nodes))
        for i in range(m):
            z_i = None if z is None else z[i]
            drive = model.evaluate_driver(i, times[n], coords, y, z_i)
            continuation[i] = kernel @ y[i] + chain.dt * drive
        values[n] = project(continuation, model.evaluate_costs(times[n], coords))
    return ValueFields(values, times, grid, True, model.transform_rate)


###########################################################
# Brute-force enumeration
###########################################################


@dataclass
class EnumerationResult:
    """Enumeration Result DataClass"""

    value: float
    i0: int
    node: int
    x0: List[float]
    path: List[Dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        """Report dict (argmax mode path along the most probable chain history)"""
        return {
            "value": self.value,
            "i0": self.i0,
            "node": self.node,
            "x0": self.x0,
            "path": self.path,
        }


def _simple_paths(m: int) -> Dict[int, List[Tuple[int, ...]]]:
    """Instantaneous switch chains of distinct modes from every start mode"""
    paths: Dict[int, List[Tuple[int, ...]]] = {i: [] for i in range(m)}
    for i in range(m):
        others = [j for j in range(m) if j != i]
        for length in range(0, m):
            for tail in permutations(others, length):
                paths[i].append((i,) + tail)
    return paths


def enumerate_strategies(
    model: SwitchingModel,
    chain: ChainKernel,
    i0: int,
    x0: Optional[Sequence[float]] = None,
) -> EnumerationResult:
    """Exhaustive search over every switching strategy on a tiny chain

    Every chain history is expanded and every mode path tried at each grid time
    (instantaneous chains of switches included), with left-endpoint profits,
    costs charged at switch times and the terminal payoff. Drivers get y = 0, z = 0.

    Parameters
    ----------
    model : SwitchingModel
        Target model
    chain : ChainKernel
        Markov chain approximation
    i0 : int
        Initial mode (1-based)
    x0 : Optional[Sequence[float]], optional
        Start point (nearest node is used, Default: box center)

    Returns
    -------
    result : EnumerationResult
        Optimal value at (0, x0) & argmax mode path
    """
    grid = chain.grid
    n_time, m, n_nodes = grid.n_time, model.m, grid.n_nodes
    err_msg = ""
    if n_time > ENUMERATION_CAPS["n_time"]:
        err_msg += f"n_time={n_time} exceeds the cap {ENUMERATION_CAPS['n_time']}.\n"
    if m > ENUMERATION_CAPS["m"]:
        err_msg += f"m={m} exceeds the cap {ENUMERATION_CAPS['m']}.\n"
    if n_nodes > ENUMERATION_CAPS["nodes"]:
        err_msg += f"{n_nodes} nodes exceed the cap {ENUMERATION_CAPS['nodes']}.\n"
    if not 1 <= i0 <= m:
        err_msg += f"i0={i0} is invalid (Must be '1 <= i0 <= {m}').\n"
    if err_msg:
        raise ValueError(err_msg.rstrip("\n"))
    if model.is_coupled:
        logger.warning("Enumeration ignores the y/z coupling of the drivers")

    times = grid.times(model.horizon)
    coords = grid.coordinates
    terminal = model.evaluate_terminal(coords)
    costs = [model.evaluate_costs(times[n], coords) for n in range(n_time)]
    drives = [
        np.array([model.evaluate_driver(i, times[n], coords) for i in range(m)])
        for n in range(n_time)
    ]
    rows = [[chain.kernel(n).getrow(x) for x in range(n_nodes)] for n in range(n_time)]
    paths = _simple_paths(m)

    def continuation(n: int, x: int, j: int) -> float:
        row = rows[n][x]
        future = np.zeros(n_nodes)
        for y in row.indices:
            future[y] = best(n + 1, int(y), j)[0]
        return float(row.dot(future)[0]) + chain.dt * drives[n][j, x]

    def best(n: int, x: int, i: int) -> Tuple[float, Tuple[int, ...]]:
        if n == n_time:
            return float(terminal[i, x]), (i,)
        ends = {j: continuation(n, x, j) for j in range(m)}
        top_value, top_path = -np.inf, (i,)
        for path in paths[i]:
            value = ends[path[-1]]
            for a, b in reversed(list(zip(path[:-1], path[1:]))):
                value = value - costs[n][a, b, x]
            if value > top_value:
                top_value, top_path = value, path
        return top_value, top_path

    node = grid.nearest_node(grid.box_center if x0 is None else x0)
    value, _ = best(0, node, i0 - 1)

    # Argmax mode path along the most probable chain history
    path_record = []
    x, mode = node, i0 - 1
    for n in range(n_time + 1):
        step_value, switches = best(n, x, mode)
        path_record.append(
            {
                "step": n,
                "t": float(times[n]),
                "node": x,
                "x": [float(c) for c in coords[x]],
                "modes": [s + 1 for s in switches],
                "value": step_value,
            }
        )
        mode = switches[-1]
        if n < n_time:
            row = rows[n][x]
            x = int(row.indices[int(np.argmax(row.data))])
    result = EnumerationResult(
        float(value), i0, node, [float(c) for c in coords[node]], path_record
    )
    logger.info(f"Enumerated value at node {node} from mode {i0}: {value:.6g}")
    return result
