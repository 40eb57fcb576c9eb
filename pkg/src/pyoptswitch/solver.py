"""Backward schemes for the coupled obstacle system of an m-modes switching problem

All schemes march backward on the grid time slices. Inside a time step the linear
generator part is implicit (theta-scheme) and the driver arguments y and z are
taken from the already computed slice t_{n+1}.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from pyoptswitch.expr import BinaryOp, Call, Expression, Number, Variable
from pyoptswitch.grid import GridSpec, ThetaStepper, ValueFields
from pyoptswitch.model import (
    MAX_CYCLE_MODES,
    SwitchingModel,
    admits_scheme,
    check_no_free_loop,
    classify_monotonicity,
    driver_lipschitz_constant,
    probe_box,
)
from pyoptswitch.utils import header_lines, output_header

logger = logging.getLogger(__name__)

SCHEMES = ("picard", "increasing", "decreasing")
PICARD_INITS = ("lower-bound", "upper-bound", "zero")
DECREASING_INITS = ("upper-bound", "polynomial")
ORDER_TOL = 1e-9


class ProjectionError(ValueError):
    """Obstacle projection did not stabilise (no-free-loop violated at runtime)"""


class SchemeRefusedError(ValueError):
    """Scheme refused for this model (assumption refuted or wrong monotonicity class)"""


###########################################################
# Reports
###########################################################


@dataclass
class IterationRecord:
    """Outer iteration record DataClass"""

    iteration: int
    distance: float
    ratio: Optional[float]
    beta_distance: float
    violations: int
    wall_time: float


@dataclass
class SandwichRecord:
    """Decreasing scheme order record DataClass

    Odd iterates must stay below the limit and even iterates above it.
    """

    lower_violations: int
    upper_violations: int
    parity_violations: int
    start_dominates: bool

    @property
    def holds(self) -> bool:
        """Check the order holds at every node"""
        return self.lower_violations == 0 and self.upper_violations == 0


@dataclass
class IterationReport:
    """Iteration Report DataClass"""

    scheme: str
    tol: float
    max_iter: int
    records: List[IterationRecord] = field(default_factory=list)
    converged: bool = False
    transform_rate: float = 0.0
    sandwich: Optional[SandwichRecord] = None

    @property
    def iterations(self) -> int:
        """Number of outer iterations"""
        return len(self.records)

    @property
    def distances(self) -> List[float]:
        """Sup-norm distances per iteration"""
        return [r.distance for r in self.records]

    @property
    def rho(self) -> Optional[float]:
        """Max observed contraction ratio after the first 3 iterations"""
        ratios = [r.ratio for r in self.records[3:] if r.ratio is not None]
        return max(ratios) if ratios else None

    @property
    def violations(self) -> int:
        """Total monotone-order violations"""
        total = sum(r.violations for r in self.records)
        if self.sandwich is not None:
            total += self.sandwich.lower_violations + self.sandwich.upper_violations
        return total

    def to_dict(self) -> Dict[str, Any]:
        """Report dict"""
        data: Dict[str, Any] = {
            "scheme": self.scheme,
            "converged": self.converged,
            "iterations": self.iterations,
            "tol": self.tol,
            "max_iter": self.max_iter,
            "rho": self.rho,
            "transform_rate": self.transform_rate,
            "violations": self.violations,
            "records": [r.__dict__ for r in self.records],
        }
        if self.sandwich is not None:
            data["sandwich"] = dict(self.sandwich.__dict__, holds=self.sandwich.holds)
        return data


@dataclass
class ResidualReport:
    """Residual Report DataClass

    Arrays have shape (n_time, m, N): one entry per non-terminal slice, mode, node.
    """

    slack: np.ndarray
    pde: np.ndarray
    min_form: np.ndarray
    defect: np.ndarray
    mask: np.ndarray
    flagged: List[Tuple[int, int, int]]
    converged: bool
    tol_obstacle: float

    @property
    def min_slack(self) -> float:
        """Min obstacle slack over checked nodes"""
        return float(np.min(self.slack[:, :, self.mask]))

    @property
    def max_defect(self) -> float:
        """Max complementarity defect over checked nodes"""
        return float(np.max(self.defect[:, :, self.mask]))

    @property
    def max_min_form(self) -> float:
        """Max |min-form residual| over checked nodes"""
        return float(np.max(np.abs(self.min_form[:, :, self.mask])))

    @property
    def feasible(self) -> bool:
        """Check obstacle slack >= -tol_obstacle everywhere"""
        return float(np.min(self.slack)) >= -self.tol_obstacle

    def to_dict(self) -> Dict[str, Any]:
        """Summary dict"""
        return {
            "converged": self.converged,
            "feasible": self.feasible,
            "min_slack": self.min_slack,
            "max_defect": self.max_defect,
            "max_min_form": self.max_min_form,
            "flagged": len(self.flagged),
            "first_flagged": [list(f) for f in self.flagged[:20]],
        }

    def write_csv(
        self,
        outfile: Union[str, Path],
        grid: GridSpec,
        times: np.ndarray,
        header: Optional[Mapping[str, str]] = None,
    ) -> None:
        """Write residual fields as CSV (t, x1..xk, mode, slack, pde, min_form, defect)"""
        header = output_header() if header is None else header
        coords = grid.coordinates
        with open(outfile, "w", newline="", encoding="utf-8") as f:
            for line in header_lines(header):
                f.write(line + "\n")
            writer = csv.writer(f)
            x_columns = [f"x{q + 1}" for q in range(grid.k)]
            writer.writerow(["t"] + x_columns + ["mode", "slack", "pde", "min_form", "defect"])
            n_slices, m, n_nodes = self.slack.shape
            for s in range(n_slices):
                for i in range(m):
                    for node in np.flatnonzero(self.mask):
                        row = [repr(float(times[s]))] + [repr(float(c)) for c in coords[node]]
                        row += [i + 1] + [
                            repr(float(a[s, i, node]))
                            for a in (self.slack, self.pde, self.min_form, self.defect)
                        ]
                        writer.writerow(row)


###########################################################
# Discretised problem
###########################################################


class _Problem:
    """Model evaluated on a grid (cached generators, costs & terminal values)"""

    def __init__(self, model: SwitchingModel, grid: GridSpec):
        if model.diffusion.k != grid.k:
            raise ValueError(f"model k={model.diffusion.k} != grid k={grid.k}.")
        self.model = model
        self.grid = grid
        self.stepper = ThetaStepper(model.diffusion, grid, model.horizon)
        self.times = self.stepper.times
        self.dt = self.stepper.dt
        self.coords = grid.coordinates
        self.terminal = model.evaluate_terminal(self.coords)
        self.uses_z = any(
            v.startswith("zvar") for i in range(model.m) for v in model.driver_coupling(i)
        )
        self._cost_homogeneous = all(
            "t" not in e.variables for row in model.costs for e in row
        )
        self._costs: Dict[int, np.ndarray] = {}

    @property
    def n_time(self) -> int:
        return self.grid.n_time

    def costs(self, n: int) -> np.ndarray:
        key = 0 if self._cost_homogeneous else n
        if key not in self._costs:
            self._costs[key] = self.model.evaluate_costs(self.times[n], self.coords)
        return self._costs[key]

    def gradients(self, fields: np.ndarray, n: int) -> Optional[np.ndarray]:
        """z of stacked fields (m, N) at slice n, None when no driver uses z"""
        if not self.uses_z:
            return None
        return self.stepper.gradient(fields, n)

    def drivers(self, n: int, y: np.ndarray, z: Optional[np.ndarray]) -> np.ndarray:
        """Every driver at slice n, mode i taking z[i] (array of shape (m, N))"""
        t = self.times[n]
        return np.array(
            [
                self.model.evaluate_driver(i, t, self.coords, y, None if z is None else z[i])
                for i in range(self.model.m)
            ]
        )

    def fields(self, values: np.ndarray, converged: bool = True) -> ValueFields:
        return ValueFields(
            values, self.times, self.grid, converged, self.model.transform_rate
        )


def obstacle(values: np.ndarray, costs: np.ndarray) -> np.ndarray:
    """max_{j!=i}(v_j - g_ij) for every mode i

    Parameters
    ----------
    values : np.ndarray
        Mode values of shape (m, N)
    costs : np.ndarray
        Switching costs of shape (m, m, N)

    Returns
    -------
    barrier : np.ndarray
        Array of shape (m, N)
    """
    m = len(values)
    candidates = values[None, :, :] - costs
    candidates[np.arange(m), np.arange(m)] = -np.inf
    return candidates.max(axis=1)


def project(values: np.ndarray, costs: np.ndarray) -> np.ndarray:
    """Cyclic projection v_i <- max(v_i, max_{j!=i}(v_j - g_ij)) until no entry increases

    Parameters
    ----------
    values : np.ndarray
        Continuation values of shape (m, N)
    costs : np.ndarray
        Switching costs of shape (m, m, N)

    Returns
    -------
    projected : np.ndarray
        Array of shape (m, N)
    """
    v = np.array(values, dtype=float)
    m = len(v)
    for _ in range(m * m):
        changed = False
        for i in range(m):
            barrier = np.full(v.shape[1], -np.inf)
            for j in range(m):
                if j != i:
                    barrier = np.maximum(barrier, v[j] - costs[i, j])
            raise_mask = barrier > v[i]
            if np.any(raise_mask):
                v[i][raise_mask] = barrier[raise_mask]
                changed = True
        if not changed:
            return v
    err_msg = f"Obstacle projection did not stabilise in {m * m} passes "
    err_msg += "(switching costs contain a free loop at runtime)."
    raise ProjectionError(err_msg)


def _guard_no_free_loop(model: SwitchingModel, grid: GridSpec) -> None:
    """Refuse when the no-free-loop property fails on grid samples"""
    if model.m > MAX_CYCLE_MODES:
        logger.warning(f"m={model.m} > {MAX_CYCLE_MODES}: no-free-loop not checked")
        return
    times = grid.times(model.horizon)
    picked = times[:: max(1, grid.n_time // 10)]
    picked = np.unique(np.append(picked, times[-1]))
    coords = grid.coordinates
    sample_t = np.repeat(picked, len(coords))
    sample_x = np.tile(coords, (len(picked), 1))
    entry = check_no_free_loop(model, sample_t, sample_x)
    if entry.is_refuted:
        raise SchemeRefusedError(f"No-free-loop property refuted: {entry.witness}")


def _guard_monotone(model: SwitchingModel, grid: GridSpec, scheme: str) -> None:
    """Refuse a monotone scheme on a model of the wrong monotonicity class"""
    ranges = probe_box(model, grid.box)
    entry = classify_monotonicity(model, ranges)
    if not admits_scheme(entry, scheme):
        err_msg = f"The {scheme} scheme needs drivers "
        err_msg += "nondecreasing" if scheme == "increasing" else "nonincreasing"
        err_msg += f" in the other modes' values, but '{model.name}' is {entry.case} "
        err_msg += f"(directions {entry.directions}). Use the picard scheme instead."
        raise SchemeRefusedError(err_msg)
    m = model.m
    target = "nondecreasing" if scheme == "increasing" else "nonincreasing"
    own = [entry.directions[i][i] for i in range(m)]
    if any(d not in (target, "constant") for d in own):
        logger.warning(
            f"Own-value directions {own} do not match the {scheme} scheme; "
            "an exponential transform fixes them"
        )


###########################################################
# Schemes
###########################################################


def _bound(prob: _Problem, which: str) -> np.ndarray:
    if which not in ("upper", "lower"):
        raise ValueError(f"which='{which}' is invalid ('upper'|'lower').")
    reduce = np.max if which == "upper" else np.min
    m, n_nodes = prob.model.m, prob.grid.n_nodes
    u = np.empty((prob.n_time + 1, n_nodes))
    u[-1] = reduce(prob.terminal, axis=0)
    for n in range(prob.n_time - 1, -1, -1):
        y = np.broadcast_to(u[n + 1], (m, n_nodes))
        z = prob.gradients(np.array(y), n + 1)
        u[n] = prob.stepper.step(n, u[n + 1], reduce(prob.drivers(n, y, z), axis=0))
    return np.repeat(u[:, None, :], m, axis=1)


def solve_unreflected_bound(model: SwitchingModel, grid: GridSpec, which: str) -> ValueFields:
    """Solve the unreflected PDE with driver max_i f_i (upper) or min_i f_i (lower)

    The driver takes y_1 = ... = y_m = u and terminal max_i h_i (resp. min_i h_i).

    Parameters
    ----------
    model : SwitchingModel
        Target model
    grid : GridSpec
        Space-time grid
    which : str
        `upper` or `lower`

    Returns
    -------
    fields : ValueFields
        The bound broadcast to every mode
    """
    prob = _Problem(model, grid)
    return prob.fields(_bound(prob, which))


def _phi(prob: _Problem, frozen: np.ndarray) -> np.ndarray:
    m, n_nodes = prob.model.m, prob.grid.n_nodes
    out = np.empty((prob.n_time + 1, m, n_nodes))
    out[-1] = prob.terminal
    for n in range(prob.n_time - 1, -1, -1):
        z = prob.gradients(out[n + 1], n + 1)
        source = prob.drivers(n, frozen[n + 1], z)
        out[n] = project(prob.stepper.step(n, out[n + 1], source), prob.costs(n))
    return out


def phi_step(model: SwitchingModel, grid: GridSpec, frozen: ValueFields) -> ValueFields:
    """Apply the map that solves the obstacle system with frozen driver values

    Parameters
    ----------
    model : SwitchingModel
        Target model
    grid : GridSpec
        Space-time grid
    frozen : ValueFields
        Fields supplying the drivers' y-arguments (every grid slice)

    Returns
    -------
    fields : ValueFields
        Image of `frozen`
    """
    prob = _Problem(model, grid)
    if frozen.values.shape != (grid.n_time + 1, model.m, grid.n_nodes):
        raise ValueError("frozen fields must hold every slice of the grid.")
    return prob.fields(_phi(prob, frozen.values))


def _beta_distance(diff: np.ndarray, times: np.ndarray, dt: float, beta: float) -> float:
    weights = dt * np.exp(beta * times)
    return float(np.sqrt(np.sum(weights * np.sum(np.mean(diff**2, axis=2), axis=1))))


def _check_tolerances(tol: float, max_iter: int) -> None:
    err_msg = ""
    if not tol > 0:
        err_msg += f"tol={tol} is invalid (Must be 'tol > 0').\n"
    if max_iter < 1:
        err_msg += f"max_iter={max_iter} is invalid (Must be 'max_iter >= 1').\n"
    if err_msg:
        raise ValueError(err_msg.rstrip("\n"))


def _record(
    report: IterationReport,
    new: np.ndarray,
    prev: np.ndarray,
    prob: _Problem,
    beta: float,
    violations: int,
    start: float,
) -> float:
    diff = new - prev
    distance = float(np.max(np.abs(diff)))
    last = report.records[-1].distance if report.records else None
    ratio = None if last is None else (distance / last if last > 0 else 0.0)
    record = IterationRecord(
        iteration=report.iterations + 1,
        distance=distance,
        ratio=ratio,
        beta_distance=_beta_distance(diff, prob.times, prob.dt, beta),
        violations=violations,
        wall_time=time.perf_counter() - start,
    )
    report.records.append(record)
    logger.debug(
        f"{report.scheme} iteration {record.iteration}: distance={distance:.3e}, "
        f"ratio={ratio}, violations={violations}"
    )
    return distance


def _finish(report: IterationReport, name: str) -> None:
    if report.converged:
        logger.info(
            f"{report.scheme} scheme on '{name}' converged in {report.iterations} iterations"
        )
    else:
        logger.warning(
            f"{report.scheme} scheme on '{name}' stopped at max_iter={report.max_iter} "
            f"(last distance {report.records[-1].distance:.3e})"
        )


def picard_solve(
    model: SwitchingModel,
    grid: GridSpec,
    tol: float = 1e-6,
    max_iter: int = 200,
    init: str = "zero",
    beta: float = 0.0,
    check: bool = True,
) -> Tuple[ValueFields, IterationReport]:
    """Iterate the frozen-driver map from an initialization until the sup-norm step <= tol

    Parameters
    ----------
    model : SwitchingModel
        Target model
    grid : GridSpec
        Space-time grid
    tol : float, optional
        Sup-norm tolerance
    max_iter : int, optional
        Max outer iterations
    init : str, optional
        `lower-bound`, `upper-bound` or `zero`
    beta : float, optional
        Exponential weight of the weighted distance
    check : bool, optional
        If True, refuse when the no-free-loop property fails on grid samples

    Returns
    -------
    fields, report : Tuple[ValueFields, IterationReport]
        Last iterate (flagged non-converged at max_iter) & report
    """
    _check_tolerances(tol, max_iter)
    if init not in PICARD_INITS:
        raise ValueError(f"init='{init}' is invalid {PICARD_INITS}.")
    if check:
        _guard_no_free_loop(model, grid)
    prob = _Problem(model, grid)
    if init == "zero":
        current = np.zeros((grid.n_time + 1, model.m, grid.n_nodes))
    else:
        current = _bound(prob, init.split("-")[0])

    report = IterationReport("picard", tol, max_iter, transform_rate=model.transform_rate)
    start = time.perf_counter()
    for _ in range(max_iter):
        new = _phi(prob, current)
        distance = _record(report, new, current, prob, beta, 0, start)
        current = new
        if distance <= tol:
            report.converged = True
            break
    _finish(report, model.name)
    return prob.fields(current, report.converged), report


def _increasing_sweep(prob: _Problem, prev: np.ndarray) -> np.ndarray:
    m, n_nodes = prob.model.m, prob.grid.n_nodes
    out = np.empty((prob.n_time + 1, m, n_nodes))
    out[-1] = prob.terminal
    for n in range(prob.n_time - 1, -1, -1):
        z = prob.gradients(out[n + 1], n + 1)
        t = prob.times[n]
        source = np.empty((m, n_nodes))
        for i in range(m):
            y = np.array(prev[n + 1])
            y[i] = out[n + 1, i]
            z_i = None if z is None else z[i]
            source[i] = prob.model.evaluate_driver(i, t, prob.coords, y, z_i)
        continuation = prob.stepper.step(n, out[n + 1], source)
        out[n] = np.maximum(continuation, obstacle(prev[n], prob.costs(n)))
    return out


def monotone_increasing_solve(
    model: SwitchingModel,
    grid: GridSpec,
    tol: float = 1e-6,
    max_iter: int = 200,
    beta: float = 0.0,
    check: bool = True,
) -> Tuple[ValueFields, IterationReport]:
    """Increasing scheme from the lower bound with previous-generation obstacles

    Parameters
    ----------
    model : SwitchingModel
        Target model (increasing case)
    grid : GridSpec
        Space-time grid
    tol : float, optional
        Sup-norm tolerance
    max_iter : int, optional
        Max outer iterations
    beta : float, optional
        Exponential weight of the weighted distance
    check : bool, optional
        If True, refuse on a refuted no-free-loop property or a wrong monotonicity class

    Returns
    -------
    fields, report : Tuple[ValueFields, IterationReport]
        Limit & report (violations count nodes where an iterate decreased)
    """
    _check_tolerances(tol, max_iter)
    if check:
        _guard_no_free_loop(model, grid)
        _guard_monotone(model, grid, "increasing")
    prob = _Problem(model, grid)
    current = _bound(prob, "lower")

    report = IterationReport("increasing", tol, max_iter, transform_rate=model.transform_rate)
    start = time.perf_counter()
    for _ in range(max_iter):
        new = _increasing_sweep(prob, current)
        violations = int(np.sum(new < current - ORDER_TOL))
        distance = _record(report, new, current, prob, beta, violations, start)
        current = new
        if distance <= tol:
            report.converged = True
            break
    if report.violations > 0:
        logger.warning(f"Increasing scheme order failed at {report.violations} node(s)")
    _finish(report, model.name)
    return prob.fields(current, report.converged), report


def monotone_decreasing_solve(
    model: SwitchingModel,
    grid: GridSpec,
    tol: float = 1e-6,
    max_iter: int = 200,
    init: str = "upper-bound",
    growth: float = 1.0,
    beta: float = 0.0,
    check: bool = True,
) -> Tuple[ValueFields, IterationReport]:
    """Decreasing scheme: frozen-driver map iterated from the upper bound

    Odd iterates stay below the limit and even iterates above it as long as
    the start dominates the limit; the order is recorded in `report.sandwich`.
    Coupled drivers can lift the limit over the unreflected upper bound, use
    `init="polynomial"` then.

    Parameters
    ----------
    model : SwitchingModel
        Target model (decreasing case)
    grid : GridSpec
        Space-time grid
    tol : float, optional
        Sup-norm tolerance
    max_iter : int, optional
        Max outer iterations
    init : str, optional
        `upper-bound` or `polynomial` (upper bound + growth * (1 + |x|^2))
    growth : float, optional
        Constant of the polynomial initialization
    beta : float, optional
        Exponential weight of the weighted distance
    check : bool, optional
        If True, refuse on a refuted no-free-loop property or a wrong monotonicity class

    Returns
    -------
    fields, report : Tuple[ValueFields, IterationReport]
        Limit & report
    """
    _check_tolerances(tol, max_iter)
    if init not in DECREASING_INITS:
        raise ValueError(f"init='{init}' is invalid {DECREASING_INITS}.")
    if check:
        _guard_no_free_loop(model, grid)
        _guard_monotone(model, grid, "decreasing")
    prob = _Problem(model, grid)
    start_values = _bound(prob, "upper")
    if init == "polynomial":
        if growth < 0:
            raise ValueError(f"growth={growth} is invalid (Must be 'growth >= 0').")
        bump = growth * (1 + np.sum(prob.coords**2, axis=1))
        start_values = start_values + bump[None, None, :]

    report = IterationReport("decreasing", tol, max_iter, transform_rate=model.transform_rate)
    previous = [start_values]
    even_min = np.array(start_values)
    odd_max = np.full_like(start_values, -np.inf)
    parity_violations = 0
    start = time.perf_counter()
    current = start_values
    for n in range(1, max_iter + 1):
        new = _phi(prob, current)
        violations = 0
        if n >= 2:
            before = previous[-2]
            if n % 2 == 1:
                violations = int(np.sum(new < before - ORDER_TOL))
            else:
                violations = int(np.sum(new > before + ORDER_TOL))
        parity_violations += violations
        if n % 2 == 1:
            odd_max = np.maximum(odd_max, new)
        else:
            even_min = np.minimum(even_min, new)
        distance = _record(report, new, current, prob, beta, violations, start)
        previous = [previous[-1], new]
        current = new
        if distance <= tol:
            report.converged = True
            break

    report.sandwich = SandwichRecord(
        lower_violations=int(np.sum(odd_max > current + ORDER_TOL)),
        upper_violations=int(np.sum(current > even_min + ORDER_TOL)),
        parity_violations=parity_violations,
        start_dominates=bool(np.all(start_values >= current - ORDER_TOL)),
    )
    if not report.sandwich.holds:
        logger.warning(f"Decreasing scheme order failed: {report.sandwich}")
    _finish(report, model.name)
    return prob.fields(current, report.converged), report


###########################################################
# Exponential transform
###########################################################


def _exp_rate(rate: float) -> Expression:
    return Call("exp", (BinaryOp("*", Number(rate), Variable("t")),))


def exponential_transform(model: SwitchingModel, lam: float) -> SwitchingModel:
    """Rescale a model by e^{lam t}

    Drivers become F_i = e^{lam t} f_i(t, x, e^{-lam t} y, e^{-lam t} z) - lam y_i,
    terminals e^{lam T} h_i and costs e^{lam t} g_ij. The solution of the
    transformed model is e^{lam t} times the original one
    (see `ValueFields.inverse_transform`).

    Parameters
    ----------
    model : SwitchingModel
        Target model
    lam : float
        Rate (negative pushes the own-value slope up, positive down)

    Returns
    -------
    transformed : SwitchingModel
        Transformed model (identity if lam == 0)
    """
    if not np.isfinite(lam):
        raise ValueError(f"lam={lam} is invalid (Must be finite).")
    if lam == 0:
        return model
    k, m, d = model.dims
    grow, decay = _exp_rate(lam), _exp_rate(-lam)
    mapping = {f"y{j}": BinaryOp("*", decay, Variable(f"y{j}")) for j in range(1, m + 1)}
    for r in range(1, d + 1):
        mapping[f"zvar{r}"] = BinaryOp("*", decay, Variable(f"zvar{r}"))
    drivers = tuple(
        BinaryOp(
            "-",
            BinaryOp("*", grow, f.substitute(mapping)),
            BinaryOp("*", Number(lam), Variable(f"y{i + 1}")),
        )
        for i, f in enumerate(model.drivers)
    )
    costs = tuple(
        tuple(Number(0.0) if i == j else BinaryOp("*", grow, g) for j, g in enumerate(row))
        for i, row in enumerate(model.costs)
    )
    scale = Number(float(np.exp(lam * model.horizon)))
    terminal = tuple(BinaryOp("*", scale, h) for h in model.terminal)
    return SwitchingModel(
        m=m,
        horizon=model.horizon,
        drivers=drivers,
        costs=costs,
        terminal=terminal,
        diffusion=model.diffusion,
        name=model.name,
        transform_rate=model.transform_rate + lam,
    )


def default_transform_rate(
    model: SwitchingModel,
    grid: GridSpec,
    scheme: str,
    n_samples: int = 256,
    seed: int = 0,
) -> float:
    """Rate -(m C_f + 1) for the increasing scheme, +(m C_f + 1) for the decreasing one"""
    c_f = driver_lipschitz_constant(model, probe_box(model, grid.box), n_samples, seed)
    magnitude = model.m * c_f + 1
    return -magnitude if scheme == "increasing" else magnitude


def solve(
    model: SwitchingModel,
    grid: GridSpec,
    scheme: str = "picard",
    tol: float = 1e-6,
    max_iter: int = 200,
    lam: Optional[float] = None,
    init: Optional[str] = None,
    growth: float = 1.0,
    beta: float = 0.0,
    check: bool = True,
) -> Tuple[ValueFields, IterationReport]:
    """Solve a model with one of the three schemes

    Monotone schemes run on the exponentially transformed model
    (default rate from `default_transform_rate`) and the returned fields
    are mapped back. `lam=0` disables the transform.

    Parameters
    ----------
    model : SwitchingModel
        Target model
    grid : GridSpec
        Space-time grid
    scheme : str, optional
        `picard`, `increasing` or `decreasing`
    tol : float, optional
        Sup-norm tolerance
    max_iter : int, optional
        Max outer iterations
    lam : Optional[float], optional
        Transform rate (picard default: no transform)
    init : Optional[str], optional
        Initialization (picard: `zero`[*], `lower-bound`, `upper-bound`;
        decreasing: `upper-bound`[*], `polynomial`)
    growth : float, optional
        Constant of the polynomial initialization
    beta : float, optional
        Exponential weight of the weighted distance
    check : bool, optional
        If True, run the scheme guards

    Returns
    -------
    fields, report : Tuple[ValueFields, IterationReport]
        Fields of the original model (decimated by `grid.store_every`) & report
    """
    if scheme not in SCHEMES:
        raise ValueError(f"scheme='{scheme}' is invalid {SCHEMES}.")
    if scheme != "picard" and check:
        _guard_monotone(model, grid, scheme)
    if lam is None:
        lam = 0.0 if scheme == "picard" else default_transform_rate(model, grid, scheme)
    target = exponential_transform(model, lam)
    if lam != 0:
        logger.info(f"Solving '{model.name}' transformed with rate {lam:.6g}")

    if scheme == "picard":
        fields, report = picard_solve(target, grid, tol, max_iter, init or "zero", beta, check)
    elif scheme == "increasing":
        fields, report = monotone_increasing_solve(target, grid, tol, max_iter, beta, check)
    else:
        fields, report = monotone_decreasing_solve(
            target, grid, tol, max_iter, init or "upper-bound", growth, beta, check
        )
    fields = fields.inverse_transform()
    if grid.store_every > 1:
        fields = fields.decimate(grid.store_every)
    return fields, report


###########################################################
# Residuals
###########################################################


def residual_report(
    fields: ValueFields,
    model: SwitchingModel,
    grid: GridSpec,
    tol_obstacle: float = 1e-8,
    flag_tol: float = 1e-6,
) -> ResidualReport:
    """Discrete min-form residual of the obstacle system

    Parameters
    ----------
    fields : ValueFields
        Fields on every grid slice
    model : SwitchingModel
        Model the fields solve
    grid : GridSpec
        Space-time grid
    tol_obstacle : float, optional
        Obstacle feasibility tolerance
    flag_tol : float, optional
        Nodes with |min-form| > flag_tol * (1 + |v|) are flagged

    Returns
    -------
    report : ResidualReport
        Slack, PDE residual, min-form residual, complementarity defect
    """
    prob = _Problem(model, grid)
    if fields.values.shape != (grid.n_time + 1, model.m, grid.n_nodes):
        raise ValueError("Residuals need the fields on every slice of the grid.")
    if not fields.converged:
        logger.warning("Residuals of non-converged fields")
    v = fields.values
    theta = grid.theta
    shape = (grid.n_time, model.m, grid.n_nodes)
    slack, pde = np.empty(shape), np.empty(shape)
    for n in range(grid.n_time):
        slack[n] = v[n] - obstacle(v[n], prob.costs(n))
        generator = prob.stepper.generator(n)
        implicit = theta * generator.apply(v[n]) + (1 - theta) * generator.apply(v[n + 1])
        z = prob.gradients(v[n + 1], n + 1)
        pde[n] = (v[n] - v[n + 1]) / prob.dt - implicit - prob.drivers(n, v[n + 1], z)
    min_form = np.minimum(slack, pde)
    defect = np.minimum(np.abs(slack), np.abs(pde))

    if grid.boundary == "linear-extrapolation":
        mask = grid.interior_mask
    else:
        mask = np.ones(grid.n_nodes, dtype=bool)
    bad = (np.abs(min_form) > flag_tol * (1 + np.abs(v[:-1]))) & mask[None, None, :]
    flagged = [(int(s), int(i) + 1, int(node)) for s, i, node in np.argwhere(bad)]
    if flagged:
        logger.info(f"{len(flagged)} node(s) flagged by the residual check")
    return ResidualReport(
        slack, pde, min_form, defect, mask, flagged, fields.converged, tol_obstacle
    )
