from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from pyoptswitch.expr import (
    DomainError,
    Expression,
    declared_names,
    parse_expression,
    probe_lipschitz,
    secant_slopes,
)

logger = logging.getLogger(__name__)

Box = Sequence[Tuple[float, float]]
ProbeBox = Dict[str, Tuple[float, float]]

VERDICTS = ("certified-on-samples", "refuted", "skipped")
DIRECTIONS = ("nondecreasing", "nonincreasing", "constant", "mixed")
MAX_CYCLE_MODES = 8


def _coord_bindings(t: Union[float, np.ndarray], points: np.ndarray) -> Dict[str, Any]:
    """Bindings of `t`, `x1..xk` for points of shape (N, k)"""
    bindings: Dict[str, Any] = {"t": t}
    for q in range(points.shape[1]):
        bindings[f"x{q + 1}"] = points[:, q]
    return bindings


###########################################################
# Problem datum
###########################################################


@dataclass(frozen=True)
class DiffusionSpec:
    """Diffusion DataClass (drift `b` and volatility `sigma` of the state process)"""

    k: int
    d: int
    drift: Tuple[Expression, ...]
    sigma: Tuple[Tuple[Expression, ...], ...]

    def __post_init__(self):
        err_msg = ""
        if self.k < 1:
            err_msg += f"k={self.k} is invalid (Must be 'k >= 1').\n"
        if self.d < 1:
            err_msg += f"d={self.d} is invalid (Must be 'd >= 1').\n"
        if len(self.drift) != self.k:
            err_msg += f"drift has {len(self.drift)} entries (expected k={self.k}).\n"
        if len(self.sigma) != self.k or any(len(row) != self.d for row in self.sigma):
            err_msg += f"sigma must be a {self.k}x{self.d} matrix.\n"
        allowed = {"t"} | {f"x{q}" for q in range(1, self.k + 1)}
        for expr in self.expressions:
            extra = sorted(expr.variables - allowed)
            if extra:
                err_msg += f"'{expr}' uses {extra} (only t, x1..x{self.k} allowed).\n"
        if err_msg:
            raise ValueError(err_msg.rstrip("\n"))

    @staticmethod
    def from_strings(
        k: int,
        d: int,
        drift: Sequence[str],
        sigma: Sequence[Sequence[str]],
    ) -> DiffusionSpec:
        """Parse diffusion expressions

        Parameters
        ----------
        k : int
            State dimension
        d : int
            Brownian dimension
        drift : Sequence[str]
            k drift expressions in (t, x)
        sigma : Sequence[Sequence[str]]
            k x d volatility expressions in (t, x)

        Returns
        -------
        diffusion : DiffusionSpec
            Parsed diffusion
        """
        dims = (k, 1, d)
        allowed = ["t"] + [f"x{q}" for q in range(1, k + 1)]
        return DiffusionSpec(
            k=k,
            d=d,
            drift=tuple(parse_expression(s, dims, allowed) for s in drift),
            sigma=tuple(
                tuple(parse_expression(s, dims, allowed) for s in row) for row in sigma
            ),
        )

    @property
    def expressions(self) -> List[Expression]:
        """All drift & volatility expressions"""
        return list(self.drift) + [e for row in self.sigma for e in row]

    @property
    def is_time_homogeneous(self) -> bool:
        """Check no coefficient depends on `t`"""
        return all("t" not in e.variables for e in self.expressions)

    @property
    def is_deterministic(self) -> bool:
        """Check volatility is identically zero"""
        return all(e.is_constant and e.evaluate({}) == 0 for row in self.sigma for e in row)

    def drift_at(
        self, t: Union[float, np.ndarray], points: np.ndarray, strict: bool = True
    ) -> np.ndarray:
        """Drift at points

        Parameters
        ----------
        t : Union[float, np.ndarray]
            Time (scalar or per point)
        points : np.ndarray
            State points of shape (N, k)
        strict : bool, optional
            If False, domain failures come back as NaN instead of raising

        Returns
        -------
        drift : np.ndarray
            Array of shape (k, N)
        """
        bindings = _coord_bindings(t, points)
        n = len(points)
        return np.array(
            [e.evaluate_array(bindings, shape=(n,), strict=strict) for e in self.drift]
        )

    def sigma_at(
        self, t: Union[float, np.ndarray], points: np.ndarray, strict: bool = True
    ) -> np.ndarray:
        """Volatility at points (array of shape (k, d, N))"""
        bindings = _coord_bindings(t, points)
        n = len(points)
        return np.array(
            [
                [e.evaluate_array(bindings, shape=(n,), strict=strict) for e in row]
                for row in self.sigma
            ]
        )

    def to_dict(self) -> Dict[str, Any]:
        """Problem file section"""
        return {
            "k": self.k,
            "d": self.d,
            "drift": [str(e) for e in self.drift],
            "sigma": [[str(e) for e in row] for row in self.sigma],
        }


@dataclass(frozen=True)
class ProblemDomain:
    """Working domain DataClass (default grid & evaluation point of a problem)"""

    box: Tuple[Tuple[float, float], ...]
    nodes: Tuple[int, ...]
    n_time: int = 100
    x0: Optional[Tuple[float, ...]] = None
    i0: int = 1

    def __post_init__(self):
        err_msg = ""
        if len(self.box) != len(self.nodes):
            err_msg += "box and nodes must have the same dimension.\n"
        if self.x0 is not None and len(self.x0) != len(self.box):
            err_msg += "x0 must have the box dimension.\n"
        if self.n_time < 1:
            err_msg += f"n_time={self.n_time} is invalid (Must be 'n_time >= 1').\n"
        if err_msg:
            raise ValueError(err_msg.rstrip("\n"))

    @property
    def start(self) -> Tuple[float, ...]:
        """Evaluation point (box center if not given)"""
        if self.x0 is not None:
            return tuple(self.x0)
        return tuple((lo + hi) / 2 for lo, hi in self.box)

    @staticmethod
    def from_dict(data: Mapping[str, Any]) -> ProblemDomain:
        """Build from the `domain` section of a problem file"""
        box = tuple((float(lo), float(hi)) for lo, hi in data["box"])
        x0 = data.get("x0")
        return ProblemDomain(
            box=box,
            nodes=tuple(int(n) for n in data["nodes"]),
            n_time=int(data.get("n_time", 100)),
            x0=None if x0 is None else tuple(float(v) for v in x0),
            i0=int(data.get("i0", 1)),
        )

    def to_dict(self) -> Dict[str, Any]:
        """Problem file section"""
        data: Dict[str, Any] = {
            "box": [list(b) for b in self.box],
            "nodes": list(self.nodes),
            "n_time": self.n_time,
            "i0": self.i0,
        }
        if self.x0 is not None:
            data["x0"] = list(self.x0)
        return data


@dataclass(frozen=True)
class SwitchingModel:
    """Switching Model DataClass

    Holds the m drivers f_i(t, x, y1..ym, zvar1..zvard), the m x m switching
    costs g_ij(t, x) (zero diagonal), the m terminal payoffs h_i(x),
    the horizon T and the diffusion of the state.
    `transform_rate` records the rate of an applied exponential transform.
    """

    m: int
    horizon: float
    drivers: Tuple[Expression, ...]
    costs: Tuple[Tuple[Expression, ...], ...]
    terminal: Tuple[Expression, ...]
    diffusion: DiffusionSpec
    name: str = "model"
    transform_rate: float = 0.0

    def __post_init__(self):
        err_msg = ""
        k, d = self.diffusion.k, self.diffusion.d
        if self.m < 2:
            err_msg += f"m={self.m} is invalid (Must be 'm >= 2').\n"
        if not (np.isfinite(self.horizon) and self.horizon > 0):
            err_msg += f"horizon={self.horizon} is invalid (Must be 'horizon > 0').\n"
        if len(self.drivers) != self.m:
            err_msg += f"{len(self.drivers)} drivers given (expected m={self.m}).\n"
        if len(self.terminal) != self.m:
            err_msg += f"{len(self.terminal)} terminal payoffs given (expected m={self.m}).\n"
        if len(self.costs) != self.m or any(len(row) != self.m for row in self.costs):
            err_msg += f"costs must be a {self.m}x{self.m} matrix.\n"
        if err_msg:
            raise ValueError(err_msg.rstrip("\n"))

        space = {f"x{q}" for q in range(1, k + 1)}
        roles = {
            "driver": set(declared_names(k, self.m, d)),
            "cost": {"t"} | space,
            "terminal": space,
        }
        exprs = [("driver", e) for e in self.drivers]
        exprs += [("cost", e) for row in self.costs for e in row]
        exprs += [("terminal", e) for e in self.terminal]
        for role, expr in exprs:
            extra = sorted(expr.variables - roles[role])
            if extra:
                err_msg += f"{role} '{expr}' uses undeclared variables {extra}.\n"
        for i in range(self.m):
            g_ii = self.costs[i][i]
            if not (g_ii.is_constant and g_ii.evaluate({}) == 0):
                err_msg += f"g_{i + 1}{i + 1}='{g_ii}' must be identically 0.\n"
        if err_msg:
            raise ValueError(err_msg.rstrip("\n"))

    @staticmethod
    def from_strings(
        m: int,
        horizon: float,
        drivers: Sequence[str],
        costs: Sequence[Sequence[str]],
        terminal: Sequence[str],
        diffusion: DiffusionSpec,
        name: str = "model",
    ) -> SwitchingModel:
        """Parse a switching model from expression strings

        Parameters
        ----------
        m : int
            Number of modes
        horizon : float
            Horizon T
        drivers : Sequence[str]
            m driver expressions in (t, x, y, zvar)
        costs : Sequence[Sequence[str]]
            m x m switching cost expressions in (t, x)
        terminal : Sequence[str]
            m terminal payoff expressions in x
        diffusion : DiffusionSpec
            State diffusion
        name : str, optional
            Model name

        Returns
        -------
        model : SwitchingModel
            Parsed model
        """
        k, d = diffusion.k, diffusion.d
        dims = (k, m, d)
        space = [f"x{q}" for q in range(1, k + 1)]
        if len(costs) != m or any(len(row) != m for row in costs):
            raise ValueError(f"costs must be a {m}x{m} matrix.")
        return SwitchingModel(
            m=m,
            horizon=float(horizon),
            drivers=tuple(parse_expression(s, dims) for s in drivers),
            costs=tuple(
                tuple(parse_expression(s, dims, ["t"] + space) for s in row)
                for row in costs
            ),
            terminal=tuple(parse_expression(s, dims, space) for s in terminal),
            diffusion=diffusion,
            name=name,
        )

    @staticmethod
    def from_dict(data: Mapping[str, Any]) -> SwitchingModel:
        """Build model from a problem file dict (`domain` section is ignored)"""
        try:
            diff = data["diffusion"]
            modes = data["modes"]
            diffusion = DiffusionSpec.from_strings(
                int(diff["k"]), int(diff["d"]), diff["drift"], diff["sigma"]
            )
            return SwitchingModel.from_strings(
                m=int(modes["m"]),
                horizon=float(data["horizon"]),
                drivers=modes["drivers"],
                costs=data["costs"],
                terminal=data["terminal"],
                diffusion=diffusion,
                name=str(data.get("name", "model")),
            )
        except KeyError as e:
            raise ValueError(f"Problem file lacks required key {e}.") from None

    def to_dict(self) -> Dict[str, Any]:
        """Problem file dict (expressions in canonical printed form)"""
        return {
            "name": self.name,
            "horizon": self.horizon,
            "diffusion": self.diffusion.to_dict(),
            "modes": {"m": self.m, "drivers": [str(e) for e in self.drivers]},
            "costs": [[str(e) for e in row] for row in self.costs],
            "terminal": [str(e) for e in self.terminal],
        }

    @staticmethod
    def load(problem_file: Union[str, Path]) -> Tuple[SwitchingModel, Optional[ProblemDomain]]:
        """Load problem file

        Parameters
        ----------
        problem_file : Union[str, Path]
            JSON problem file

        Returns
        -------
        model, domain : Tuple[SwitchingModel, Optional[ProblemDomain]]
            Model & working domain (None if the file has no `domain` section)
        """
        with open(problem_file, encoding="utf-8") as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                err_msg = f"Problem file '{problem_file}' is not valid JSON "
                err_msg += f"(line {e.lineno}, column {e.colno}): {e.msg}"
                raise ValueError(err_msg) from None
        model = SwitchingModel.from_dict(data)
        domain = ProblemDomain.from_dict(data["domain"]) if "domain" in data else None
        return model, domain

    def dump(
        self,
        problem_file: Union[str, Path],
        domain: Optional[ProblemDomain] = None,
    ) -> None:
        """Write problem file

        Parameters
        ----------
        problem_file : Union[str, Path]
            Output JSON file
        domain : Optional[ProblemDomain], optional
            Working domain section
        """
        data = self.to_dict()
        if domain is not None:
            data["domain"] = domain.to_dict()
        with open(problem_file, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2)

    @property
    def dims(self) -> Tuple[int, int, int]:
        """Dimensions (k, m, d)"""
        return (self.diffusion.k, self.m, self.diffusion.d)

    @property
    def is_coupled(self) -> bool:
        """Check any driver depends on y or zvar"""
        return any(self.driver_coupling(i) for i in range(self.m))

    def driver_coupling(self, index: int) -> List[str]:
        """y & zvar names used by driver `index` (0-based)"""
        return sorted(
            v for v in self.drivers[index].variables if v.startswith(("y", "zvar"))
        )

    def evaluate_driver(
        self,
        index: int,
        t: Union[float, np.ndarray],
        points: np.ndarray,
        y: Optional[np.ndarray] = None,
        z: Optional[np.ndarray] = None,
        strict: bool = True,
    ) -> np.ndarray:
        """Evaluate driver f_{index+1}

        Parameters
        ----------
        index : int
            Mode index (0-based)
        t : Union[float, np.ndarray]
            Time
        points : np.ndarray
            State points of shape (N, k)
        y : Optional[np.ndarray], optional
            Mode values of shape (m, N) (Default: zeros)
        z : Optional[np.ndarray], optional
            z-argument of shape (d, N) (Default: zeros)

        Returns
        -------
        values : np.ndarray
            Driver values of shape (N,)
        """
        n = len(points)
        bindings = _coord_bindings(t, points)
        for j in range(self.m):
            bindings[f"y{j + 1}"] = 0.0 if y is None else y[j]
        for r in range(self.diffusion.d):
            bindings[f"zvar{r + 1}"] = 0.0 if z is None else z[r]
        return self.drivers[index].evaluate_array(bindings, shape=(n,), strict=strict)

    def evaluate_costs(
        self, t: Union[float, np.ndarray], points: np.ndarray, strict: bool = True
    ) -> np.ndarray:
        """Switching costs at points (array of shape (m, m, N))"""
        n = len(points)
        bindings = _coord_bindings(t, points)
        costs = np.zeros((self.m, self.m, n))
        for i in range(self.m):
            for j in range(self.m):
                if i != j:
                    costs[i, j] = self.costs[i][j].evaluate_array(
                        bindings, shape=(n,), strict=strict
                    )
        return costs

    def evaluate_terminal(self, points: np.ndarray, strict: bool = True) -> np.ndarray:
        """Terminal payoffs at points (array of shape (m, N))"""
        n = len(points)
        bindings = _coord_bindings(self.horizon, points)
        return np.array(
            [h.evaluate_array(bindings, shape=(n,), strict=strict) for h in self.terminal]
        )


###########################################################
# Assumption report
###########################################################


@dataclass
class CheckEntry:
    """Assumption check result DataClass"""

    name: str
    verdict: str
    witness: Optional[Dict[str, Any]] = None
    detail: str = ""
    info: List[str] = field(default_factory=list)
    directions: Optional[List[List[str]]] = None
    case: Optional[str] = None

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"verdict='{self.verdict}' is invalid ({VERDICTS}).")
        if self.verdict == "refuted" and self.witness is None:
            raise ValueError(f"Refuted check '{self.name}' requires a witness.")

    @property
    def is_refuted(self) -> bool:
        """Check verdict is refuted"""
        return self.verdict == "refuted"

    def to_dict(self) -> Dict[str, Any]:
        """Report dict"""
        data: Dict[str, Any] = {"name": self.name, "verdict": self.verdict}
        if self.witness is not None:
            data["witness"] = self.witness
        if self.detail:
            data["detail"] = self.detail
        if self.info:
            data["info"] = self.info
        if self.directions is not None:
            data["directions"] = self.directions
        if self.case is not None:
            data["case"] = self.case
        return data


@dataclass
class AssumptionReport:
    """Assumption Report DataClass"""

    entries: List[CheckEntry] = field(default_factory=list)

    @property
    def refuted(self) -> List[CheckEntry]:
        """Refuted entries"""
        return [e for e in self.entries if e.is_refuted]

    @property
    def is_certified(self) -> bool:
        """Check no entry is refuted"""
        return len(self.refuted) == 0

    def entry(self, name: str) -> CheckEntry:
        """Get entry by check name"""
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(f"No check named '{name}' in report.")

    def to_dict(self) -> Dict[str, Any]:
        """Report dict"""
        return {
            "certified": self.is_certified,
            "checks": [e.to_dict() for e in self.entries],
        }


def _point_dict(t: Optional[float], x: np.ndarray) -> Dict[str, Any]:
    point: Dict[str, Any] = {} if t is None else {"t": float(t)}
    point["x"] = [float(v) for v in x]
    return point


def sample_points(
    model: SwitchingModel,
    box: Box,
    n_samples: int = 256,
    seed: int = 0,
) -> Tuple[np.ndarray, np.ndarray]:
    """Uniform random (t, x) samples in [0, T] x box

    Parameters
    ----------
    model : SwitchingModel
        Target model
    box : Box
        Per-dimension (lo, hi) state ranges
    n_samples : int, optional
        Number of samples
    seed : int, optional
        Random seed

    Returns
    -------
    times, points : Tuple[np.ndarray, np.ndarray]
        Times of shape (S,) and points of shape (S, k)
    """
    if len(box) != model.diffusion.k:
        raise ValueError(f"box dimension {len(box)} != k={model.diffusion.k}.")
    if n_samples < 1:
        raise ValueError(f"n_samples={n_samples} is invalid (Must be 'n_samples >= 1').")
    rng = np.random.default_rng(seed)
    times = rng.uniform(0, model.horizon, n_samples)
    lo = np.array([b[0] for b in box], dtype=float)
    hi = np.array([b[1] for b in box], dtype=float)
    points = lo + (hi - lo) * rng.random((n_samples, len(box)))
    return times, points


def probe_box(model: SwitchingModel, box: Box, value_range: float = 10.0) -> ProbeBox:
    """Probe ranges for every declared name

    Parameters
    ----------
    model : SwitchingModel
        Target model
    box : Box
        Per-dimension (lo, hi) state ranges
    value_range : float, optional
        y and zvar are probed in [-value_range, value_range]

    Returns
    -------
    ranges : ProbeBox
        Name & (lo, hi) dict
    """
    k, m, d = model.dims
    ranges: ProbeBox = {"t": (0.0, model.horizon)}
    for q in range(k):
        ranges[f"x{q + 1}"] = (float(box[q][0]), float(box[q][1]))
    for j in range(m):
        ranges[f"y{j + 1}"] = (-value_range, value_range)
    for r in range(d):
        ranges[f"zvar{r + 1}"] = (-value_range, value_range)
    return ranges


def check_no_free_loop(
    model: SwitchingModel,
    times: np.ndarray,
    points: np.ndarray,
) -> CheckEntry:
    """Check the no-free-loop property on samples

    Every simple cycle of distinct modes must have a positive total cost.
    Cycles are enumerated exhaustively in depth-first order from each start mode.

    Parameters
    ----------
    model : SwitchingModel
        Target model
    times : np.ndarray
        Sample times of shape (S,)
    points : np.ndarray
        Sample points of shape (S, k)

    Returns
    -------
    entry : CheckEntry
        `no-free-loop` entry
    """
    name = "no-free-loop"
    if model.m > MAX_CYCLE_MODES:
        err_msg = f"m={model.m} exceeds the cycle enumeration cap ({MAX_CYCLE_MODES})."
        raise ValueError(err_msg)
    if len(points) == 0:
        raise ValueError("No sample point given.")
    costs = model.evaluate_costs(np.asarray(times), points)

    def search(path: List[int], path_cost: np.ndarray) -> Optional[CheckEntry]:
        start = path[0]
        if len(path) >= 2:
            cycle_cost = path_cost + costs[path[-1], start]
            bad = np.flatnonzero(cycle_cost <= 0)
            if len(bad) > 0:
                s = bad[0]
                cycle = [i + 1 for i in path] + [start + 1]
                witness = _point_dict(times[s], points[s])
                witness.update(cycle=cycle, cost=float(cycle_cost[s]))
                return CheckEntry(name, "refuted", witness, f"cycle {cycle} costs <= 0")
        for j in range(start + 1, model.m):
            if j not in path:
                found = search(path + [j], path_cost + costs[path[-1], j])
                if found is not None:
                    return found
        return None

    for start in range(model.m):
        found = search([start], np.zeros(len(points)))
        if found is not None:
            logger.warning(f"No-free-loop refuted: {found.witness}")
            return found
    return CheckEntry(name, "certified-on-samples", detail=f"{len(points)} samples")


def check_terminal_consistency(model: SwitchingModel, x_samples: np.ndarray) -> CheckEntry:
    """Check h_i(x) >= max_{j!=i}(h_j(x) - g_ij(T, x)) on samples

    Parameters
    ----------
    model : SwitchingModel
        Target model
    x_samples : np.ndarray
        Sample points of shape (S, k)

    Returns
    -------
    entry : CheckEntry
        `terminal-consistency` entry (info flag when some g_ij(T, x) = 0)
    """
    name = "terminal-consistency"
    if len(x_samples) == 0:
        raise ValueError("No sample point given.")
    h = model.evaluate_terminal(x_samples)
    g = model.evaluate_costs(model.horizon, x_samples)
    info = []
    for i in range(model.m):
        for j in range(model.m):
            if i == j:
                continue
            zero = np.flatnonzero(g[i, j] == 0)
            if len(zero) > 0:
                x = [float(v) for v in x_samples[zero[0]]]
                info.append(f"g_{i + 1}{j + 1}(T, x) = 0 at x={x}")
            slack = h[i] - (h[j] - g[i, j])
            bad = np.flatnonzero(slack < -1e-12 * (1 + np.abs(h[i])))
            if len(bad) > 0:
                s = bad[0]
                witness = _point_dict(None, x_samples[s])
                witness.update(i=i + 1, j=j + 1, slack=float(slack[s]))
                detail = f"h_{i + 1} < h_{j + 1} - g_{i + 1}{j + 1}(T, x)"
                return CheckEntry(name, "refuted", witness, detail, info)
    detail = f"{len(x_samples)} samples"
    return CheckEntry(name, "certified-on-samples", detail=detail, info=info)


def check_nonnegative_costs(
    model: SwitchingModel,
    times: np.ndarray,
    points: np.ndarray,
) -> CheckEntry:
    """Check g_ij(t, x) >= 0 (i != j) on samples"""
    name = "nonnegative-costs"
    costs = model.evaluate_costs(np.asarray(times), points)
    for i in range(model.m):
        for j in range(model.m):
            if i == j:
                continue
            bad = np.flatnonzero(costs[i, j] < 0)
            if len(bad) > 0:
                s = bad[0]
                witness = _point_dict(times[s], points[s])
                witness.update(i=i + 1, j=j + 1, cost=float(costs[i, j, s]))
                return CheckEntry(name, "refuted", witness, f"g_{i + 1}{j + 1} < 0")
    return CheckEntry(name, "certified-on-samples", detail=f"{len(points)} samples")


def check_diffusion_regularity(
    diffusion: DiffusionSpec,
    ranges: ProbeBox,
    n_samples: int = 256,
    seed: int = 0,
) -> CheckEntry:
    """Probe Lipschitz constants in x and the linear growth ratio of b and sigma

    Parameters
    ----------
    diffusion : DiffusionSpec
        Target diffusion
    ranges : ProbeBox
        Probe ranges of `t` and `x1..xk`
    n_samples : int, optional
        Number of probes
    seed : int, optional
        Random seed

    Returns
    -------
    entry : CheckEntry
        `diffusion-regularity` entry
    """
    name = "diffusion-regularity"
    space = {v: r for v, r in ranges.items() if v == "t" or v.startswith("x")}
    try:
        lipschitz = 0.0
        for expr in diffusion.expressions:
            for q in range(1, diffusion.k + 1):
                lipschitz = max(lipschitz, probe_lipschitz(expr, f"x{q}", space, n_samples, seed))
        rng = np.random.default_rng(seed)
        t = rng.uniform(*space["t"], n_samples)
        points = np.column_stack(
            [rng.uniform(*space[f"x{q}"], n_samples) for q in range(1, diffusion.k + 1)]
        )
        b = diffusion.drift_at(t, points)
        s = diffusion.sigma_at(t, points)
    except DomainError as e:
        witness = {"point": e.point, "expression": str(e.subexpression)}
        return CheckEntry(name, "refuted", witness, str(e))
    size = np.linalg.norm(b, axis=0) + np.sqrt(np.sum(s**2, axis=(0, 1)))
    growth = float(np.max(size / (1 + np.linalg.norm(points, axis=1))))
    detail = f"probed Lipschitz constant in x: {lipschitz:.6g}, growth ratio: {growth:.6g}"
    return CheckEntry(name, "certified-on-samples", detail=detail)


def driver_lipschitz_constant(
    model: SwitchingModel,
    ranges: ProbeBox,
    n_samples: int = 256,
    seed: int = 0,
) -> float:
    """Probed Lipschitz constant C_f of the drivers in (y, zvar)

    Parameters
    ----------
    model : SwitchingModel
        Target model
    ranges : ProbeBox
        Probe ranges for every declared name
    n_samples : int, optional
        Number of secant pairs
    seed : int, optional
        Random seed

    Returns
    -------
    c_f : float
        Max probed constant over drivers and coupling variables
    """
    c_f = 0.0
    for i in range(model.m):
        for var in model.driver_coupling(i):
            c_f = max(c_f, probe_lipschitz(model.drivers[i], var, ranges, n_samples, seed))
    return c_f


def _direction(slopes: np.ndarray) -> str:
    if len(slopes) == 0:
        return "constant"
    eps = 1e-9 * (1 + float(np.max(np.abs(slopes))))
    if np.all(np.abs(slopes) <= eps):
        return "constant"
    if np.all(slopes >= -eps):
        return "nondecreasing"
    if np.all(slopes <= eps):
        return "nonincreasing"
    return "mixed"


def classify_monotonicity(
    model: SwitchingModel,
    ranges: ProbeBox,
    n_samples: int = 256,
    seed: int = 0,
) -> CheckEntry:
    """Classify the direction of every driver f_i in every y_j

    Parameters
    ----------
    model : SwitchingModel
        Target model
    ranges : ProbeBox
        Probe ranges for every declared name (see `probe_box`)
    n_samples : int, optional
        Number of secant pairs per (i, j)
    seed : int, optional
        Random seed

    Returns
    -------
    entry : CheckEntry
        `monotonicity` entry. `directions[i][j]` holds the direction of
        f_i in y_j (the diagonal is the own-variable direction).
        `case` is `increasing-case`, `decreasing-case` or `general`
        from the off-diagonal directions.
    """
    if n_samples < 2:
        raise ValueError(f"n_samples={n_samples} is invalid (Must be 'n_samples >= 2').")
    directions = [["constant"] * model.m for _ in range(model.m)]
    witness = None
    for i in range(model.m):
        expr = model.drivers[i]
        for j in range(model.m):
            var = f"y{j + 1}"
            if var not in expr.variables:
                continue
            slopes = secant_slopes(expr, var, ranges, n_samples, seed)
            directions[i][j] = _direction(slopes)
            if directions[i][j] == "mixed" and i != j and witness is None:
                witness = {
                    "i": i + 1,
                    "j": j + 1,
                    "min_slope": float(np.min(slopes)),
                    "max_slope": float(np.max(slopes)),
                }
    cross = {directions[i][j] for i in range(model.m) for j in range(model.m) if i != j}
    info = []
    if cross <= {"constant"}:
        info.append("drivers do not depend on the other modes' values")
    if cross <= {"nondecreasing", "constant"}:
        case = "increasing-case"
    elif cross <= {"nonincreasing", "constant"}:
        case = "decreasing-case"
    else:
        case = "general"
    logger.info(f"Monotonicity of '{model.name}': {case}")
    return CheckEntry(
        "monotonicity",
        "certified-on-samples",
        witness,
        detail=f"{n_samples} secant pairs per direction",
        info=info,
        directions=directions,
        case=case,
    )


def admits_scheme(entry: CheckEntry, scheme: str) -> bool:
    """Check off-diagonal directions allow a monotone scheme

    Parameters
    ----------
    entry : CheckEntry
        `monotonicity` entry
    scheme : str
        `increasing` or `decreasing`

    Returns
    -------
    result : bool
        True if every cross direction is constant or matches the scheme
    """
    if entry.directions is None:
        raise ValueError("Entry holds no monotonicity directions.")
    target = {"increasing": "nondecreasing", "decreasing": "nonincreasing"}[scheme]
    m = len(entry.directions)
    return all(
        entry.directions[i][j] in (target, "constant")
        for i in range(m)
        for j in range(m)
        if i != j
    )


def _domain_failure(
    name: str,
    error: DomainError,
    times: Optional[np.ndarray] = None,
    points: Optional[np.ndarray] = None,
) -> CheckEntry:
    """Refuted entry for an expression that left its domain at a sample"""
    witness: Dict[str, Any] = {"expression": str(error.subexpression)}
    if error.point is not None:
        witness["point"] = error.point
    elif error.index and points is not None:
        s = error.index[-1]
        witness.update(_point_dict(None if times is None else times[s], points[s]))
    return CheckEntry(name, "refuted", witness, str(error))


def check_assumptions(
    model: SwitchingModel,
    box: Box,
    n_samples: int = 256,
    seed: int = 0,
    value_range: float = 10.0,
) -> AssumptionReport:
    """Run every sampled assumption check

    Parameters
    ----------
    model : SwitchingModel
        Target model
    box : Box
        Working box
    n_samples : int, optional
        Number of samples per check
    seed : int, optional
        Random seed
    value_range : float, optional
        Probe range of y and zvar

    Returns
    -------
    report : AssumptionReport
        Full report
    """
    report = AssumptionReport()
    ranges = probe_box(model, box, value_range)
    times, points = sample_points(model, box, n_samples, seed)

    entry = check_diffusion_regularity(model.diffusion, ranges, n_samples, seed)
    report.entries.append(entry)

    # Drivers
    try:
        c_f = driver_lipschitz_constant(model, ranges, n_samples, seed)
        detail = f"probed driver Lipschitz constant C_f: {c_f:.6g}"
        entry = CheckEntry("driver-lipschitz", "certified-on-samples", detail=detail)
        report.entries.append(entry)
        report.entries.append(classify_monotonicity(model, ranges, n_samples, seed))
    except DomainError as e:
        report.entries.append(_domain_failure("driver-lipschitz", e))

    # Switching costs & terminal payoffs
    checks = [
        ("nonnegative-costs", lambda: check_nonnegative_costs(model, times, points)),
        ("no-free-loop", lambda: check_no_free_loop(model, times, points)),
        ("terminal-consistency", lambda: check_terminal_consistency(model, points)),
    ]
    for name, check in checks:
        try:
            report.entries.append(check())
        except DomainError as e:
            report.entries.append(_domain_failure(name, e, times, points))

    for role in ("driver", "cost", "terminal"):
        detail = "polynomial growth is not decidable on samples"
        report.entries.append(CheckEntry(f"{role}-polynomial-growth", "skipped", detail=detail))

    for e in report.refuted:
        logger.warning(f"Assumption '{e.name}' refuted: {e.detail}")
    return report
