"""Monte Carlo validation of solved value fields

Paths of the state diffusion are simulated by Euler-Maruyama, the optimal
switching strategy is read off the solved fields along every path and the
realized payoff is compared against v_{i0}(t0, x0).
"""

from __future__ import annotations

import csv
import logging
import multiprocessing as mp
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np

from pyoptswitch.grid import ValueFields, interpolate, interpolate_many
from pyoptswitch.model import DiffusionSpec, SwitchingModel
from pyoptswitch.utils import header_lines

logger = logging.getLogger(__name__)

# Bumped whenever the path construction changes (reproducibility key)
SIMULATION_VERSION = 1
MIN_VALID_FRACTION = 0.9
DEFAULT_SWITCH_TOL = 1e-7


def path_generator(seed: int, path_index: int) -> np.random.Generator:
    """Independent random stream of one path

    Parameters
    ----------
    seed : int
        Master seed
    path_index : int
        Path number (stream key)

    Returns
    -------
    rng : np.random.Generator
        Generator that depends only on (seed, path_index)
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(path_index,)))


def _draw_normals(seed: int, start: int, stop: int, n_steps: int, d: int) -> np.ndarray:
    """Standard normals of paths [start, stop) (array of shape (stop-start, n_steps, d))"""
    return np.array(
        [path_generator(seed, p).standard_normal((n_steps, d)) for p in range(start, stop)]
    ).reshape(stop - start, n_steps, d)


@dataclass
class PathSet:
    """Simulated Paths DataClass

    `states[p, s]` is X at `times[s]` on path p. Paths that hit an expression
    domain error or a non-finite state are frozen and flagged invalid.
    """

    states: np.ndarray
    increments: np.ndarray
    times: np.ndarray
    seed: int
    valid: np.ndarray
    version: int = SIMULATION_VERSION

    @property
    def n_paths(self) -> int:
        """Number of paths"""
        return self.states.shape[0]

    @property
    def n_steps(self) -> int:
        """Number of Euler steps"""
        return self.states.shape[1] - 1

    @property
    def dt(self) -> float:
        """Euler step size"""
        return float(self.times[1] - self.times[0])

    @property
    def n_flagged(self) -> int:
        """Number of paths excluded by domain errors"""
        return int(np.sum(~self.valid))

    def subset(self, indices: Sequence[int]) -> PathSet:
        """Paths at `indices` as a new PathSet"""
        idx = np.asarray(indices, dtype=int)
        return PathSet(
            self.states[idx],
            self.increments[idx],
            self.times,
            self.seed,
            self.valid[idx],
            self.version,
        )


def simulate_paths(
    diffusion: DiffusionSpec,
    t0: float,
    x0: Sequence[float],
    n_paths: int,
    n_steps: int,
    seed: int = 0,
    *,
    horizon: float,
    process_num: int = 1,
) -> PathSet:
    """Euler-Maruyama paths of X from (t0, x0) up to the horizon

    X_{s+dt} = X_s + b(s, X_s) dt + sigma(s, X_s) sqrt(dt) xi

    Parameters
    ----------
    diffusion : DiffusionSpec
        Drift & volatility
    t0 : float
        Start time
    x0 : Sequence[float]
        Start point (k coordinates)
    n_paths : int
        Number of paths
    n_steps : int
        Number of Euler steps
    seed : int, optional
        Master seed (path p draws from its own substream)
    horizon : float
        Terminal time T
    process_num : int, optional
        Processes used to draw the normals

    Returns
    -------
    paths : PathSet
        Simulated paths
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    err_msg = ""
    if n_paths < 1:
        err_msg += f"n_paths={n_paths} is invalid (Must be 'n_paths >= 1').\n"
    if n_steps < 1:
        err_msg += f"n_steps={n_steps} is invalid (Must be 'n_steps >= 1').\n"
    if not t0 < horizon:
        err_msg += f"t0={t0} is invalid (Must be 't0 < {horizon}').\n"
    if len(x0) != diffusion.k:
        err_msg += f"x0 has {len(x0)} coordinates (k={diffusion.k}).\n"
    if process_num < 1:
        err_msg += f"process_num={process_num} is invalid (Must be 'process_num >= 1').\n"
    if err_msg:
        raise ValueError(err_msg.rstrip("\n"))

    d = diffusion.d
    times = np.linspace(t0, horizon, n_steps + 1)
    dt = (horizon - t0) / n_steps
    if process_num == 1 or n_paths < 2 * process_num:
        normals = _draw_normals(seed, 0, n_paths, n_steps, d)
    else:
        bounds = np.linspace(0, n_paths, process_num + 1).astype(int)
        mp_data_list = [
            (seed, int(lo), int(hi), n_steps, d) for lo, hi in zip(bounds[:-1], bounds[1:])
        ]
        with mp.Pool(processes=process_num) as p:
            normals = np.concatenate(p.starmap(_draw_normals, mp_data_list))
    increments = np.sqrt(dt) * normals

    states = np.empty((n_paths, n_steps + 1, diffusion.k))
    states[:, 0] = x0
    valid = np.ones(n_paths, dtype=bool)
    deterministic = diffusion.is_deterministic
    for s in range(n_steps):
        x = states[:, s]
        drift = diffusion.drift_at(times[s], x, strict=False).T
        step = x + drift * dt
        if not deterministic:
            sigma = diffusion.sigma_at(times[s], x, strict=False)
            step = step + np.einsum("qrp,pr->pq", sigma, increments[:, s])
        bad = ~np.all(np.isfinite(step), axis=1)
        step[bad] = x[bad]
        valid &= ~bad
        states[:, s + 1] = step

    flagged = int(np.sum(~valid))
    if flagged > 0:
        logger.warning(f"{flagged}/{n_paths} path(s) flagged by domain errors")
    logger.debug(f"Simulated {n_paths} paths x {n_steps} steps (seed={seed})")
    return PathSet(states, increments, times, seed, valid)


###########################################################
# Strategies
###########################################################


@dataclass
class Strategy:
    """Switching Strategy DataClass

    Switch n happens at `times[n]` into mode `modes[n]` (1-based).
    """

    i0: int
    times: List[float] = field(default_factory=list)
    modes: List[int] = field(default_factory=list)
    chattering: bool = False

    def __post_init__(self):
        err_msg = ""
        if self.i0 < 1:
            err_msg += f"i0={self.i0} is invalid (Must be 'i0 >= 1').\n"
        if len(self.times) != len(self.modes):
            err_msg += f"{len(self.times)} switch times for {len(self.modes)} modes.\n"
        if any(b < a for a, b in zip(self.times[:-1], self.times[1:])):
            err_msg += f"switch times {self.times} are not nondecreasing.\n"
        previous = self.i0
        for mode in self.modes:
            if mode < 1 or mode == previous:
                err_msg += f"switch {previous} -> {mode} is invalid.\n"
            previous = mode
        if err_msg:
            raise ValueError(err_msg.rstrip("\n"))

    @property
    def n_switches(self) -> int:
        """Number of switches"""
        return len(self.modes)

    @property
    def final_mode(self) -> int:
        """Mode after the last switch"""
        return self.modes[-1] if self.modes else self.i0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "i0": self.i0,
            "times": list(self.times),
            "modes": list(self.modes),
            "chattering": self.chattering,
        }


def _step_index(times: np.ndarray, tau: float) -> int:
    """Time step of switch time `tau` on the path time grid"""
    s = int(np.argmin(np.abs(times - tau)))
    if abs(times[s] - tau) > 1e-9 * (1 + abs(tau)):
        err_msg = f"switch time {tau} is not on the path time grid "
        err_msg += f"[{times[0]}, {times[-1]}] (dt={times[1] - times[0]})."
        raise ValueError(err_msg)
    return s


def extract_strategies(
    fields: ValueFields,
    paths: PathSet,
    i0: int,
    model: SwitchingModel,
    switch_tol: float = DEFAULT_SWITCH_TOL,
    max_switches: Optional[int] = None,
) -> List[Strategy]:
    """Read the optimal strategy off the fields along every path

    At each step before the horizon the current mode i switches to
    argmax_{j != i}(v_j - g_ij) (smallest index on ties) when
    v_i - max_{j != i}(v_j - g_ij) <= switch_tol (1 + |v_i|).
    At most one switch happens per step.

    Parameters
    ----------
    fields : ValueFields
        Solved value fields
    paths : PathSet
        Simulated paths
    i0 : int
        Initial mode (1-based)
    model : SwitchingModel
        Model the fields solve
    switch_tol : float, optional
        Relative switching tolerance
    max_switches : Optional[int], optional
        Switch cap per path (Default: 50 m)

    Returns
    -------
    strategies : List[Strategy]
        One strategy per path (paths over the cap are flagged chattering)
    """
    m = model.m
    if fields.m != m:
        raise ValueError(f"fields have {fields.m} modes (model m={m}).")
    if not 1 <= i0 <= m:
        raise ValueError(f"i0={i0} is invalid (Must be '1 <= i0 <= {m}').")
    if switch_tol < 0:
        raise ValueError(f"switch_tol={switch_tol} is invalid (Must be 'switch_tol >= 0').")
    cap = 50 * m if max_switches is None else max_switches

    n_paths = paths.n_paths
    rows = np.arange(n_paths)
    mode = np.full(n_paths, i0 - 1)
    counts = np.zeros(n_paths, dtype=int)
    chattering = np.zeros(n_paths, dtype=bool)
    switch_times: List[List[float]] = [[] for _ in range(n_paths)]
    switch_modes: List[List[int]] = [[] for _ in range(n_paths)]
    for s in range(paths.n_steps):
        t = float(paths.times[s])
        x = paths.states[:, s]
        values = interpolate_many(fields, t, x)
        costs = model.evaluate_costs(t, x, strict=False)
        current = values[mode, rows]
        candidates = values.T - costs[mode, :, rows]
        candidates[rows, mode] = -np.inf
        target = np.argmax(candidates, axis=1)
        gap = current - candidates[rows, target]
        active = paths.valid & ~chattering & np.isfinite(gap)
        fire = active & (gap <= switch_tol * (1 + np.abs(current)))
        over = fire & (counts >= cap)
        chattering |= over
        fire &= ~over
        for p in np.flatnonzero(fire):
            switch_times[p].append(t)
            switch_modes[p].append(int(target[p]) + 1)
        mode[fire] = target[fire]
        counts[fire] += 1

    n_chattering = int(np.sum(chattering))
    if n_chattering > 0:
        logger.warning(f"{n_chattering} path(s) exceeded the switch cap {cap} (chattering)")
    return [
        Strategy(i0, switch_times[p], switch_modes[p], bool(chattering[p]))
        for p in range(n_paths)
    ]


def extract_strategy(
    fields: ValueFields,
    path: PathSet,
    i0: int,
    model: SwitchingModel,
    switch_tol: float = DEFAULT_SWITCH_TOL,
    max_switches: Optional[int] = None,
) -> Strategy:
    """Optimal strategy along a single path (see `extract_strategies`)"""
    if path.n_paths != 1:
        raise ValueError(f"Expected a single path ({path.n_paths} given).")
    return extract_strategies(fields, path, i0, model, switch_tol, max_switches)[0]


###########################################################
# Payoffs
###########################################################


@dataclass
class PayoffEntry:
    """Realized payoff of one path"""

    profit: float
    cost: float
    terminal: float
    total: float


@dataclass
class PayoffSample:
    """Payoff Sample DataClass

    Per path: total = profit - cost + terminal. Aggregates use valid paths only.
    """

    profit: np.ndarray
    cost: np.ndarray
    terminal: np.ndarray
    total: np.ndarray
    valid: np.ndarray
    n_switches: np.ndarray
    first_switch: np.ndarray

    @property
    def n_paths(self) -> int:
        return len(self.total)

    @property
    def n_valid(self) -> int:
        return int(np.sum(self.valid))

    @property
    def mean(self) -> float:
        """Mean total payoff over valid paths"""
        if self.n_valid == 0:
            return float("nan")
        return float(np.mean(self.total[self.valid]))

    @property
    def se(self) -> float:
        """Standard error of the mean"""
        n = self.n_valid
        if n < 2:
            return 0.0
        return float(np.std(self.total[self.valid], ddof=1) / np.sqrt(n))

    def entry(self, p: int) -> PayoffEntry:
        """Payoff of path p"""
        return PayoffEntry(
            float(self.profit[p]),
            float(self.cost[p]),
            float(self.terminal[p]),
            float(self.total[p]),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mean": self.mean,
            "se": self.se,
            "n_paths": self.n_paths,
            "n_valid": self.n_valid,
        }

    def write_csv(
        self,
        outfile: Union[str, Path],
        header: Optional[Mapping[str, str]] = None,
    ) -> None:
        """Write per-path payoffs as CSV

        Parameters
        ----------
        outfile : Union[str, Path]
            Output CSV file
        header : Optional[Mapping[str, str]], optional
            Output header written as leading `#` lines
        """
        with open(outfile, "w", encoding="utf-8", newline="") as f:
            for line in header_lines(header or {}):
                f.write(line + "\n")
            writer = csv.writer(f)
            writer.writerow(
                ["path", "valid", "profit", "cost", "terminal", "total", "switches"]
            )
            for p in range(self.n_paths):
                writer.writerow(
                    [
                        p,
                        int(self.valid[p]),
                        repr(float(self.profit[p])),
                        repr(float(self.cost[p])),
                        repr(float(self.terminal[p])),
                        repr(float(self.total[p])),
                        int(self.n_switches[p]),
                    ]
                )


def _field_gradient(
    fields: ValueFields, t: float, x: np.ndarray, mode: int
) -> np.ndarray:
    """Central-difference gradient of interpolated v_mode (array of shape (k, P))"""
    grid = fields.grid
    lo = np.array([b[0] for b in grid.box])
    hi = np.array([b[1] for b in grid.box])
    inside = np.clip(x, lo, hi)
    grad = np.empty((grid.k, len(x)))
    for q in range(grid.k):
        shift = np.zeros(grid.k)
        shift[q] = grid.spacing[q]
        plus = np.clip(inside + shift, lo, hi)
        minus = np.clip(inside - shift, lo, hi)
        width = plus[:, q] - minus[:, q]
        diff = interpolate_many(fields, t, plus)[mode] - interpolate_many(fields, t, minus)[mode]
        grad[q] = diff / width
    return grad


def evaluate_payoffs(
    paths: PathSet,
    strategies: Sequence[Strategy],
    model: SwitchingModel,
    fields: Optional[ValueFields] = None,
) -> PayoffSample:
    """Realized payoffs of strategies along paths

    Left-endpoint quadrature of f_{a_s} along each path (a_s is the mode held
    on [t_s, t_{s+1}) after the switches at t_s), switching costs charged at
    every switch time before the horizon and the terminal payoff h_{a_T}(X_T).
    Coupled drivers get y = v(s, X_s) and z = sigma^T grad v_{a_s}(s, X_s)
    from the fields.

    Parameters
    ----------
    paths : PathSet
        Simulated paths
    strategies : Sequence[Strategy]
        One strategy per path
    model : SwitchingModel
        Target model
    fields : Optional[ValueFields], optional
        Solved fields (required for coupled drivers)

    Returns
    -------
    sample : PayoffSample
        Per-path payoffs & aggregates
    """
    n_paths, n_steps = paths.n_paths, paths.n_steps
    if len(strategies) != n_paths:
        raise ValueError(f"{len(strategies)} strategies for {n_paths} paths.")
    m = model.m
    coupled = [bool(model.driver_coupling(i)) for i in range(m)]
    if any(coupled) and fields is None:
        raise ValueError("Coupled drivers need solved fields for payoff evaluation.")
    times = paths.times
    dt = paths.dt

    modes = np.empty((n_paths, n_steps + 1), dtype=int)
    cost = np.zeros(n_paths)
    n_switches = np.zeros(n_paths, dtype=int)
    first_switch = np.full(n_paths, np.nan)
    events: Dict[int, List[tuple]] = {}
    for p, strategy in enumerate(strategies):
        if strategy.i0 > m or any(mode > m for mode in strategy.modes):
            raise ValueError(f"Strategy of path {p} uses a mode beyond m={m}.")
        previous = strategy.i0 - 1
        modes[p] = previous
        for tau, target in zip(strategy.times, strategy.modes):
            s = _step_index(times, tau)
            if s == n_steps:
                # no switch at the horizon
                continue
            modes[p, s:] = target - 1
            events.setdefault(s, []).append((p, previous, target - 1))
            if n_switches[p] == 0:
                first_switch[p] = times[s]
            n_switches[p] += 1
            previous = target - 1

    for s in sorted(events):
        idx = np.array([e[0] for e in events[s]])
        g = model.evaluate_costs(times[s], paths.states[idx, s], strict=False)
        for j, (_, i_from, i_to) in enumerate(events[s]):
            cost[idx[j]] += g[i_from, i_to, j]

    profit = np.zeros(n_paths)
    for s in range(n_steps):
        x = paths.states[:, s]
        for i in range(m):
            sel = np.flatnonzero(modes[:, s] == i)
            if len(sel) == 0:
                continue
            y = z = None
            if coupled[i]:
                y = interpolate_many(fields, times[s], x[sel])
                sigma = model.diffusion.sigma_at(times[s], x[sel], strict=False)
                grad = _field_gradient(fields, times[s], x[sel], i)
                z = np.einsum("qrp,qp->rp", sigma, grad)
            drive = model.evaluate_driver(i, times[s], x[sel], y, z, strict=False)
            profit[sel] += dt * drive

    terminal_all = model.evaluate_terminal(paths.states[:, n_steps], strict=False)
    terminal = terminal_all[modes[:, n_steps], np.arange(n_paths)]
    total = profit - cost + terminal
    chattering = np.array([st.chattering for st in strategies], dtype=bool)
    valid = paths.valid & ~chattering & np.isfinite(total)
    return PayoffSample(profit, cost, terminal, total, valid, n_switches, first_switch)


def evaluate_payoff(
    path: PathSet,
    strategy: Strategy,
    model: SwitchingModel,
    fields: Optional[ValueFields] = None,
) -> PayoffEntry:
    """Realized payoff of one strategy along a single path (see `evaluate_payoffs`)"""
    if path.n_paths != 1:
        raise ValueError(f"Expected a single path ({path.n_paths} given).")
    return evaluate_payoffs(path, [strategy], model, fields).entry(0)


###########################################################
# Representation check
###########################################################


@dataclass
class ValidationReport:
    """Representation Validation Report DataClass"""

    value: float
    mc_mean: float
    mc_se: float
    references: Dict[str, float]
    budget: float
    verdict: Optional[bool]
    t0: float
    x0: List[float]
    i0: int
    n_paths: int
    n_steps: int
    seed: int
    n_valid: int
    n_domain_flagged: int
    n_chattering: int
    mean_switches: float
    first_switch: Optional[Dict[str, float]]
    clamp_count: int
    payoffs: Optional[PayoffSample] = field(default=None, repr=False, compare=False)

    @property
    def status(self) -> str:
        """PASS, FAIL or NO-VERDICT"""
        if self.verdict is None:
            return "NO-VERDICT"
        return "PASS" if self.verdict else "FAIL"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "value": self.value,
            "mc_mean": self.mc_mean,
            "mc_se": self.mc_se,
            "references": dict(self.references),
            "budget": self.budget,
            "status": self.status,
            "t0": self.t0,
            "x0": self.x0,
            "i0": self.i0,
            "n_paths": self.n_paths,
            "n_steps": self.n_steps,
            "seed": self.seed,
            "simulation_version": SIMULATION_VERSION,
            "flagged": {
                "domain": self.n_domain_flagged,
                "chattering": self.n_chattering,
                "valid": self.n_valid,
            },
            "strategy": {
                "mean_switches": self.mean_switches,
                "first_switch": self.first_switch,
            },
            "clamp_count": self.clamp_count,
        }


def _midpoint_strategies(
    fields: ValueFields, paths: PathSet, i0: int, model: SwitchingModel
) -> List[Strategy]:
    """Switch once at the middle step into the best alternative mode"""
    s = paths.n_steps // 2
    t = float(paths.times[s])
    x = paths.states[:, s]
    rows = np.arange(paths.n_paths)
    costs = model.evaluate_costs(t, x, strict=False)[i0 - 1]
    candidates = (interpolate_many(fields, t, x) - costs).T
    candidates[rows, i0 - 1] = -np.inf
    candidates[~np.isfinite(candidates)] = -np.inf
    target = np.argmax(candidates, axis=1)
    return [Strategy(i0, [t], [int(target[p]) + 1]) for p in range(paths.n_paths)]


def scheme_bias_budget(fields: ValueFields, constant: float = 1.0) -> float:
    """Discretization bias allowance C (dt + dx^2) of the fields' grid"""
    grid = fields.grid
    return constant * (grid.dt(fields.horizon) + float(np.max(grid.spacing)) ** 2)


def validate_representation(
    fields: ValueFields,
    model: SwitchingModel,
    t0: float,
    x0: Sequence[float],
    i0: int,
    n_paths: int = 10_000,
    n_steps: Optional[int] = None,
    seed: int = 0,
    switch_tol: float = DEFAULT_SWITCH_TOL,
    max_switches: Optional[int] = None,
    budget_constant: float = 1.0,
    budget: Optional[float] = None,
    process_num: int = 1,
) -> ValidationReport:
    """Compare v_{i0}(t0, x0) with the realized payoff of the extracted strategy

    PASS when |value - mc_mean| <= 2 SE + budget and every reference strategy
    (never-switch, midpoint-switch) scores at most mc_mean + 2 SE.
    No verdict when fewer than 90% of the paths stay valid.

    Parameters
    ----------
    fields : ValueFields
        Solved value fields
    model : SwitchingModel
        Model the fields solve
    t0 : float
        Start time
    x0 : Sequence[float]
        Start point
    i0 : int
        Initial mode (1-based)
    n_paths : int, optional
        Number of paths
    n_steps : Optional[int], optional
        Euler steps (Default: grid time steps between t0 and the horizon)
    seed : int, optional
        Master seed
    switch_tol : float, optional
        Relative switching tolerance
    max_switches : Optional[int], optional
        Switch cap per path (Default: 50 m)
    budget_constant : float, optional
        C in the bias budget C (dt + dx^2)
    budget : Optional[float], optional
        Explicit bias budget (overrides `budget_constant`)
    process_num : int, optional
        Processes used to draw the normals

    Returns
    -------
    report : ValidationReport
        Comparison record
    """
    if not fields.converged:
        raise ValueError("Fields did not converge (representation check refused).")
    horizon = fields.horizon
    if n_steps is None:
        n_steps = max(1, int(round((horizon - t0) / fields.grid.dt(horizon))))
    if budget is None:
        budget = scheme_bias_budget(fields, budget_constant)
    if budget < 0:
        raise ValueError(f"budget={budget} is invalid (Must be 'budget >= 0').")
    x0 = [float(c) for c in x0]

    clamp_before = fields.clamp_count
    value = interpolate(fields, i0, t0, x0)
    paths = simulate_paths(
        model.diffusion,
        t0,
        x0,
        n_paths,
        n_steps,
        seed,
        horizon=horizon,
        process_num=process_num,
    )
    strategies = extract_strategies(fields, paths, i0, model, switch_tol, max_switches)
    payoffs = evaluate_payoffs(paths, strategies, model, fields)
    never = evaluate_payoffs(paths, [Strategy(i0) for _ in range(n_paths)], model, fields)
    midpoint_strategies = _midpoint_strategies(fields, paths, i0, model)
    midpoint = evaluate_payoffs(paths, midpoint_strategies, model, fields)
    references = {"never-switch": never.mean, "midpoint-switch": midpoint.mean}

    mc_mean, mc_se = payoffs.mean, payoffs.se
    n_chattering = sum(st.chattering for st in strategies)
    verdict: Optional[bool] = None
    if payoffs.n_valid >= MIN_VALID_FRACTION * n_paths:
        margin = 2 * mc_se
        verdict = abs(value - mc_mean) <= margin + budget and all(
            ref <= mc_mean + margin for ref in references.values()
        )
    else:
        logger.warning(
            f"Only {payoffs.n_valid}/{n_paths} valid paths (< {MIN_VALID_FRACTION:.0%}): "
            "no verdict"
        )

    switched = payoffs.valid & (payoffs.n_switches > 0)
    first_switch = None
    if np.any(switched):
        first = payoffs.first_switch[switched]
        first_switch = {
            "mean": float(np.mean(first)),
            "min": float(np.min(first)),
            "max": float(np.max(first)),
        }
    mean_switches = 0.0
    if payoffs.n_valid:
        mean_switches = float(np.mean(payoffs.n_switches[payoffs.valid]))

    report = ValidationReport(
        value=value,
        mc_mean=mc_mean,
        mc_se=mc_se,
        references=references,
        budget=budget,
        verdict=verdict,
        t0=float(t0),
        x0=x0,
        i0=i0,
        n_paths=n_paths,
        n_steps=n_steps,
        seed=seed,
        n_valid=payoffs.n_valid,
        n_domain_flagged=paths.n_flagged,
        n_chattering=int(n_chattering),
        mean_switches=mean_switches,
        first_switch=first_switch,
        clamp_count=fields.clamp_count - clamp_before,
        payoffs=payoffs,
    )
    logger.info(
        f"Representation check: value={value:.6g} mc={mc_mean:.6g}+-{mc_se:.2g} "
        f"budget={budget:.3g} -> {report.status}"
    )
    return report
