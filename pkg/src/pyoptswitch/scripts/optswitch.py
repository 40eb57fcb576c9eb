"""optswitch command line

Exit status: 0 ok, 1 I/O or parse error, 2 assumption/config refusal,
3 non-convergence, 4 comparison failure.
"""

from __future__ import annotations

import argparse
import logging
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from pyoptswitch import __version__
from pyoptswitch.catalog import INSTANCES, load_instance
from pyoptswitch.expr import ExpressionError, ExpressionSyntaxError
from pyoptswitch.grid import (
    BOUNDARY_POLICIES,
    GridSpec,
    LinearSolveError,
    ValueFields,
    interpolate,
)
from pyoptswitch.model import ProblemDomain, SwitchingModel, check_assumptions
from pyoptswitch.montecarlo import ValidationReport, validate_representation
from pyoptswitch.oracle import (
    ENUMERATION_CAPS,
    ChainError,
    ChainKernel,
    build_chain,
    dp_solve,
    enumerate_strategies,
    required_time_steps,
)
from pyoptswitch.scripts import CustomHelpFormatter, get_argparser, print_args
from pyoptswitch.solver import (
    DECREASING_INITS,
    PICARD_INITS,
    SCHEMES,
    ProjectionError,
    SchemeRefusedError,
    residual_report,
    solve,
)
from pyoptswitch.utils import config_hash, max_process_num, output_header, write_json

EXIT_OK = 0
EXIT_IO = 1
EXIT_REFUSED = 2
EXIT_NOT_CONVERGED = 3
EXIT_COMPARE_FAILED = 4

COMMANDS = ("check", "solve", "dp", "simulate", "compare", "catalog")
FORMATS = ("json", "csv")


def main(cli_args: Optional[List[str]] = None) -> int:
    """Main function called from CLI"""
    # Get arguments
    try:
        args = get_args(cli_args)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_IO
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    print_args(args)
    # Run command
    try:
        config = RunConfig.from_args(args)
        return run(config)
    except (SchemeRefusedError, ProjectionError, ChainError) as e:
        print(f"\nRefused: {e}")
        return EXIT_REFUSED
    except LinearSolveError as e:
        print(f"\nNumerical failure: {e}")
        return EXIT_NOT_CONVERGED
    except ExpressionSyntaxError as e:
        print(f"\nParse error (line {e.line}, column {e.column}): {e}")
        return EXIT_IO
    except (ExpressionError, ValueError, OSError) as e:
        print(f"\nError: {e}")
        return EXIT_IO


###########################################################
# Run configuration
###########################################################


def parse_grid(text: str) -> Tuple[Tuple[int, ...], Optional[int]]:
    """Parse `nx,...;nt` (the `;nt` part is optional)"""
    space, _, time = text.partition(";")
    try:
        nodes = tuple(int(v) for v in space.split(",") if v.strip())
        n_time = int(time) if time.strip() else None
    except ValueError:
        raise ValueError(f"--grid '{text}' is invalid (Format: 'nx,...;nt').") from None
    if not nodes:
        raise ValueError(f"--grid '{text}' has no node counts.")
    return nodes, n_time


def parse_box(text: str) -> Tuple[Tuple[float, float], ...]:
    """Parse `lo:hi,...`"""
    box = []
    for part in text.split(","):
        lo, sep, hi = part.partition(":")
        if not sep:
            raise ValueError(f"--box '{text}' is invalid (Format: 'lo:hi,...').")
        try:
            box.append((float(lo), float(hi)))
        except ValueError:
            raise ValueError(f"--box '{text}' is invalid (Format: 'lo:hi,...').") from None
    return tuple(box)


def parse_point(text: str) -> Tuple[float, ...]:
    """Parse `x1,...,xk`"""
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ValueError(f"--x0 '{text}' is invalid (Format: 'x1,...,xk').") from None


@dataclass
class RunConfig:
    """Run Configuration DataClass"""

    command: str
    problem: Optional[Path] = None
    instance: Optional[str] = None
    grid: Optional[str] = None
    box: Optional[str] = None
    boundary: str = "linear-extrapolation"
    scheme: str = "picard"
    tol: float = 1e-6
    max_iter: int = 200
    lam: Optional[float] = None
    init: Optional[str] = None
    paths: int = 10_000
    steps: Optional[int] = None
    seed: int = 0
    x0: Optional[str] = None
    i0: Optional[int] = None
    fields: Optional[Path] = None
    budget: Optional[float] = None
    process_num: int = 1
    out: Path = Path("./optswitch_out")
    format: str = "json"
    verbose: bool = False

    def __post_init__(self):
        err_msg = ""
        if self.command not in COMMANDS:
            err_msg += f"command='{self.command}' is invalid {COMMANDS}.\n"
        if self.command != "catalog" and (self.problem is None) == (self.instance is None):
            err_msg += "Exactly one of --problem or --instance is required.\n"
        if self.instance is not None and self.instance not in INSTANCES:
            err_msg += f"'{self.instance}' instance not found ({list(INSTANCES.keys())}).\n"
        if self.scheme not in SCHEMES:
            err_msg += f"scheme='{self.scheme}' is invalid {SCHEMES}.\n"
        if self.boundary not in BOUNDARY_POLICIES:
            err_msg += f"boundary='{self.boundary}' is invalid {BOUNDARY_POLICIES}.\n"
        if self.format not in FORMATS:
            err_msg += f"format='{self.format}' is invalid {FORMATS}.\n"
        for name in ("tol", "max_iter", "paths"):
            if not getattr(self, name) > 0:
                err_msg += f"{name}={getattr(self, name)} is invalid (Must be '> 0').\n"
        if self.steps is not None and self.steps <= 0:
            err_msg += f"steps={self.steps} is invalid (Must be '> 0').\n"
        if self.seed < 0:
            err_msg += f"seed={self.seed} is invalid (Must be '>= 0').\n"
        if self.i0 is not None and self.i0 <= 0:
            err_msg += f"i0={self.i0} is invalid (Must be '> 0').\n"
        if self.process_num < 1:
            err_msg += f"process_num={self.process_num} is invalid (Must be '>= 1').\n"
        if self.budget is not None and self.budget < 0:
            err_msg += f"budget={self.budget} is invalid (Must be '>= 0').\n"
        if err_msg:
            raise ValueError(err_msg.rstrip("\n"))

    @staticmethod
    def from_args(args: argparse.Namespace) -> RunConfig:
        """Build from parsed CLI arguments"""
        return RunConfig(**vars(args))

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        for key in ("problem", "fields", "out"):
            data[key] = None if data[key] is None else str(data[key])
        return data

    def load_problem(self) -> Tuple[SwitchingModel, Optional[ProblemDomain]]:
        """Load model & domain from the problem file or catalog"""
        if self.instance is not None:
            return load_instance(self.instance)
        return SwitchingModel.load(self.problem)

    def build_domain(
        self, model: SwitchingModel, domain: Optional[ProblemDomain]
    ) -> ProblemDomain:
        """Problem domain with --grid, --box, --x0, --i0 overrides applied"""
        box = parse_box(self.box) if self.box else None
        nodes, n_time = parse_grid(self.grid) if self.grid else (None, None)
        if domain is None and (box is None or nodes is None):
            err_msg = f"Problem '{model.name}' has no domain section "
            err_msg += "(pass both --grid and --box)."
            raise ValueError(err_msg)
        base = domain or ProblemDomain(box=box, nodes=nodes)
        x0 = parse_point(self.x0) if self.x0 else base.x0
        return ProblemDomain(
            box=box or base.box,
            nodes=nodes or base.nodes,
            n_time=n_time or base.n_time,
            x0=x0,
            i0=self.i0 or base.i0,
        )

    def grid_spec(self, domain: ProblemDomain) -> GridSpec:
        return GridSpec(domain.box, domain.nodes, domain.n_time, boundary=self.boundary)


###########################################################
# Commands
###########################################################


def run(config: RunConfig) -> int:
    """Run one command

    Parameters
    ----------
    config : RunConfig
        Run configuration

    Returns
    -------
    status : int
        Exit status
    """
    if config.command == "catalog":
        return cmd_catalog(config)
    model, domain = config.load_problem()
    domain = config.build_domain(model, domain)
    if model.diffusion.k != len(domain.box):
        raise ValueError(f"Box dimension {len(domain.box)} != model k={model.diffusion.k}.")
    if not 1 <= domain.i0 <= model.m:
        raise ValueError(f"i0={domain.i0} is invalid (Must be '1 <= i0 <= {model.m}').")
    problem = model.to_dict()
    problem["domain"] = domain.to_dict()
    ignored = ("out", "verbose", "process_num")
    settings = {k: v for k, v in config.to_dict().items() if k not in ignored}
    header = output_header(config_hash({"config": settings, "problem": problem}))
    os.makedirs(config.out, exist_ok=True)
    commands = {
        "check": cmd_check,
        "solve": cmd_solve,
        "dp": cmd_dp,
        "simulate": cmd_simulate,
        "compare": cmd_compare,
    }
    return commands[config.command](config, model, domain, header)


def cmd_catalog(config: RunConfig) -> int:
    """List catalog instances (and export one as a problem file with --instance)"""
    print("\nCatalog instances:")
    for name, data in INSTANCES.items():
        k, m = data["diffusion"]["k"], data["modes"]["m"]
        print(f"  {name:<20} k={k} m={m} T={data['horizon']}")
    if config.instance is not None:
        model, domain = load_instance(config.instance)
        os.makedirs(config.out, exist_ok=True)
        outfile = Path(config.out) / f"{config.instance}.json"
        model.dump(outfile, domain)
        print(f"\nSave problem file ({outfile}).")
    return EXIT_OK


def _check_report(model: SwitchingModel, domain: ProblemDomain, seed: int):
    report = check_assumptions(model, domain.box, seed=seed)
    for entry in report.entries:
        print(f"  {entry.name:<32} {entry.verdict}")
        if entry.witness is not None:
            print(f"    witness: {entry.witness}")
    return report


def cmd_check(
    config: RunConfig,
    model: SwitchingModel,
    domain: ProblemDomain,
    header: Dict[str, str],
) -> int:
    """Run every assumption check (exit 2 when one is refuted)"""
    print(f"\nAssumption checks of '{model.name}':")
    report = _check_report(model, domain, config.seed)
    outfile = Path(config.out) / "check_report.json"
    write_json(report.to_dict(), outfile, header)
    print(f"\nSave check report ({outfile}).")
    return EXIT_OK if report.is_certified else EXIT_REFUSED


def _solve_fields(
    config: RunConfig,
    model: SwitchingModel,
    domain: ProblemDomain,
    header: Dict[str, str],
) -> Tuple[ValueFields, int]:
    """Solve (or read --fields) and write the solve outputs"""
    if config.fields is not None:
        fields, stored = ValueFields.read_binary(config.fields)
        print(f"\nRead fields ({config.fields}, config hash {stored['config_hash'][:12]}).")
        if fields.m != model.m or fields.grid.k != model.diffusion.k:
            raise ValueError(f"'{config.fields}' does not match problem '{model.name}'.")
        return fields, EXIT_OK if fields.converged else EXIT_NOT_CONVERGED

    grid = config.grid_spec(domain)
    print(f"\nAssumption checks of '{model.name}':")
    checks = _check_report(model, domain, config.seed)
    if not checks.is_certified:
        names = [e.name for e in checks.refuted]
        raise SchemeRefusedError(f"Assumption check(s) refuted: {names}")
    fields, report = solve(
        model, grid, config.scheme, config.tol, config.max_iter, config.lam, config.init
    )
    residuals = residual_report(fields, model, grid)
    value = interpolate(fields, domain.i0, 0.0, domain.start)

    outdir = Path(config.out)
    fields.write_binary(outdir / "fields.osvf", header)
    data = {
        "model": model.name,
        "grid": grid.to_dict(),
        "value": {"t0": 0.0, "x0": list(domain.start), "i0": domain.i0, "v": value},
        "iteration": report.to_dict(),
        "residual": residuals.to_dict(),
    }
    write_json(data, outdir / "solve_report.json", header)
    if config.format == "csv":
        fields.write_csv(outdir / "fields.csv", header)
        residuals.write_csv(outdir / "residuals.csv", grid, fields.times, header)

    status = "converged" if report.converged else "NOT converged"
    print(f"\n{config.scheme} scheme {status} in {report.iterations} iteration(s).")
    print(f"v_{domain.i0}(0, {list(domain.start)}) = {value:.8g}")
    print(f"Save fields & reports ({outdir}).")
    return fields, EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def cmd_solve(
    config: RunConfig,
    model: SwitchingModel,
    domain: ProblemDomain,
    header: Dict[str, str],
) -> int:
    """Solve the variational inequality system (exit 3 on non-convergence)"""
    _, status = _solve_fields(config, model, domain, header)
    return status


def _dp_value(
    model: SwitchingModel, grid: GridSpec, domain: ProblemDomain
) -> Tuple[ValueFields, ChainKernel, float]:
    """DP fields on the grid (time steps refined until the chain is valid)"""
    n_time = required_time_steps(model.diffusion, grid, model.horizon)
    if n_time > grid.n_time:
        print(f"Chain needs n_time >= {n_time} (refined from {grid.n_time}).")
        grid = grid.with_time_steps(n_time)
    chain = build_chain(model.diffusion, grid, model.horizon)
    fields = dp_solve(model, chain)
    return fields, chain, interpolate(fields, domain.i0, 0.0, domain.start)


def cmd_dp(
    config: RunConfig,
    model: SwitchingModel,
    domain: ProblemDomain,
    header: Dict[str, str],
) -> int:
    """Dynamic programming on the Markov chain (plus enumeration on tiny chains)"""
    fields, chain, value = _dp_value(model, config.grid_spec(domain), domain)
    grid = chain.grid
    data: Dict[str, Any] = {
        "model": model.name,
        "grid": grid.to_dict(),
        "value": {"t0": 0.0, "x0": list(domain.start), "i0": domain.i0, "v": value},
        "max_row_error": chain.max_row_error,
    }
    print(f"\nDP value v_{domain.i0}(0, {list(domain.start)}) = {value:.8g}")

    tiny = (
        grid.n_time <= ENUMERATION_CAPS["n_time"]
        and model.m <= ENUMERATION_CAPS["m"]
        and grid.n_nodes <= ENUMERATION_CAPS["nodes"]
    )
    if tiny and not model.is_coupled:
        result = enumerate_strategies(model, chain, domain.i0, domain.start)
        node_value = float(fields.values[0, domain.i0 - 1, result.node])
        data["enumeration"] = result.to_dict()
        data["enumeration"]["dp_value"] = node_value
        data["enumeration"]["equal"] = node_value == result.value
        print(f"Enumerated value = {result.value:.17g} (DP at node: {node_value:.17g})")

    outdir = Path(config.out)
    fields.write_binary(outdir / "dp_fields.osvf", header)
    write_json(data, outdir / "dp_report.json", header)
    if config.format == "csv":
        fields.write_csv(outdir / "dp_fields.csv", header)
    print(f"Save DP fields & report ({outdir}).")
    return EXIT_OK


def _validate(
    config: RunConfig,
    fields: ValueFields,
    model: SwitchingModel,
    domain: ProblemDomain,
) -> ValidationReport:
    return validate_representation(
        fields,
        model,
        0.0,
        domain.start,
        domain.i0,
        n_paths=config.paths,
        n_steps=config.steps,
        seed=config.seed,
        budget=config.budget,
        process_num=min(config.process_num, max_process_num()),
    )


def cmd_simulate(
    config: RunConfig,
    model: SwitchingModel,
    domain: ProblemDomain,
    header: Dict[str, str],
) -> int:
    """Monte Carlo check of the value representation (exit 4 on FAIL)"""
    fields, status = _solve_fields(config, model, domain, header)
    if status != EXIT_OK:
        return status
    report = _validate(config, fields, model, domain)
    outdir = Path(config.out)
    write_json(report.to_dict(), outdir / "mc_report.json", header)
    if config.format == "csv" and report.payoffs is not None:
        report.payoffs.write_csv(outdir / "mc_paths.csv", header)
    print(f"\nvalue    = {report.value:.8g}")
    print(f"MC value = {report.mc_mean:.8g} +- {report.mc_se:.2g} (budget {report.budget:.3g})")
    for name, ref in report.references.items():
        print(f"  {name:<16} {ref:.8g}")
    print(f"Representation check: {report.status}")
    return EXIT_OK if report.verdict else EXIT_COMPARE_FAILED


def cmd_compare(
    config: RunConfig,
    model: SwitchingModel,
    domain: ProblemDomain,
    header: Dict[str, str],
) -> int:
    """PDE vs DP vs Monte Carlo at (0, x0, i0) (exit 4 when a gap exceeds its budget)"""
    fields, status = _solve_fields(config, model, domain, header)
    if status != EXIT_OK:
        return status
    pde_value = interpolate(fields, domain.i0, 0.0, domain.start)
    _, dp_chain, dp_value = _dp_value(model, fields.grid, domain)
    mc = _validate(config, fields, model, domain)

    statistical = 2 * mc.mc_se
    if config.budget is None:
        dp_budget = max(0.01 * abs(dp_value), 1e-3)
        mc_budget = statistical + mc.budget
    else:
        dp_budget = config.budget
        mc_budget = statistical + config.budget
    gaps = {
        "pde-dp": (abs(pde_value - dp_value), dp_budget),
        "pde-mc": (abs(pde_value - mc.mc_mean), mc_budget),
        "dp-mc": (abs(dp_value - mc.mc_mean), mc_budget),
    }
    ok = all(gap < budget for gap, budget in gaps.values()) and mc.verdict is not None

    print(f"\n{'method':<8}{'value':>16}{'se':>12}")
    print(f"{'PDE':<8}{pde_value:>16.8g}{'':>12}")
    print(f"{'DP':<8}{dp_value:>16.8g}{'':>12}")
    print(f"{'MC':<8}{mc.mc_mean:>16.8g}{mc.mc_se:>12.2g}")
    for name, (gap, budget) in gaps.items():
        mark = "ok" if gap < budget else "EXCEEDED"
        print(f"  {name:<8} gap={gap:.3g} budget={budget:.3g} {mark}")
    if mc.verdict is None:
        print(f"Too few valid Monte Carlo paths ({mc.n_valid}/{mc.n_paths}).")

    data = {
        "model": model.name,
        "t0": 0.0,
        "x0": list(domain.start),
        "i0": domain.i0,
        "pde": pde_value,
        "dp": {"value": dp_value, "n_time": dp_chain.grid.n_time},
        "mc": mc.to_dict(),
        "gaps": {k: {"gap": g, "budget": b, "ok": g < b} for k, (g, b) in gaps.items()},
        "passed": ok,
    }
    outfile = Path(config.out) / "compare_report.json"
    write_json(data, outfile, header)
    print(f"Save comparison report ({outfile}).")
    return EXIT_OK if ok else EXIT_COMPARE_FAILED


###########################################################
# Arguments
###########################################################


def _add_general_options(sub: argparse.ArgumentParser) -> None:
    general_opts = sub.add_argument_group("General Options")
    general_opts.add_argument(
        "--problem",
        type=Path,
        help="Problem file (JSON)",
        metavar="PATH",
    )
    general_opts.add_argument(
        "--instance",
        type=str,
        help=f"Catalog instance name {list(INSTANCES.keys())}",
        metavar="NAME",
    )
    default_out = Path("./optswitch_out")
    general_opts.add_argument(
        "-o",
        "--out",
        type=Path,
        help=f"Output directory (Default: {default_out})",
        default=default_out,
        metavar="DIR",
    )
    general_opts.add_argument(
        "--format",
        type=str,
        help="Extra export format ('json'[*]|'csv')",
        default="json",
        choices=FORMATS,
        metavar="",
    )
    general_opts.add_argument(
        "--verbose",
        help="Print debug logs",
        action="store_true",
    )
    general_opts.add_argument(
        "-h",
        "--help",
        help="Show this help message and exit",
        action="help",
    )


def _add_grid_options(sub: argparse.ArgumentParser) -> None:
    grid_opts = sub.add_argument_group("Grid Options")
    grid_opts.add_argument(
        "--grid",
        type=str,
        help="Nodes per dimension & time steps 'nx,...;nt' (Default: problem domain)",
        metavar="",
    )
    grid_opts.add_argument(
        "--box",
        type=str,
        help="Truncated box 'lo:hi,...' (use '--box=-1:1') (Default: problem domain)",
        metavar="",
    )
    grid_opts.add_argument(
        "--boundary",
        type=str,
        help="Boundary policy ('linear-extrapolation'[*]|'zero-second-derivative')",
        default="linear-extrapolation",
        choices=BOUNDARY_POLICIES,
        metavar="",
    )
    grid_opts.add_argument(
        "--x0",
        type=str,
        help="Evaluation point 'x1,...' (use '--x0=-0.5') (Default: problem domain)",
        metavar="",
    )
    grid_opts.add_argument(
        "--i0",
        type=int,
        help="Initial mode (Default: problem domain)",
        metavar="",
    )


def _add_solver_options(sub: argparse.ArgumentParser) -> None:
    solver_opts = sub.add_argument_group("Solver Options")
    solver_opts.add_argument(
        "--scheme",
        type=str,
        help="Iteration scheme ('picard'[*]|'increasing'|'decreasing')",
        default="picard",
        choices=SCHEMES,
        metavar="",
    )
    default_tol = 1e-6
    solver_opts.add_argument(
        "--tol",
        type=float,
        help=f"Sup-norm tolerance (Default: {default_tol})",
        default=default_tol,
        metavar="",
    )
    default_max_iter = 200
    solver_opts.add_argument(
        "--max_iter",
        type=int,
        help=f"Max iterations (Default: {default_max_iter})",
        default=default_max_iter,
        metavar="",
    )
    solver_opts.add_argument(
        "--lambda",
        dest="lam",
        type=float,
        help="Exponential transform rate (Default: scheme dependent, 0 disables)",
        metavar="",
    )
    solver_opts.add_argument(
        "--init",
        type=str,
        help="Initialization (picard: 'zero'[*]|'lower-bound'|'upper-bound', "
        "decreasing: 'upper-bound'[*]|'polynomial')",
        choices=tuple(dict.fromkeys(PICARD_INITS + DECREASING_INITS)),
        metavar="",
    )
    solver_opts.add_argument(
        "--fields",
        type=Path,
        help="Reuse a solved field file instead of solving",
        metavar="PATH",
    )


def _add_mc_options(sub: argparse.ArgumentParser) -> None:
    mc_opts = sub.add_argument_group("Monte Carlo Options")
    default_paths = 10_000
    mc_opts.add_argument(
        "--paths",
        type=int,
        help=f"Number of paths (Default: {default_paths})",
        default=default_paths,
        metavar="",
    )
    mc_opts.add_argument(
        "--steps",
        type=int,
        help="Euler steps (Default: grid time steps)",
        metavar="",
    )
    default_seed = 0
    mc_opts.add_argument(
        "--seed",
        type=int,
        help=f"Random seed (Default: {default_seed})",
        default=default_seed,
        metavar="",
    )
    mc_opts.add_argument(
        "--budget",
        type=float,
        help="Bias budget of the comparisons (Default: C (dt + dx^2))",
        metavar="",
    )
    default_process_num = 1
    mc_opts.add_argument(
        "--process_num",
        type=int,
        help=f"Path simulation processes, capped at {max_process_num()} "
        + f"(Default: {default_process_num})",
        default=default_process_num,
        metavar="",
    )


def get_args(cli_args: Optional[List[str]] = None) -> argparse.Namespace:
    """Get arguments

    Parameters
    ----------
    cli_args : Optional[List[str]], optional
        CLI arguments (Used in unittest)

    Returns
    -------
    args : argparse.Namespace
        Argument parameters
    """
    parser = get_argparser(prog_name="optswitch")
    parser.add_argument(
        "-v",
        "--version",
        version=f"v{__version__}",
        help="Print version information",
        action="version",
    )
    parser.add_argument(
        "-h",
        "--help",
        help="Show this help message and exit",
        action="help",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {
        "check": "Check the model assumptions on samples",
        "solve": "Solve the variational inequality system",
        "dp": "Dynamic programming on the Markov chain approximation",
        "simulate": "Monte Carlo check of the value representation",
        "compare": "Compare PDE, DP & Monte Carlo values",
        "catalog": "List (or export) catalog instances",
    }
    for name in COMMANDS:
        sub = subparsers.add_parser(
            name,
            help=helps[name],
            description=helps[name],
            add_help=False,
            formatter_class=CustomHelpFormatter,
        )
        _add_general_options(sub)
        _add_grid_options(sub)
        _add_solver_options(sub)
        _add_mc_options(sub)
    return parser.parse_args(cli_args)


if __name__ == "__main__":
    raise SystemExit(main())
