from __future__ import annotations

import csv
import hashlib
import logging
import struct
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import splu

from pyoptswitch.model import DiffusionSpec
from pyoptswitch.utils import header_lines, output_header

logger = logging.getLogger(__name__)

BOUNDARY_POLICIES = ("linear-extrapolation", "zero-second-derivative")
DEFAULT_MAX_NODES = 1_000_000
MAX_DIMENSION = 3


class LinearSolveError(ValueError):
    """Implicit time step failed (singular system or non-finite result)"""


###########################################################
# Grid
###########################################################


@dataclass(frozen=True)
class GridSpec:
    """Space-time Grid DataClass

    Uniform lattice on a truncated box, flattened in C order
    (last state dimension varies fastest).
    """

    box: Tuple[Tuple[float, float], ...]
    nodes: Tuple[int, ...]
    n_time: int
    boundary: str = "linear-extrapolation"
    theta: float = 1.0
    max_nodes: int = DEFAULT_MAX_NODES
    store_every: int = 1

    def __post_init__(self):
        object.__setattr__(self, "box", tuple((float(lo), float(hi)) for lo, hi in self.box))
        object.__setattr__(self, "nodes", tuple(int(n) for n in self.nodes))
        err_msg = ""
        if len(self.box) != len(self.nodes) or len(self.box) == 0:
            err_msg += "box and nodes must have the same non-zero dimension.\n"
        if len(self.box) > MAX_DIMENSION:
            err_msg += f"k={len(self.box)} exceeds the supported dimension {MAX_DIMENSION}.\n"
        for q, ((lo, hi), n) in enumerate(zip(self.box, self.nodes), 1):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                err_msg += f"box of x{q} [{lo}, {hi}] is invalid (Must be 'lo < hi').\n"
            if n < 3:
                err_msg += f"nodes of x{q}={n} is invalid (Must be 'nodes >= 3').\n"
            elif n < 4 and self.boundary == "linear-extrapolation":
                err_msg += f"nodes of x{q}={n} is too few for linear-extrapolation (>= 4).\n"
        if self.n_time < 1:
            err_msg += f"n_time={self.n_time} is invalid (Must be 'n_time >= 1').\n"
        if self.boundary not in BOUNDARY_POLICIES:
            err_msg += f"boundary='{self.boundary}' is invalid ({BOUNDARY_POLICIES}).\n"
        if not 0 <= self.theta <= 1:
            err_msg += f"theta={self.theta} is invalid (Must be '0 <= theta <= 1').\n"
        if self.store_every < 1:
            err_msg += f"store_every={self.store_every} is invalid (Must be '>= 1').\n"
        if not err_msg and int(np.prod(self.nodes)) > self.max_nodes:
            err_msg += f"{int(np.prod(self.nodes))} nodes exceed the memory cap "
            err_msg += f"({self.max_nodes}).\n"
        if err_msg:
            raise ValueError(err_msg.rstrip("\n"))

    @property
    def k(self) -> int:
        """State dimension"""
        return len(self.nodes)

    @property
    def n_nodes(self) -> int:
        """Total spatial node count"""
        return int(np.prod(self.nodes))

    @property
    def spacing(self) -> np.ndarray:
        """Per-dimension spacing"""
        return np.array([(hi - lo) / (n - 1) for (lo, hi), n in zip(self.box, self.nodes)])

    @property
    def box_center(self) -> Tuple[float, ...]:
        """Center point of the box"""
        return tuple((lo + hi) / 2 for lo, hi in self.box)

    @property
    def axes(self) -> List[np.ndarray]:
        """Per-dimension node coordinates"""
        return [np.linspace(lo, hi, n) for (lo, hi), n in zip(self.box, self.nodes)]

    @cached_property
    def multi_index(self) -> np.ndarray:
        """Lattice multi-index of every node (array of shape (N, k))"""
        return np.array(np.unravel_index(np.arange(self.n_nodes), self.nodes)).T

    @cached_property
    def coordinates(self) -> np.ndarray:
        """Node coordinates (array of shape (N, k))"""
        lo = np.array([b[0] for b in self.box])
        return lo + self.multi_index * self.spacing

    @cached_property
    def interior_mask(self) -> np.ndarray:
        """True at nodes strictly inside the box in every dimension"""
        upper = np.array(self.nodes) - 1
        return np.all((self.multi_index > 0) & (self.multi_index < upper), axis=1)

    def dt(self, horizon: float) -> float:
        """Time step"""
        return horizon / self.n_time

    def times(self, horizon: float) -> np.ndarray:
        """Time grid t_0 = 0 < ... < t_n_time = horizon"""
        return np.linspace(0.0, horizon, self.n_time + 1)

    def nearest_node(self, x: Sequence[float]) -> int:
        """Flat index of the lattice node nearest to x (clamped into the box)"""
        lo = np.array([b[0] for b in self.box])
        idx = np.rint((np.asarray(x, dtype=float) - lo) / self.spacing).astype(int)
        idx = np.clip(idx, 0, np.array(self.nodes) - 1)
        return int(np.ravel_multi_index(tuple(idx), self.nodes))

    def with_time_steps(self, n_time: int) -> GridSpec:
        """Same grid with another number of time steps"""
        return replace(self, n_time=n_time)

    def to_dict(self) -> Dict[str, Any]:
        """Config dict"""
        return {
            "box": [list(b) for b in self.box],
            "nodes": list(self.nodes),
            "n_time": self.n_time,
            "boundary": self.boundary,
            "theta": self.theta,
            "store_every": self.store_every,
        }


###########################################################
# Generator
###########################################################


@dataclass(frozen=True)
class GeneratorMatrix:
    """Generator DataClass (sparse rows approximating L at a fixed time)"""

    matrix: sp.csr_matrix
    t: float
    positive: bool
    min_offdiag: float

    def apply(self, u: np.ndarray) -> np.ndarray:
        """Apply generator to a field (N,) or fields (m, N)"""
        if u.ndim == 1:
            return self.matrix @ u
        return (self.matrix @ u.T).T

    @property
    def row_sums(self) -> np.ndarray:
        """Row sums"""
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    @property
    def rates(self) -> np.ndarray:
        """Total jump rate per node (minus the diagonal)"""
        return -self.matrix.diagonal()


def build_generator(diffusion: DiffusionSpec, grid: GridSpec, t: float) -> GeneratorMatrix:
    """Assemble the finite-difference generator 1/2 Tr(a D^2) + b.D at time t

    Diffusion terms use central differences, mixed terms the diagonally
    dominant stencil, drift terms one-sided upwind differences.
    Boundary rows drop the normal second derivative and the outward drift.

    Parameters
    ----------
    diffusion : DiffusionSpec
        Drift & volatility
    grid : GridSpec
        Spatial lattice
    t : float
        Time

    Returns
    -------
    generator : GeneratorMatrix
        Sparse generator with the positive-coefficient flag
    """
    if diffusion.k != grid.k:
        raise ValueError(f"diffusion k={diffusion.k} != grid k={grid.k}.")
    k, n = grid.k, grid.n_nodes
    h = grid.spacing
    coords = grid.coordinates
    multi = grid.multi_index
    upper = np.array(grid.nodes) - 1

    b = diffusion.drift_at(t, coords)
    s = diffusion.sigma_at(t, coords)
    a = np.einsum("qrn,prn->qpn", s, s)
    inside = [(multi[:, q] > 0) & (multi[:, q] < upper[q]) for q in range(k)]

    rows: List[np.ndarray] = []
    cols: List[np.ndarray] = []
    vals: List[np.ndarray] = []

    def add(mask: np.ndarray, offset: np.ndarray, weight: np.ndarray) -> None:
        src = np.flatnonzero(mask)
        dst = np.ravel_multi_index(tuple((multi[src] + offset).T), grid.nodes)
        rows.append(src)
        cols.append(dst)
        vals.append(weight[src])

    unit = np.eye(k, dtype=int)
    for q in range(k):
        penalty = np.zeros(n)
        for r in range(k):
            if r != q:
                both = inside[q] & inside[r]
                penalty += np.where(both, np.abs(a[q, r]) / (2 * h[q] * h[r]), 0.0)
        diff = np.where(inside[q], a[q, q] / (2 * h[q] ** 2) - penalty, 0.0)
        has_up = multi[:, q] < upper[q]
        has_down = multi[:, q] > 0
        add(has_up, unit[q], diff + np.maximum(b[q], 0) / h[q])
        add(has_down, -unit[q], diff + np.maximum(-b[q], 0) / h[q])

    for q in range(k):
        for r in range(q + 1, k):
            both = inside[q] & inside[r]
            weight = np.abs(a[q, r]) / (2 * h[q] * h[r])
            pos, neg = both & (a[q, r] > 0), both & (a[q, r] < 0)
            add(pos, unit[q] + unit[r], weight)
            add(pos, -unit[q] - unit[r], weight)
            add(neg, unit[q] - unit[r], weight)
            add(neg, -unit[q] + unit[r], weight)

    row = np.concatenate(rows) if rows else np.zeros(0, dtype=int)
    col = np.concatenate(cols) if cols else np.zeros(0, dtype=int)
    val = np.concatenate(vals) if vals else np.zeros(0)
    offdiag = sp.csr_matrix((val, (row, col)), shape=(n, n))
    offdiag.sum_duplicates()
    min_offdiag = float(offdiag.data.min()) if offdiag.nnz > 0 else 0.0
    diagonal = -np.asarray(offdiag.sum(axis=1)).ravel()
    matrix = (offdiag + sp.diags(diagonal)).tocsr()
    matrix.eliminate_zeros()
    matrix.sort_indices()

    scale = float(np.max(np.abs(matrix.data))) if matrix.nnz > 0 else 1.0
    positive = min_offdiag >= -1e-12 * scale
    if not positive:
        logger.warning(f"Negative generator coefficient {min_offdiag:.3g} at t={t}")
    return GeneratorMatrix(matrix, float(t), bool(positive), min_offdiag)


def _extrapolation_constraints(grid: GridSpec) -> Tuple[np.ndarray, sp.csr_matrix]:
    """Rows u_B - 2 u_{B+-1} + u_{B+-2} = 0 at boundary nodes"""
    multi = grid.multi_index
    upper = np.array(grid.nodes) - 1
    boundary = ~grid.interior_mask
    rows, cols, vals = [], [], []
    for node in np.flatnonzero(boundary):
        idx = multi[node]
        q = int(np.flatnonzero((idx == 0) | (idx == upper))[0])
        step = 1 if idx[q] == 0 else -1
        for shift, weight in ((0, 1.0), (1, -2.0), (2, 1.0)):
            target = idx.copy()
            target[q] += shift * step
            rows.append(node)
            cols.append(np.ravel_multi_index(tuple(target), grid.nodes))
            vals.append(weight)
    n = grid.n_nodes
    return boundary, sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


class ThetaStepper:
    """Backward theta-scheme stepper

    Solves (I - theta dt L_n) u^n = (I + (1 - theta) dt L_n) u^{n+1} + dt s^n
    with generator and LU factors cached per slice (a single one when the
    diffusion is time homogeneous).
    """

    def __init__(self, diffusion: DiffusionSpec, grid: GridSpec, horizon: float):
        """
        Parameters
        ----------
        diffusion : DiffusionSpec
            Drift & volatility
        grid : GridSpec
            Space-time grid
        horizon : float
            Horizon T
        """
        self.diffusion = diffusion
        self.grid = grid
        self.dt = grid.dt(horizon)
        self.times = grid.times(horizon)
        self.homogeneous = diffusion.is_time_homogeneous
        self._generators: Dict[int, GeneratorMatrix] = {}
        self._solvers: Dict[int, Callable[[np.ndarray], np.ndarray]] = {}
        self._sigmas: Dict[int, np.ndarray] = {}
        if grid.boundary == "linear-extrapolation":
            self._boundary, self._constraints = _extrapolation_constraints(grid)
        else:
            self._boundary, self._constraints = None, None

    def _key(self, n: int) -> int:
        return 0 if self.homogeneous else n

    def generator(self, n: int) -> GeneratorMatrix:
        """Generator at slice n"""
        key = self._key(n)
        if key not in self._generators:
            self._generators[key] = build_generator(self.diffusion, self.grid, self.times[n])
        return self._generators[key]

    def sigma(self, n: int) -> np.ndarray:
        """Volatility at slice n on every node (array of shape (k, d, N))"""
        key = self._key(n)
        if key not in self._sigmas:
            self._sigmas[key] = self.diffusion.sigma_at(self.times[n], self.grid.coordinates)
        return self._sigmas[key]

    def gradient(self, u: np.ndarray, n: int) -> np.ndarray:
        """z = sigma^T D_x u at slice n for a field (N,) or fields (m, N)"""
        if self.diffusion.is_deterministic:
            shape = (self.diffusion.d, self.grid.n_nodes)
            return np.zeros(shape) if u.ndim == 1 else np.zeros((len(u),) + shape)
        return gradient_field(u, self.grid, self.diffusion, self.times[n], self.sigma(n))

    def _solver(self, n: int) -> Callable[[np.ndarray], np.ndarray]:
        key = self._key(n)
        if key not in self._solvers:
            size = self.grid.n_nodes
            system = sp.identity(size, format="csr")
            system = system - self.grid.theta * self.dt * self.generator(n).matrix
            if self._constraints is not None:
                keep = sp.diags((~self._boundary).astype(float))
                system = keep @ system + self._constraints
            try:
                lu = splu(sp.csc_matrix(system))
            except RuntimeError as e:
                raise LinearSolveError(f"Implicit system at slice {n} is singular: {e}")
            self._solvers[key] = lu.solve
        return self._solvers[key]

    def step(self, n: int, u_next: np.ndarray, source: np.ndarray) -> np.ndarray:
        """One backward step from slice n+1 to slice n

        Parameters
        ----------
        n : int
            Target slice index
        u_next : np.ndarray
            Field(s) at slice n+1, shape (N,) or (m, N)
        source : np.ndarray
            Driver values at slice n, same shape

        Returns
        -------
        u : np.ndarray
            Field(s) at slice n
        """
        theta = self.grid.theta
        rhs = u_next + self.dt * source
        if theta < 1:
            rhs = rhs + (1 - theta) * self.dt * self.generator(n).apply(u_next)
        if theta == 0 and self._constraints is None:
            u = rhs
        else:
            if self._constraints is not None:
                rhs = np.array(rhs, dtype=float)
                rhs[..., self._boundary] = 0.0
            solve = self._solver(n)
            u = solve(rhs) if rhs.ndim == 1 else solve(np.ascontiguousarray(rhs.T)).T
        if not np.all(np.isfinite(u)):
            raise LinearSolveError(f"Non-finite values after the time step to slice {n}.")
        return u


def gradient_field(
    field: np.ndarray,
    grid: GridSpec,
    diffusion: DiffusionSpec,
    t: float,
    sigma: Optional[np.ndarray] = None,
) -> np.ndarray:
    """z-argument sigma^T D_x v of the drivers

    Parameters
    ----------
    field : np.ndarray
        Field (N,) or fields (m, N) on the lattice
    grid : GridSpec
        Spatial lattice
    diffusion : DiffusionSpec
        Volatility
    t : float
        Time
    sigma : Optional[np.ndarray], optional
        Precomputed volatility (k, d, N) at t

    Returns
    -------
    z : np.ndarray
        Array of shape (d, N), or (m, d, N) for stacked fields
    """
    if sigma is None:
        sigma = diffusion.sigma_at(t, grid.coordinates)
    if field.ndim == 2:
        return np.array([gradient_field(f, grid, diffusion, t, sigma) for f in field])
    if not np.all(np.isfinite(field)):
        raise ValueError("Field has non-finite entries.")
    grads = np.gradient(field.reshape(grid.nodes), *grid.spacing, edge_order=1)
    if grid.k == 1:
        grads = [grads]
    grad = np.array([g.ravel() for g in grads])
    return np.einsum("qrn,qn->rn", sigma, grad)


###########################################################
# Value fields
###########################################################

_MAGIC = b"OSVF"
_FORMAT_VERSION = 2
_BOUNDARY_CODES = {name: code for code, name in enumerate(BOUNDARY_POLICIES)}


@dataclass
class ValueFields:
    """Value Fields DataClass

    `values[s, i, node]` holds v_{i+1} at the retained time `times[s]`.
    """

    values: np.ndarray
    times: np.ndarray
    grid: GridSpec
    converged: bool = True
    transform_rate: float = 0.0
    clamp_count: int = field(default=0, compare=False)
    _interpolator: Optional[RegularGridInterpolator] = field(
        default=None, init=False, repr=False, compare=False
    )

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.times = np.asarray(self.times, dtype=float)
        err_msg = ""
        if self.values.ndim != 3 or self.values.shape[2] != self.grid.n_nodes:
            err_msg += f"values shape {self.values.shape} != (slices, m, {self.grid.n_nodes}).\n"
        elif self.values.shape[0] != len(self.times):
            err_msg += f"{len(self.times)} times for {self.values.shape[0]} slices.\n"
        if len(self.times) < 2 or np.any(np.diff(self.times) <= 0):
            err_msg += "times must be strictly increasing with at least 2 slices.\n"
        if not err_msg and not np.all(np.isfinite(self.values)):
            err_msg += "values have non-finite entries.\n"
        if err_msg:
            raise ValueError(err_msg.rstrip("\n"))

    @property
    def m(self) -> int:
        """Number of modes"""
        return self.values.shape[1]

    @property
    def n_slices(self) -> int:
        """Number of retained time slices"""
        return self.values.shape[0]

    @property
    def horizon(self) -> float:
        """Terminal time"""
        return float(self.times[-1])

    def at_start(self, mode: int, x: Sequence[float]) -> float:
        """v_mode(t_0, x) interpolated in space"""
        return interpolate(self, mode, float(self.times[0]), x)

    def decimate(self, every: int) -> ValueFields:
        """Keep every `every`-th slice (first & last slices always kept)"""
        if every < 1:
            raise ValueError(f"every={every} is invalid (Must be 'every >= 1').")
        keep = sorted(set(range(0, self.n_slices, every)) | {self.n_slices - 1})
        return ValueFields(
            self.values[keep],
            self.times[keep],
            self.grid,
            self.converged,
            self.transform_rate,
        )

    def inverse_transform(self) -> ValueFields:
        """Undo an exponential transform: v = e^{-rate t} v~"""
        factor = np.exp(-self.transform_rate * self.times)[:, None, None]
        return ValueFields(self.values * factor, self.times, self.grid, self.converged)

    def write_csv(
        self, outfile: Union[str, Path], header: Optional[Mapping[str, str]] = None
    ) -> None:
        """Write fields as CSV (one row per slice & node: t, x1..xk, v_1..v_m)

        Parameters
        ----------
        outfile : Union[str, Path]
            Output file path
        header : Optional[Mapping[str, str]], optional
            Output header written as `#` comment lines
        """
        header = output_header() if header is None else header
        coords = self.grid.coordinates
        with open(outfile, "w", newline="", encoding="utf-8") as f:
            for line in header_lines(header):
                f.write(line + "\n")
            writer = csv.writer(f)
            columns = ["t"] + [f"x{q + 1}" for q in range(self.grid.k)]
            writer.writerow(columns + [f"v_{i + 1}" for i in range(self.m)])
            for s, t in enumerate(self.times):
                for node in range(self.grid.n_nodes):
                    row = [repr(float(t))] + [repr(float(c)) for c in coords[node]]
                    row += [repr(float(v)) for v in self.values[s, :, node]]
                    writer.writerow(row)

    def write_binary(
        self, outfile: Union[str, Path], header: Optional[Mapping[str, str]] = None
    ) -> None:
        """Write fields in the little-endian binary layout

        Layout: magic `OSVF`, u32 format version, u32 k, m, n_slices, N, n_time,
        boundary code, converged flag, store_every, u32 nodes[k], f64 box[k][2], f64 theta,
        f64 transform rate, f64 times[n_slices], f64 values[n_slices][m][N],
        u32-length-prefixed UTF-8 tool version and config hash,
        32-byte SHA-256 of everything before.

        Parameters
        ----------
        outfile : Union[str, Path]
            Output file path
        header : Optional[Mapping[str, str]], optional
            Output header (tool version & config hash are stored)
        """
        header = output_header() if header is None else header
        grid = self.grid
        payload = bytearray(_MAGIC)
        payload += struct.pack(
            "<9I",
            _FORMAT_VERSION,
            grid.k,
            self.m,
            self.n_slices,
            grid.n_nodes,
            grid.n_time,
            _BOUNDARY_CODES[grid.boundary],
            int(self.converged),
            grid.store_every,
        )
        payload += struct.pack(f"<{grid.k}I", *grid.nodes)
        payload += np.array(grid.box, dtype="<f8").tobytes()
        payload += struct.pack("<2d", grid.theta, self.transform_rate)
        payload += self.times.astype("<f8").tobytes()
        payload += self.values.astype("<f8").tobytes()
        for text in (header.get("version", ""), header.get("config_hash", "")):
            encoded = text.encode("utf-8")
            payload += struct.pack("<I", len(encoded)) + encoded
        payload += hashlib.sha256(payload).digest()
        with open(outfile, "wb") as f:
            f.write(bytes(payload))

    @staticmethod
    def read_binary(infile: Union[str, Path]) -> Tuple[ValueFields, Dict[str, str]]:
        """Read fields written by `write_binary`

        Parameters
        ----------
        infile : Union[str, Path]
            Binary field file

        Returns
        -------
        fields, header : Tuple[ValueFields, Dict[str, str]]
            Fields & stored header (tool version, config hash)
        """
        with open(infile, "rb") as f:
            data = f.read()
        if len(data) < 4 + 32 or data[:4] != _MAGIC:
            raise ValueError(f"'{infile}' is not a value field file.")
        body, digest = data[:-32], data[-32:]
        if hashlib.sha256(body).digest() != digest:
            raise ValueError(f"'{infile}' checksum mismatch (file corrupted).")

        pos = 4
        (version,) = struct.unpack_from("<I", body, pos)
        if version != _FORMAT_VERSION:
            raise ValueError(f"Unsupported value field format version {version}.")
        k, m, n_slices, n_nodes, n_time, boundary, converged, store_every = struct.unpack_from(
            "<8I", body, pos + 4
        )
        pos += 36
        nodes = struct.unpack_from(f"<{k}I", body, pos)
        pos += 4 * k
        box = np.frombuffer(body, dtype="<f8", count=2 * k, offset=pos).reshape(k, 2)
        pos += 16 * k
        theta, rate = struct.unpack_from("<2d", body, pos)
        pos += 16
        times = np.frombuffer(body, dtype="<f8", count=n_slices, offset=pos)
        pos += 8 * n_slices
        count = n_slices * m * n_nodes
        values = np.frombuffer(body, dtype="<f8", count=count, offset=pos)
        pos += 8 * count
        texts = []
        for _ in range(2):
            (length,) = struct.unpack_from("<I", body, pos)
            pos += 4
            texts.append(body[pos : pos + length].decode("utf-8"))
            pos += length

        grid = GridSpec(
            box=tuple(tuple(b) for b in box.tolist()),
            nodes=tuple(nodes),
            n_time=n_time,
            boundary=BOUNDARY_POLICIES[boundary],
            theta=theta,
            store_every=store_every,
        )
        fields = ValueFields(
            values.reshape(n_slices, m, n_nodes).copy(),
            times.copy(),
            grid,
            bool(converged),
            rate,
        )
        header = {"tool": "pyoptswitch", "version": texts[0], "config_hash": texts[1]}
        return fields, header

    def _get_interpolator(self) -> RegularGridInterpolator:
        if self._interpolator is None:
            grid = self.grid
            data = self.values.reshape((self.n_slices, self.m) + grid.nodes)
            data = np.moveaxis(data, 1, -1)
            self._interpolator = RegularGridInterpolator(
                (self.times, *grid.axes), data, method="linear"
            )
        return self._interpolator


def interpolate_many(
    fields: ValueFields,
    t: Union[float, np.ndarray],
    points: np.ndarray,
) -> np.ndarray:
    """Interpolate every mode at many points

    Multilinear in space, linear in time between retained slices.
    Points outside the box are clamped and counted in `fields.clamp_count`.

    Parameters
    ----------
    fields : ValueFields
        Solved fields
    t : Union[float, np.ndarray]
        Time (scalar or per point)
    points : np.ndarray
        Query points of shape (P, k)

    Returns
    -------
    values : np.ndarray
        Array of shape (m, P)
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    lo = np.array([b[0] for b in fields.grid.box])
    hi = np.array([b[1] for b in fields.grid.box])
    clipped = np.clip(points, lo, hi)
    clamped = int(np.sum(np.any(clipped != points, axis=1)))
    if clamped > 0:
        fields.clamp_count += clamped
        logger.debug(f"{clamped} query point(s) clamped into the grid box")
    t_col = np.broadcast_to(np.asarray(t, dtype=float), (len(points),))
    t_col = np.clip(t_col, fields.times[0], fields.times[-1])
    query = np.column_stack([t_col, clipped])
    return fields._get_interpolator()(query).T


def interpolate(fields: ValueFields, mode: int, t: float, x: Sequence[float]) -> float:
    """Interpolate v_mode(t, x)

    Parameters
    ----------
    fields : ValueFields
        Solved fields
    mode : int
        Mode (1-based)
    t : float
        Time in [t_0, T]
    x : Sequence[float]
        State point (clamped into the box)

    Returns
    -------
    value : float
        Interpolated value
    """
    if not 1 <= mode <= fields.m:
        raise ValueError(f"mode={mode} is invalid (Must be '1 <= mode <= {fields.m}').")
    values = interpolate_many(fields, t, np.asarray(x, dtype=float).reshape(1, -1))
    return float(values[mode - 1, 0])
