"""Uniform tensor-product grids on boxes.

Everything downstream (mollification, weak-derivative checks, Sobolev
norms) works with functions sampled at the nodes of a uniform grid over
an axis-aligned box in dimension 1 to 3.  This module provides the box
and grid containers, trapezoid quadrature, L^p norms, interior regions,
and an almost-everywhere equality check at grid resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, TextIO

import numpy as np
from numpy.typing import NDArray

__all__ = [
    "Box",
    "Grid",
    "GridFunction",
    "Region",
    "make_grid",
    "quadrature",
    "lp_norm",
    "interior_region",
    "ae_equal",
    "write_grid_function_csv",
    "read_grid_function_csv",
]

MAX_DIM = 3

def format_float(x: float) -> str:
    """Shortest decimal string that parses back to exactly ``x``.

    Used by every CSV writer so identical inputs produce byte-identical
    output; integral values drop the trailing ``.0``.
    """
    s = repr(float(x))
    return s[:-2] if s.endswith(".0") else s


def _as_float_tuple(xs: Iterable[float]) -> tuple[float, ...]:
    return tuple(float(x) for x in xs)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``[lo_1, hi_1] x ... x [lo_n, hi_n]`` with ``1 <= n <= 3``."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self) -> None:
        lo = _as_float_tuple(self.lo)
        hi = _as_float_tuple(self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if len(lo) != len(hi):
            raise ValueError(f"lo has {len(lo)} entries but hi has {len(hi)}")
        if not 1 <= len(lo) <= MAX_DIM:
            raise ValueError(f"dimension must be between 1 and {MAX_DIM}, got {len(lo)}")
        if not all(math.isfinite(a) and math.isfinite(b) for a, b in zip(lo, hi)):
            raise ValueError("box corners must be finite")
        for i, (a, b) in enumerate(zip(lo, hi)):
            if not a < b:
                raise ValueError(f"axis {i}: need lo < hi, got [{a}, {b}]")

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def widths(self) -> tuple[float, ...]:
        return tuple(b - a for a, b in zip(self.lo, self.hi))

    @property
    def volume(self) -> float:
        return math.prod(self.widths)


@dataclass(frozen=True)
class Grid:
    """Uniform grid: ``resolution[i]`` cells per axis, ``resolution[i] + 1`` nodes.

    Node coordinates along axis ``i`` are ``lo[i] + j * spacing[i]`` for
    ``j = 0 .. resolution[i]``; node values throughout the package are
    stored row-major over the axes (C order).
    """

    box: Box
    resolution: tuple[int, ...]

    def __post_init__(self) -> None:
        res = tuple(int(r) for r in self.resolution)
        object.__setattr__(self, "resolution", res)
        if len(res) != self.box.dim:
            raise ValueError(
                f"resolution has {len(res)} entries for a {self.box.dim}-d box"
            )
        if any(r < 1 for r in res):
            raise ValueError(f"resolution must be >= 1 per axis, got {res}")

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(w / r for w, r in zip(self.box.widths, self.resolution))

    @property
    def node_shape(self) -> tuple[int, ...]:
        return tuple(r + 1 for r in self.resolution)

    @property
    def node_count(self) -> int:
        return math.prod(self.node_shape)

    @property
    def cell_volume(self) -> float:
        return math.prod(self.spacing)

    def axis_nodes(self, axis: int) -> NDArray[np.float64]:
        return np.linspace(self.box.lo[axis], self.box.hi[axis], self.resolution[axis] + 1)

    def meshes(self) -> tuple[NDArray[np.float64], ...]:
        """Coordinate arrays of shape ``node_shape``, one per axis (ij indexing)."""
        axes = [self.axis_nodes(i) for i in range(self.dim)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def points(self) -> NDArray[np.float64]:
        """All node coordinates as an array of shape ``(node_count, dim)``."""
        return np.stack([m.ravel() for m in self.meshes()], axis=-1)

    def trapezoid_weights(self) -> NDArray[np.float64]:
        """Tensor-product trapezoid weights, shape ``node_shape``.

        Per axis the weights are ``h/2`` at the two end nodes and ``h``
        inside, so the rule is exact for affine integrands.
        """
        w = np.ones(1)
        for h, r in zip(self.spacing, self.resolution):
            axis_w = np.full(r + 1, h)
            axis_w[0] = axis_w[-1] = h / 2.0
            w = np.multiply.outer(w, axis_w)
        return w.reshape(self.node_shape)


def make_grid(box: Box, resolution: int | Sequence[int]) -> Grid:
    """Build a uniform grid over ``box`` with ``resolution`` cells per axis."""
    if isinstance(resolution, (int, np.integer)):
        res = (int(resolution),) * box.dim
    else:
        res = tuple(int(r) for r in resolution)
    return Grid(box, res)


@dataclass(frozen=True)
class GridFunction:
    """Real values sampled at every node of a grid.  All values must be finite."""

    grid: Grid
    values: NDArray[np.float64]

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.size != self.grid.node_count:
            raise ValueError(
                f"expected {self.grid.node_count} values, got {vals.size}"
            )
        vals = vals.reshape(self.grid.node_shape).copy()
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_callable(cls, grid: Grid, fn: Callable[[NDArray[np.float64]], NDArray[np.float64]]) -> "GridFunction":
        """Sample ``fn`` at the grid nodes; ``fn`` maps ``(N, dim)`` points to ``(N,)`` values."""
        vals = np.asarray(fn(grid.points()), dtype=np.float64)
        return cls(grid, vals.reshape(grid.node_shape))

    def _check_same_grid(self, other: "GridFunction") -> None:
        if self.grid != other.grid:
            raise ValueError("grid functions live on different grids")

    def __add__(self, other: "GridFunction") -> "GridFunction":
        self._check_same_grid(other)
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        self._check_same_grid(other)
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "GridFunction":
        return GridFunction(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return GridFunction(self.grid, -self.values)


@dataclass(frozen=True)
class Region:
    """Boolean node mask singling out a subset of a grid's nodes."""

    grid: Grid
    mask: NDArray[np.bool_]

    def __post_init__(self) -> None:
        mask = np.asarray(self.mask, dtype=bool)
        if mask.size != self.grid.node_count:
            raise ValueError(
                f"expected {self.grid.node_count} mask entries, got {mask.size}"
            )
        mask = mask.reshape(self.grid.node_shape).copy()
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def full(cls, grid: Grid) -> "Region":
        return cls(grid, np.ones(grid.node_shape, dtype=bool))

    @property
    def is_empty(self) -> bool:
        return not bool(self.mask.any())

    def node_count(self) -> int:
        return int(self.mask.sum())


def _resolve_region(f: GridFunction, region: Region | None) -> NDArray[np.bool_]:
    if region is None:
        return np.ones(f.grid.node_shape, dtype=bool)
    if region.grid != f.grid:
        raise ValueError("region and grid function live on different grids")
    return region.mask


def quadrature(f: GridFunction, region: Region | None = None) -> float:
    """Tensor-product trapezoid approximation of the integral of ``f``.

    Nodes outside ``region`` contribute zero weight; ``region=None``
    integrates over the whole box.
    """
    mask = _resolve_region(f, region)
    w = f.grid.trapezoid_weights()
    return float(np.sum(w * f.values, where=mask))


def lp_norm(f: GridFunction, p: float, region: Region | None = None) -> float:
    """Discrete ``L^p`` norm of ``f`` over ``region``.

    Finite ``p >= 1`` integrates ``|f|^p`` with the trapezoid rule and
    takes the p-th root; ``p = inf`` takes the max of ``|f|`` over the
    region's nodes (the grid stand-in for the essential supremum).
    """
    mask = _resolve_region(f, region)
    if math.isinf(p):
        if not mask.any():
            return 0.0
        return float(np.max(np.abs(f.values), where=mask, initial=0.0))
    p = float(p)
    if p < 1.0:
        raise ValueError(f"p must be >= 1 or inf, got {p}")
    w = f.grid.trapezoid_weights()
    total = float(np.sum(w * np.abs(f.values) ** p, where=mask))
    return total ** (1.0 / p)


def boundary_distances(grid: Grid) -> NDArray[np.float64]:
    """Distance of every node to the boundary of the grid's box.

    The distance is ``min_i min(x_i - lo_i, hi_i - x_i)``; it is zero on
    the boundary faces and maximal at the center.
    """
    dist = None
    for axis in range(grid.dim):
        x = grid.axis_nodes(axis)
        d = np.minimum(x - grid.box.lo[axis], grid.box.hi[axis] - x)
        shape = [1] * grid.dim
        shape[axis] = x.size
        d = d.reshape(shape)
        dist = d if dist is None else np.minimum(dist, d)
    return np.broadcast_to(dist, grid.node_shape).copy()


def interior_region(grid: Grid, eps: float) -> Region:
    """Nodes at distance strictly greater than ``eps`` from the box boundary."""
    eps = float(eps)
    if eps < 0:
        raise ValueError(f"eps must be nonnegative, got {eps}")
    return Region(grid, boundary_distances(grid) > eps)


def ae_equal(f: GridFunction, g: GridFunction, tol: float = 1e-12) -> tuple[bool, float]:
    """Almost-everywhere equality at grid resolution.

    Returns ``(equal, disagreement_measure)`` where the measure is the
    quadrature of the indicator of ``|f - g| > tol``.  The grid cannot
    localize sets smaller than one cell, so the functions count as equal
    when the disagreement measure does not exceed one cell's volume.
    """
    f._check_same_grid(g)
    indicator = (np.abs(f.values - g.values) > float(tol)).astype(np.float64)
    measure = quadrature(GridFunction(f.grid, indicator))
    cell = f.grid.cell_volume
    return measure <= cell * (1.0 + 1e-12), measure


def _format_axis_floats(xs: Sequence[float]) -> str:
    return ",".join(format_float(x) for x in xs)


def write_grid_function_csv(f: GridFunction, out: TextIO) -> None:
    """Write ``f`` as CSV: a grid header line, then one coord...,value row per node."""
    lo = _format_axis_floats(f.grid.box.lo)
    hi = _format_axis_floats(f.grid.box.hi)
    res = ",".join(str(r) for r in f.grid.resolution)
    out.write(f"# grid lo={lo} hi={hi} res={res}\n")
    pts = f.grid.points()
    vals = f.values.ravel()
    for row, v in zip(pts, vals):
        coords = ",".join(format_float(c) for c in row)
        out.write(f"{coords},{format_float(v)}\n")


def read_grid_function_csv(inp: TextIO) -> GridFunction:
    """Inverse of :func:`write_grid_function_csv`."""
    header = inp.readline().strip()
    if not header.startswith("# grid "):
        raise ValueError(f"missing grid header, got {header!r}")
    fields: dict[str, str] = {}
    for part in header[len("# grid "):].split():
        key, _, raw = part.partition("=")
        fields[key] = raw
    try:
        lo = tuple(float(x) for x in fields["lo"].split(","))
        hi = tuple(float(x) for x in fields["hi"].split(","))
        res = tuple(int(x) for x in fields["res"].split(","))
    except KeyError as exc:
        raise ValueError(f"grid header missing field {exc}") from exc
    grid = Grid(Box(lo, hi), res)
    vals = []
    for line in inp:
        line = line.strip()
        if not line:
            continue
        vals.append(float(line.split(",")[-1]))
    return GridFunction(grid, np.array(vals))
