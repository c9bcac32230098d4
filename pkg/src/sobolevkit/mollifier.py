"""Smooth compactly supported unit-mass kernels.

The standard bump profile is

    phi(x) = C * exp(1 / (|x|^2 - 1))   for |x| < 1,   0 otherwise,

with C chosen so the profile integrates to one over the unit ball.
Scaling by ``eps`` gives the family ``phi_eps(x) = eps^(-n) phi(x/eps)``:
support shrinks to the closed ball of radius ``eps`` while the mass
stays one, and the derivative sups grow like ``eps^(-n-|alpha|)``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .grid import Box, GridFunction, make_grid, quadrature

__all__ = [
    "MollifierProfile",
    "Mollifier",
    "UnitReport",
    "standard_bump",
    "scale",
    "verify_unit",
    "bump_raw",
    "bump_raw_derivative",
]

MIN_NORMALIZATION_RESOLUTION = 32

# Default cells per axis for the one-off normalization quadrature.  The
# bump is flat to all orders at the support boundary, so the trapezoid
# rule converges faster than any power of the spacing; these are already
# at machine accuracy in 1-d and 2-d.
_DEFAULT_NORMALIZATION_RESOLUTION = {1: 4096, 2: 1024, 3: 192}


def _points_2d(points: NDArray[np.float64], dim: int) -> NDArray[np.float64]:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1) if dim == 1 else pts.reshape(1, -1)
    if pts.shape[-1] != dim:
        raise ValueError(f"points have last axis {pts.shape[-1]}, expected {dim}")
    return pts


def bump_raw(points: NDArray[np.float64]) -> NDArray[np.float64]:
    """Unnormalized bump ``exp(1/(|x|^2 - 1))`` with an exact-zero branch outside ``|x| < 1``."""
    pts = np.asarray(points, dtype=np.float64)
    r2 = np.sum(pts * pts, axis=-1)
    out = np.zeros_like(r2)
    inside = r2 < 1.0
    u = r2[inside] - 1.0
    out[inside] = np.exp(1.0 / u)
    return out


def _bump_raw_gradient(points: NDArray[np.float64], axis: int) -> NDArray[np.float64]:
    # d/dx_i exp(1/u) = -2 x_i / u^2 * exp(1/u),  u = |x|^2 - 1
    pts = np.asarray(points, dtype=np.float64)
    r2 = np.sum(pts * pts, axis=-1)
    out = np.zeros_like(r2)
    inside = r2 < 1.0
    u = r2[inside] - 1.0
    xi = pts[..., axis][inside]
    out[inside] = -2.0 * xi / (u * u) * np.exp(1.0 / u)
    return out


def _bump_raw_hessian(points: NDArray[np.float64], i: int, j: int) -> NDArray[np.float64]:
    # d2/dx_i dx_j exp(1/u) = exp(1/u) * (-2 delta_ij/u^2 + 8 x_i x_j/u^3 + 4 x_i x_j/u^4)
    pts = np.asarray(points, dtype=np.float64)
    r2 = np.sum(pts * pts, axis=-1)
    out = np.zeros_like(r2)
    inside = r2 < 1.0
    u = r2[inside] - 1.0
    xi = pts[..., i][inside]
    xj = pts[..., j][inside]
    term = 8.0 * xi * xj / u**3 + 4.0 * xi * xj / u**4
    if i == j:
        term = term - 2.0 / (u * u)
    out[inside] = np.exp(1.0 / u) * term
    return out


def bump_raw_derivative(alpha: tuple[int, ...], points: NDArray[np.float64]) -> NDArray[np.float64]:
    """Partial derivative ``d^alpha`` of the unnormalized bump.

    Orders 0 to 2 use the closed forms above; higher orders fall back to
    nested central differences of the analytic second derivatives.
    """
    alpha = tuple(int(a) for a in alpha)
    if any(a < 0 for a in alpha):
        raise ValueError(f"multi-index entries must be nonnegative, got {alpha}")
    order = sum(alpha)
    pts = _points_2d(points, len(alpha))
    if order == 0:
        return bump_raw(pts)
    if order == 1:
        return _bump_raw_gradient(pts, alpha.index(1))
    if order == 2:
        axes = [i for i, a in enumerate(alpha) for _ in range(a)]
        return _bump_raw_hessian(pts, axes[0], axes[1])
    # peel one derivative off numerically and recurse on the rest
    axis = next(i for i, a in enumerate(alpha) if a > 0)
    rest = tuple(a - 1 if i == axis else a for i, a in enumerate(alpha))
    h = 1e-5
    shift = np.zeros(len(alpha))
    shift[axis] = h
    return (bump_raw_derivative(rest, pts + shift) - bump_raw_derivative(rest, pts - shift)) / (2.0 * h)


@dataclass(frozen=True)
class MollifierProfile:
    """Normalized standard bump on the unit ball in dimension ``dim``."""

    dim: int
    normalization: float
    normalization_resolution: int

    @property
    def support_radius(self) -> float:
        return 1.0

    def value(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        return self.normalization * bump_raw(_points_2d(points, self.dim))

    def derivative(self, alpha: tuple[int, ...], points: NDArray[np.float64]) -> NDArray[np.float64]:
        if len(alpha) != self.dim:
            raise ValueError(f"multi-index {alpha} does not match dimension {self.dim}")
        return self.normalization * bump_raw_derivative(alpha, _points_2d(points, self.dim))


@functools.lru_cache(maxsize=None)
def _normalization_constant(dim: int, resolution: int) -> float:
    box = Box((-1.0,) * dim, (1.0,) * dim)
    grid = make_grid(box, resolution)
    samples = GridFunction(grid, bump_raw(grid.points()))
    mass = quadrature(samples)
    return 1.0 / mass


def standard_bump(dim: int, normalization_resolution: int | None = None) -> MollifierProfile:
    """The standard bump profile, normalized to unit mass by quadrature.

    ``normalization_resolution`` is the cells-per-axis count of the grid
    used once to compute the constant; it must be at least 32.
    """
    dim = int(dim)
    if not 1 <= dim <= 3:
        raise ValueError(f"dimension must be between 1 and 3, got {dim}")
    if normalization_resolution is None:
        normalization_resolution = _DEFAULT_NORMALIZATION_RESOLUTION[dim]
    normalization_resolution = int(normalization_resolution)
    if normalization_resolution < MIN_NORMALIZATION_RESOLUTION:
        raise ValueError(
            f"normalization resolution {normalization_resolution} is too coarse; "
            f"need at least {MIN_NORMALIZATION_RESOLUTION} cells per axis"
        )
    return MollifierProfile(dim, _normalization_constant(dim, normalization_resolution), normalization_resolution)


@dataclass(frozen=True)
class Mollifier:
    """Scaled kernel ``phi_eps(x) = eps^(-n) phi(x/eps)`` supported on ``|x| <= eps``."""

    profile: MollifierProfile
    eps: float

    @property
    def dim(self) -> int:
        return self.profile.dim

    @property
    def support_radius(self) -> float:
        return self.eps

    def value(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        pts = _points_2d(points, self.dim)
        return self.eps ** (-self.dim) * self.profile.value(pts / self.eps)

    def derivative(self, alpha: tuple[int, ...], points: NDArray[np.float64]) -> NDArray[np.float64]:
        pts = _points_2d(points, self.dim)
        order = sum(alpha)
        return self.eps ** (-self.dim - order) * self.profile.derivative(alpha, pts / self.eps)


def scale(profile: MollifierProfile, eps: float) -> Mollifier:
    """Scale ``profile`` down to support radius ``eps > 0``."""
    eps = float(eps)
    if not (eps > 0 and math.isfinite(eps)):
        raise ValueError(f"eps must be positive and finite, got {eps}")
    return Mollifier(profile, eps)


@dataclass(frozen=True)
class UnitReport:
    """Checked unit properties of a scaled kernel.

    ``c_bounds[k]`` is the observed sup of ``|d^alpha phi_eps|`` over all
    multi-indices of order ``k``, for ``k = 0, 1, 2``.
    """

    nonneg: bool
    support_ok: bool
    mass_error: float
    c_bounds: tuple[float, float, float]
    mass_tol: float

    @property
    def passed(self) -> bool:
        return self.nonneg and self.support_ok and self.mass_error <= self.mass_tol


def _multi_indices_of_order(dim: int, order: int) -> list[tuple[int, ...]]:
    if order == 0:
        return [(0,) * dim]
    out = []
    for prefix in _multi_indices_of_order(dim, order - 1):
        for i in range(dim):
            cand = tuple(a + 1 if j == i else a for j, a in enumerate(prefix))
            if cand not in out:
                out.append(cand)
    return out


def verify_unit(m: Mollifier, grid_resolution: int, tol: float = 1e-3) -> UnitReport:
    """Check the defining kernel properties on a grid over ``[-eps, eps]^n``.

    Verifies nonnegativity and the exact-zero branch outside the support
    ball, measures ``|quadrature - 1|``, and records derivative sups up
    to order two.
    """
    n = m.dim
    box = Box((-m.eps,) * n, (m.eps,) * n)
    grid = make_grid(box, int(grid_resolution))
    pts = grid.points()
    vals = m.value(pts)

    nonneg = bool(np.min(vals) >= 0.0)
    radii = np.sqrt(np.sum(pts * pts, axis=-1))
    outside = radii > m.eps
    support_ok = bool(np.all(vals[outside] == 0.0))
    mass = quadrature(GridFunction(grid, vals.reshape(grid.node_shape)))
    mass_error = abs(mass - 1.0)

    c_bounds = []
    for order in range(3):
        sup = 0.0
        for alpha in _multi_indices_of_order(n, order):
            sup = max(sup, float(np.max(np.abs(m.derivative(alpha, pts)))))
        c_bounds.append(sup)

    return UnitReport(nonneg, support_ok, mass_error, tuple(c_bounds), float(tol))
