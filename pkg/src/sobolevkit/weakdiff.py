"""Weak derivatives checked through integration by parts.

``u`` is the alpha-th weak derivative of ``f`` when

    integral(u * phi) = (-1)^|alpha| * integral(f * d^alpha phi)

for every smooth compactly supported test function ``phi``.  Candidates
are verified against a catalog of test functions, never solved for: each
test contributes the residual of the identity above, and the candidate
passes when the worst residual stays below tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product as _cartesian
from typing import Sequence, TextIO

import numpy as np
from numpy.typing import NDArray

from .convolution import convolve, mollify
from .grid import Box, Grid, GridFunction, Region, format_float, lp_norm, quadrature
from .mollifier import MollifierProfile, bump_raw, bump_raw_derivative, scale, standard_bump

__all__ = [
    "MultiIndex",
    "TestFunction",
    "PairingResidual",
    "multi_index_order",
    "validate_multi_index",
    "bump_test_function",
    "test_function_catalog",
    "pair",
    "verify_weak_derivative",
    "mollified_derivative",
    "commutation_residual",
    "write_pairing_csv",
]

MultiIndex = tuple[int, ...]

MAX_DERIVATIVE_ORDER = 2


def multi_index_order(alpha: MultiIndex) -> int:
    return sum(alpha)


def validate_multi_index(alpha: Sequence[int], dim: int, min_order: int = 0) -> MultiIndex:
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != dim:
        raise ValueError(f"multi-index {alpha} has {len(alpha)} entries for dimension {dim}")
    if any(a < 0 for a in alpha):
        raise ValueError(f"multi-index entries must be nonnegative, got {alpha}")
    order = multi_index_order(alpha)
    if order < min_order:
        raise ValueError(f"multi-index order {order} is below the minimum {min_order}")
    if order > MAX_DERIVATIVE_ORDER:
        raise ValueError(
            f"multi-index order {order} exceeds the supported maximum {MAX_DERIVATIVE_ORDER}"
        )
    return alpha


def _sub_indices(alpha: MultiIndex):
    """All gamma <= alpha componentwise, with the product of binomials."""
    ranges = [range(a + 1) for a in alpha]
    for gamma in _cartesian(*ranges):
        coeff = math.prod(math.comb(a, g) for a, g in zip(alpha, gamma))
        yield gamma, coeff


class TestFunction:
    """Smooth test function ``e * bump((x - c)/r) * prod ((x_i - c_i)/r)^beta_i``.

    The ``e`` factor normalizes the pure bump to peak value 1 at its
    center.  Support is the closed ball of radius ``r`` around ``c``;
    derivatives up to order two are analytic via the product rule.
    """

    def __init__(
        self,
        center: Sequence[float],
        radius: float,
        poly: Sequence[int] | None = None,
        label: str | None = None,
    ) -> None:
        self.center = tuple(float(c) for c in center)
        self.radius = float(radius)
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        self.dim = len(self.center)
        if poly is None:
            poly = (0,) * self.dim
        self.poly = tuple(int(b) for b in poly)
        if len(self.poly) != self.dim or any(b < 0 for b in self.poly):
            raise ValueError(f"bad polynomial exponents {poly}")
        if label is None:
            mono = "".join(f"*z{i + 1}^{b}" for i, b in enumerate(self.poly) if b)
            label = f"bump(c={self.center},r={self.radius}){mono}"
        self.label = label

    @property
    def support_lo(self) -> tuple[float, ...]:
        return tuple(c - self.radius for c in self.center)

    @property
    def support_hi(self) -> tuple[float, ...]:
        return tuple(c + self.radius for c in self.center)

    def _scaled(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts.reshape(-1, self.dim)
        return (pts - np.asarray(self.center)) / self.radius

    def _poly_part(self, gamma: MultiIndex, z: NDArray[np.float64]) -> NDArray[np.float64]:
        # d^gamma of prod z_i^beta_i in the scaled variable, chain rule gives r^-|gamma|
        out = np.ones(z.shape[:-1])
        for i, (b, g) in enumerate(zip(self.poly, gamma)):
            if g > b:
                return np.zeros(z.shape[:-1])
            coeff = math.perm(b, g)
            out = out * coeff * z[..., i] ** (b - g)
        return out * self.radius ** (-multi_index_order(gamma))

    def value(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        z = self._scaled(points)
        return math.e * bump_raw(z) * self._poly_part((0,) * self.dim, z)

    def derivative(self, alpha: Sequence[int], points: NDArray[np.float64]) -> NDArray[np.float64]:
        alpha = validate_multi_index(alpha, self.dim)
        z = self._scaled(points)
        total = np.zeros(z.shape[:-1])
        for gamma, coeff in _sub_indices(alpha):
            rest = tuple(a - g for a, g in zip(alpha, gamma))
            bump_part = bump_raw_derivative(gamma, z) * self.radius ** (-multi_index_order(gamma))
            total = total + coeff * bump_part * self._poly_part(rest, z)
        return math.e * total

    def sample(self, grid: Grid) -> GridFunction:
        return GridFunction(grid, self.value(grid.points()).reshape(grid.node_shape))

    def sample_derivative(self, alpha: Sequence[int], grid: Grid) -> GridFunction:
        vals = self.derivative(alpha, grid.points())
        return GridFunction(grid, vals.reshape(grid.node_shape))

    def support_margin(self, box: Box) -> float:
        """Distance from the support ball to the boundary of ``box`` (negative if it escapes)."""
        return min(
            min(s_lo - b_lo, b_hi - s_hi)
            for s_lo, s_hi, b_lo, b_hi in zip(self.support_lo, self.support_hi, box.lo, box.hi)
        )

    def __repr__(self) -> str:
        return f"TestFunction({self.label})"


def bump_test_function(center: Sequence[float], radius: float) -> TestFunction:
    return TestFunction(center, radius)


def test_function_catalog(box: Box, count: int = 8) -> list[TestFunction]:
    """A deterministic catalog of test functions supported strictly inside ``box``.

    Mixes pure bumps with bump-times-monomial products at varied centers
    and radii; at least 8 are produced.
    """
    count = max(int(count), 8)
    n = box.dim
    widths = box.widths
    center = tuple((lo + hi) / 2.0 for lo, hi in zip(box.lo, box.hi))
    max_r = min(widths) / 2.0

    polys: list[tuple[int, ...]] = [(0,) * n]
    for i in range(n):
        polys.append(tuple(1 if j == i else 0 for j in range(n)))
        polys.append(tuple(2 if j == i else 0 for j in range(n)))
    if n >= 2:
        polys.append(tuple(1 if j < 2 else 0 for j in range(n)))

    out: list[TestFunction] = []
    k = 0
    while len(out) < count:
        # walk centers along the main diagonal, shrink radii as we go
        t = (k % 5 - 2) / 10.0  # offsets -0.2 .. 0.2 of the width
        c = tuple(ci + t * w * 0.8 for ci, w in zip(center, widths))
        r = max_r * (0.45 - 0.04 * (k % 6))
        poly = polys[k % len(polys)]
        cand = TestFunction(c, r, poly, label=f"t{k:02d}")
        if cand.support_margin(box) > 0:
            out.append(cand)
        k += 1
        if k > 20 * count:
            raise ValueError("could not fit the requested catalog inside the box")
    return out


def pair(f: GridFunction, phi: TestFunction) -> float:
    """Quadrature of ``f * phi`` over the grid box.

    ``phi``'s support must sit strictly inside the box, so the pairing
    sees the whole support and no boundary terms arise.
    """
    if phi.dim != f.grid.dim:
        raise ValueError(f"test function dimension {phi.dim} does not match grid {f.grid.dim}")
    if phi.support_margin(f.grid.box) <= 0:
        raise ValueError(f"support of {phi.label} escapes the grid box")
    phi_vals = phi.value(f.grid.points()).reshape(f.grid.node_shape)
    return quadrature(GridFunction(f.grid, f.values * phi_vals))


def _pair_derivative(f: GridFunction, phi: TestFunction, alpha: MultiIndex) -> float:
    vals = phi.derivative(alpha, f.grid.points()).reshape(f.grid.node_shape)
    return quadrature(GridFunction(f.grid, f.values * vals))


@dataclass(frozen=True)
class PairingResidual:
    """Integration-by-parts residuals, one per test function."""

    alpha: MultiIndex
    tol: float
    test_ids: tuple[str, ...]
    residuals: tuple[float, ...]

    @property
    def max_residual(self) -> float:
        return max(self.residuals)

    @property
    def verdict(self) -> bool:
        return self.max_residual <= self.tol


def verify_weak_derivative(
    f: GridFunction,
    u: GridFunction,
    alpha: Sequence[int],
    tests: Sequence[TestFunction],
    tol: float,
) -> PairingResidual:
    """Check ``u`` as the alpha-th weak derivative of ``f`` against ``tests``.

    Each residual is ``|pair(u, phi) - (-1)^|alpha| pair(f, d^alpha phi)|``;
    the verdict requires the maximum over the catalog to stay within ``tol``.
    """
    f._check_same_grid(u)
    alpha = validate_multi_index(alpha, f.grid.dim, min_order=1)
    if not tests:
        raise ValueError("no test functions supplied")
    sign = (-1.0) ** multi_index_order(alpha)
    ids = []
    residuals = []
    for phi in tests:
        if phi.support_margin(f.grid.box) <= 0:
            raise ValueError(f"support of {phi.label} escapes the grid box")
        lhs = pair(u, phi)
        rhs = sign * _pair_derivative(f, phi, alpha)
        ids.append(phi.label)
        residuals.append(abs(lhs - rhs))
    return PairingResidual(alpha, float(tol), tuple(ids), tuple(residuals))


def write_pairing_csv(result: PairingResidual, out: TextIO) -> None:
    out.write("test_id,residual\n")
    for test_id, r in zip(result.test_ids, result.residuals):
        out.write(f"{test_id},{format_float(r)}\n")


def mollified_derivative(
    f: GridFunction,
    alpha: Sequence[int],
    eps: float,
    profile: MollifierProfile | None = None,
) -> tuple[GridFunction, Region]:
    """Derivative of the smoothed function via the analytic kernel derivative.

    ``d^alpha f_eps = (d^alpha phi_eps) * f``: the derivative lands on the
    kernel, so ``f`` itself is never finite-differenced.  Values live on
    the eps-interior region.  ``alpha = 0`` reduces to plain smoothing.
    """
    alpha = validate_multi_index(alpha, f.grid.dim)
    if profile is None:
        profile = standard_bump(f.grid.dim)
    m = scale(profile, eps)
    if multi_index_order(alpha) == 0:
        return mollify(f, m)
    return convolve(f, m, deriv=alpha)


def commutation_residual(
    f: GridFunction,
    u: GridFunction,
    alpha: Sequence[int],
    eps: float,
    p: float,
    profile: MollifierProfile | None = None,
) -> float:
    """Size of ``d^alpha(f_eps) - (d^alpha f)_eps`` in ``L^p``.

    The first path differentiates the kernel; the second smooths the
    verified weak derivative ``u``.  Differentiation and smoothing
    commute, so the residual is pure discretization error and shrinks
    with the grid spacing.
    """
    f._check_same_grid(u)
    alpha = validate_multi_index(alpha, f.grid.dim, min_order=1)
    if profile is None:
        profile = standard_bump(f.grid.dim)
    left, region = mollified_derivative(f, alpha, eps, profile)
    right, _ = mollify(u, scale(profile, eps))
    return lp_norm(left - right, p, region)
