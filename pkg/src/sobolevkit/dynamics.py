"""Dynamical checks: chord iteration, invertibility, flows, shadows, pairings.

The chord iteration ``x <- x + (y - f(x)) / df_a`` solves ``f(x) = y``
with the derivative frozen at an anchor point; it contracts whenever the
frozen slope is close enough to the true one.  The exponential flow
``phi_t(x) = x * exp(k t)`` realizes the semigroup law ``phi_{s+t} =
phi_s o phi_t`` exactly, and smoothing nets recover distributional
pairings in the shrinking-eps limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, TextIO

import numpy as np
from numpy.typing import NDArray

from .convolution import OrbitNet, mollify
from .grid import Grid, GridFunction, Region, format_float, quadrature
from .mollifier import MollifierProfile, scale, standard_bump
from .weakdiff import TestFunction, mollified_derivative, pair

__all__ = [
    "NewtonTrace",
    "InvertibilityReport",
    "FlowCheck",
    "ShadowReport",
    "VectorGridFunction",
    "newton_net",
    "invertibility_check",
    "exponential_flow",
    "distributional_shadow",
    "section_pairing",
    "write_newton_csv",
    "write_flow_csv",
]

# Residuals beyond this are treated as divergence and stop the iteration
# before floating-point overflow produces non-finite iterates.
_DIVERGENCE_LIMIT = 1e15

RK4_STEP = 1e-3


@dataclass(frozen=True)
class NewtonTrace:
    """Iterates and residuals ``|f(x_k) - y|`` of one chord-method run."""

    anchor: float
    df_anchor: float
    target: float
    iterates: tuple[float, ...]
    residuals: tuple[float, ...]
    converged: bool

    @property
    def final(self) -> float:
        return self.iterates[-1]

    @property
    def iterations(self) -> int:
        return len(self.iterates) - 1


def newton_net(
    f: Callable[[float], float],
    df_a: float,
    y: float,
    x0: float,
    max_iter: int = 60,
    tol: float = 1e-10,
    anchor: float | None = None,
) -> NewtonTrace:
    """Chord iteration ``x_{k+1} = x_k + (y - f(x_k)) / df_a`` toward ``f(x) = y``.

    The derivative stays frozen at its anchor value ``df_a``, which must
    be nonzero.  Iteration stops when the residual drops to ``tol``, the
    budget runs out, or the trajectory diverges; divergence (including a
    non-finite iterate) yields ``converged = False`` with the finite
    prefix of the trace.
    """
    df_a = float(df_a)
    y = float(y)
    x0 = float(x0)
    if df_a == 0.0:
        raise ValueError("frozen derivative df_a is zero; the chord step is undefined")
    if not all(math.isfinite(v) for v in (df_a, y, x0)):
        raise ValueError("df_a, y and x0 must be finite")
    if max_iter < 1:
        raise ValueError(f"max_iter must be at least 1, got {max_iter}")

    iterates = [x0]
    residuals = []
    converged = False
    x = x0
    for _ in range(int(max_iter) + 1):
        fx = float(f(x))
        if not math.isfinite(fx):
            break
        r = abs(fx - y)
        residuals.append(r)
        if r <= tol:
            converged = True
            break
        if r > _DIVERGENCE_LIMIT or len(iterates) > int(max_iter):
            break
        x = x + (y - fx) / df_a
        if not math.isfinite(x):
            break
        iterates.append(x)

    iterates = iterates[: len(residuals)] if len(residuals) < len(iterates) else iterates
    return NewtonTrace(
        anchor=float(anchor) if anchor is not None else x0,
        df_anchor=df_a,
        target=y,
        iterates=tuple(iterates),
        residuals=tuple(residuals),
        converged=converged,
    )


def write_newton_csv(trace: NewtonTrace, out: TextIO) -> None:
    out.write("iter,x,residual\n")
    for k, (x, r) in enumerate(zip(trace.iterates, trace.residuals)):
        out.write(f"{k},{format_float(x)},{format_float(r)}\n")


@dataclass(frozen=True)
class InvertibilityReport:
    """Sign and size of the smoothed derivative on the interior region."""

    min_abs_df_eps: float
    invertible: bool
    path_gap: float | None = None


def invertibility_check(
    f: GridFunction,
    u: GridFunction | None,
    eps: float,
    profile: MollifierProfile | None = None,
) -> InvertibilityReport:
    """Check that the derivative of the smoothed 1-d function never vanishes.

    ``D f_eps`` is computed with the analytic kernel derivative; the
    function is declared invertible when its derivative keeps one sign
    and stays away from zero on the interior region.  When the verified
    weak derivative ``u`` is supplied, the report also carries the sup
    gap between ``D f_eps`` and the smoothing of ``u`` (the two routes
    agree up to discretization).
    """
    if f.grid.dim != 1:
        raise ValueError("invertibility check applies to 1-d grid functions")
    if profile is None:
        profile = standard_bump(1)
    df_eps, region = mollified_derivative(f, (1,), eps, profile)
    vals = df_eps.values[region.mask]
    if vals.size == 0:
        raise ValueError(f"interior region at eps={eps} contains no nodes")
    min_abs = float(np.min(np.abs(vals)))
    sign_change = bool(vals.min() < 0.0 < vals.max())
    invertible = min_abs > 0.0 and not sign_change

    path_gap = None
    if u is not None:
        u_eps, _ = mollify(u, scale(profile, eps))
        path_gap = float(np.max(np.abs(df_eps.values - u_eps.values), where=region.mask, initial=0.0))
    return InvertibilityReport(min_abs, invertible, path_gap)


@dataclass(frozen=True)
class FlowCheck:
    """Group-law residual of the exponential flow plus an RK4 cross-check."""

    k: float
    x0: float
    s: float
    t: float
    lhs: float
    rhs: float
    residual: float
    rk4_error: float


def _rk4_exponential(k: float, x0: float, t: float, step: float = RK4_STEP) -> float:
    """Integrate ``x' = k x`` from 0 to ``t`` with classical RK4 at fixed step."""
    if t == 0.0:
        return x0
    n = max(1, math.ceil(abs(t) / step))
    h = t / n
    x = x0
    for _ in range(n):
        k1 = k * x
        k2 = k * (x + 0.5 * h * k1)
        k3 = k * (x + 0.5 * h * k2)
        k4 = k * (x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


def exponential_flow(k: float, x0: float, s: float, t: float) -> FlowCheck:
    """Check ``phi_{s+t}(x0) = phi_t(phi_s(x0))`` for ``phi_t(x) = x e^{k t}``.

    ``lhs`` evaluates the flow at ``s + t`` directly, ``rhs`` composes the
    two partial flows; the group law makes them equal up to rounding.
    The RK4 error compares numerical integration of ``x' = k x`` over
    ``[0, t]`` against the closed form.
    """
    k, x0, s, t = float(k), float(x0), float(s), float(t)
    for name, v in (("k", k), ("x0", x0), ("s", s), ("t", t)):
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v}")
    lhs = x0 * math.exp(k * (s + t))
    rhs = (x0 * math.exp(k * s)) * math.exp(k * t)
    rk4 = _rk4_exponential(k, x0, t)
    exact_t = x0 * math.exp(k * t)
    return FlowCheck(k, x0, s, t, lhs, rhs, abs(lhs - rhs), abs(rk4 - exact_t))


def write_flow_csv(check: FlowCheck, out: TextIO) -> None:
    out.write("k,x0,s,t,lhs,rhs,residual,rk4_error\n")
    row = (check.k, check.x0, check.s, check.t, check.lhs, check.rhs, check.residual, check.rk4_error)
    out.write(",".join(format_float(v) for v in row) + "\n")


@dataclass(frozen=True)
class ShadowReport:
    """Pairings of a smoothing net against a test function, with their limit."""

    epses: tuple[float, ...]
    pairings: tuple[float, ...]
    extrapolated: float
    direct: float | None = None


def distributional_shadow(u_net: OrbitNet, v: TestFunction) -> ShadowReport:
    """Extrapolate ``integral(u_eps * v)`` to the ``eps -> 0`` limit.

    Each net entry contributes one pairing; ``v`` must be supported
    inside every entry's region so the absent boundary values never
    matter.  The limit comes from order-1 Richardson extrapolation on
    the last two rungs of the ladder.
    """
    if not u_net.entries:
        raise ValueError("empty orbit net")
    grid = u_net.base.grid
    margin = v.support_margin(grid.box)
    for entry in u_net.entries:
        if margin <= entry.eps:
            raise ValueError(
                f"support of {v.label} is within {margin} of the boundary, "
                f"inside the absent band at eps={entry.eps}"
            )
    epses = tuple(e.eps for e in u_net.entries)
    pairings = tuple(pair(e.f_eps, v) for e in u_net.entries)
    if len(pairings) == 1:
        extrapolated = pairings[0]
    else:
        e1, e2 = epses[-2], epses[-1]
        p1, p2 = pairings[-2], pairings[-1]
        extrapolated = p2 + (p2 - p1) * e2 / (e1 - e2)
    direct = pair(u_net.base, v)
    return ShadowReport(epses, pairings, extrapolated, direct)


@dataclass(frozen=True)
class VectorGridFunction:
    """Vector values at every grid node: shape ``node_shape + (m,)``."""

    grid: Grid
    values: NDArray[np.float64]

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim == self.grid.dim:
            vals = vals[..., np.newaxis]
        expected = self.grid.node_shape
        if vals.shape[:-1] != expected or vals.shape[-1] < 1:
            raise ValueError(
                f"expected values of shape {expected} + (m,), got {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("vector grid function values must be finite")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def components(self) -> int:
        return self.values.shape[-1]


def section_pairing(
    f: VectorGridFunction,
    g: VectorGridFunction,
    region: Region | None = None,
) -> float:
    """Quadrature of the pointwise inner product ``<f(x), g(x)>`` over ``region``."""
    if f.grid != g.grid:
        raise ValueError("sections live on different grids")
    if f.components != g.components:
        raise ValueError(
            f"component counts differ: {f.components} vs {g.components}"
        )
    dot = np.sum(f.values * g.values, axis=-1)
    return quadrature(GridFunction(f.grid, dot), region)
