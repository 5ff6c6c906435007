"""Area of the swept union-of-disks region and the handover-rate kernel.

The region for parameters ``(v, r0, v0, theta0, s)`` is the union over
``t in [0, s]`` of disks centred at ``(v t, 0)`` with radius ``r0(t)``, the
distance of the serving drone at time ``t``.  A point ``(x, y)`` is covered iff
``y**2 <= max_t g(t; x)`` with

    g(t; x) = r0(t)**2 - (x - v t)**2
            = (v0**2 - v**2) t**2 + 2 (r0 v0 cos(theta0) + x v) t + r0**2 - x**2,

a quadratic in ``t``.  Its maximum over ``[0, s]`` is available in closed form
and is piecewise quadratic in ``x``, so the area reduces to a 1-D integral of
``2 sqrt(Y(x))`` with known breakpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .model import SweepParams
from .quadrature import NumericalFailure, integrate

__all__ = [
    "CoverageQuadratic",
    "NumericalFailure",
    "area_growth_rate_at_zero",
    "kernel_F",
    "serving_distance_at",
    "sweep_area",
    "y_extent",
]


def serving_distance_at(r0, v0, theta0, t):
    """Distance from the origin of the serving drone at time ``t``."""
    d2 = r0 * r0 + v0 * v0 * t * t + 2.0 * r0 * v0 * t * np.cos(theta0)
    return np.sqrt(np.maximum(d2, 0.0))


@dataclass(frozen=True)
class CoverageQuadratic:
    """``q(t) = a2 t^2 + a1 t + a0``; the point is covered at ``t`` iff ``q(t) <= 0``."""

    a2: float
    a1: float
    a0: float

    @classmethod
    def at_point(cls, p: SweepParams, x, y) -> "CoverageQuadratic":
        return cls(
            p.v**2 - p.v0**2,
            -2.0 * (x * p.v + p.r0 * p.v0 * np.cos(p.theta0)),
            x * x + y * y - p.r0**2,
        )

    def __call__(self, t):
        return (self.a2 * t + self.a1) * t + self.a0

    def minimum_on(self, s: float):
        """Minimum of ``q`` over ``[0, s]`` (vectorised over the coefficients)."""
        a2, a1, a0 = np.broadcast_arrays(
            np.asarray(self.a2, float), np.asarray(self.a1, float), np.asarray(self.a0, float)
        )
        best = np.minimum(a0, (a2 * s + a1) * s + a0)
        with np.errstate(divide="ignore", invalid="ignore"):
            tv = -a1 / (2.0 * a2)
        inside = (a2 > 0.0) & (tv > 0.0) & (tv < s)
        qv = np.where(inside, a0 - a1 * a1 / (4.0 * np.where(inside, a2, 1.0)), np.inf)
        return np.minimum(best, qv)


def y_extent(p: SweepParams, x):
    """``Y(x) = max_{t in [0, s]} [r0(t)^2 - (x - v t)^2]`` (vectorised in ``x``).

    ``(x, y)`` lies in the region iff ``y**2 <= Y(x)``.
    """
    x = np.asarray(x, dtype=float)
    c = math.cos(p.theta0)
    r0, v, v0, s = p.r0, p.v, p.v0, p.s
    g0 = r0 * r0 - x * x
    rs2 = r0 * r0 + v0 * v0 * s * s + 2.0 * r0 * v0 * s * c
    gs = rs2 - (x - v * s) ** 2
    out = np.maximum(g0, gs)
    a2 = v0 * v0 - v * v
    if a2 < 0.0 and s > 0.0:
        b = r0 * v0 * c + x * v  # half the linear coefficient
        tv = -b / a2
        inside = (tv > 0.0) & (tv < s)
        gv = g0 - b * b / a2
        out = np.where(inside, np.maximum(out, gv), out)
    return out


def _max_radius(p: SweepParams) -> float:
    """max_t r0(t) over [0, s]; r0(t)^2 is convex so an endpoint attains it."""
    return max(p.r0, float(serving_distance_at(p.r0, p.v0, p.theta0, p.s)))


def _breakpoints(p: SweepParams) -> list[float]:
    """x-values where the maximising t changes regime."""
    c = math.cos(p.theta0)
    r0, v, v0, s = p.r0, p.v, p.v0, p.s
    pts = []
    if v * s > 0.0:
        a2 = v0 * v0 - v * v
        if a2 < 0.0:
            # vertex enters [0, s] at t = 0 and leaves at t = s
            pts.append(-r0 * v0 * c / v)
            pts.append((-a2 * s - r0 * v0 * c) / v)
        else:
            rs2 = r0 * r0 + v0 * v0 * s * s + 2.0 * r0 * v0 * s * c
            pts.append((rs2 - r0 * r0 + v * v * s * s) / (2.0 * v * s))
    return pts


def support_interval(p: SweepParams) -> tuple[float, float]:
    """Exact x-projection ``[x_lo, x_hi]`` of the region."""
    rmax = _max_radius(p)
    lo_box = -rmax
    hi_box = p.v * p.s + rmax
    scale = max(rmax, p.v * p.s)

    def Y(x):
        return float(y_extent(p, x))

    xtol = 1e-15 * scale
    x_lo = lo_box if Y(lo_box) >= 0.0 else brentq(Y, lo_box, 0.0, xtol=xtol)
    x_hi = hi_box if Y(hi_box) >= 0.0 else brentq(Y, 0.0, hi_box, xtol=xtol)
    return x_lo, x_hi


def sweep_area(p: SweepParams, tol: float = 1e-8) -> float:
    """Area of the swept region, to relative error ``tol``.

    Raises :class:`NumericalFailure` if the quadrature does not converge.
    """
    if not (0.0 < tol <= 1e-2):
        raise ValueError("tol must be in (0, 1e-2]")
    base = math.pi * p.r0 * p.r0
    if p.s == 0.0 or (p.v == 0.0 and p.v0 == 0.0):
        return base
    if p.v * p.s == 0.0:
        # concentric disks: the largest one is the union
        return math.pi * _max_radius(p) ** 2
    x_lo, x_hi = support_interval(p)
    pts = [x for x in _breakpoints(p) if x_lo < x < x_hi]

    def integrand(x):
        return 2.0 * np.sqrt(np.maximum(y_extent(p, x), 0.0))

    area, _ = integrate(integrand, x_lo, x_hi, rtol=tol, points=pts)
    return area


def area_growth_rate_at_zero(v: float, v0: float, theta0: float, r0: float) -> float:
    """d|A|/dz at z = 0 where z = v0 * s is the serving drone's travel."""
    if not v0 > 0.0:
        raise ValueError("growth rate is per unit of serving travel; needs v0 > 0")
    rho = v / v0
    c = math.cos(theta0)
    if abs(c) <= rho:
        if rho == 0.0:
            return 0.0
        inner = math.sqrt(max(rho * rho - c * c, 0.0)) + c * math.acos(_clip(-c / rho))
        return 2.0 * r0 * inner
    if rho < -c:
        return 0.0
    return 2.0 * r0 * math.pi * c


def _clip(x):
    return min(1.0, max(-1.0, x))


def kernel_F(v, v0, theta0):
    """Handover-rate kernel ``F(v, v0, theta0)`` in m/s (vectorised).

    Written in the degree-one homogeneous form, so ``v0 = 0`` gives ``F = v``
    without a limit.
    """
    v = np.asarray(v, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    w = v0 * np.cos(theta0)  # serving velocity component away from the user
    aw = np.abs(w)
    first = aw <= v
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        ratio = np.where(v > 0.0, -w / np.where(v > 0.0, v, 1.0), 0.0)
        branch1 = np.sqrt(np.maximum(v * v - w * w, 0.0)) + w * np.arccos(np.clip(ratio, -1.0, 1.0))
    branch1 = np.where(v > 0.0, branch1, 0.0)
    out = np.where(first, branch1, np.where(v < w, math.pi * w, 0.0))
    return out if out.ndim else float(out)
