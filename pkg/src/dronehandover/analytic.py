"""Quadrature evaluation of first-handover CCDFs, sojourn times and handover rates."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import kernel_F, serving_distance_at, sweep_area
from .model import (
    CcdfCurve,
    DroneNetworkModel,
    HybridTierConfig,
    RateReport,
    SpeedDistribution,
    SweepParams,
    UniformRange,
    speed_expectation,
)
from .quadrature import integrate, integrate_vec

# r0 integrals stop where the envelope exp(-lam pi r0^2) drops below exp(-R0_TAIL)
R0_TAIL = 40.0


def _require_uniform(model: DroneNetworkModel):
    if not model.directions.is_uniform:
        raise ValueError("analytic results assume uniformly distributed directions")


def _scalar_map(fn):
    def wrapped(xs):
        xs = np.asarray(xs, dtype=float)
        return np.array([fn(float(x)) for x in xs.ravel()]).reshape(xs.shape)

    return wrapped


# ---------------------------------------------------------------------------
# first-handover CCDF


def expected_sweep_area(model, r0, v0, theta0, s, tol=1e-6) -> float:
    """E_v |A(v, r0, v0, theta0, s)| over the non-serving speed law."""
    inner = tol / 10.0

    def area(v):
        return sweep_area(SweepParams(v, r0, v0, theta0, s), inner)

    return speed_expectation(model.speeds, _scalar_map(area), tol, points=[v0])


def ccdf_given_r0(model: DroneNetworkModel, r0, v0, theta0, s, tol=1e-6) -> float:
    """P(no handover in [0, s] | r0, v0, theta0)."""
    _require_uniform(model)
    if s == 0.0:
        return 1.0
    excess = expected_sweep_area(model, r0, v0, theta0, s, tol) - math.pi * r0 * r0
    return math.exp(-model.lam * max(excess, 0.0))


def ccdf_curve_given_r0(model, r0, v0, theta0, grid: Sequence[float], tol=1e-6) -> CcdfCurve:
    values = [ccdf_given_r0(model, r0, v0, theta0, s, tol) for s in grid]
    # enforce monotonicity against quadrature noise at the tolerance level
    values = np.minimum.accumulate(np.array(values))
    return CcdfCurve(np.asarray(grid, dtype=float), values)


def r0_cutoff(lam: float) -> float:
    return math.sqrt(R0_TAIL / (lam * math.pi))


def ccdf_conditional(model: DroneNetworkModel, v0, theta0, s, tol=1e-6) -> float:
    """P(no handover in [0, s] | v0, theta0), the serving distance integrated out."""
    _require_uniform(model)
    if s == 0.0:
        return 1.0
    lam = model.lam

    def integrand(r0):
        if r0 <= 0.0:
            return 0.0
        ea = expected_sweep_area(model, r0, v0, theta0, s, tol / 10.0)
        return 2.0 * lam * math.pi * r0 * math.exp(-lam * ea)

    value, _ = integrate(_scalar_map(integrand), 0.0, r0_cutoff(lam), rtol=tol)
    return min(value, 1.0)


# ---------------------------------------------------------------------------
# kernel expectations, sojourn time and rate


def kernel_expectation(speeds: SpeedDistribution, v0, theta0, tol=1e-9) -> float:
    """E_v F(v, v0, theta0) over the non-serving speed law."""
    kink = v0 * abs(math.cos(theta0))
    return speed_expectation(speeds, lambda v: kernel_F(v, v0, theta0), tol, points=[kink])


def mean_sojourn_conditional(model: DroneNetworkModel, v0, theta0, tol=1e-9) -> float:
    """Mean service time of a drone moving at ``v0`` in direction ``theta0``.

    Returns ``math.inf`` when the kernel expectation vanishes.
    """
    _require_uniform(model)
    ef = kernel_expectation(model.speeds, v0, theta0, tol)
    if ef <= 0.0:
        return math.inf
    return 1.0 / (math.sqrt(model.lam) * ef)


def direction_mean_kernel(v, v0, tol=1e-10):
    """Average of F(v, v0, theta0) over theta0 uniform on the circle.

    F depends on theta0 through cos(theta0) only, so the average is taken on
    [0, pi].  For v < v0 the range splits at |cos theta0| = v / v0: below the
    first split F = pi v0 cos(theta0) (integrated exactly), above the second
    F = 0, and the middle piece is integrated numerically.  Vectorised in
    ``v`` and ``v0`` (broadcast together).
    """
    v, v0 = np.broadcast_arrays(np.asarray(v, dtype=float), np.asarray(v0, dtype=float))
    shape = v.shape
    v, v0 = v.ravel(), v0.ravel()
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        rho = np.where(v0 > 0.0, v / np.where(v0 > 0.0, v0, 1.0), np.inf)
    t1 = np.where(rho < 1.0, np.arccos(np.minimum(rho, 1.0)), 0.0)
    t2 = math.pi - t1
    head = math.pi * v0 * np.sin(t1)

    out = np.zeros(v.size)
    live = (v > 0.0) | (v0 > 0.0)
    if np.any(live):
        idx = np.flatnonzero(live)
        sub_v, sub_v0, sub_t1, sub_t2 = v[idx], v0[idx], t1[idx], t2[idx]

        def middle_sub(u):
            theta = sub_t1[:, None] + (sub_t2 - sub_t1)[:, None] * u[None, :]
            return kernel_F(sub_v[:, None], sub_v0[:, None], theta) * (sub_t2 - sub_t1)[:, None]

        scale = np.maximum(sub_v, sub_v0)
        mid = integrate_vec(middle_sub, 0.0, 1.0, rtol=tol, atol=tol * 1e-3 * float(scale.min()))
        out[idx] = (head[idx] + mid) / math.pi
    return out.reshape(shape) if shape else float(out[0])


def mean_kernel(speeds: SpeedDistribution, tol=1e-8) -> float:
    """E F(v, v0, theta0) with v, v0 i.i.d. from ``speeds`` and theta0 uniform."""
    inner = tol / 10.0

    def over_v(v0s):
        v0s = np.asarray(v0s, dtype=float)
        return np.array([
            speed_expectation(speeds, lambda v: direction_mean_kernel(v, v0, inner),
                              inner, points=[v0])
            for v0 in v0s
        ])

    return speed_expectation(speeds, over_v, tol)


def handover_rate_density(model: DroneNetworkModel, v0, theta0, tol=1e-9) -> float:
    """Rate contribution of serving drones at (v0, theta0), per unit ``dv0 dtheta0``.

    For laws with atoms the speed factor is the atom's probability mass.
    """
    _require_uniform(model)
    rate = math.sqrt(model.lam) * kernel_expectation(model.speeds, v0, theta0, tol)
    d = model.speeds
    atoms = d.atoms()
    if atoms is not None:
        mass = math.fsum(w for s, w in atoms if s == v0)
    elif isinstance(d, UniformRange):
        mass = 1.0 / (d.b - d.a) if d.a <= v0 <= d.b else 0.0
    else:
        mass = math.exp(-v0 / d.mean()) / d.mean() if v0 >= 0.0 else 0.0
    return rate * mass / (2.0 * math.pi)


def handover_rate(model: DroneNetworkModel, tol=1e-8) -> RateReport:
    """Network handover rate and mean sojourn time by quadrature."""
    _require_uniform(model)
    h = math.sqrt(model.lam) * mean_kernel(model.speeds, tol)
    return RateReport.from_rate(h, "analytic")


# ---------------------------------------------------------------------------
# closed forms and the equal-speed optimum


def rate_special_constant(lam: float, v: float) -> float:
    """All drones at speed ``v``."""
    return 4.0 / math.pi * math.sqrt(lam) * v


@dataclass(frozen=True)
class TwoPointRate:
    total: float
    moving_to_static: float
    static_to_moving: float
    moving_to_moving: float


def rate_special_two_point(lam: float, v: float, p_m: float) -> TwoPointRate:
    """Each drone moves at ``v`` with probability ``p_m``, else hovers."""
    if not (0.0 <= p_m <= 1.0):
        raise ValueError("p_m must be in [0, 1]")
    root = math.sqrt(lam)
    cross = root * v * p_m * (1.0 - p_m)
    both = 4.0 / math.pi * root * v * p_m * p_m
    # equals 2 sqrt(lam) v p_m (1 - (1 - 2/pi) p_m); summed so the parts add up exactly
    total = cross + cross + both
    return TwoPointRate(total, cross, cross, both)


def corollary_gap(lam: float, d: SpeedDistribution, tol=1e-10) -> float:
    """Excess handover rate of ``d`` over all drones moving at its mean speed."""
    c = d.mean()
    if not c > 0.0:
        raise ValueError("speed law must have a positive mean")
    h = handover_rate(DroneNetworkModel(lam, d), tol).handover_rate
    return h - rate_special_constant(lam, c)


# ---------------------------------------------------------------------------
# two-tier network (drones + terrestrial)


def hybrid_boundary(cfg: HybridTierConfig, i: int, j: int, x):
    """Projected tier-i distance with the same biased power as tier-j at ``x``."""
    if i == j:
        raise ValueError("tiers must differ")
    ti, tj = cfg.tier(i), cfg.tier(j)
    x = np.asarray(x, dtype=float)
    inner = (ti.bias / tj.bias) ** (2.0 / ti.alpha) * (x * x + tj.height**2) ** (
        tj.alpha / ti.alpha
    ) - ti.height**2
    out = np.sqrt(np.maximum(inner, 0.0))
    return out if out.ndim else float(out)


def _tier1_model(cfg: HybridTierConfig, drones: DroneNetworkModel) -> DroneNetworkModel:
    return DroneNetworkModel(cfg.tier1.lam, drones.speeds, drones.directions, cfg.tier1.height)


def hybrid_ccdf_tier1(cfg, drones: DroneNetworkModel, r0, v0, theta0, s, tol=1e-6) -> float:
    """First-handover CCDF for a user served by a drone at projected distance ``r0``."""
    if s == 0.0:
        return 1.0
    single = ccdf_given_r0(_tier1_model(cfg, drones), r0, v0, theta0, s, tol)
    far = max(r0, float(serving_distance_at(r0, v0, theta0, s)))
    f_far = hybrid_boundary(cfg, 2, 1, far)
    f_now = hybrid_boundary(cfg, 2, 1, r0)
    return single * math.exp(-cfg.tier2.lam * math.pi * (f_far**2 - f_now**2))


def hybrid_ccdf_tier2(cfg, drones: DroneNetworkModel, r0, s) -> float:
    """First-handover CCDF for a user served by a terrestrial BS at distance ``r0``."""
    rho = hybrid_boundary(cfg, 1, 2, r0)
    return math.exp(-2.0 * cfg.tier1.lam * drones.speeds.mean() * s * rho)


__all__ = [
    "TwoPointRate",
    "ccdf_conditional",
    "ccdf_curve_given_r0",
    "ccdf_given_r0",
    "corollary_gap",
    "direction_mean_kernel",
    "expected_sweep_area",
    "handover_rate",
    "handover_rate_density",
    "hybrid_boundary",
    "hybrid_ccdf_tier1",
    "hybrid_ccdf_tier2",
    "kernel_expectation",
    "mean_kernel",
    "mean_sojourn_conditional",
    "r0_cutoff",
    "rate_special_constant",
    "rate_special_two_point",
]
