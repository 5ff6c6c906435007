"""Event-driven simulation of moving drones around a static user at the origin.

Squared distances are quadratics in time, so handover instants are computed as
closed-form roots of ``d_i^2(t) - d_serving^2(t)`` rather than by stepping.
Every replication owns a Philox stream keyed by the master seed with the
replication index in the counter, so results do not depend on chunking or
worker count.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import CoverageQuadratic, serving_distance_at
from .model import (
    CcdfCurve,
    DroneNetworkModel,
    HybridTierConfig,
    RateReport,
    SimulationConfig,
    SweepParams,
)

log = logging.getLogger(__name__)

THREADS_ENV = "DRONEHANDOVER_THREADS"
Z95 = 1.959963984540054

# stream tags (third Philox counter word)
STREAM_CONDITIONAL = 1
STREAM_PROCESS = 2
STREAM_HYBRID = 3
STREAM_DARTS = 4


def replication_rng(seed: int, rep: int, stream: int = 0) -> np.random.Generator:
    """Counter-based stream for replication ``rep`` of a run seeded with ``seed``."""
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 0, stream, rep]))


def wilson_halfwidth(p, n: int, z: float = Z95):
    p = np.asarray(p, dtype=float)
    denom = 1.0 + z * z / n
    return z / denom * np.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n))


def _threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _map_chunks(fn, chunks: list[tuple]) -> list:
    """Run ``fn(*chunk)`` for each chunk, results in chunk order."""
    workers = _threads()
    if workers == 1 or len(chunks) == 1:
        return [fn(*c) for c in chunks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        futures = [ex.submit(fn, *c) for c in chunks]
        return [f.result() for f in futures]


def _chunked(reps: int, size: int):
    return [(start, min(reps, start + size)) for start in range(0, reps, size)]


# ---------------------------------------------------------------------------
# drone fields


@dataclass(frozen=True)
class DroneState:
    id: int
    pos0: tuple[float, float]
    speed: float
    direction: float

    @property
    def velocity(self) -> tuple[float, float]:
        return (self.speed * math.cos(self.direction), self.speed * math.sin(self.direction))

    def position(self, t: float) -> tuple[float, float]:
        vx, vy = self.velocity
        return (self.pos0[0] + vx * t, self.pos0[1] + vy * t)

    def distance_sq_coeffs(self) -> tuple[float, float, float]:
        """``(a, b, c)`` with ``d^2(t) = a t^2 + b t + c``."""
        vx, vy = self.velocity
        x, y = self.pos0
        return (vx * vx + vy * vy, 2.0 * (x * vx + y * vy), x * x + y * y)


@dataclass
class DroneField:
    """Array form of a set of drones; row ``i`` is drone ``i``."""

    pos0: np.ndarray
    vel: np.ndarray

    def __len__(self):
        return len(self.pos0)

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, 2)), np.zeros((0, 2)))

    @classmethod
    def from_marks(cls, radius, angle, speed, direction):
        pos = np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
        vel = np.column_stack([speed * np.cos(direction), speed * np.sin(direction)])
        return cls(pos, vel)

    @classmethod
    def from_states(cls, states: Sequence[DroneState]):
        if not states:
            return cls.empty()
        return cls(np.array([s.pos0 for s in states], dtype=float),
                   np.array([s.velocity for s in states], dtype=float))

    def states(self) -> list[DroneState]:
        speed = np.hypot(self.vel[:, 0], self.vel[:, 1])
        direction = np.mod(np.arctan2(self.vel[:, 1], self.vel[:, 0]), 2.0 * math.pi)
        return [DroneState(i, (float(p[0]), float(p[1])), float(s), float(d))
                for i, (p, s, d) in enumerate(zip(self.pos0, speed, direction))]

    def positions(self, t: float) -> np.ndarray:
        return self.pos0 + self.vel * t

    def distance_sq(self, t) -> np.ndarray:
        """Squared distances, shape ``(n,)`` for scalar ``t`` or ``(n, len(t))``."""
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            p = self.positions(float(t))
            return np.einsum("ij,ij->i", p, p)
        x = self.pos0[:, :1] + self.vel[:, :1] * t[None, :]
        y = self.pos0[:, 1:] + self.vel[:, 1:] * t[None, :]
        return x * x + y * y


def sample_field(
    model: DroneNetworkModel,
    window_radius: float,
    rng: np.random.Generator,
    exclusion: float = 0.0,
) -> DroneField:
    """PPP of drones in the annulus ``exclusion < r <= window_radius``.

    Points are generated in order of increasing distance (the values
    ``lam pi r^2`` are arrivals of a unit-rate Poisson process), one row of
    four uniforms per point; a larger window therefore extends the same field.
    """
    if not window_radius > 0.0:
        raise ValueError("window radius must be > 0")
    scale = model.lam * math.pi
    lo = scale * exclusion * exclusion
    hi = scale * window_radius * window_radius
    rows = []
    acc = lo
    while True:
        remaining = hi - acc
        block = int(remaining + 5.0 * math.sqrt(remaining) + 16)
        u = rng.random((block, 4))
        arrivals = acc - np.cumsum(np.log1p(-u[:, 0]))
        inside = arrivals <= hi
        rows.append((arrivals[inside], u[inside]))
        if not inside[-1]:
            break
        acc = arrivals[-1]
    arrivals = np.concatenate([a for a, _ in rows])
    u = np.concatenate([b for _, b in rows])
    return DroneField.from_marks(
        np.sqrt(arrivals / scale),
        2.0 * math.pi * u[:, 1],
        np.asarray(model.speeds.quantile(u[:, 2]), dtype=float).reshape(-1),
        np.asarray(model.directions.quantile(u[:, 3]), dtype=float).reshape(-1),
    )


def sample_relevant_field(
    model: DroneNetworkModel, track_radius: float, horizon: float, rng: np.random.Generator
) -> DroneField:
    """All drones of a stationary PPP that come within ``track_radius`` of the
    origin at some time in ``[0, horizon]``.

    For speed ``v`` those initial positions form a stadium of area
    ``pi R^2 + 2 R v T``; the mixture below samples the restricted PPP exactly,
    so no speed cut-off is needed.
    """
    R, T = track_radius, horizon
    disk = math.pi * R * R
    rect_mean = 2.0 * R * T * model.speeds.mean()
    n_disk = rng.poisson(model.lam * disk)
    n_rect = rng.poisson(model.lam * rect_mean)

    # cap part: speed from f_V, point uniform in a disk split between the two ends
    v1 = np.asarray(model.speeds.sample(rng, n_disk), dtype=float).reshape(-1)
    rr = R * np.sqrt(rng.random(n_disk))
    ang = 2.0 * math.pi * rng.random(n_disk)
    along1 = rr * np.cos(ang)
    across1 = rr * np.sin(ang)
    along1 = np.where(along1 > 0.0, along1 + v1 * T, along1)

    # body part: speed size-biased, point uniform in the swept rectangle
    v2 = model.speeds.sample_size_biased(rng, n_rect) if n_rect else np.zeros(0)
    along2 = v2 * T * rng.random(n_rect)
    across2 = R * (2.0 * rng.random(n_rect) - 1.0)

    speed = np.concatenate([v1, v2])
    along = np.concatenate([along1, along2])
    across = np.concatenate([across1, across2])
    direction = np.asarray(model.directions.sample(rng, len(speed)), dtype=float).reshape(-1)
    # the stadium lies along w = -u, with u the direction of travel
    ux, uy = np.cos(direction), np.sin(direction)
    pos = np.column_stack([-along * ux - across * uy, -along * uy + across * ux])
    vel = np.column_stack([speed * ux, speed * uy])
    return DroneField(pos, vel)


# ---------------------------------------------------------------------------
# crossings


def entry_times(a, b, c):
    """First ``tau > 0`` where ``a tau^2 + b tau + c`` turns negative (inf if never).

    Only crossings with negative slope count, so a drone leaving at ``tau = 0``
    is not reported.  Tangencies are ignored.
    """
    a, b, c = (np.asarray(x, dtype=float) for x in (a, b, c))
    out = np.full(np.broadcast(a, b, c).shape, np.inf)
    disc = b * b - 4.0 * a * c
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        sq = np.sqrt(np.where(disc > 0.0, disc, 0.0))
        # root with slope -sqrt(disc), in the cancellation-free form
        quad = np.where(b >= 0.0, (-b - sq) / (2.0 * a), 2.0 * c / (sq - b))
        lin = -c / b
    is_lin = a == 0.0
    tau = np.where(is_lin, np.where(b < 0.0, lin, np.inf), np.where(disc > 0.0, quad, np.inf))
    ok = np.isfinite(tau) & (tau > 0.0)
    out[ok] = tau[ok]
    return out


def _relative_coeffs(pos, vel, ps, vs):
    """Coefficients of ``d_i^2(tau) - d_s^2(tau)`` for positions at tau = 0."""
    a = np.einsum("ij,ij->i", vel, vel) - vs @ vs
    b = 2.0 * (np.einsum("ij,ij->i", pos, vel) - ps @ vs)
    c = np.einsum("ij,ij->i", pos, pos) - ps @ ps
    return a, b, c


def _polish(a, b, c, tau):
    slope = 2.0 * a * tau + b
    if slope != 0.0:
        tau = tau - ((a * tau + b) * tau + c) / slope
    return tau


def first_handover_time(serving: DroneState, others: Sequence[DroneState], horizon: float):
    """Earliest ``t in (0, horizon]`` at which another drone is strictly nearer."""
    if not others:
        return None
    fld = DroneField.from_states(others)
    sv = np.array(serving.velocity)
    sp = np.array(serving.pos0, dtype=float)
    a, b, c = _relative_coeffs(fld.pos0, fld.vel, sp, sv)
    tau = entry_times(a, b, c)
    j = int(np.argmin(tau))
    if not tau[j] <= horizon:
        return None
    return float(_polish(a[j], b[j], c[j], tau[j]))


@dataclass
class HandoverTrace:
    """Handover instants and the serving drone on each interval.

    ``serving_ids[k]`` serves on ``[event_times[k-1], event_times[k])`` with
    ``event_times[-1] = 0`` and ``event_times[len] = horizon``.
    """

    event_times: np.ndarray
    serving_ids: list[int]
    horizon: float
    max_serving_distance: float = 0.0
    track_radius: float = math.inf
    crossing_residuals: list[float] = field(default_factory=list)

    @property
    def events(self) -> int:
        return len(self.event_times)

    @property
    def window_ok(self) -> bool:
        return self.max_serving_distance <= self.track_radius


def track_radius(lam: float, eps: float) -> float:
    """Radius holding the nearest drone with probability at least ``1 - eps``."""
    return math.sqrt(math.log(1.0 / eps) / (lam * math.pi))


def run_handover_process(
    model: DroneNetworkModel, T: float, rng: np.random.Generator, window_epsilon: float = 1e-6
) -> HandoverTrace:
    """Track the nearest drone over ``[0, T]``, recording every change."""
    R = track_radius(model.lam, window_epsilon)
    fld = sample_relevant_field(model, R, T, rng)
    if len(fld) == 0:
        return HandoverTrace(np.zeros(0), [], T, math.inf, R)
    d2 = np.einsum("ij,ij->i", fld.pos0, fld.pos0)
    s = int(np.argmin(d2))
    t = 0.0
    times, ids, residuals = [], [s], []
    max_d = math.sqrt(d2[s])
    while True:
        pos = fld.positions(t)
        a, b, c = _relative_coeffs(pos, fld.vel, pos[s], fld.vel[s])
        c[s] = 0.0
        tau = entry_times(a, b, c)
        tau[s] = np.inf
        j = int(np.argmin(tau))
        if not t + tau[j] <= T:
            break
        tj = _polish(a[j], b[j], c[j], tau[j])
        t = t + tj
        dj = fld.distance_sq(t)
        residuals.append(abs(dj[j] - dj[s]) / max(dj[j], dj[s], 1.0))
        times.append(t)
        ids.append(j)
        s = j
        max_d = max(max_d, math.sqrt(dj[s]))
    max_d = max(max_d, math.sqrt(fld.distance_sq(T)[s]))
    return HandoverTrace(np.array(times), ids, T, max_d, R, residuals)


def _process_chunk(model, cfg, start, stop):
    counts, gaps, bad = [], [], 0
    for i in range(start, stop):
        tr = run_handover_process(model, cfg.horizon_T, replication_rng(cfg.seed, i, STREAM_PROCESS),
                                  cfg.window_epsilon)
        counts.append(tr.events)
        if tr.events > 1:
            gaps.append(np.diff(tr.event_times))
        bad += not tr.window_ok
    return np.array(counts), (np.concatenate(gaps) if gaps else np.zeros(0)), bad


def estimate_rate_and_sojourn(model: DroneNetworkModel, cfg: SimulationConfig) -> RateReport:
    """Pooled handover rate with a replication-level 95% CI, and the mean of
    complete sojourn intervals (censored first/last intervals dropped)."""
    parts = _map_chunks(_process_chunk, [(model, cfg, a, b) for a, b in _chunked(cfg.replications, 50)])
    counts = np.concatenate([p[0] for p in parts])
    gaps = np.concatenate([p[1] for p in parts])
    bad = sum(p[2] for p in parts)
    if bad:
        log.warning("%d traces left the tracking window; raise window_epsilon precision", bad)
    per_rep = counts / cfg.horizon_T
    rate = float(counts.sum() / (cfg.replications * cfg.horizon_T))
    se = float(per_rep.std(ddof=1) / math.sqrt(cfg.replications)) if cfg.replications > 1 else math.inf
    sojourn = float(gaps.mean()) if gaps.size else math.inf
    return RateReport(rate, sojourn, "montecarlo", ci_halfwidth=Z95 * se, standard_error=se,
                      events=int(counts.sum()))


# ---------------------------------------------------------------------------
# first-handover CCDF estimators


def _conditional_chunk(model, r0, v0, theta0, grid, seed, start, stop, window_radius, eps):
    s_max = float(grid[-1])
    vcap = model.speeds.effective_max(eps)
    first = np.full(stop - start, np.inf)
    endpoint = np.ones((stop - start, len(grid)), dtype=bool)
    for k, i in enumerate(range(start, stop)):
        rng = replication_rng(seed, i, STREAM_CONDITIONAL)
        if r0 is None:
            r = math.sqrt(-math.log1p(-rng.random()) / (model.lam * math.pi))
            phi = 2.0 * math.pi * rng.random()
        else:
            r, phi = float(r0), 0.0
        if window_radius is None:
            rmax = max(r, float(serving_distance_at(r, v0, theta0, s_max)))
            R = rmax + vcap * s_max
        else:
            R = float(window_radius)
        if R <= r:
            continue
        fld = sample_field(model, R, rng, exclusion=r)
        if len(fld) == 0:
            continue
        ps = np.array([r * math.cos(phi), r * math.sin(phi)])
        vs = v0 * np.array([math.cos(phi + theta0), math.sin(phi + theta0)])
        a, b, c = _relative_coeffs(fld.pos0, fld.vel, ps, vs)
        first[k] = entry_times(a, b, c).min()
        delta = (a[:, None] * grid[None, :] + b[:, None]) * grid[None, :] + c[:, None]
        endpoint[k] = np.all(delta > 0.0, axis=0)
    return first, endpoint


def simulate_first_handover(
    model: DroneNetworkModel,
    r0: float | None,
    v0: float,
    theta0: float,
    s_grid: Sequence[float],
    reps: int,
    seed: int,
    window_radius: float | None = None,
    eps: float = 1e-6,
):
    """Per-replication first-handover times and endpoint indicators.

    The serving drone starts at distance ``r0`` (drawn from the nearest-drone
    law when None) moving at ``v0`` with heading ``theta0`` measured from its
    outward radial direction; the others form a PPP outside ``b(0, r0)``.
    By default the window is the exact reach ``max_t r0(t) + v_max s_max``.
    Returns ``(first_times, endpoint)`` with ``endpoint[i, k]`` true when the
    initial drone is nearest at ``s_grid[k]``.
    """
    grid = np.asarray(s_grid, dtype=float)
    chunks = [(model, r0, v0, theta0, grid, seed, a, b, window_radius, eps)
              for a, b in _chunked(reps, 5000)]
    parts = _map_chunks(_conditional_chunk, chunks)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def _curve(grid, survive: np.ndarray) -> CcdfCurve:
    n = survive.shape[0]
    p = survive.mean(axis=0)
    return CcdfCurve(grid, p, wilson_halfwidth(p, n), replications=n)


def estimate_ccdf_pair(model, r0, v0, theta0, s_grid, reps, seed, window_radius=None, eps=1e-6):
    """Interval and endpoint CCDF estimates from the same replications."""
    grid = np.asarray(s_grid, dtype=float)
    first, endpoint = simulate_first_handover(model, r0, v0, theta0, grid, reps, seed,
                                              window_radius, eps)
    interval = _curve(grid, first[:, None] > grid[None, :])
    return interval, _curve(grid, endpoint)


def estimate_conditional_ccdf(model, r0, v0, theta0, s_grid, reps, seed, **kw) -> CcdfCurve:
    """Fraction of replications with no handover anywhere in ``(0, s]``."""
    return estimate_ccdf_pair(model, r0, v0, theta0, s_grid, reps, seed, **kw)[0]


def estimate_endpoint_ccdf(model, r0, v0, theta0, s_grid, reps, seed, **kw) -> CcdfCurve:
    """Fraction of replications whose nearest drone at ``s`` is the initial one."""
    return estimate_ccdf_pair(model, r0, v0, theta0, s_grid, reps, seed, **kw)[1]


# ---------------------------------------------------------------------------
# two-tier network on a time grid


@dataclass(frozen=True)
class HybridConditioning:
    """Initial serving link: projected distance, and speed/heading if a drone."""

    r0: float
    v0: float = 0.0
    theta0: float = 0.0


def _log_power(tier, d2):
    return math.log(tier.bias) - 0.5 * tier.alpha * np.log(d2 + tier.height**2)


def _static_ppp(lam, r_lo, r_hi, rng):
    if r_hi <= r_lo:
        return np.zeros(0)
    n = rng.poisson(lam * math.pi * (r_hi * r_hi - r_lo * r_lo))
    return r_lo * r_lo + (r_hi * r_hi - r_lo * r_lo) * rng.random(n)  # squared radii


def _hybrid_chunk(cfg, drones, served_tier, cond, grid, seed, dt, eps, start, stop):
    from .analytic import hybrid_boundary

    t1, t2 = cfg.tier1, cfg.tier2
    model1 = DroneNetworkModel(t1.lam, drones.speeds, drones.directions, t1.height)
    s_max = float(grid[-1])
    steps = np.arange(1, int(math.ceil(s_max / dt)) + 1) * dt
    vcap = drones.speeds.effective_max(eps)
    r0 = cond.r0
    first = np.full(stop - start, np.inf)
    for k, i in enumerate(range(start, stop)):
        rng = replication_rng(seed, i, STREAM_HYBRID)
        if served_tier == 1:
            rmax = max(r0, float(serving_distance_at(r0, cond.v0, cond.theta0, s_max)))
            others = sample_field(model1, rmax + vcap * s_max + 1.0, rng, exclusion=r0)
            f_now = hybrid_boundary(cfg, 2, 1, r0)
            f_far = hybrid_boundary(cfg, 2, 1, rmax)
            terr = _static_ppp(t2.lam, f_now, f_far + 1.0, rng)
            ds2 = serving_distance_at(r0, cond.v0, cond.theta0, steps) ** 2
            serving = _log_power(t1, ds2)
        else:
            rho = hybrid_boundary(cfg, 1, 2, r0)
            others = sample_field(model1, rho + vcap * s_max + 1.0, rng, exclusion=rho)
            terr = _static_ppp(t2.lam, r0, 2.0 * r0 + 1.0, rng)
            serving = np.full(len(steps), float(_log_power(t2, r0 * r0)))
        best = np.full(len(steps), -np.inf)
        if len(others):
            best = np.max(_log_power(t1, others.distance_sq(steps)), axis=0)
        if terr.size:
            best = np.maximum(best, float(np.max(_log_power(t2, terr))))
        hit = np.flatnonzero(best > serving)
        if hit.size:
            first[k] = steps[hit[0]]
    return first


def estimate_hybrid_ccdf(
    cfg: HybridTierConfig,
    drones: DroneNetworkModel,
    served_tier: int,
    conditioning: HybridConditioning,
    s_grid: Sequence[float],
    reps: int,
    seed: int,
    dt: float = 1e-3,
    eps: float = 1e-6,
) -> CcdfCurve:
    """Empirical CCDF of the first change of the biased-power argmax.

    Changes are detected on the grid ``dt, 2 dt, ...`` so brief excursions
    are missed and detection lags by up to ``dt`` (an upward bias of order
    ``dt``).  The complementary fields are sampled outside the region that the
    conditioning ``served_tier``/``conditioning`` already rules out.
    """
    if served_tier not in (1, 2):
        raise ValueError("served_tier must be 1 (drone) or 2 (terrestrial)")
    if not dt > 0.0:
        raise ValueError("dt must be > 0")
    grid = np.asarray(s_grid, dtype=float)
    if grid[-1] == 0.0:
        return _curve(grid, np.ones((reps, 1), dtype=bool))
    chunks = [(cfg, drones, served_tier, conditioning, grid, seed, dt, eps, a, b)
              for a, b in _chunked(reps, 2000)]
    first = np.concatenate(_map_chunks(_hybrid_chunk, chunks))
    return _curve(grid, first[:, None] > grid[None, :])


# ---------------------------------------------------------------------------
# dart-throwing area oracle


def area_dart_oracle(p: SweepParams, darts: int, rng: np.random.Generator, chunk: int = 1_000_000):
    """Monte Carlo area of the swept region: ``(area, standard_error)``."""
    rmax = max(p.r0, float(serving_distance_at(p.r0, p.v0, p.theta0, p.s)))
    x0, x1 = -rmax, p.v * p.s + rmax
    box = (x1 - x0) * 2.0 * rmax
    hits = 0
    left = darts
    while left > 0:
        n = min(chunk, left)
        x = x0 + (x1 - x0) * rng.random(n)
        y = rmax * (2.0 * rng.random(n) - 1.0)
        q = CoverageQuadratic.at_point(p, x, y)
        hits += int(np.count_nonzero(q.minimum_on(p.s) <= 0.0))
        left -= n
    frac = hits / darts
    return box * frac, box * math.sqrt(frac * (1.0 - frac) / darts)
