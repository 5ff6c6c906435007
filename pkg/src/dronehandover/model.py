"""Domain types: speed and direction laws, network and simulation configs, results."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .quadrature import integrate

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
WEIGHT_TOL = 1e-12
DEFAULT_QUANTILE_EPS = 1e-6


def normalize_angle(theta: float) -> float:
    """Map an angle to [0, 2*pi)."""
    t = math.fmod(float(theta), TWO_PI)
    if t < 0.0:
        t += TWO_PI
    if t >= TWO_PI:
        t = 0.0
    return t


def _check_weights(weights):
    w = np.asarray(weights, dtype=float)
    if w.size == 0 or np.any(w < 0.0):
        raise ValueError("weights must be non-negative and non-empty")
    if abs(math.fsum(w) - 1.0) > WEIGHT_TOL:
        raise ValueError(f"weights must sum to 1 (got {math.fsum(w)!r})")


# ---------------------------------------------------------------------------
# speed laws


class SpeedDistribution:
    """Base class for the law of drone speeds (m/s).

    Subclasses implement ``mean``, ``quantile`` (inverse CDF), the atoms for
    discrete laws, and the size-biased sampler used by the process simulator.
    """

    type_name: str = ""

    def mean(self) -> float:
        raise NotImplementedError

    def quantile(self, u):
        raise NotImplementedError

    def atoms(self) -> list[tuple[float, float]] | None:
        """``[(speed, weight), ...]`` for laws with finite support, else None."""
        return None

    def effective_max(self, eps: float = DEFAULT_QUANTILE_EPS) -> float:
        """Largest speed that matters: the support maximum, or the (1 - eps) quantile."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        u = rng.random(size)
        return self.quantile(u)

    def sample_size_biased(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw from the density ``v f_V(v) / E[v]``."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    @staticmethod
    def from_dict(d: dict) -> "SpeedDistribution":
        kind = d.get("type")
        try:
            cls = _SPEED_TYPES[kind]
        except KeyError:
            raise ValueError(f"unknown speed distribution type {kind!r}") from None
        args = {k: v for k, v in d.items() if k != "type"}
        if cls is Discrete:
            return Discrete([tuple(p) for p in args["points"]])
        return cls(**args)


@dataclass(frozen=True)
class Constant(SpeedDistribution):
    c: float
    type_name = "Constant"

    def __post_init__(self):
        if not self.c >= 0.0:
            raise ValueError("Constant speed must be >= 0")

    def mean(self):
        return float(self.c)

    def quantile(self, u):
        return np.full_like(np.asarray(u, dtype=float), self.c) if np.ndim(u) else float(self.c)

    def atoms(self):
        return [(float(self.c), 1.0)]

    def effective_max(self, eps=DEFAULT_QUANTILE_EPS):
        return float(self.c)

    def sample_size_biased(self, rng, size):
        return np.full(size, float(self.c))

    def to_dict(self):
        return {"type": self.type_name, "c": self.c}


@dataclass(frozen=True)
class UniformRange(SpeedDistribution):
    a: float
    b: float
    type_name = "UniformRange"

    def __post_init__(self):
        if not (0.0 <= self.a < self.b):
            raise ValueError("UniformRange needs 0 <= a < b")

    def mean(self):
        return 0.5 * (self.a + self.b)

    def quantile(self, u):
        return self.a + (self.b - self.a) * np.asarray(u, dtype=float)

    def effective_max(self, eps=DEFAULT_QUANTILE_EPS):
        return float(self.b)

    def sample_size_biased(self, rng, size):
        u = rng.random(size)
        return np.sqrt(self.a**2 + u * (self.b**2 - self.a**2))

    def to_dict(self):
        return {"type": self.type_name, "a": self.a, "b": self.b}


@dataclass(frozen=True)
class Exponential(SpeedDistribution):
    mean_speed: float
    type_name = "Exponential"

    def __post_init__(self):
        if not self.mean_speed > 0.0:
            raise ValueError("Exponential mean must be > 0")

    def mean(self):
        return float(self.mean_speed)

    def quantile(self, u):
        return -self.mean_speed * np.log1p(-np.asarray(u, dtype=float))

    def effective_max(self, eps=DEFAULT_QUANTILE_EPS):
        return float(self.quantile(1.0 - eps))

    def sample_size_biased(self, rng, size):
        # Gamma(2, mean): sum of two exponentials
        return self.mean_speed * (rng.standard_exponential(size) + rng.standard_exponential(size))

    def to_dict(self):
        return {"type": self.type_name, "mean": self.mean_speed}

    @classmethod
    def _from_kwargs(cls, **kw):
        return cls(kw["mean"])


@dataclass(frozen=True)
class TwoPoint(SpeedDistribution):
    """Speed ``v`` with probability ``p_m``, otherwise static."""

    v: float
    p_m: float
    type_name = "TwoPoint"

    def __post_init__(self):
        if not self.v > 0.0:
            raise ValueError("TwoPoint speed must be > 0")
        if not (0.0 < self.p_m <= 1.0):
            raise ValueError("TwoPoint p_m must be in (0, 1]")

    def mean(self):
        return self.v * self.p_m

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        out = np.where(u < 1.0 - self.p_m, 0.0, self.v)
        return out if out.ndim else float(out)

    def atoms(self):
        pts = [(self.v, float(self.p_m))]
        if self.p_m < 1.0:
            pts.insert(0, (0.0, 1.0 - self.p_m))
        return pts

    def effective_max(self, eps=DEFAULT_QUANTILE_EPS):
        return float(self.v)

    def sample_size_biased(self, rng, size):
        return np.full(size, float(self.v))

    def to_dict(self):
        return {"type": self.type_name, "v": self.v, "p_m": self.p_m}


@dataclass(frozen=True)
class Discrete(SpeedDistribution):
    points: tuple[tuple[float, float], ...]
    type_name = "Discrete"

    def __init__(self, points: Sequence[tuple[float, float]]):
        pts = tuple((float(s), float(w)) for s, w in points)
        if any(s < 0.0 for s, _ in pts):
            raise ValueError("Discrete speeds must be >= 0")
        _check_weights([w for _, w in pts])
        object.__setattr__(self, "points", pts)

    def mean(self):
        return math.fsum(s * w for s, w in self.points)

    def _cdf(self):
        return np.cumsum([w for _, w in self.points])

    def quantile(self, u):
        speeds = np.array([s for s, _ in self.points])
        idx = np.searchsorted(self._cdf(), np.asarray(u, dtype=float), side="right")
        idx = np.minimum(idx, len(speeds) - 1)
        out = speeds[idx]
        return out if np.ndim(out) else float(out)

    def atoms(self):
        return list(self.points)

    def effective_max(self, eps=DEFAULT_QUANTILE_EPS):
        return max(s for s, w in self.points if w > 0.0)

    def sample_size_biased(self, rng, size):
        speeds = np.array([s for s, _ in self.points])
        w = np.array([s * w for s, w in self.points])
        cdf = np.cumsum(w / w.sum())
        idx = np.minimum(np.searchsorted(cdf, rng.random(size), side="right"), len(speeds) - 1)
        return speeds[idx]

    def to_dict(self):
        return {"type": self.type_name, "points": [list(p) for p in self.points]}


_SPEED_TYPES = {
    "Constant": Constant,
    "UniformRange": UniformRange,
    "Exponential": Exponential._from_kwargs,
    "TwoPoint": TwoPoint,
    "Discrete": Discrete,
}


def speed_mean(d: SpeedDistribution) -> float:
    return d.mean()


def speed_expectation(
    d: SpeedDistribution,
    g: Callable[[np.ndarray], np.ndarray],
    tol: float = 1e-8,
    points: Sequence[float] = (),
    eps: float = DEFAULT_QUANTILE_EPS,
) -> float:
    """E[g(V)] for V ~ d.

    ``g`` must accept a numpy array of speeds.  Finite-support laws are summed
    exactly.  Continuous laws are integrated in probability space,
    ``int_0^1 g(Q(u)) du``; ``points`` are speeds where ``g`` has kinks.
    Exponential laws are truncated at the (1 - eps) quantile (the dropped tail
    mass is logged, not renormalised).
    """
    atoms = d.atoms()
    if atoms is not None:
        speeds = np.array([s for s, _ in atoms])
        weights = np.array([w for _, w in atoms])
        return float(math.fsum(np.asarray(g(speeds), dtype=float) * weights))

    if isinstance(d, UniformRange):
        u_hi = 1.0
        cuts = [(p - d.a) / (d.b - d.a) for p in points]
    elif isinstance(d, Exponential):
        u_hi = 1.0 - eps
        cuts = [-math.expm1(-p / d.mean_speed) for p in points if p > 0.0]
        log.debug("exponential speed law truncated at %.6g m/s (tail mass %.1e)",
                  d.effective_max(eps), eps)
    else:  # pragma: no cover - all built-in continuous laws handled above
        raise TypeError(f"no expectation rule for {type(d).__name__}")

    value, _ = integrate(lambda u: g(d.quantile(u)), 0.0, u_hi, rtol=tol, points=cuts)
    return value


# ---------------------------------------------------------------------------
# direction laws


@dataclass(frozen=True)
class DirectionDistribution:
    """Uniform on the circle when ``points`` is None, else a discrete law."""

    points: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.points is not None:
            pts = tuple((normalize_angle(a), float(w)) for a, w in self.points)
            _check_weights([w for _, w in pts])
            object.__setattr__(self, "points", pts)

    @property
    def is_uniform(self) -> bool:
        return self.points is None

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        if self.points is None:
            return TWO_PI * u
        angles = np.array([a for a, _ in self.points])
        cdf = np.cumsum([w for _, w in self.points])
        idx = np.minimum(np.searchsorted(cdf, u, side="right"), len(angles) - 1)
        return angles[idx]

    def sample(self, rng: np.random.Generator, size=None):
        return self.quantile(rng.random(size))

    def to_dict(self):
        if self.points is None:
            return {"type": "UniformCircle"}
        return {"type": "Discrete", "points": [list(p) for p in self.points]}

    @staticmethod
    def from_dict(d: dict) -> "DirectionDistribution":
        kind = d.get("type", "UniformCircle")
        if kind == "UniformCircle":
            return DirectionDistribution()
        if kind == "Discrete":
            return DirectionDistribution(tuple(tuple(p) for p in d["points"]))
        raise ValueError(f"unknown direction distribution type {kind!r}")


UNIFORM_CIRCLE = DirectionDistribution()


def sample_speed(d: SpeedDistribution, rng: np.random.Generator, size=None):
    return d.sample(rng, size)


def sample_direction(d: DirectionDistribution, rng: np.random.Generator, size=None):
    return d.sample(rng, size)


# ---------------------------------------------------------------------------
# configs


@dataclass(frozen=True)
class DroneNetworkModel:
    """Single-tier drone network.  ``height_h`` is recorded only."""

    lam: float
    speeds: SpeedDistribution
    directions: DirectionDistribution = UNIFORM_CIRCLE
    height_h: float = 0.0

    def __post_init__(self):
        if not self.lam > 0.0:
            raise ValueError("lambda must be > 0")
        if not self.height_h >= 0.0:
            raise ValueError("height must be >= 0")

    def to_dict(self):
        return {
            "lambda": self.lam,
            "height_h": self.height_h,
            "speeds": self.speeds.to_dict(),
            "directions": self.directions.to_dict(),
        }

    @staticmethod
    def from_dict(d: dict) -> "DroneNetworkModel":
        return DroneNetworkModel(
            lam=float(d["lambda"]),
            speeds=SpeedDistribution.from_dict(d["speeds"]),
            directions=DirectionDistribution.from_dict(d.get("directions", {})),
            height_h=float(d.get("height_h", 0.0)),
        )


@dataclass(frozen=True)
class SweepParams:
    v: float
    r0: float
    v0: float
    theta0: float
    s: float

    def __post_init__(self):
        if not self.r0 > 0.0:
            raise ValueError("r0 must be > 0")
        if not self.s >= 0.0:
            raise ValueError("s must be >= 0")
        if not (self.v >= 0.0 and self.v0 >= 0.0):
            raise ValueError("speeds must be >= 0")
        object.__setattr__(self, "theta0", normalize_angle(self.theta0))

    def to_dict(self):
        return {"v": self.v, "r0": self.r0, "v0": self.v0, "theta0": self.theta0, "s": self.s}

    @staticmethod
    def from_dict(d):
        return SweepParams(**{k: float(d[k]) for k in ("v", "r0", "v0", "theta0", "s")})


@dataclass(frozen=True)
class TierParams:
    bias: float
    height: float
    lam: float
    alpha: float

    def __post_init__(self):
        if not (self.bias > 0.0 and self.lam > 0.0):
            raise ValueError("bias and density must be > 0")
        if not self.height >= 0.0:
            raise ValueError("height must be >= 0")
        if not self.alpha > 2.0:
            raise ValueError("path-loss exponent must be > 2")


@dataclass(frozen=True)
class HybridTierConfig:
    """Tier 1 is the drone tier, tier 2 the terrestrial tier."""

    tier1: TierParams
    tier2: TierParams

    def tier(self, i: int) -> TierParams:
        if i == 1:
            return self.tier1
        if i == 2:
            return self.tier2
        raise ValueError("tier index must be 1 or 2")

    def to_dict(self):
        out = {}
        for i in (1, 2):
            t = self.tier(i)
            out.update({f"B_{i}": t.bias, f"h_{i}": t.height,
                        f"lambda_{i}": t.lam, f"alpha_{i}": t.alpha})
        return out

    @staticmethod
    def from_dict(d: dict) -> "HybridTierConfig":
        tiers = [
            TierParams(float(d[f"B_{i}"]), float(d[f"h_{i}"]),
                       float(d[f"lambda_{i}"]), float(d[f"alpha_{i}"]))
            for i in (1, 2)
        ]
        return HybridTierConfig(*tiers)


@dataclass(frozen=True)
class SimulationConfig:
    horizon_T: float = 200.0
    replications: int = 200
    seed: int = 0
    window_epsilon: float = 1e-6
    speed_quantile_epsilon: float = DEFAULT_QUANTILE_EPS

    def __post_init__(self):
        if not self.horizon_T > 0.0:
            raise ValueError("horizon_T must be > 0")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        for name in ("window_epsilon", "speed_quantile_epsilon"):
            if not (0.0 < getattr(self, name) < 1.0):
                raise ValueError(f"{name} must be in (0, 1)")

    def to_dict(self):
        return {
            "horizon_T": self.horizon_T,
            "replications": self.replications,
            "seed": self.seed,
            "window_epsilon": self.window_epsilon,
            "speed_quantile_epsilon": self.speed_quantile_epsilon,
        }

    @staticmethod
    def from_dict(d: dict) -> "SimulationConfig":
        return SimulationConfig(
            horizon_T=float(d.get("horizon_T", 200.0)),
            replications=int(d.get("replications", 200)),
            seed=int(d.get("seed", 0)),
            window_epsilon=float(d.get("window_epsilon", 1e-6)),
            speed_quantile_epsilon=float(d.get("speed_quantile_epsilon", DEFAULT_QUANTILE_EPS)),
        )


# ---------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class CcdfCurve:
    """CCDF of the time to first handover on a grid of horizons.

    Analytic curves (no ``ci_halfwidth``) must be non-increasing; empirical
    curves are non-increasing by construction.
    """

    grid: np.ndarray
    values: np.ndarray
    ci_halfwidth: np.ndarray | None = None
    replications: int | None = None
    monotone_tol: float = field(default=1e-12, repr=False)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape or grid.size == 0:
            raise ValueError("grid and values must be 1-d arrays of equal length")
        if grid[0] != 0.0 or np.any(np.diff(grid) <= 0.0):
            raise ValueError("grid must start at 0 and be strictly increasing")
        if np.any(values < 0.0) or np.any(values > 1.0):
            raise ValueError("CCDF values must lie in [0, 1]")
        if values[0] != 1.0:
            raise ValueError("CCDF must equal 1 at s = 0")
        if self.ci_halfwidth is None:
            if np.any(np.diff(values) > self.monotone_tol):
                raise ValueError("analytic CCDF must be non-increasing")
        else:
            ci = np.asarray(self.ci_halfwidth, dtype=float)
            if ci.shape != values.shape:
                raise ValueError("ci_halfwidth must match values")
            if np.any(np.diff(values) > 2.0 * np.maximum(ci[1:], ci[:-1])):
                raise ValueError("empirical CCDF increases beyond its confidence band")
            object.__setattr__(self, "ci_halfwidth", ci)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @property
    def standard_error(self) -> np.ndarray:
        """Binomial standard error of each empirical point."""
        if self.replications is None:
            raise ValueError("analytic curves carry no sampling error")
        p = self.values
        return np.sqrt(p * (1.0 - p) / self.replications)


@dataclass(frozen=True)
class RateReport:
    handover_rate: float
    mean_sojourn: float
    method: str
    ci_halfwidth: float | None = None
    standard_error: float | None = None
    events: int | None = None

    @staticmethod
    def from_rate(rate: float, method: str = "analytic", **kw) -> "RateReport":
        sojourn = 1.0 / rate if rate > 0.0 else math.inf
        return RateReport(rate, sojourn, method, **kw)

    @property
    def sojourn_infinite(self) -> bool:
        return math.isinf(self.mean_sojourn)

    def to_dict(self):
        return {
            "handover_rate": self.handover_rate,
            "mean_sojourn": None if self.sojourn_infinite else self.mean_sojourn,
            "sojourn_infinite": self.sojourn_infinite,
            "method": self.method,
            "ci_halfwidth": self.ci_halfwidth,
        }
