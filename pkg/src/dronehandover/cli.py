"""Experiment runner: every command writes one CSV.

    dronehandover <fig1|rates|corollary|area-check|hybrid> --config cfg.json --out out.csv
                  [--seed N] [--reps N] [--tol X] [--dt X]

Config files are JSON; any value given as a flag overrides the file.
Exit codes: 0 ok, 1 configuration error, 2 numerical failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from typing import Any

import numpy as np

from . import analytic, montecarlo
from .geometry import sweep_area
from .model import (
    Constant,
    Discrete,
    DroneNetworkModel,
    Exponential,
    HybridTierConfig,
    SimulationConfig,
    SpeedDistribution,
    SweepParams,
    TierParams,
    TwoPoint,
    UniformRange,
)
from .quadrature import NumericalFailure

log = logging.getLogger("dronehandover")

EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 1, 2, 3

FIG1_DEFAULTS = {
    "model": DroneNetworkModel(5e-4, UniformRange(5.0, 25.0)).to_dict(),
    "r0": 12.0,
    "v0": 10.0,
    "theta0": math.pi / 3.0,
    "s_grid": [round(0.2 * k, 10) for k in range(20)],
    "reps": 100_000,
    "seed": 0,
    "tol": 1e-6,
}

FIG2_DISTRIBUTIONS = [
    {"name": "constant_15", "speeds": Constant(15.0).to_dict()},
    {"name": "uniform_5_25", "speeds": UniformRange(5.0, 25.0).to_dict()},
    {"name": "exponential_15", "speeds": Exponential(15.0).to_dict()},
]

RATES_DEFAULTS = {
    "lambdas": [1e-4, 2e-4, 5e-4, 1e-3],
    "distributions": FIG2_DISTRIBUTIONS,
    "simulation": SimulationConfig(horizon_T=200.0, replications=200).to_dict(),
    "tol": 1e-6,
}

COROLLARY_DEFAULTS = {
    "lambda": 5e-4,
    "distributions": FIG2_DISTRIBUTIONS + [
        {"name": "two_point_30_0.5", "speeds": TwoPoint(30.0, 0.5).to_dict()},
        {"name": "discrete_5_25", "speeds": Discrete([(5.0, 0.5), (25.0, 0.5)]).to_dict()},
    ],
    "tol": 1e-10,
}

AREA_DEFAULTS = {
    "cases": [
        {"name": "stadium", "v": 10.0, "r0": 12.0, "v0": 0.0, "theta0": 0.0, "s": 2.0},
        {"name": "concentric", "v": 0.0, "r0": 12.0, "v0": 10.0, "theta0": math.pi / 3, "s": 1.0},
        {"name": "zero_horizon", "v": 15.0, "r0": 12.0, "v0": 10.0, "theta0": math.pi / 3, "s": 0.0},
        {"name": "fig1_like", "v": 15.0, "r0": 12.0, "v0": 10.0, "theta0": math.pi / 3, "s": 0.5},
    ],
    "random_cases": 10,
    "darts": 1_000_000,
    "seed": 0,
    "tol": 1e-8,
}

HYBRID_DEFAULTS = {
    "tiers": HybridTierConfig(TierParams(1.0, 20.0, 5e-4, 4.0),
                              TierParams(1.0, 0.0, 1e-4, 4.0)).to_dict(),
    "drones": DroneNetworkModel(5e-4, UniformRange(5.0, 25.0)).to_dict(),
    "tier1": {"r0": 12.0, "v0": 10.0, "theta0": math.pi / 3},
    "tier2": {"r0": 30.0},
    "s_grid": [0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0],
    "reps": 20_000,
    "seed": 0,
    "dt": 1e-3,
    "tol": 1e-6,
}


class ConfigError(ValueError):
    pass


def _fmt(x: Any) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path: str, header: list[str], rows: list[list[Any]]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _merge(defaults: dict, path: str | None, args) -> dict:
    cfg = json.loads(json.dumps(defaults))
    if path:
        with open(path, encoding="utf-8") as fh:
            user = json.load(fh)
        if not isinstance(user, dict):
            raise ConfigError("config file must hold a JSON object")
        cfg.update(user)
    if args.seed is not None:
        cfg["seed"] = args.seed
        if "simulation" in cfg:
            cfg["simulation"]["seed"] = args.seed
    if args.reps is not None:
        cfg["reps"] = args.reps
        if "simulation" in cfg:
            cfg["simulation"]["replications"] = args.reps
    if args.tol is not None:
        cfg["tol"] = args.tol
    if args.dt is not None:
        cfg["dt"] = args.dt
    return cfg


# ---------------------------------------------------------------------------
# commands


def cmd_fig1(cfg: dict, out: str):
    model = DroneNetworkModel.from_dict(cfg["model"])
    grid = np.asarray(cfg["s_grid"], dtype=float)
    r0, v0, theta0 = float(cfg["r0"]), float(cfg["v0"]), float(cfg["theta0"])
    exact = analytic.ccdf_curve_given_r0(model, r0, v0, theta0, grid, float(cfg["tol"]))
    interval, endpoint = montecarlo.estimate_ccdf_pair(
        model, r0, v0, theta0, grid, int(cfg["reps"]), int(cfg["seed"])
    )
    rows = [
        [s, a, i, ci, e, ce]
        for s, a, i, ci, e, ce in zip(grid, exact.values, interval.values, interval.ci_halfwidth,
                                      endpoint.values, endpoint.ci_halfwidth)
    ]
    write_csv(out, ["s", "ccdf_analytic", "ccdf_mc", "ci_halfwidth", "ccdf_endpoint_mc",
                    "ci_endpoint"], rows)


def _distributions(cfg) -> list[tuple[str, SpeedDistribution]]:
    return [(d["name"], SpeedDistribution.from_dict(d["speeds"])) for d in cfg["distributions"]]


def cmd_rates(cfg: dict, out: str):
    sim = SimulationConfig.from_dict(cfg["simulation"])
    dists = _distributions(cfg)
    rows = []
    for lam in cfg["lambdas"]:
        for name, d in dists:
            model = DroneNetworkModel(float(lam), d)
            exact = analytic.handover_rate(model, float(cfg["tol"]))
            mc = montecarlo.estimate_rate_and_sojourn(model, sim)
            soj = None if exact.sojourn_infinite else exact.mean_sojourn
            rows.append([float(lam), name, exact.handover_rate, mc.handover_rate,
                         mc.ci_halfwidth, soj])
    write_csv(out, ["lambda", "dist_name", "H_analytic", "H_mc", "ci",
                    "mean_sojourn_analytic"], rows)


def cmd_corollary(cfg: dict, out: str):
    lam = float(cfg["lambda"])
    rows = []
    for name, d in _distributions(cfg):
        gap = analytic.corollary_gap(lam, d, float(cfg["tol"]))
        h = analytic.rate_special_constant(lam, d.mean()) + gap
        rows.append([name, d.mean(), h, gap])
    write_csv(out, ["dist", "mean", "H", "gap"], rows)


def _exact_area(p: SweepParams):
    if p.s == 0.0:
        return math.pi * p.r0**2
    if p.v0 == 0.0:
        return 2.0 * p.r0 * p.v * p.s + math.pi * p.r0**2
    if p.v == 0.0:
        return math.pi * max(p.r0**2, p.r0**2 + p.v0**2 * p.s**2
                             + 2 * p.r0 * p.v0 * p.s * math.cos(p.theta0))
    return None


def cmd_area_check(cfg: dict, out: str):
    seed = int(cfg["seed"])
    cases = [(c.get("name", f"case_{k}"), SweepParams.from_dict(c))
             for k, c in enumerate(cfg["cases"])]
    pick = montecarlo.replication_rng(seed, 0, montecarlo.STREAM_DARTS + 10)
    for k in range(int(cfg["random_cases"])):
        cases.append((f"random_{k}", SweepParams(
            float(pick.uniform(0, 30)), float(pick.uniform(1, 50)), float(pick.uniform(0, 30)),
            float(pick.uniform(0, 2 * math.pi)), float(pick.uniform(0, 3)))))
    rows = []
    for k, (name, p) in enumerate(cases):
        area = sweep_area(p, float(cfg["tol"]))
        rng = montecarlo.replication_rng(seed, k, montecarlo.STREAM_DARTS)
        darts, se = montecarlo.area_dart_oracle(p, int(cfg["darts"]), rng)
        rows.append([name, p.v, p.r0, p.v0, p.theta0, p.s, area, darts, se, _exact_area(p)])
    write_csv(out, ["case", "v", "r0", "v0", "theta0", "s", "area_quadrature", "area_darts",
                    "se", "exact_if_known"], rows)


def cmd_hybrid(cfg: dict, out: str):
    tiers = HybridTierConfig.from_dict(cfg["tiers"])
    drones = DroneNetworkModel.from_dict(cfg["drones"])
    grid = np.asarray(cfg["s_grid"], dtype=float)
    reps, seed, dt, tol = int(cfg["reps"]), int(cfg["seed"]), float(cfg["dt"]), float(cfg["tol"])
    c1 = cfg["tier1"]
    r0, v0, theta0 = float(c1["r0"]), float(c1["v0"]), float(c1["theta0"])
    r2 = float(cfg["tier2"]["r0"])
    rows = []
    mc1 = montecarlo.estimate_hybrid_ccdf(tiers, drones, 1,
                                          montecarlo.HybridConditioning(r0, v0, theta0),
                                          grid, reps, seed, dt)
    for s, m, ci in zip(grid, mc1.values, mc1.ci_halfwidth):
        rows.append([1, s, analytic.hybrid_ccdf_tier1(tiers, drones, r0, v0, theta0, s, tol), m, ci])
    mc2 = montecarlo.estimate_hybrid_ccdf(tiers, drones, 2, montecarlo.HybridConditioning(r2),
                                          grid, reps, seed, dt)
    for s, m, ci in zip(grid, mc2.values, mc2.ci_halfwidth):
        rows.append([2, s, analytic.hybrid_ccdf_tier2(tiers, drones, r2, s), m, ci])
    write_csv(out, ["tier", "s", "ccdf_formula", "ccdf_mc", "ci"], rows)


COMMANDS = {
    "fig1": (cmd_fig1, FIG1_DEFAULTS),
    "rates": (cmd_rates, RATES_DEFAULTS),
    "corollary": (cmd_corollary, COROLLARY_DEFAULTS),
    "area-check": (cmd_area_check, AREA_DEFAULTS),
    "hybrid": (cmd_hybrid, HYBRID_DEFAULTS),
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dronehandover", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--seed", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # usage errors are configuration errors; keep 2 for numerical failures
        return 0 if exc.code in (0, None) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    fn, defaults = COMMANDS[args.command]
    try:
        cfg = _merge(defaults, args.config, args)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, TypeError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        fn(cfg, args.out)
    except NumericalFailure as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (KeyError, ValueError, TypeError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
