"""Print the cross-checks behind each CSV written by run_all.sh."""

import argparse
import csv
import math
from pathlib import Path


def rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def zmax(pairs):
    """Largest |a - b| / se over (a, b, se) triples; se = ci / 1.96."""
    out = 0.0
    for a, b, ci in pairs:
        se = float(ci) / 1.959963984540054
        if se > 0:
            out = max(out, abs(float(a) - float(b)) / se)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("outdir", nargs="?", default="results")
    d = Path(ap.parse_args().outdir)

    if (d / "fig1.csv").exists():
        r = rows(d / "fig1.csv")
        z = zmax((x["ccdf_mc"], x["ccdf_analytic"], x["ci_halfwidth"]) for x in r)
        gap = min(float(x["ccdf_endpoint_mc"]) - float(x["ccdf_mc"]) for x in r)
        print(f"fig1: {len(r)} points, max |z| {z:.2f}, min(endpoint - interval) {gap:.4f}")

    if (d / "rates.csv").exists():
        r = rows(d / "rates.csv")
        z = zmax((x["H_mc"], x["H_analytic"], x["ci"]) for x in r)
        print(f"rates: {len(r)} rows, max |z| {z:.2f}")
        for x in r:
            print(f"  lambda={float(x['lambda']):.0e} {x['dist_name']:>15}: "
                  f"H={float(x['H_analytic']):.5f} mc={float(x['H_mc']):.5f} +- {float(x['ci']):.5f}")

    if (d / "corollary.csv").exists():
        for x in rows(d / "corollary.csv"):
            print(f"corollary: {x['dist']:>18} mean={float(x['mean']):g} gap={float(x['gap']):+.3e}")

    if (d / "area-check.csv").exists():
        r = rows(d / "area-check.csv")
        z = max(abs(float(x["area_quadrature"]) - float(x["area_darts"])) / float(x["se"])
                for x in r if float(x["se"]) > 0)
        exact = [abs(float(x["area_quadrature"]) / float(x["exact_if_known"]) - 1)
                 for x in r if x["exact_if_known"]]
        print(f"area-check: {len(r)} cases, max |z| {z:.2f}, worst closed-form rel err {max(exact):.1e}")

    if (d / "hybrid.csv").exists():
        r = rows(d / "hybrid.csv")
        for tier in ("1", "2"):
            sub = [x for x in r if x["tier"] == tier]
            diff = max(abs(float(x["ccdf_mc"]) - float(x["ccdf_formula"])) for x in sub)
            print(f"hybrid tier {tier}: max |mc - formula| {diff:.4f}")


if __name__ == "__main__":
    main()
