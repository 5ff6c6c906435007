"""Globally adaptive Gauss-Kronrod (7/15) integration.

Panels are mapped through ``x = a + (b - a) * (1 - cos(phi)) / 2`` before the
rule is applied, which turns square-root endpoint behaviour into an analytic
integrand in ``phi``.  Callers split the range at known kinks and zeros.
"""

from __future__ import annotations

import heapq
import math
from typing import Callable, Sequence

import numpy as np

MAX_LEVEL = 60
MAX_PANELS = 20000

# QUADPACK qk15 abscissae and weights (positive half, centre last).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# Full 15-node layout on [-1, 1].
NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[[1, 3, 5]] = _WG[:3]
GAUSS_WEIGHTS[7] = _WG[3]
GAUSS_WEIGHTS[[9, 11, 13]] = _WG[2::-1]


class NumericalFailure(ArithmeticError):
    """Raised when an integral cannot be resolved to the requested tolerance."""


def _panel_rules(f, lo, hi, a, b):
    """Evaluate the K15/G7 pair on a batch of phi-panels ``[lo, hi]``.

    ``a, b`` are the x-limits of the cosine map each panel belongs to.
    """
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    phi = mid[:, None] + half[:, None] * NODES[None, :]
    width = (b - a)[:, None]
    x = a[:, None] + 0.5 * width * (1.0 - np.cos(phi))
    jac = 0.5 * width * np.sin(phi) * half[:, None]
    fx = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape) * jac
    k = fx @ KRONROD_WEIGHTS
    g = fx @ GAUSS_WEIGHTS
    return k, np.abs(k - g)


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    rtol: float = 1e-8,
    atol: float = 0.0,
    points: Sequence[float] | None = None,
) -> tuple[float, float]:
    """Integrate a vectorised ``f`` over ``[a, b]``.

    Returns ``(value, error_estimate)``.  ``points`` are interior breakpoints
    (values outside ``(a, b)`` are ignored).  Raises :class:`NumericalFailure`
    if a panel would need more than ``MAX_LEVEL`` bisections.
    """
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError("integration limits must be finite")
    if a == b:
        return 0.0, 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    cuts = [a]
    if points is not None:
        cuts += sorted(p for p in set(float(p) for p in points) if a < p < b)
    cuts.append(b)
    edges = np.array(cuts)
    keep = np.diff(edges) > 0
    pa, pb = edges[:-1][keep], edges[1:][keep]
    n = len(pa)
    lo = np.zeros(n)
    hi = np.full(n, math.pi)
    k, e = _panel_rules(f, lo, hi, pa, pb)

    # heap entries: (-error, tiebreak, level, lo, hi, a, b, value)
    heap = []
    counter = 0
    total = 0.0
    err = 0.0
    for i in range(n):
        heap.append((-e[i], counter, 0, lo[i], hi[i], pa[i], pb[i], k[i]))
        counter += 1
        total += k[i]
        err += e[i]
    heapq.heapify(heap)

    while err > max(atol, rtol * abs(total)):
        # bisect a batch of the worst panels per round to limit call overhead
        batch = []
        target = max(atol, rtol * abs(total))
        shed = 0.0
        while heap and (not batch or (err - shed > target and len(batch) < 32)):
            item = heapq.heappop(heap)
            if item[2] >= MAX_LEVEL:
                raise NumericalFailure(
                    f"quadrature did not converge on [{a}, {b}]: "
                    f"error {err:.3e} > target {target:.3e}"
                )
            batch.append(item)
            shed += -item[0]
        if len(heap) + 2 * len(batch) > MAX_PANELS:
            raise NumericalFailure("quadrature panel budget exhausted")
        blo = np.array([it[3] for it in batch])
        bhi = np.array([it[4] for it in batch])
        bmid = 0.5 * (blo + bhi)
        ba = np.array([it[5] for it in batch])
        bb = np.array([it[6] for it in batch])
        k2, e2 = _panel_rules(
            f,
            np.concatenate([blo, bmid]),
            np.concatenate([bmid, bhi]),
            np.concatenate([ba, ba]),
            np.concatenate([bb, bb]),
        )
        m = len(batch)
        for j, it in enumerate(batch):
            total -= it[7]
            err -= -it[0]
            for idx, (plo, phi_) in ((j, (it[3], bmid[j])), (j + m, (bmid[j], it[4]))):
                heapq.heappush(
                    heap, (-e2[idx], counter, it[2] + 1, plo, phi_, it[5], it[6], k2[idx])
                )
                counter += 1
                total += k2[idx]
                err += e2[idx]
        # rebuild sums occasionally to stop drift from repeated add/subtract
        if counter % 512 < 2 * m:
            total = math.fsum(it[7] for it in heap)
            err = math.fsum(-it[0] for it in heap)
    total = math.fsum(it[7] for it in heap)
    return sign * total, err


def integrate_vec(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    rtol: float = 1e-8,
    atol: float = 0.0,
    points: Sequence[float] | None = None,
) -> np.ndarray:
    """Integrate a family of integrands sharing one panel partition.

    ``f(x)`` maps nodes of shape ``(n,)`` to values of shape ``(m, n)``.
    Every component is resolved to ``max(atol, rtol * |I_j|)``.
    """
    cuts = [a] + sorted(p for p in set(points or ()) if a < p < b) + [b]
    edges = np.array(cuts, dtype=float)
    pa, pb = edges[:-1], edges[1:]
    lo = np.zeros(len(pa))
    hi = np.full(len(pa), math.pi)
    done = done_err = 0.0
    for _ in range(MAX_LEVEL + 1):
        half = 0.5 * (hi - lo)
        phi = 0.5 * (hi + lo)[:, None] + half[:, None] * NODES[None, :]
        width = (pb - pa)[:, None]
        x = pa[:, None] + 0.5 * width * (1.0 - np.cos(phi))
        jac = 0.5 * width * np.sin(phi) * half[:, None]
        fx = np.asarray(f(x.ravel()), dtype=float)
        fx = fx.reshape(fx.shape[0], *x.shape) * jac[None]
        k = fx @ KRONROD_WEIGHTS  # (m, panels)
        e = np.abs(k - fx @ GAUSS_WEIGHTS)
        total = done + k.sum(axis=1)
        target = np.maximum(atol, rtol * np.abs(total))
        if np.all(done_err + e.sum(axis=1) <= target):
            return total
        if len(lo) > MAX_PANELS:
            break
        # freeze panels that fit comfortably in what is left of every budget
        room = np.maximum(target - done_err, 0.0)
        share = np.max(e / np.maximum(room, 1e-300)[:, None], axis=0)
        accept = share * len(lo) <= 0.5
        done = done + k[:, accept].sum(axis=1)
        done_err = done_err + e[:, accept].sum(axis=1)
        rl, rh = lo[~accept], hi[~accept]
        ra, rb = pa[~accept], pb[~accept]
        rm = 0.5 * (rl + rh)
        lo, hi = np.concatenate([rl, rm]), np.concatenate([rm, rh])
        pa, pb = np.concatenate([ra, ra]), np.concatenate([rb, rb])
    raise NumericalFailure("vector quadrature did not converge")
