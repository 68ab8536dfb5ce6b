"""Damped fixed-point iteration for scalar mean-field self-consistency.

The map ``g`` sends an order parameter ``m`` in [-1, 1] to the average it
induces.  The iteration ``m <- (1 - gamma) m + gamma g(m)`` is run until
``|g(m) - m| < tol`` and the distance to the root, estimated as
``|g(m) - m| / |1 - g'(m)|`` with a secant slope, is below ``xtol``.  The
second test stops a flat map (at a critical point) from ending the iteration
far from its root.  If the iteration stalls, sign changes of ``g(m) - m`` on a grid
over [-1, 1] are bracketed and refined with Brent's method, and the root
nearest the last iterate is returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError

GAMMA = 0.5
TOL = 1e-12
XTOL = 1e-10
MAX_ITER = 10_000
SCAN_POINTS = 401


@dataclass(frozen=True)
class FixedPoint:
    m: float
    residual: float
    converged: bool
    iterations: int
    method: str


def damped_iteration(
    g: Callable[[float], float],
    m0: float,
    gamma: float = GAMMA,
    tol: float = TOL,
    max_iter: int = MAX_ITER,
    xtol: float = XTOL,
) -> FixedPoint:
    if not abs(m0) <= 1.0:
        raise DomainError(f"initial guess must satisfy |m0| <= 1, got {m0!r}")
    m = float(m0)
    m_prev = g_prev = None
    for k in range(1, max_iter + 1):
        gm = g(m)
        r = gm - m
        if r == 0.0:
            return FixedPoint(m, 0.0, True, k, "damped")
        if abs(r) < tol and m_prev is not None:
            # a stalled iterate is as close as floating point allows
            if m == m_prev:
                return FixedPoint(m, abs(r), True, k, "damped")
            slope = (gm - g_prev) / (m - m_prev)
            if abs(r) < xtol * max(abs(1.0 - slope), 1e-12):
                # one undamped step is a contraction at a stable root
                r2 = g(gm) - gm
                if abs(r2) <= abs(r):
                    return FixedPoint(gm, abs(r2), True, k + 1, "damped")
                return FixedPoint(m, abs(r), True, k, "damped")
        m_prev, g_prev = m, gm
        m += gamma * r
    return FixedPoint(m, abs(g(m) - m), False, max_iter, "damped")


def bracket_roots(g: Callable[[float], float], n: int = SCAN_POINTS) -> list[float]:
    """All roots of ``g(m) - m`` on [-1, 1] resolved by an ``n``-point scan."""
    grid = np.linspace(-1.0, 1.0, n)
    f = np.array([g(x) - x for x in grid])
    roots = [float(x) for x, v in zip(grid, f) if v == 0.0]
    for i in range(n - 1):
        lo, hi = f[i], f[i + 1]
        if lo != 0.0 and hi != 0.0 and math.copysign(1.0, lo) != math.copysign(1.0, hi):
            roots.append(brentq(lambda x: g(x) - x, grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15))
    return sorted(roots)


def solve(
    g: Callable[[float], float],
    m0: float,
    gamma: float = GAMMA,
    tol: float = TOL,
    max_iter: int = MAX_ITER,
    accept: float | None = None,
    xtol: float = XTOL,
) -> FixedPoint:
    """Damped iteration with a bracketing fallback.

    ``accept`` is the residual below which a fallback root counts as
    converged (defaults to ``10 * tol``, floored at 1e-13).
    """
    fp = damped_iteration(g, m0, gamma, tol, max_iter, xtol)
    if fp.converged:
        return fp
    roots = bracket_roots(g)
    if not roots:
        return fp
    # prefer roots on the side the iteration was heading to
    target = fp.m
    m = min(roots, key=lambda r: (abs(r - target), -abs(r)))
    res = abs(g(m) - m)
    accept = max(10 * tol, 1e-13) if accept is None else accept
    return FixedPoint(m, res, res < accept, fp.iterations, "bisection")
