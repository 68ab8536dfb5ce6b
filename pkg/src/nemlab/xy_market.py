"""Continuous bias angle with a cosine (XY / Kosterlitz-Thouless) interaction.

Every investor carries a fixed demand magnitude ``y`` and a bias angle theta;
cos(theta) is the signed direction of demand.  Averaging the pair interaction
over the other investors leaves

    E(theta; M) = -(J M + h) cos(theta)

with M = <cos theta> the order parameter, computed as the ordinary (not
escort) average over the q-density.  theta lives on [0, pi]; ``domain="full"``
switches to the whole circle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import partial
from typing import Literal, Sequence

import numpy as np

from . import fixedpoint
from .errors import DomainError, InfeasibleError, NemlabError
from .maxent import GridDistribution, QuadSpec, build_grid, gauss_legendre
from .parallel import pmap
from .qmath import QParams, q_exp, q_exp_diff
from .spin_market import ScanRow

XY_TOL = 1e-11
MAX_REFINE = 4


@dataclass(frozen=True)
class XYParams:
    j_coupling: float = 1.0
    magnitude: float = 1.0
    n_investors: int = 100
    market_depth: float = 1.0
    qp: QParams = QParams()
    domain: Literal["half", "full"] = "half"
    quad: QuadSpec = QuadSpec()

    def __post_init__(self):
        if not self.j_coupling >= 0:
            raise DomainError(f"J must be >= 0, got {self.j_coupling!r}")
        if not (self.magnitude > 0 and math.isfinite(self.magnitude)):
            raise DomainError(f"magnitude y must be > 0, got {self.magnitude!r}")
        if int(self.n_investors) != self.n_investors or self.n_investors < 1:
            raise DomainError(f"N must be an integer >= 1, got {self.n_investors!r}")
        if not (self.market_depth > 0 and math.isfinite(self.market_depth)):
            raise DomainError(f"market depth must be > 0, got {self.market_depth!r}")
        if self.domain not in ("half", "full"):
            raise DomainError(f"unknown domain {self.domain!r}")

    @property
    def interval(self) -> tuple[float, float]:
        return (0.0, math.pi) if self.domain == "half" else (0.0, 2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class XYSolution:
    m_star: float
    distribution: GridDistribution
    price_change: float
    converged: bool
    iterations: int
    residual: float
    field: float = 0.0

    @property
    def cos2_mean(self) -> float:
        return self.distribution.expect(lambda t: np.cos(t) ** 2)


def xy_energy(theta, m: float, params: XYParams, field: float = 0.0):
    """Mean-field energy of a bias angle (scalar or array)."""
    t = np.asarray(theta, dtype=float)
    a, b = params.interval
    if np.any(t < a) or np.any(t > b):
        raise DomainError(f"theta must lie in [{a}, {b}]")
    e = -(params.j_coupling * m + field) * np.cos(t)
    return float(e) if np.ndim(theta) == 0 else e


def _paired_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Half of a Gauss-Legendre rule on [0, pi] folded about pi/2.

    Node pairs pi/2 -+ t have cos = +-sin(t); returning ``sin(t)`` and the
    shared weight lets the odd part of the density be summed pairwise.
    """
    x, w = gauss_legendre(order, -0.5 * math.pi, 0.5 * math.pi)
    half = order // 2
    return np.sin(x[half:]), w[half:]


def _order_map(m: float, sin_t: np.ndarray, wts: np.ndarray, params: XYParams, field: float) -> float:
    q = params.qp.q
    kappa = params.qp.beta * (params.j_coupling * m + field)
    lo = q_exp(q, -kappa * sin_t)
    hi = q_exp(q, kappa * sin_t)
    if np.any(np.isinf(hi)) or np.any(np.isinf(lo)):
        raise InfeasibleError(
            f"q-exponential weight diverges (pole) at q={q}, beta={params.qp.beta}, M={m}"
        )
    z = np.dot(wts, hi + lo)
    if not z > 0.0:
        raise InfeasibleError(f"all angles cut off at q={q}, M={m}")
    odd = q_exp_diff(q, -kappa * sin_t, 2.0 * kappa * sin_t)
    return float(np.dot(wts * sin_t, odd) / z)


def order_map(m: float, params: XYParams, field: float = 0.0, order: int | None = None) -> float:
    """<cos theta> induced by the mean field ``m`` at a fixed quadrature order.

    The density depends on theta only through cos(theta), so the full-circle
    domain gives the same average as [0, pi].
    """
    n = params.quad.order * 4 if order is None else order
    return _order_map(m, *_paired_rule(n), params, field)


def grid_distribution(m: float, params: XYParams, field: float = 0.0) -> GridDistribution:
    return build_grid(
        lambda t: -(params.j_coupling * m + field) * np.cos(t), params.interval, params.qp, params.quad
    )


def solve_order_parameter(
    params: XYParams,
    m0: float = 0.5,
    field: float = 0.0,
    gamma: float = fixedpoint.GAMMA,
    tol: float = XY_TOL,
    max_iter: int = fixedpoint.MAX_ITER,
) -> XYSolution:
    """Solve ``M = <cos theta>(M)`` by damped iteration on a fixed rule.

    The quadrature order is chosen by the convergence gate of
    :func:`build_grid` at the starting point and re-checked at the root; if the
    gate asks for more nodes the iteration is repeated on the finer rule.
    """
    if not abs(m0) <= 1.0:
        raise DomainError(f"|m0| must be <= 1, got {m0!r}")
    order = grid_distribution(m0, params, field).order
    start = m0
    for _ in range(MAX_REFINE):
        sin_t, wts = _paired_rule(order)
        g = partial(_order_map, sin_t=sin_t, wts=wts, params=params, field=field)
        fp = fixedpoint.solve(g, start, gamma=gamma, tol=tol, max_iter=max_iter)
        dist = grid_distribution(fp.m, params, field)
        if dist.order <= order:
            break
        order, start = dist.order, fp.m
    m = fp.m
    return XYSolution(
        m_star=m,
        distribution=dist,
        price_change=price_change(m, params),
        converged=fp.converged,
        iterations=fp.iterations,
        residual=fp.residual,
        field=field,
    )


def price_change(m: float, params: XYParams) -> float:
    return params.n_investors * params.magnitude * m / params.market_depth


def _scan_point(beta_j: float, params: XYParams, m0: float) -> ScanRow:
    p = replace(params, j_coupling=beta_j / params.qp.beta)
    try:
        sol = solve_order_parameter(p, m0)
    except NemlabError as exc:
        return ScanRow(beta_j, math.nan, False, str(exc))
    return ScanRow(beta_j, sol.m_star, sol.converged)


def xy_critical_scan(
    params: XYParams, grid: Sequence[float], threads: int = 1, m0: float = 0.5
) -> list[ScanRow]:
    """Positive-branch order parameter over a grid of ``beta * J`` values."""
    grid = [float(x) for x in grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise DomainError("grid must be sorted ascending")
    return pmap(partial(_scan_point, params=params, m0=m0), grid, threads)
