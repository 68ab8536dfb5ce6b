"""Joint demand magnitude and discrete bias.

An investor state is (y, sigma) with y in [0, y_max] shares and sigma in
{-1, 0, +1}.  Couplings scale with the demand size, so in mean field

    E(y, sigma; M) = H0(y) - (J M + h) y sigma + L |M| y sigma^2 - mu y sigma^2

with the non-interacting part H0(y) = c y (``h0="linear"``) or c y^2
(``h0="quadratic"``).  The three sigma branches share one normalization
Z = sum_sigma int exp_q(-beta E) dy, and M = <sigma> is the ordinary average.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from typing import Literal

import numpy as np

from . import fixedpoint
from .errors import DomainError, InfeasibleError, NumericalError
from .maxent import GridDistribution, QuadSpec, gauss_legendre
from .qmath import QParams, q_exp, q_exp_diff
from .spin_market import SPINS

JOINT_TOL = 1e-11
MAX_REFINE = 4


@dataclass(frozen=True)
class JointParams:
    j_coupling: float = 1.0
    l_coupling: float = 0.0
    mu: float = 0.0
    holding_cost: float = 0.0
    y_max: float = 1.0
    n_investors: int = 100
    market_depth: float = 1.0
    qp: QParams = QParams()
    h0: Literal["linear", "quadratic"] = "linear"
    quad: QuadSpec = QuadSpec()

    def __post_init__(self):
        if not self.j_coupling >= 0:
            raise DomainError(f"J must be >= 0, got {self.j_coupling!r}")
        if not self.l_coupling >= 0:
            raise DomainError(f"L must be >= 0, got {self.l_coupling!r}")
        if not math.isfinite(self.mu):
            raise DomainError(f"mu must be finite, got {self.mu!r}")
        if not (self.holding_cost >= 0 and math.isfinite(self.holding_cost)):
            raise DomainError(f"holding cost c must be >= 0, got {self.holding_cost!r}")
        if not (self.y_max > 0 and math.isfinite(self.y_max)):
            raise DomainError(f"y_max must be > 0, got {self.y_max!r}")
        if int(self.n_investors) != self.n_investors or self.n_investors < 1:
            raise DomainError(f"N must be an integer >= 1, got {self.n_investors!r}")
        if not (self.market_depth > 0 and math.isfinite(self.market_depth)):
            raise DomainError(f"market depth must be > 0, got {self.market_depth!r}")
        if self.h0 not in ("linear", "quadratic"):
            raise DomainError(f"unknown H0 form {self.h0!r}")


@dataclass(frozen=True, eq=False)
class JointDensity:
    """Density over (sigma, y); row ``k`` of ``density`` is sigma = SPINS[k]."""

    nodes: np.ndarray
    node_weights: np.ndarray
    density: np.ndarray
    z_q: float
    y_max: float
    q: float
    order: int

    def _row(self, sigma: int) -> int:
        return SPINS.index(sigma)

    def branch_mass(self, sigma: int) -> float:
        return float(np.dot(self.node_weights, self.density[self._row(sigma)]))

    def total(self) -> float:
        return float(np.sum(self.density @ self.node_weights))

    def y_marginal(self) -> np.ndarray:
        return self.density.sum(axis=0)

    def expect(self, fn) -> float:
        """Average of ``fn(y, sigma)`` (vectorized in y) over the joint density."""
        return float(
            sum(np.dot(self.node_weights, fn(self.nodes, s) * self.density[k]) for k, s in enumerate(SPINS))
        )

    def branch(self, sigma: int) -> GridDistribution:
        """Conditional density of y given ``sigma``."""
        mass = self.branch_mass(sigma)
        if not mass > 0.0:
            raise DomainError(f"branch sigma={sigma} carries no probability")
        return GridDistribution(
            self.nodes, self.node_weights, self.density[self._row(sigma)] / mass,
            self.z_q * mass, (0.0, self.y_max), self.q, self.order,
        )


@dataclass(frozen=True, eq=False)
class JointSolution:
    m_star: float
    joint_density: JointDensity
    mean_demand: float
    excess_demand: float
    price_change: float
    converged: bool
    iterations: int
    residual: float
    field: float = 0.0


def _h0(y, params: JointParams):
    return params.holding_cost * (y if params.h0 == "linear" else y * y)


def joint_energy(y, sigma: int, m: float, params: JointParams, field: float = 0.0):
    """Mean-field energy of demand size ``y`` with bias ``sigma``."""
    if sigma not in SPINS:
        raise DomainError(f"sigma must be one of {SPINS}, got {sigma!r}")
    ya = np.asarray(y, dtype=float)
    if np.any(ya < 0.0) or np.any(ya > params.y_max):
        raise DomainError(f"y must lie in [0, {params.y_max}]")
    e = (
        _h0(ya, params)
        - (params.j_coupling * m + field) * ya * sigma
        + (params.l_coupling * abs(m) - params.mu) * ya * sigma * sigma
    )
    return float(e) if np.ndim(y) == 0 else e


def _exponents(m: float, y: np.ndarray, params: JointParams, field: float):
    beta = params.qp.beta
    u0 = -beta * _h0(y, params)
    u_dn = u0 - beta * (params.l_coupling * abs(m) - params.mu + params.j_coupling * m + field) * y
    du = 2.0 * beta * (params.j_coupling * m + field) * y
    return u0, u_dn, du


def _branch_weights(m, y, params, field):
    q = params.qp.q
    u0, u_dn, du = _exponents(m, y, params, field)
    w = np.vstack([q_exp(q, u_dn), q_exp(q, u0), q_exp(q, u_dn + du)])
    if np.any(np.isinf(w)):
        raise InfeasibleError(
            f"q-exponential weight diverges (pole) at q={q}, beta={params.qp.beta}, M={m}"
        )
    return w, u_dn, du


def _moments(m: float, y: np.ndarray, wts: np.ndarray, params: JointParams, field: float):
    w, u_dn, du = _branch_weights(m, y, params, field)
    z = float(np.sum(w @ wts))
    if not z > 0.0:
        raise InfeasibleError(f"all (y, sigma) states cut off at q={params.qp.q}, M={m}")
    odd = q_exp_diff(params.qp.q, u_dn, du)
    return z, float(np.dot(wts, odd)) / z, float(np.dot(wts * y, odd)) / z


def _sigma_map(m, y, wts, params, field) -> float:
    return _moments(m, y, wts, params, field)[1]


def _gate_order(m: float, params: JointParams, field: float) -> int:
    order = params.quad.order
    y, wts = gauss_legendre(order, 0.0, params.y_max)
    z = _moments(m, y, wts, params, field)[0]
    while order * 2 <= params.quad.max_order:
        order *= 2
        y, wts = gauss_legendre(order, 0.0, params.y_max)
        z2 = _moments(m, y, wts, params, field)[0]
        if abs(z2 - z) <= params.quad.rtol * abs(z2):
            return order
        z = z2
    raise NumericalError(
        f"joint z_q not converged to rtol={params.quad.rtol} with {params.quad.max_order} nodes"
    )


def joint_density(m: float, params: JointParams, field: float = 0.0, order: int | None = None) -> JointDensity:
    order = _gate_order(m, params, field) if order is None else order
    y, wts = gauss_legendre(order, 0.0, params.y_max)
    w = _branch_weights(m, y, params, field)[0]
    z = float(np.sum(w @ wts))
    if not z > 0.0:
        raise InfeasibleError(f"all (y, sigma) states cut off at q={params.qp.q}, M={m}")
    return JointDensity(y, wts, w / z, z, params.y_max, params.qp.q, order)


def sigma_map(m: float, params: JointParams, field: float = 0.0, order: int | None = None) -> float:
    """<sigma> induced by the mean field ``m``."""
    order = _gate_order(m, params, field) if order is None else order
    y, wts = gauss_legendre(order, 0.0, params.y_max)
    return _sigma_map(m, y, wts, params, field)


def solve_joint(
    params: JointParams,
    m0: float = 0.5,
    field: float = 0.0,
    gamma: float = fixedpoint.GAMMA,
    tol: float = JOINT_TOL,
    max_iter: int = fixedpoint.MAX_ITER,
) -> JointSolution:
    """Solve ``M = <sigma>(M)`` for the joint model.

    As in the XY solver, the quadrature order is fixed during the iteration
    and re-gated at the root.
    """
    if not abs(m0) <= 1.0:
        raise DomainError(f"|m0| must be <= 1, got {m0!r}")
    order = _gate_order(m0, params, field)
    start = m0
    for _ in range(MAX_REFINE):
        y, wts = gauss_legendre(order, 0.0, params.y_max)
        g = partial(_sigma_map, y=y, wts=wts, params=params, field=field)
        fp = fixedpoint.solve(g, start, gamma=gamma, tol=tol, max_iter=max_iter)
        final = _gate_order(fp.m, params, field)
        if final <= order:
            break
        order, start = final, fp.m
    dens = joint_density(fp.m, params, field, order)
    _, _, mean_demand = _moments(fp.m, dens.nodes, dens.node_weights, params, field)
    d = params.n_investors * mean_demand
    return JointSolution(
        m_star=fp.m,
        joint_density=dens,
        mean_demand=mean_demand,
        excess_demand=d,
        price_change=d / params.market_depth,
        converged=fp.converged,
        iterations=fp.iterations,
        residual=fp.residual,
        field=field,
    )


def excess_demand_and_price(solution: JointSolution, params: JointParams) -> tuple[float, float]:
    """Aggregate demand ``N <y sigma>`` in shares and its price impact."""
    d = params.n_investors * solution.mean_demand
    return d, d / params.market_depth
