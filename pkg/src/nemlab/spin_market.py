"""Three-state investor spins in mean field.

Each investor holds a bias sigma in {-1, 0, +1} (sell, hold, buy).  With the
neighbours replaced by the average bias ``m`` the single-investor energy is

    E(sigma; m) = -J m sigma + L |m| sigma^2 - mu sigma^2 - h sigma

J rewards agreeing with the crowd, L taxes activity when consensus is strong
(Bornholdt-style contrarians), mu rewards participation, and h is an optional
external field.  The hold state has energy 0 for every m.  The
``variant="effective"`` switch replaces the contrarian term by an effective
coupling ``-(J - L) m sigma``.

The self-consistent bias solves ``m = <sigma>_q`` where the average is taken
over the escort distribution (``averaging="escort"``) or the plain one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import partial
from typing import Literal, NamedTuple, Sequence

import numpy as np

from . import fixedpoint
from .errors import DomainError, InfeasibleError, NemlabError
from .maxent import DiscreteDistribution, build_discrete
from .parallel import pmap
from .qmath import QParams, is_classical

SPINS = (-1, 0, 1)
MAX_BRUTE_FORCE = 12


@dataclass(frozen=True)
class ModelParams:
    j_coupling: float = 1.0
    l_coupling: float = 0.0
    mu: float = 0.0
    n_investors: int = 100
    market_depth: float = 1.0
    qp: QParams = QParams()
    variant: Literal["bornholdt", "effective"] = "bornholdt"
    averaging: Literal["escort", "ordinary"] = "escort"

    def __post_init__(self):
        if not self.j_coupling >= 0:
            raise DomainError(f"J must be >= 0, got {self.j_coupling!r}")
        if not self.l_coupling >= 0:
            raise DomainError(f"L must be >= 0, got {self.l_coupling!r}")
        if not math.isfinite(self.mu):
            raise DomainError(f"mu must be finite, got {self.mu!r}")
        if int(self.n_investors) != self.n_investors or self.n_investors < 1:
            raise DomainError(f"N must be an integer >= 1, got {self.n_investors!r}")
        if not (self.market_depth > 0 and math.isfinite(self.market_depth)):
            raise DomainError(f"market depth must be > 0, got {self.market_depth!r}")
        if self.variant not in ("bornholdt", "effective"):
            raise DomainError(f"unknown variant {self.variant!r}")
        if self.averaging not in ("escort", "ordinary"):
            raise DomainError(f"unknown averaging {self.averaging!r}")


@dataclass(frozen=True, eq=False)
class MeanFieldSolution:
    m_star: float
    distribution: DiscreteDistribution
    n_up: float
    n_zero: float
    n_down: float
    active_fraction: float
    price_change: float
    converged: bool
    iterations: int
    residual: float
    field: float = 0.0

    @property
    def occupations(self) -> tuple[float, float, float]:
        return self.n_down, self.n_zero, self.n_up


def energy(sigma: int, m: float, params: ModelParams, field: float = 0.0) -> float:
    """Mean-field energy of one investor with bias ``sigma``."""
    if sigma not in SPINS:
        raise DomainError(f"sigma must be one of {SPINS}, got {sigma!r}")
    if not abs(m) <= 1.0:
        raise DomainError(f"|m| must be <= 1, got {m!r}")
    if sigma == 0:
        return 0.0
    if params.variant == "effective":
        return -((params.j_coupling - params.l_coupling) * m + field) * sigma - params.mu
    return -(params.j_coupling * m + field) * sigma + params.l_coupling * abs(m) - params.mu


def _spin_energies(m: float, params: ModelParams, field: float) -> tuple[float, float, float]:
    return tuple(energy(s, m, params, field) for s in SPINS)


def _weight(a: float, qx: float, u: float) -> float:
    # escort-ready weight exp_q(u)**qx with a = 1 - q; qx = 1 gives the plain weight
    if a == 0.0:
        return math.exp(qx * u)
    base = 1.0 + a * u
    if base <= 0.0:
        if a > 0.0:
            return 0.0
        raise InfeasibleError(f"q-exponential weight diverges (pole) at q={1 - a}, u={u}")
    return math.exp(qx * math.log1p(a * u) / a)


def _weight_diff(a: float, qx: float, u: float, du: float) -> float:
    # _weight(u + du) - _weight(u), free of cancellation when du is small
    if a == 0.0:
        return math.exp(qx * u) * math.expm1(qx * du)
    b_lo = 1.0 + a * u
    b_hi = b_lo + a * du
    if b_lo > 0.0 and b_hi > 0.0:
        return math.exp(qx * math.log1p(a * u) / a) * math.expm1(qx * math.log1p(a * du / b_lo) / a)
    return _weight(a, qx, u + du) - _weight(a, qx, u)


def make_bias_map(params: ModelParams, field: float = 0.0):
    """Return ``g(m) = <sigma>`` for fixed parameters and field."""
    q, beta = params.qp.q, params.qp.beta
    a = 0.0 if is_classical(q) else 1.0 - q
    qx = q if (params.averaging == "escort" and a != 0.0) else 1.0
    effective = params.variant == "effective"
    j = params.j_coupling - params.l_coupling if effective else params.j_coupling
    l_c = 0.0 if effective else params.l_coupling
    mu = params.mu
    weight, weight_diff = _weight, _weight_diff

    def g(m: float) -> float:
        drive = j * m + field
        offset = l_c * abs(m) - mu
        u_dn = -beta * (drive + offset)
        try:
            w_up = weight(a, qx, beta * (drive - offset))
            w_dn = weight(a, qx, u_dn)
        except InfeasibleError:
            e_min = -abs(drive) + offset
            raise InfeasibleError(
                f"q-exponential weight diverges (pole) at q={q}, beta={beta}, E={e_min} (m={m})"
            ) from None
        return weight_diff(a, qx, u_dn, 2.0 * beta * drive) / (w_up + w_dn + 1.0)

    return g


def bias_map(m: float, params: ModelParams, field: float = 0.0) -> float:
    """Average bias ``<sigma>`` induced by the mean field ``m``."""
    return make_bias_map(params, field)(m)


def _finish(params: ModelParams, fp: fixedpoint.FixedPoint, field: float) -> MeanFieldSolution:
    m = fp.m
    dist = build_discrete(_spin_energies(m, params, field), params.qp, states=SPINS)
    p = dist.escort_probs() if params.averaging == "escort" else dist.probs
    n = params.n_investors
    n_dn, n_0, n_up = (float(n * x) for x in p)
    return MeanFieldSolution(
        m_star=m,
        distribution=dist,
        n_up=n_up,
        n_zero=n_0,
        n_down=n_dn,
        active_fraction=float(p[0] + p[2]),
        price_change=price_change_from_bias(m, params),
        converged=fp.converged,
        iterations=fp.iterations,
        residual=fp.residual,
        field=field,
    )


def self_consistent_bias(
    params: ModelParams,
    m0: float = 0.5,
    field: float = 0.0,
    gamma: float = fixedpoint.GAMMA,
    tol: float = fixedpoint.TOL,
    max_iter: int = fixedpoint.MAX_ITER,
) -> MeanFieldSolution:
    """Solve ``m = <sigma>_q(m)`` starting from ``m0``.

    Non-convergence is reported through ``converged=False`` with the last
    iterate; an infeasible distribution raises :class:`InfeasibleError`.
    """
    g = make_bias_map(params, field)
    fp = fixedpoint.solve(g, m0, gamma=gamma, tol=tol, max_iter=max_iter)
    return _finish(params, fp, field)


def distinct_roots(params: ModelParams, field: float = 0.0, sep: float = 1e-6) -> list[float]:
    """Roots reached from ``m0`` in {-0.99, 0, +0.99}, deduplicated at ``sep``."""
    roots: list[float] = []
    for m0 in (-0.99, 0.0, 0.99):
        m = self_consistent_bias(params, m0, field=field).m_star
        if all(abs(m - r) > sep for r in roots):
            roots.append(m)
    return sorted(roots)


def price_change_from_bias(m: float, params: ModelParams) -> float:
    """Market-depth conversion ``N m / lambda``."""
    if not abs(m) <= 1.0:
        raise DomainError(f"|m| must be <= 1, got {m!r}")
    return params.n_investors * m / params.market_depth


class ScanRow(NamedTuple):
    coupling: float
    m_star: float
    converged: bool
    error: str = ""


def _scan_point(beta_j: float, params: ModelParams) -> ScanRow:
    p = replace(params, j_coupling=beta_j / params.qp.beta)
    try:
        sol = self_consistent_bias(p, 0.99)
    except NemlabError as exc:
        return ScanRow(beta_j, math.nan, False, str(exc))
    return ScanRow(beta_j, sol.m_star, sol.converged)


def bifurcation_scan(
    params: ModelParams, coupling_grid: Sequence[float], threads: int = 1
) -> list[ScanRow]:
    """Positive-branch order parameter over a grid of ``beta * J`` values.

    Each point is solved from ``m0 = 0.99`` so the largest nonnegative root is
    reported.  ``params.j_coupling`` is overridden by ``grid / beta``.  A point
    whose solve raises is kept as a row with ``m_star = nan`` and the message
    in ``error``.
    """
    grid = [float(x) for x in coupling_grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise DomainError("coupling grid must be sorted ascending")
    return pmap(partial(_scan_point, params=params), grid, threads)


def onset(rows: Sequence[ScanRow], threshold: float = 1e-6) -> float | None:
    """First coupling at which the order parameter exceeds ``threshold``."""
    for row in rows:
        if row.m_star > threshold:
            return row.coupling
    return None


@dataclass(frozen=True, eq=False)
class BruteForceResult:
    distribution: DiscreteDistribution
    configs: np.ndarray
    m_mean: float
    m2_mean: float


def enumerate_configs(n: int) -> np.ndarray:
    """All 3**n spin configurations as an ``(3**n, n)`` int8 array."""
    idx = np.arange(3**n)
    digits = (idx[:, None] // 3 ** np.arange(n)[None, :]) % 3
    return (digits - 1).astype(np.int8)


def brute_force_full_model(n_small: int, params: ModelParams, field: float = 0.0) -> BruteForceResult:
    """Exact enumeration of the pairwise N-investor model.

    H = -(J/N) sum_{i<j} s_i s_j + (L / 2N) (sum_i s_i)^2 - mu sum_i s_i^2 - h sum_i s_i

    Couplings carry 1/N so the energy stays extensive.
    """
    if int(n_small) != n_small or n_small < 1:
        raise DomainError(f"n_small must be a positive integer, got {n_small!r}")
    if n_small > MAX_BRUTE_FORCE:
        raise DomainError(f"exact enumeration refused for N={n_small} > {MAX_BRUTE_FORCE}")
    n = int(n_small)
    cfg = enumerate_configs(n)
    s = cfg.sum(axis=1).astype(float)
    s2 = (cfg.astype(float) ** 2).sum(axis=1)
    pairs = 0.5 * (s * s - s2)
    h = (
        -(params.j_coupling / n) * pairs
        + (params.l_coupling / (2 * n)) * s * s
        - params.mu * s2
        - field * s
    )
    dist = build_discrete(h, params.qp)
    m = s / n
    return BruteForceResult(dist, cfg, dist.expect(m), dist.expect(m * m))
