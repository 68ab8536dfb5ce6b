"""Least-biased q-distributions over discrete states or a quadrature grid.

Both constructors weight a state of energy ``E`` by ``exp_q(-beta * E)`` and
normalize by the partition value ``z_q``, the sum (or integral) of the
unnormalized weights.  Energies are used as given: at ``q != 1`` a constant
shift changes the distribution, so callers own the energy zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, InfeasibleError, NumericalError
from .qmath import QParams, escort, q_exp


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    states: tuple
    energies: np.ndarray
    weights: np.ndarray
    probs: np.ndarray
    z_q: float
    q: float

    def escort_probs(self) -> np.ndarray:
        return escort(self.probs, self.q)

    def expect(self, values, kind: str = "escort") -> float:
        """Average of per-state ``values`` (escort or ordinary)."""
        values = np.asarray(values, dtype=float)
        p = self.escort_probs() if kind == "escort" else self.probs
        return float(np.dot(values, p))


def _weights(energies: np.ndarray, params: QParams) -> np.ndarray:
    w = q_exp(params.q, -params.beta * energies)
    if np.any(np.isinf(w)):
        bad = float(energies[np.isinf(w)][0])
        raise InfeasibleError(
            f"q-exponential weight diverges (pole) at q={params.q}, beta={params.beta}, E={bad}"
        )
    return w


def build_discrete(energies: Sequence[float], params: QParams, states=None) -> DiscreteDistribution:
    """Normalized q-Boltzmann distribution over a finite set of states.

    Parameters
    ----------
    energies : sequence of float
        Energy of each state.
    params : QParams
        Entropic index and inverse temperature.
    states : sequence, optional
        State labels; defaults to ``range(len(energies))``.
    """
    e = np.asarray(energies, dtype=float)
    if e.ndim != 1 or e.size == 0:
        raise DomainError("need at least one state")
    if not np.all(np.isfinite(e)):
        raise DomainError("energies must be finite")
    w = _weights(e, params)
    z = float(w.sum())
    if not z > 0.0:
        raise InfeasibleError(
            f"all states cut off: q={params.q}, beta={params.beta}, E={e.tolist()}"
        )
    labels = tuple(range(e.size)) if states is None else tuple(states)
    if len(labels) != e.size:
        raise DomainError("states and energies differ in length")
    return DiscreteDistribution(labels, e, w, w / z, z, params.q)


@dataclass(frozen=True)
class QuadSpec:
    """Gauss-Legendre order-doubling schedule for :func:`build_grid`."""

    order: int = 32
    max_order: int = 2048
    rtol: float = 1e-8

    def __post_init__(self):
        if self.order < 8:
            raise DomainError(f"quadrature order must be >= 8, got {self.order}")
        if self.max_order < self.order:
            raise DomainError("max_order must be >= order")


@lru_cache(maxsize=64)
def _legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def gauss_legendre(order: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the ``order``-point rule mapped onto [a, b]."""
    x, w = _legendre(order)
    half = 0.5 * (b - a)
    return half * x + 0.5 * (a + b), half * w


@dataclass(frozen=True, eq=False)
class GridDistribution:
    nodes: np.ndarray
    node_weights: np.ndarray
    density: np.ndarray
    z_q: float
    interval: tuple[float, float]
    q: float
    order: int = field(default=0)

    def integrate(self, values) -> float:
        """Quadrature of ``values * density`` (values sampled at the nodes)."""
        return float(np.dot(self.node_weights, np.asarray(values, dtype=float) * self.density))

    def expect(self, fn: Callable[[np.ndarray], np.ndarray]) -> float:
        return self.integrate(fn(self.nodes))

    def total(self) -> float:
        return float(np.dot(self.node_weights, self.density))

    def cdf_table(self) -> tuple[np.ndarray, np.ndarray]:
        """Piecewise-linear CDF through the interval ends and the nodes."""
        a, b = self.interval
        mass = self.node_weights * self.density
        xs = np.concatenate(([a], self.nodes, [b]))
        # each node's mass is split evenly around it
        cum = np.cumsum(mass)
        mid = cum - 0.5 * mass
        cdf = np.concatenate(([0.0], mid, [1.0]))
        cdf /= cdf[-1]
        return xs, cdf


def grid_partition(energy_fn, nodes, weights, params: QParams) -> tuple[np.ndarray, float]:
    e = np.asarray(energy_fn(nodes), dtype=float)
    if e.shape != nodes.shape or not np.all(np.isfinite(e)):
        raise DomainError("energy function must return finite values at every node")
    w = _weights(e, params)
    return w, float(np.dot(weights, w))


def build_grid(
    energy_fn: Callable[[np.ndarray], np.ndarray],
    interval: tuple[float, float],
    params: QParams,
    quad: QuadSpec = QuadSpec(),
) -> GridDistribution:
    """Least-biased q-density over a closed interval.

    The Gauss-Legendre order is doubled until ``z_q`` changes by less than
    ``quad.rtol`` (relative); the finer rule of the accepted pair is kept.
    """
    a, b = float(interval[0]), float(interval[1])
    if not b > a:
        raise DomainError(f"interval must satisfy b > a, got [{a}, {b}]")

    order = quad.order
    nodes, wts = gauss_legendre(order, a, b)
    w, z = grid_partition(energy_fn, nodes, wts, params)
    while True:
        if order * 2 > quad.max_order:
            raise NumericalError(
                f"z_q not converged to rtol={quad.rtol} with {quad.max_order} nodes "
                f"(q={params.q}, beta={params.beta})"
            )
        order *= 2
        nodes2, wts2 = gauss_legendre(order, a, b)
        w2, z2 = grid_partition(energy_fn, nodes2, wts2, params)
        if not z2 > 0.0:
            raise InfeasibleError(
                f"all grid states cut off on [{a}, {b}]: q={params.q}, beta={params.beta}"
            )
        converged = abs(z2 - z) <= quad.rtol * abs(z2)
        nodes, wts, w, z = nodes2, wts2, w2, z2
        if converged:
            break
    return GridDistribution(nodes, wts, w / z, z, (a, b), params.q, order)
