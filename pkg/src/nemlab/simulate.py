"""Monte Carlo price series from repeated equilibrium sampling.

Each step the exogenous field follows an AR(1) process

    h_t = rho h_{t-1} + s eps_t,   eps_t ~ N(0, 1)

the chosen model is re-solved under that field (starting from the previous
root, so branches persist), N investors are drawn from the resulting
distribution and their net demand d_t is turned into a price move
dx_t = d_t / lambda.

Random numbers come from numpy's PCG64 bit generator seeded with the 64-bit
``seed``; for a fixed numpy version the stream, and hence the CSV output, is
reproducible bit for bit.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence, TextIO, Union

import numpy as np

from .continuous_market import JointDensity, JointParams, solve_joint
from .errors import DomainError, NemlabError
from .maxent import DiscreteDistribution, GridDistribution
from .parallel import pmap
from .spin_market import ModelParams, SPINS, self_consistent_bias
from .xy_market import XYParams, solve_order_parameter

log = logging.getLogger(__name__)

SERIES_HEADER = ("t", "x", "dx", "demand", "field")

AnyParams = Union[ModelParams, XYParams, JointParams]
MODEL_TYPES = {"discrete": ModelParams, "xy": XYParams, "joint": JointParams}


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator for a 64-bit seed."""
    if int(seed) != seed or not 0 <= seed < 2**64:
        raise DomainError(f"seed must be an integer in [0, 2**64), got {seed!r}")
    return np.random.Generator(np.random.PCG64(int(seed)))


def _inverse_cdf_discrete(p: np.ndarray, u: np.ndarray) -> np.ndarray:
    cum = np.cumsum(p)
    cum /= cum[-1]
    return np.minimum(np.searchsorted(cum, u, side="right"), p.size - 1)


def sample_investors(distribution, n: int, rng: np.random.Generator, escort: bool = False):
    """Draw ``n`` investor states by inverse-CDF sampling.

    * :class:`DiscreteDistribution` -> array of state labels (``escort=True``
      samples the escort probabilities instead of the plain ones);
    * :class:`GridDistribution` -> array of continuous values;
    * :class:`JointDensity` -> ``(sigma, y)`` arrays.
    """
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    u = rng.random(int(n))
    if isinstance(distribution, DiscreteDistribution):
        p = distribution.escort_probs() if escort else distribution.probs
        idx = _inverse_cdf_discrete(p, u)
        return np.asarray(distribution.states)[idx]
    if isinstance(distribution, GridDistribution):
        xs, cdf = distribution.cdf_table()
        return np.interp(u, cdf, xs)
    if isinstance(distribution, JointDensity):
        masses = np.array([distribution.branch_mass(s) for s in SPINS])
        sigma = np.asarray(SPINS)[_inverse_cdf_discrete(masses, u)]
        y = np.zeros(sigma.shape)
        v = rng.random(int(n))
        for s in SPINS:
            sel = sigma == s
            if np.any(sel):
                xs, cdf = distribution.branch(s).cdf_table()
                y[sel] = np.interp(v[sel], cdf, xs)
        return sigma, y
    raise DomainError(f"cannot sample from {type(distribution).__name__}")


@dataclass(frozen=True)
class SimConfig:
    model: Literal["discrete", "xy", "joint"]
    params: AnyParams
    steps: int = 1000
    seed: int = 0
    rho: float = 0.0
    innovation: float = 0.0
    h0: float = 0.0
    m0: float = 0.0
    x0: float = 100.0
    price_mode: Literal["relative", "level"] = "relative"

    def __post_init__(self):
        if self.model not in MODEL_TYPES:
            raise DomainError(f"unknown model {self.model!r}")
        if not isinstance(self.params, MODEL_TYPES[self.model]):
            raise DomainError(f"model {self.model!r} needs {MODEL_TYPES[self.model].__name__}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise DomainError(f"steps must be >= 1, got {self.steps!r}")
        if not 0.0 <= self.rho < 1.0:
            raise DomainError(f"AR(1) persistence must satisfy 0 <= rho < 1, got {self.rho!r}")
        if not self.innovation >= 0.0:
            raise DomainError(f"innovation scale must be >= 0, got {self.innovation!r}")
        if not abs(self.m0) <= 1.0:
            raise DomainError(f"|m0| must be <= 1, got {self.m0!r}")
        if self.price_mode not in ("relative", "level"):
            raise DomainError(f"unknown price mode {self.price_mode!r}")
        make_rng(self.seed)


@dataclass(eq=False)
class PriceSeries:
    t: np.ndarray
    x: np.ndarray
    dx: np.ndarray
    demand: np.ndarray
    field: np.ndarray
    x0: float
    failed_steps: int = 0
    m: np.ndarray = field(default=None, repr=False)

    def __len__(self) -> int:
        return int(self.t.size)

    @property
    def failure_rate(self) -> float:
        return self.failed_steps / max(len(self), 1)

    def rows(self):
        for i in range(len(self)):
            yield (int(self.t[i]), float(self.x[i]), float(self.dx[i]),
                   float(self.demand[i]), float(self.field[i]))

    def write_csv(self, stream: TextIO) -> None:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(SERIES_HEADER)
        for t, *vals in self.rows():
            w.writerow([t, *(repr(v) for v in vals)])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def _solve(config: SimConfig, m0: float, h: float):
    p = config.params
    if config.model == "discrete":
        sol = self_consistent_bias(p, m0, field=h)
        return sol.m_star, sol.distribution, sol.converged
    if config.model == "xy":
        sol = solve_order_parameter(p, m0, field=h)
        return sol.m_star, sol.distribution, sol.converged
    sol = solve_joint(p, m0, field=h)
    return sol.m_star, sol.joint_density, sol.converged


def _demand(config: SimConfig, dist, rng) -> float:
    p = config.params
    n = p.n_investors
    if config.model == "discrete":
        s = sample_investors(dist, n, rng, escort=p.averaging == "escort")
        return float(np.sum(s))
    if config.model == "xy":
        theta = sample_investors(dist, n, rng)
        return float(p.magnitude * np.sum(np.cos(theta)))
    sigma, y = sample_investors(dist, n, rng)
    return float(np.dot(sigma, y))


def run_series(config: SimConfig) -> PriceSeries:
    """Generate one price series; deterministic for a given config and seed."""
    rng = make_rng(config.seed)
    T = int(config.steps)
    lam = config.params.market_depth
    t = np.arange(1, T + 1)
    x = np.empty(T)
    dx = np.empty(T)
    d = np.empty(T)
    hs = np.empty(T)
    ms = np.empty(T)

    h = config.h0
    m_prev = config.m0
    dist_prev = None
    failed = 0
    x_prev = config.x0
    for i in range(T):
        h = config.rho * h + config.innovation * rng.standard_normal()
        try:
            m, dist, ok = _solve(config, m_prev, h)
        except NemlabError as exc:
            log.debug("step %d: %s", i + 1, exc)
            m, dist, ok = m_prev, None, False
        if not ok:
            failed += 1
            if dist_prev is None and dist is None:
                raise NemlabError(f"solver failed at step {i + 1} with no previous root to reuse")
            if dist_prev is not None:
                m, dist = m_prev, dist_prev
        di = _demand(config, dist, rng)
        if config.price_mode == "relative":
            dxi = di / lam
            xi = x_prev + dxi
        else:
            xi = di / lam
            dxi = xi - x_prev
        x[i], dx[i], d[i], hs[i], ms[i] = xi, dxi, di, h, m
        x_prev, m_prev, dist_prev = xi, m, dist

    if failed:
        log.warning("%d of %d steps reused the previous root after solver failure", failed, T)
    return PriceSeries(t, x, dx, d, hs, config.x0, failed, ms)


def run_ensemble(config: SimConfig, seeds: Sequence[int], threads: int = 1) -> list[PriceSeries]:
    """Independent series for each seed, in seed order."""
    configs = [replace(config, seed=int(s)) for s in seeds]
    return pmap(run_series, configs, threads)


def excess_kurtosis(values) -> float:
    v = np.asarray(values, dtype=float)
    c = v - v.mean()
    var = np.mean(c * c)
    if var == 0.0:
        return math.nan
    return float(np.mean(c**4) / var**2 - 3.0)
