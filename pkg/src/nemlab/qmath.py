"""q-deformed elementary functions and Tsallis averages.

All functions accept python scalars or numpy arrays.  The classical
(Boltzmann-Gibbs) case ``q == 1`` is taken by an explicit branch whenever
``|q - 1| < Q_ONE_TOL``.

Conventions
-----------
exp_q(u) = [1 + (1 - q) u]_+ ** (1 / (1 - q))

For ``q < 1`` a non-positive base is the Tsallis cutoff and yields exactly 0.
For ``q > 1`` a non-positive base lies at or beyond the pole of the power law
and yields ``+inf``; callers building distributions treat that as infeasible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DomainError

Q_ONE_TOL = 1e-12
NORM_TOL = 1e-9

Averaging = Literal["escort", "unnormalized", "ordinary"]


@dataclass(frozen=True)
class QParams:
    """Entropic index ``q`` and inverse temperature ``beta``."""

    q: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.q) and self.q > 0):
            raise DomainError(f"q must be a finite positive number, got {self.q!r}")
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise DomainError(f"beta must be a finite positive number, got {self.beta!r}")

    @property
    def classical(self) -> bool:
        return is_classical(self.q)


def is_classical(q: float) -> bool:
    return abs(q - 1.0) < Q_ONE_TOL


def _check_q(q):
    if not (math.isfinite(q) and q > 0):
        raise DomainError(f"entropic index must satisfy q > 0, got {q!r}")


def q_exp(q: float, u):
    """q-exponential of ``u`` (scalar or array)."""
    _check_q(q)
    if np.ndim(u) == 0:
        u = float(u)
        if not math.isfinite(u):
            raise DomainError(f"q_exp argument must be finite, got {u!r}")
        if is_classical(q):
            return math.exp(u)
        a = 1.0 - q
        base = 1.0 + a * u
        if base <= 0.0:
            return 0.0 if q < 1.0 else math.inf
        return math.exp(math.log1p(a * u) / a)

    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise DomainError("q_exp argument must be finite")
    if is_classical(q):
        return np.exp(u)
    a = 1.0 - q
    base = 1.0 + a * u
    out = np.empty_like(u)
    ok = base > 0.0
    out[ok] = np.exp(np.log1p(a * u[ok]) / a)
    out[~ok] = 0.0 if q < 1.0 else np.inf
    return out


def q_log(q: float, v):
    """q-logarithm, the inverse of :func:`q_exp` away from the cutoff."""
    _check_q(q)
    if np.ndim(v) == 0:
        v = float(v)
        if not v > 0.0 or not math.isfinite(v):
            raise DomainError(f"q_log requires a finite v > 0, got {v!r}")
        if is_classical(q):
            return math.log(v)
        a = 1.0 - q
        return math.expm1(a * math.log(v)) / a

    v = np.asarray(v, dtype=float)
    if not np.all((v > 0.0) & np.isfinite(v)):
        raise DomainError("q_log requires finite v > 0")
    if is_classical(q):
        return np.log(v)
    a = 1.0 - q
    return np.expm1(a * np.log(v)) / a


def _as_prob(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise DomainError("probability vector must be a non-empty 1-d array")
    if not np.all(np.isfinite(p)) or np.any(p < 0.0):
        raise DomainError("probabilities must be finite and non-negative")
    if abs(p.sum() - 1.0) > NORM_TOL:
        raise DomainError(f"probabilities must sum to 1 (got {p.sum()!r})")
    return p


def tsallis_entropy(p, q: float) -> float:
    """Tsallis entropy ``(1 - sum p^q) / (q - 1)``; Shannon entropy at q = 1."""
    _check_q(q)
    p = _as_prob(p)
    nz = p[p > 0.0]
    if is_classical(q):
        s = -float(np.sum(nz * np.log(nz)))
    else:
        s = float((1.0 - np.sum(nz**q)) / (q - 1.0))
    # rounding can push a point mass slightly negative
    return max(s, 0.0)


def escort(p, q: float) -> np.ndarray:
    """Escort distribution ``p^q / sum(p^q)``."""
    _check_q(q)
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or np.any(p < 0.0) or not np.all(np.isfinite(p)):
        raise DomainError("escort requires a finite non-negative 1-d vector")
    if not np.any(p > 0.0):
        raise DomainError("escort of an all-zero vector is undefined")
    if is_classical(q):
        return p / p.sum()
    w = np.where(p > 0.0, p**q, 0.0)
    return w / w.sum()


def q_expectation(values, p, q: float, kind: Averaging = "escort") -> float:
    """q-parametrized average of ``values`` under ``p``.

    ``kind="escort"`` (default) is the normalized average over the escort
    distribution; ``"unnormalized"`` is ``sum(A p^q)``; ``"ordinary"`` is the
    plain expectation regardless of ``q``.
    """
    values = np.asarray(values, dtype=float)
    p = _as_prob(p)
    if values.shape != p.shape:
        raise DomainError(f"length mismatch: {values.shape} values vs {p.shape} probabilities")
    if kind == "escort":
        return float(np.dot(values, escort(p, q)))
    if kind == "unnormalized":
        _check_q(q)
        return float(np.dot(values, np.where(p > 0.0, p**q, 0.0)))
    if kind == "ordinary":
        return float(np.dot(values, p))
    raise DomainError(f"unknown averaging kind {kind!r}")


def q_exp_diff(q: float, u, du, power: float = 1.0):
    """``exp_q(u + du)**power - exp_q(u)**power`` without cancellation.

    Accurate to relative precision for small ``du``, which keeps mean-field
    maps exact-odd near a zero order parameter.  Falls back to the direct
    difference where either base is at or past the cutoff/pole.
    """
    _check_q(q)
    scalar = np.ndim(u) == 0 and np.ndim(du) == 0
    u = np.asarray(u, dtype=float)
    du = np.asarray(du, dtype=float)
    u, du = np.broadcast_arrays(u, du)
    if is_classical(q):
        out = np.exp(power * u) * np.expm1(power * du)
        return float(out) if scalar else out
    a = 1.0 - q
    b_lo = 1.0 + a * u
    b_hi = b_lo + a * du
    ok = (b_lo > 0.0) & (b_hi > 0.0)
    out = np.empty(u.shape, dtype=float)
    lo = np.exp(power * np.log1p(a * u[ok]) / a)
    d = np.log1p(a * du[ok] / b_lo[ok]) / a
    out[ok] = lo * np.expm1(power * d)
    if not np.all(ok):
        bad = ~ok
        hi_w = q_exp(q, u[bad] + du[bad]) ** power
        lo_w = q_exp(q, u[bad]) ** power
        with np.errstate(invalid="ignore"):
            out[bad] = hi_w - lo_w
    return float(out) if scalar else out
