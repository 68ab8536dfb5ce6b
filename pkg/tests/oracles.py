"""Independent reference implementations used by the tests.

Written from the model definitions alone, without calling
into the package's solvers.
"""

import math
import warnings

import numpy as np
from scipy import integrate


def qexp(q, u):
    if q == 1.0:
        return math.exp(u)
    base = 1.0 + (1.0 - q) * u
    if base <= 0.0:
        return 0.0 if q < 1.0 else math.inf
    return base ** (1.0 / (1.0 - q))


def spin_average(m, J, L, mu, beta, q, h=0.0, escort=True):
    """<sigma> over {-1, 0, 1} with E = -(J m + h) s + (L|m| - mu) s^2."""
    num = den = 0.0
    for s in (-1, 0, 1):
        e = -(J * m + h) * s + (L * abs(m) - mu) * s * s
        w = qexp(q, -beta * e)
        if escort:
            w = w**q
        num += s * w
        den += w
    return num / den


def bisect(f, lo, hi, iters=200):
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo < 1e-16:
            break
    return 0.5 * (lo + hi)


def roots(f, lo=-1.0, hi=1.0, n=2001):
    """All sign-change roots of f on [lo, hi] resolved by an n-point scan."""
    xs = [lo + (hi - lo) * k / (n - 1) for k in range(n)]
    fs = [f(x) for x in xs]
    out = [x for x, v in zip(xs, fs) if v == 0.0]
    for i in range(n - 1):
        if fs[i] != 0.0 and fs[i + 1] != 0.0 and (fs[i] > 0) != (fs[i + 1] > 0):
            out.append(bisect(f, xs[i], xs[i + 1]))
    return sorted(out)


def largest_spin_root(J, L, mu, beta, q, escort=True):
    rs = roots(lambda m: spin_average(m, J, L, mu, beta, q, escort=escort) - m)
    return max(rs)


def xy_average(M, J, beta, q, h=0.0, y=1.0):
    """<cos theta> on [0, pi] under E = -(J M + h) y cos(theta), ordinary average."""
    b = (J * M + h) * y

    def w(t):
        return qexp(q, beta * b * math.cos(t))

    z = integrate.quad(w, 0.0, math.pi, epsabs=0, epsrel=1e-12, limit=200)[0]
    with warnings.catch_warnings():
        # the odd integral vanishes near M = 0, where only epsabs is attainable
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        c = integrate.quad(lambda t: math.cos(t) * w(t), 0.0, math.pi, epsabs=1e-14, epsrel=1e-11, limit=200)[0]
    return c / z


def joint_moments(M, J, L, mu, c, y_max, beta, q, n=40001, quadratic=False):
    """(z, <sigma>, <y sigma>) by composite Simpson on a dense uniform y grid."""
    y = np.linspace(0.0, y_max, n)
    simpson = np.ones(n)
    simpson[1:-1:2] = 4.0
    simpson[2:-1:2] = 2.0
    simpson *= (y_max / (n - 1)) / 3.0
    h0 = c * (y * y if quadratic else y)
    z = s1 = s2 = 0.0
    for s in (-1, 0, 1):
        e = h0 - (J * M) * y * s + (L * abs(M) - mu) * y * s * s
        u = -beta * e
        if q == 1.0:
            w = np.exp(u)
        else:
            base = 1.0 + (1.0 - q) * u
            if q > 1.0 and np.any(base <= 0.0):
                raise ArithmeticError("pole inside the y range")
            w = np.where(base > 0.0, np.abs(base) ** (1.0 / (1.0 - q)), 0.0)
        w = w * simpson
        z += w.sum()
        s1 += s * w.sum()
        s2 += s * np.dot(y, w)
    return z, s1 / z, s2 / z
