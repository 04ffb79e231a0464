"""Standard bivariate normal rectangle probabilities.

P(X <= h, Y <= k) for correlated standard normals, computed by reducing the
correlation integral to a single smooth integrand via the substitution
r = sin(theta):

    P(h, k, r) = Phi(h) Phi(k)
                 + (1 / 2pi) * int_0^{asin(r)} exp(-(h^2 - 2 h k sin t + k^2)
                                                   / (2 cos^2 t)) dt

The integrand is bounded and analytic on the whole range including r -> +-1,
so fixed-order Gauss-Legendre panels give near machine precision.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr

_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(64)


def _panel(f, a, b):
    """Integrate f on [a, b] with one 64-point Gauss-Legendre panel."""
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    return half * np.sum(_WEIGHTS * f(mid + half * _NODES))


def bvn_cdf(h, k, r):
    """P(X <= h, Y <= k) for standard bivariate normal with correlation r."""
    h = float(h)
    k = float(k)
    r = float(r)
    if not (np.isfinite(h) and np.isfinite(k)):
        raise ValueError("bvn_cdf requires finite thresholds")
    if not -1.0 <= r <= 1.0:
        raise ValueError("correlation must lie in [-1, 1]")
    if r == 1.0:
        return float(ndtr(min(h, k)))
    if r == -1.0:
        return float(max(0.0, ndtr(h) + ndtr(k) - 1.0))

    theta_max = np.arcsin(r)

    def integrand(t):
        c2 = np.cos(t) ** 2
        return np.exp(-(h * h - 2.0 * h * k * np.sin(t) + k * k) / (2.0 * c2))

    # split the boundary layer near |theta| -> pi/2 for |r| close to 1
    cuts = [0.0]
    if abs(theta_max) > 1.3:
        cuts.append(np.sign(theta_max) * 1.3)
    if abs(theta_max) > 1.55:
        cuts.append(np.sign(theta_max) * 1.55)
    cuts.append(theta_max)
    integral = sum(_panel(integrand, a, b) for a, b in zip(cuts[:-1], cuts[1:]))

    val = ndtr(h) * ndtr(k) + integral / (2.0 * np.pi)
    return float(min(1.0, max(0.0, val)))
