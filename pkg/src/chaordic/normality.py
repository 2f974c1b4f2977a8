"""Shapiro-Wilk normality test for small samples (n = 3..50).

W follows Shapiro & Wilk (1965) with Royston's polynomial approximation of
the order-statistic weights and of the null distribution of W, so p-values
are usable down to very small n. Implemented on the stdlib NormalDist so the
test suite's external reference stays an independent oracle.
"""

from __future__ import annotations

import math
from statistics import NormalDist

import numpy as np

_ND = NormalDist()

# Royston's correction polynomials in u = 1/sqrt(n), constant term 0.
_C1 = (0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_C2 = (0.042981, -0.293762, -1.752461, 5.682633, -3.582633)


class ZeroVarianceError(ValueError):
    """All values identical: W is undefined, callers decide the convention."""


def _poly(coeffs, u):
    return sum(c * u ** (k + 1) for k, c in enumerate(coeffs))


def _weights(n: int) -> np.ndarray:
    m = np.array([_ND.inv_cdf((i - 0.375) / (n + 0.25)) for i in range(1, n + 1)])
    if n == 3:
        r = math.sqrt(0.5)
        return np.array([-r, 0.0, r])
    ssumm2 = float(np.sum(m * m))
    c = m / math.sqrt(ssumm2)
    u = 1.0 / math.sqrt(n)
    a_n = c[-1] + _poly(_C1, u)
    if n <= 5:
        phi = (ssumm2 - 2.0 * m[-1] ** 2) / (1.0 - 2.0 * a_n ** 2)
        a = m / math.sqrt(phi)
        a[-1], a[0] = a_n, -a_n
    else:
        a_n1 = c[-2] + _poly(_C2, u)
        phi = (ssumm2 - 2.0 * m[-1] ** 2 - 2.0 * m[-2] ** 2) / (
            1.0 - 2.0 * a_n ** 2 - 2.0 * a_n1 ** 2
        )
        a = m / math.sqrt(phi)
        a[-1], a[0] = a_n, -a_n
        a[-2], a[1] = a_n1, -a_n1
    return a


def shapiro_wilk(values) -> tuple[float, float]:
    """Return (W, p) for a sample of 3..50 values.

    Raises ValueError for n < 3 and ZeroVarianceError when every value is
    identical (the rating pipeline maps that case to p = 1 itself).
    """
    x = np.sort(np.asarray(list(values), dtype=float))
    n = len(x)
    if n < 3:
        raise ValueError(f"Shapiro-Wilk needs at least 3 values, got {n}")
    if n > 50:
        raise ValueError(f"supported sample sizes are 3..50, got {n}")
    if x[0] == x[-1]:
        raise ZeroVarianceError("all values identical")

    a = _weights(n)
    ssq = float(np.sum((x - x.mean()) ** 2))
    w = float(np.dot(a, x)) ** 2 / ssq
    w = min(w, 1.0)

    if n == 3:
        p = (6.0 / math.pi) * (math.asin(math.sqrt(w)) - math.asin(math.sqrt(0.75)))
        return w, float(min(max(p, 0.0), 1.0))
    if n <= 11:
        gamma = -2.273 + 0.459 * n
        arg = gamma - math.log(max(1.0 - w, 1e-15))
        if arg <= 0.0:
            return w, 0.0
        wt = -math.log(arg)
        mu = 0.5440 - 0.39978 * n + 0.025054 * n ** 2 - 0.0006714 * n ** 3
        sigma = math.exp(1.3822 - 0.77857 * n + 0.062767 * n ** 2 - 0.0020322 * n ** 3)
    else:
        ln_n = math.log(n)
        wt = math.log(max(1.0 - w, 1e-15))
        mu = -1.5861 - 0.31082 * ln_n - 0.083751 * ln_n ** 2 + 0.0038915 * ln_n ** 3
        sigma = math.exp(-0.4803 - 0.082676 * ln_n + 0.0030302 * ln_n ** 2)
    z = (wt - mu) / sigma
    p = 1.0 - _ND.cdf(z)
    return w, float(min(max(p, 0.0), 1.0))
