"""Reference computations used to check the library by a second route.

Nothing here imports the code under test except plain data containers.
"""

from __future__ import annotations

import bisect
import math


def trapezoid(f, a: float, b: float, n: int) -> float:
    h = (b - a) / n
    s = 0.5 * (f(a) + f(b))
    for k in range(1, n):
        s += f(a + k * h)
    return s * h


def ou_variance_quadrature(lam: float, sigma: float, t: float, n: int = 10**6) -> float:
    """int_0^t sigma^2 exp(-2 lam (t - u)) du by the trapezoid rule (vectorised)."""
    import numpy as np

    u = np.linspace(0.0, t, n + 1)
    y = sigma**2 * np.exp(-2.0 * lam * (t - u))
    h = t / n
    return float(h * (y.sum() - 0.5 * (y[0] + y[-1])))


def flat_bond(rate: float, T: float) -> float:
    return math.exp(-rate * T)


def bond_sum_payer_value(rate: float, notional: float, fixed: float, dates, t: float = 0.0) -> float:
    """Forward-starting payer swap on a flat continuously compounded curve.

    Floating leg N (B(t,T_0) - B(t,T_m)), fixed leg N kappa sum alpha_l B(t,T_l).
    """
    float_leg = notional * (flat_bond(rate, dates[0] - t) - flat_bond(rate, dates[-1] - t))
    fixed_leg = 0.0
    for a, b in zip(dates, dates[1:]):
        fixed_leg += notional * fixed * (b - a) * flat_bond(rate, b - t)
    return float_leg - fixed_leg


def flat_payer_value(rate: float, notional: float, fixed: float, dates, t: float) -> float:
    """Payer swap on a static flat curve at any time, fixings read off the same curve."""
    if t >= dates[-1] - 1e-12:
        return 0.0
    fixed_leg = math.fsum(
        notional * fixed * (b - a) * flat_bond(rate, b - t) for a, b in zip(dates, dates[1:]) if b > t + 1e-12
    )
    redemption = notional * flat_bond(rate, dates[-1] - t)
    if t < dates[0]:
        floating = notional * flat_bond(rate, dates[0] - t)
    else:
        last = max(d for d in dates if d <= t + 1e-12)
        floating = notional * math.exp(rate * (t - last))
    return floating - fixed_leg - redemption


def bisection(f, lo: float, hi: float, tol: float = 1e-15, maxiter: int = 200) -> float:
    flo = f(lo)
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0 or hi - lo < tol:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sorted_quantile(xs, alpha: float) -> float:
    """Smallest sample x with #{samples <= x} >= alpha * n (definition, by counting)."""
    s = sorted(float(x) for x in xs)
    target = alpha * len(s)
    for x in s:
        if bisect.bisect_right(s, x) >= target:
            return x
    return s[-1]


def sorted_tail(xs, alpha: float) -> float:
    """Average of the order statistics from the alpha-quantile's rank upward."""
    s = sorted(float(x) for x in xs)
    target = alpha * len(s)
    rank = next(i for i in range(len(s)) if i + 1 >= target)
    tail = s[rank:]
    return math.fsum(tail) / len(tail)


def cva_quadrature(epe, discount, times, hazard: float, recovery: float) -> float:
    """sum_j (1-R) EPE(t_j) D(0,t_j) (exp(-h t_{j-1}) - exp(-h t_j))."""
    total = 0.0
    for j in range(1, len(times)):
        dq = math.exp(-hazard * times[j - 1]) - math.exp(-hazard * times[j])
        total += (1.0 - recovery) * epe[j] * discount[j] * dq
    return total
