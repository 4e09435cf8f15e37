"""Composite Simpson quadrature with interval doubling."""

from __future__ import annotations

from typing import Callable

import numpy as np


def simpson(f: Callable[[np.ndarray], np.ndarray], a: float, b: float, n: int) -> float:
    """Composite Simpson rule on ``n`` (even) subintervals; ``f`` is vectorized."""
    if n < 2 or n % 2:
        raise ValueError("n must be an even integer >= 2")
    x = np.linspace(a, b, n + 1)
    y = f(x)
    h = (b - a) / n
    return float(h / 3 * (y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-1:2].sum()))


def simpson_until_stable(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    tol: float = 1e-10,
    n_start: int = 64,
    n_max: int = 2**22,
) -> float:
    """Double the subinterval count until successive estimates differ by < ``tol``."""
    n = n_start
    prev = simpson(f, a, b, n)
    while n < n_max:
        n *= 2
        cur = simpson(f, a, b, n)
        if abs(cur - prev) < tol:
            return cur
        prev = cur
    raise RuntimeError(f"Simpson quadrature did not reach tolerance {tol} with {n} intervals")


def simpson_ratio_until_stable(num, den, a: float, b: float, tol: float = 1e-10, n_start: int = 64, n_max: int = 2**22) -> float:
    """Stable ratio of two integrals over the same grid (e.g. a normalized mean)."""
    n = n_start
    prev = simpson(num, a, b, n) / simpson(den, a, b, n)
    while n < n_max:
        n *= 2
        cur = simpson(num, a, b, n) / simpson(den, a, b, n)
        if abs(cur - prev) < tol:
            return cur
        prev = cur
    raise RuntimeError(f"Simpson quadrature did not reach tolerance {tol} with {n} intervals")
