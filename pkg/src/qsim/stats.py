"""Binomial statistics helpers."""

from __future__ import annotations

import math

from scipy.stats import norm


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1 or not 0 <= successes <= trials:
        raise ValueError("need 0 <= successes <= trials and trials >= 1")
    z = float(norm.ppf(0.5 + confidence / 2))
    n = trials
    p = successes / n
    denom = 1 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z / denom * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    low = 0.0 if successes == 0 else max(0.0, center - half)
    high = 1.0 if successes == trials else min(1.0, center + half)
    return low, high


def binomial_sigma(p: float, trials: int) -> float:
    """Standard deviation of an empirical proportion when the truth is ``p``."""
    return math.sqrt(max(p * (1 - p), 0.0) / trials)


def sigma_distance(empirical: float, reference: float, trials: int) -> float | None:
    """``|empirical - reference| / sigma``; None when sigma is 0 and they differ."""
    s = binomial_sigma(reference, trials)
    diff = abs(empirical - reference)
    if s == 0.0:
        return 0.0 if diff == 0.0 else None
    return diff / s
