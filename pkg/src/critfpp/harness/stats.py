"""Summary statistics used by the experiments."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class EstimationError(ValueError):
    """Not enough usable data for an estimate."""


def summarize(values) -> dict:
    """Location and spread of a sample; infinite entries are counted, not dropped from quantiles."""
    x = np.asarray(values, dtype=float)
    x = x[~np.isnan(x)]
    if x.size == 0:
        return {"count": 0}
    finite = x[np.isfinite(x)]
    method = "linear" if finite.size == x.size else "inverted_cdf"
    q = np.quantile(x, [0.1, 0.25, 0.5, 0.75, 0.9], method=method)
    out = {"count": int(x.size), "median": float(q[2]), "q10": float(q[0]), "q25": float(q[1]),
           "q75": float(q[3]), "q90": float(q[4]), "n_infinite": int(x.size - finite.size)}
    if finite.size:
        out["mean"] = float(finite.mean())
        out["stderr"] = float(finite.std(ddof=1) / math.sqrt(finite.size)) if finite.size > 1 else math.nan
    return out


def survival_points(samples, m) -> np.ndarray:
    """Empirical ``P(X >= m)`` for each entry of ``m``."""
    x = np.sort(np.asarray(samples))
    m = np.asarray(m)
    return 1.0 - np.searchsorted(x, m, side="left") / x.size


def survival_from_histogram(values, counts, m) -> np.ndarray:
    """``P(X >= m)`` from a value/count histogram."""
    values = np.asarray(values)
    counts = np.asarray(counts, dtype=float)
    order = np.argsort(values)
    values, counts = values[order], counts[order]
    tail = np.cumsum(counts[::-1])[::-1]
    idx = np.searchsorted(values, np.asarray(m), side="left")
    total = counts.sum()
    out = np.zeros(np.shape(m))
    ok = idx < values.size
    out[ok] = tail[idx[ok]] / total
    return out


def log_grid(lo: float, hi: float, points: int) -> np.ndarray:
    """Distinct integers spaced evenly in log scale."""
    return np.unique(np.round(np.geomspace(lo, hi, points)).astype(np.int64))


@dataclass(frozen=True)
class TailFit:
    slope: float
    intercept: float
    ci_low: float
    ci_high: float
    points: int


def fit_tail_slope(m, survival, rng: np.random.Generator | None = None,
                   resamples: int = 1000, level: float = 0.95) -> TailFit:
    """Least-squares slope of ``log survival`` on ``log m`` with a bootstrap interval."""
    m = np.asarray(m, dtype=float)
    s = np.asarray(survival, dtype=float)
    keep = (s > 0) & (m > 0)
    x, y = np.log(m[keep]), np.log(s[keep])
    if x.size < 5:
        raise EstimationError(f"need >= 5 positive survival points, have {x.size}")
    slope, intercept = np.polyfit(x, y, 1)
    rng = np.random.default_rng(0) if rng is None else rng
    boot = np.empty(resamples)
    for b in range(resamples):
        idx = rng.integers(0, x.size, x.size)
        if np.ptp(x[idx]) == 0:
            boot[b] = np.nan
            continue
        boot[b] = np.polyfit(x[idx], y[idx], 1)[0]
    alpha = (1.0 - level) / 2.0
    lo, hi = np.nanquantile(boot, [alpha, 1.0 - alpha])
    return TailFit(float(slope), float(intercept), float(lo), float(hi), int(x.size))


def hill_estimator(samples, k: int) -> float:
    """Hill estimate of the tail index from the ``k`` largest samples."""
    x = np.sort(np.asarray(samples, dtype=float))[::-1]
    if not 1 <= k < x.size or x[k] <= 0:
        raise EstimationError("need 1 <= k < sample size and positive order statistics")
    return float(1.0 / np.mean(np.log(x[:k] / x[k])))


def tv_distance(p, q) -> float:
    """``(1/2) sum |p_k - q_k|``; the shorter pmf is zero-padded."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    k = max(p.size, q.size)
    p = np.pad(p, (0, k - p.size))
    q = np.pad(q, (0, k - q.size))
    return float(0.5 * np.abs(p - q).sum())


def empirical_pmf(samples, size: int | None = None) -> np.ndarray:
    counts = np.bincount(np.asarray(samples, dtype=np.int64), minlength=size or 0)
    return counts / counts.sum()


def ks_two_sample(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic ``sup |F_a - F_b|``."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise EstimationError("both samples must be nonempty")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def compare_to_explosion_limit(tn_samples, theta_sums) -> float:
    """KS distance between passage times and sums of two independent explosion-time draws."""
    return ks_two_sample(tn_samples, theta_sums)
