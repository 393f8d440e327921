"""Exploratory reports on growth rates of typical passage times.

Both probes read ``typical_time`` raw rows. They are labeled exploratory
and never feed a pass/fail verdict.
"""
from __future__ import annotations

import math

import numpy as np

from ..distributions import DoubleExp, PointMass

ZERO_ONE_CONSTANT = 2.0 / math.log(2.0)


def _t_by_n(cfg, rows):
    out = {}
    for n in cfg.n_grid:
        out[n] = np.array([float(r["value"]) for r in rows if r["metric"] == "T" and r["n"] == n])
    return out


def _trend(ns, med):
    ok = [(math.log(n), m) for n, m in zip(ns, med) if math.isfinite(m)]
    if len(ok) < 2:
        return math.nan
    x, y = zip(*ok)
    return float(np.polyfit(x, y, 1)[0])


def _ci(x, rng, resamples=1000):
    x = x[np.isfinite(x)]
    if x.size == 0:
        return [math.nan, math.nan]
    boot = np.median(rng.choice(x, size=(resamples, x.size)), axis=1)
    return [float(v) for v in np.quantile(boot, [0.025, 0.975])]


def conjecture_probe_zero_one(cfg, rows) -> dict:
    """Ratio ``T_n / log log n`` per replica for weights in {0, 1}."""
    if not isinstance(cfg.weight.positive, PointMass):
        raise ValueError("the zero-one probe needs a point-mass positive part")
    rng = np.random.default_rng(cfg.seed)
    t = _t_by_n(cfg, rows)
    per_n = {}
    for n, values in t.items():
        ratio = values / math.log(math.log(n))
        per_n[str(n)] = {"ratios": ratio.tolist(), "median": float(np.median(ratio)),
                         "median_ci": _ci(ratio, rng)}
    med = [per_n[str(n)]["median"] for n in cfg.n_grid]
    slope = _trend(cfg.n_grid, med)
    return {"label": "exploratory, not an acceptance check", "probe": "zero_one",
            "comparator": ZERO_ONE_CONSTANT, "per_n": per_n, "median_trend_slope": slope,
            "trend_sign": int(np.sign(slope)) if math.isfinite(slope) else None}


def loglog_comparator(cfg, n: int, k: float = 1.0) -> tuple[int, float]:
    """``sum_{m=1}^{L} F_zeta^{-1}(exp(-(2+K) 2^m))`` with ``L = floor(log2 log n)``."""
    big_l = max(int(math.floor(math.log2(math.log(n)))), 1)
    law, mass = cfg.weight.positive, cfg.weight.mass
    total = sum(float(law.quantile_neglog((2.0 + k) * 2.0 ** m, mass=mass)) for m in range(1, big_l + 1))
    return big_l, total


def conjecture_probe_loglog_power(cfg, rows, k: float = 1.0) -> dict:
    """``T_n / (log log n)^{1 - 1/gamma}`` next to the bounding partial sum."""
    law = cfg.weight.positive
    if not isinstance(law, DoubleExp) or law.gamma <= 1:
        raise ValueError("the log-log probe needs a double-exponential law with gamma > 1")
    power = 1.0 - 1.0 / law.gamma
    t = _t_by_n(cfg, rows)
    per_n = {}
    for n, values in t.items():
        scaled = values / math.log(math.log(n)) ** power
        big_l, comp = loglog_comparator(cfg, n, k)
        per_n[str(n)] = {"scaled": scaled.tolist(), "median_scaled": float(np.median(scaled)),
                         "L": big_l, "comparator": comp,
                         "median_over_comparator": float(np.median(values) / comp) if comp > 0 else math.nan}
    return {"label": "exploratory, not an acceptance check", "probe": "loglog_power",
            "exponent": power, "K": k, "per_n": per_n}


PROBES = {"zero_one": conjecture_probe_zero_one, "loglog_power": conjecture_probe_loglog_power}
