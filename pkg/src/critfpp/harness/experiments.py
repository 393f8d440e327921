"""Seeded, parallel experiment runners.

Every experiment is a list of independent tasks ``(stream, n, replica)``.
A task owns the generator ``default_rng(SeedSequence(seed, spawn_key=(stream, n, replica)))``
and returns long-format rows ``(metric, key, value)``. Tasks run in a process
pool; results are collected in task order, so the raw CSV does not depend on
the number of workers or on completion order. Summaries are computed from
the raw rows alone.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import repeat
from pathlib import Path

import numpy as np

from .. import branching, fpp, graphgen, percolation
from . import probes, stats
from .config import ExperimentConfig

log = logging.getLogger(__name__)

COLUMNS = ["experiment", "n", "replica", "seed", "metric", "key", "value"]
MAIN, AUX = 0, 1


def task_rng(seed: int, stream: int, n: int, replica: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, n, replica)))


# ---------------------------------------------------------------------------
# per-task work
# ---------------------------------------------------------------------------

def _graph_and_weights(cfg, n, rng):
    g = graphgen.configuration_model(cfg.degree, n, rng)
    return g, fpp.assign_weights(g, cfg.weight, rng)


def _typical_time(cfg, stream, n, replica, rng):
    if stream == AUX:
        ell = int(cfg.params["limit_ell"])
        cap = int(cfg.params["cluster_cap"])
        total, capped = 0.0, False
        for _ in range(2):
            run = branching.simulate_bp(cfg.degree, cfg.weight, rng, max_theta_index=ell,
                                        cluster_cap=cap, prune=True)
            total += run.theta[-1] if run.theta.size == ell else math.nan
            capped |= run.capped or run.stop_reason != "max_theta_index"
        return [("theta_sum", "", total), ("theta_capped", "", int(capped))]
    g, w = _graph_and_weights(cfg, n, rng)
    u, v = (int(x) for x in rng.choice(n, size=2, replace=False))
    res = fpp.passage_time(g, w, u, v)
    return [("T", "", res.T), ("H", "", -1 if res.H is None else res.H)]


def _flood(cfg, stream, n, replica, rng):
    g, w = _graph_and_weights(cfg, n, rng)
    f = fpp.flood(g, w, int(cfg.params["source"]))
    return [("max_time", "", f.max_time), ("ratio", "", f.max_time / math.log(n)),
            ("unreachable", "", f.unreachable_count)]


def _walk_grid(cfg):
    p = cfg.params
    return stats.log_grid(p["walk_m_min"], p["walk_m_max"], p["points"])


def _graph_grid(cfg):
    p = cfg.params
    return stats.log_grid(p["graph_m_min"], p["graph_m_max"], p["points"])


def _chunk_sizes(total: int, chunks: int) -> list[int]:
    base, extra = divmod(total, chunks)
    return [base + (1 if i < extra else 0) for i in range(chunks)]


def _cluster_tails(cfg, stream, n, replica, rng):
    p = cfg.params
    if stream == MAIN:
        size = _chunk_sizes(int(p["walks"]), int(p["chunks"]))[replica]
        chi, s_chi, capped = branching.sample_cluster_walks(cfg.degree.q, cfg.degree.p_c,
                                                            int(p["cap"]), size, rng)
        rows = [("walks", "", size), ("capped", "", int(capped.sum()))]
        grid = _walk_grid(cfg)
        chi_s, s_s = np.sort(chi), np.sort(s_chi)
        for m in grid:
            rows.append(("chi_at_least", int(m), int(size - np.searchsorted(chi_s, m))))
        for m in grid:
            rows.append(("s_chi_at_least", int(m), int(size - np.searchsorted(s_s, m))))
        return rows
    g = graphgen.configuration_model(cfg.degree, n, rng)
    mask = percolation.percolate(g, percolation.critical_window_p(cfg.degree, n, cfg.lam), rng)
    census = percolation.cluster_census(g, mask)
    grid = _graph_grid(cfg)
    return [("vertex_survival", int(m), float(s)) for m, s in zip(grid, census.vertex_cluster_survival(grid))]


def _kemperman_check(cfg, stream, n, replica, rng):
    p = cfg.params
    size = _chunk_sizes(int(p["walks"]), int(p["chunks"]))[replica]
    chi, _, _ = branching.sample_cluster_walks(cfg.degree.q, cfg.degree.p_c, int(p["cap"]), size, rng)
    counts = np.bincount(chi, minlength=int(p["m_max"]) + 1)
    rows = [("walks", "", size)]
    rows += [("chi_count", m, int(counts[m])) for m in range(1, int(p["m_max"]) + 1)]
    return rows


def _explosion(cfg, stream, n, replica, rng):
    ells = sorted(int(e) for e in cfg.params["ells"])
    run = branching.simulate_bp(cfg.degree, cfg.weight, rng, max_theta_index=ells[-1],
                                cluster_cap=int(cfg.params["cluster_cap"]), prune=True)
    rows = [("capped", "", int(run.capped))]
    for ell in ells:
        rows.append(("theta", ell, run.theta[ell - 1] if run.theta.size >= ell else math.nan))
    return rows


def _coupling_tv(cfg, stream, n, replica, rng):
    p = cfg.params
    g, w = _graph_and_weights(cfg, n, rng)
    u, v = (int(x) for x in rng.choice(n, size=2, replace=False))
    col_steps = math.ceil(n ** p["collision_exponent"])
    tv_steps = math.ceil(n ** p["tv_exponent"])
    tr = fpp.grow_swg(g, w, u, max_steps=max(col_steps, tv_steps + 1))
    early = tr.r_col is not None and tr.r_col <= n ** p["collision_exponent"]
    rows = [("r_col", "", -1 if tr.r_col is None else tr.r_col), ("collision_early", "", int(early))]
    fwd = fpp.forward_degree_trace(tr, g)[:tv_steps]
    rows += [("forward_degree", int(k), int(c)) for k, c in enumerate(np.bincount(fwd)) if c]
    ell = math.floor(n ** (p["rho"] / 2 - p["eta"] / 4))
    tr2 = fpp.grow_swg(g, w, u, max_sigma_index=ell, stop_at_collision=False, eps=p["eps"])
    boundary = tr2.sigma_boundary[ell - 1] if tr2.sigma.size >= ell else -1
    rows += [("sigma_ell", "", ell), ("boundary", "", int(boundary))]
    rows += [("s_eps_count", e, int(c)) for e, c in zip(tr2.eps, tr2.eps_count)]
    rows += [("s_eps_degree", e, int(c)) for e, c in zip(tr2.eps, tr2.eps_degree)]
    two = fpp.two_source_growth(g, w, u, v, tv_steps)
    rows += [("two_source_disjoint", "", int(two.disjoint))]
    return rows


def _isolated_path(cfg, stream, n, replica, rng):
    g = graphgen.configuration_model(cfg.degree, n, rng)
    return [("longest", "", percolation.isolated_path_census(g))]


def _scaling_window(cfg, stream, n, replica, rng):
    g = graphgen.configuration_model(cfg.degree, n, rng)
    mask = percolation.percolate(g, percolation.critical_window_p(cfg.degree, n, cfg.lam), rng)
    c = percolation.cluster_census(g, mask)
    top = min(int(cfg.params["top"]), c.sizes.size)
    rows = [("largest", "", c.largest), ("largest_pos_stubs", "", c.largest_pos_stubs)]
    rows += [("size", r + 1, int(c.sizes[r])) for r in range(top)]
    return rows


def _tasks(cfg: ExperimentConfig) -> list[tuple[int, int, int]]:
    if cfg.kind in ("kemperman_check",):
        return [(MAIN, 0, r) for r in range(int(cfg.params["chunks"]))]
    if cfg.kind == "cluster_tails":
        walks = [(MAIN, 0, r) for r in range(int(cfg.params["chunks"]))]
        return walks + [(AUX, n, r) for n in cfg.n_grid for r in range(cfg.replicas)]
    if cfg.kind == "explosion":
        return [(MAIN, 0, r) for r in range(cfg.replicas)]
    tasks = [(MAIN, n, r) for n in cfg.n_grid for r in range(cfg.replicas)]
    if cfg.kind == "typical_time" and cfg.params["limit_ell"] and cfg.params["limit_samples"]:
        tasks += [(AUX, 0, r) for r in range(int(cfg.params["limit_samples"]))]
    return tasks


_WORK = {
    "typical_time": _typical_time, "flood": _flood, "cluster_tails": _cluster_tails,
    "kemperman_check": _kemperman_check, "explosion": _explosion, "coupling_tv": _coupling_tv,
    "isolated_path": _isolated_path, "scaling_window": _scaling_window,
}


def _execute(cfg: ExperimentConfig, task) -> list[dict]:
    stream, n, replica = task
    rng = task_rng(cfg.seed, stream, n, replica)
    try:
        rows = _WORK[cfg.kind](cfg, stream, n, replica, rng)
    except MemoryError as exc:
        rows = [("failure", type(exc).__name__, math.nan)]
    out = []
    for metric, key, value in rows:
        out.append({"experiment": cfg.name, "n": n, "replica": replica, "seed": cfg.seed,
                    "metric": metric if stream == MAIN else f"aux:{metric}", "key": key,
                    "value": value})
    return out


# ---------------------------------------------------------------------------
# summaries
# ---------------------------------------------------------------------------

def _select(rows, metric, n=None):
    return [r for r in rows if r["metric"] == metric and (n is None or r["n"] == n)]


def _values(rows, metric, n=None) -> np.ndarray:
    return np.array([float(r["value"]) for r in _select(rows, metric, n)])


def _verdict(value, threshold, passed, **extra) -> dict:
    out = {"value": value, "threshold": threshold, "passed": bool(passed)}
    out.update(extra)
    return out


def _summary_typical_time(cfg, rows):
    per_n, verdicts = {}, {}
    for n in cfg.n_grid:
        per_n[n] = {"T": stats.summarize(_values(rows, "T", n)),
                    "H": stats.summarize(_values(rows, "H", n)[_values(rows, "H", n) >= 0])}
    medians = [per_n[n]["T"]["median"] for n in cfg.n_grid]
    increments = [b - a for a, b in zip(medians, medians[1:])]
    chk = cfg.check
    if "median_increment_max" in chk:
        tol = chk["median_increment_max"]
        verdicts["median_increment"] = _verdict(increments, tol, all(abs(d) < tol for d in increments))
    if chk.get("median_strictly_increasing"):
        verdicts["median_strictly_increasing"] = _verdict(medians, None,
                                                          all(d > 0 for d in increments))
    theta = _values(rows, "aux:theta_sum")
    extra = {}
    if theta.size:
        extra["theta_sum"] = stats.summarize(theta)
        extra["theta_capped"] = int(_values(rows, "aux:theta_capped").sum())
        t_last = _values(rows, "T", cfg.n_grid[-1])
        ks = stats.compare_to_explosion_limit(t_last, theta[np.isfinite(theta)])
        extra["ks_to_limit"] = ks
        if "ks_max" in chk:
            verdicts["ks_to_limit"] = _verdict(ks, chk["ks_max"], ks < chk["ks_max"])
    probe = cfg.params.get("probe", "")
    if probe:
        extra["exploratory"] = probes.PROBES[probe](cfg, rows)
    return per_n, verdicts, extra


def _summary_flood(cfg, rows):
    per_n, verdicts = {}, {}
    chk = cfg.check
    floor = chk.get("ratio_floor")
    for n in cfg.n_grid:
        ratio = _values(rows, "ratio", n)
        per_n[n] = {"ratio": stats.summarize(ratio), "max_time": stats.summarize(_values(rows, "max_time", n)),
                    "unreachable_total": int(_values(rows, "unreachable", n).sum())}
        if floor is not None:
            frac = float(np.mean(ratio > floor))
            per_n[n]["fraction_above_floor"] = frac
            need = chk.get("floor_fraction_min", 1.0)
            verdicts[f"floor_n{n}"] = _verdict(frac, need, frac >= need, floor=floor)
    if chk.get("median_nondecreasing"):
        med = [per_n[n]["ratio"]["median"] for n in cfg.n_grid]
        verdicts["median_nondecreasing"] = _verdict(med, None, all(b >= a for a, b in zip(med, med[1:])))
    return per_n, verdicts, {}


def _pooled(rows, metric):
    acc = defaultdict(float)
    for r in _select(rows, metric):
        acc[r["key"]] += float(r["value"])
    keys = sorted(acc)
    return np.array(keys), np.array([acc[k] for k in keys])


def _summary_cluster_tails(cfg, rows):
    chk = cfg.check
    target = chk.get("slope_target", -0.5)
    walks = _values(rows, "walks").sum()
    extra = {"walks": int(walks), "capped": int(_values(rows, "capped").sum())}
    verdicts = {}
    fit_rng = np.random.default_rng(cfg.seed)
    for metric, label in (("chi_at_least", "chi"), ("s_chi_at_least", "s_chi")):
        m, cnt = _pooled(rows, metric)
        fit = stats.fit_tail_slope(m, cnt / walks, rng=fit_rng)
        extra[f"{label}_slope"] = fit.__dict__
        if "walk_slope_tol" in chk:
            tol = chk["walk_slope_tol"]
            verdicts[f"{label}_slope"] = _verdict(fit.slope, [target - tol, target + tol],
                                                  abs(fit.slope - target) <= tol)
    per_n = {}
    for n in cfg.n_grid:
        sel = _select(rows, "aux:vertex_survival", n)
        acc = defaultdict(list)
        for r in sel:
            acc[r["key"]].append(float(r["value"]))
        m = np.array(sorted(acc))
        surv = np.array([np.mean(acc[k]) for k in m])
        fit = stats.fit_tail_slope(m, surv, rng=fit_rng)
        per_n[n] = {"graph_slope": fit.__dict__, "replicas": len(sel) // max(len(m), 1)}
        if "graph_slope_tol" in chk:
            tol = chk["graph_slope_tol"]
            verdicts[f"graph_slope_n{n}"] = _verdict(fit.slope, [target - tol, target + tol],
                                                     abs(fit.slope - target) <= tol)
    return per_n, verdicts, extra


def regular3_exact(m: int) -> float:
    """``P(chi = m)`` for 3-regular degrees at ``p_c = 1/2``: ``C(2m, m-1) / (m 4^m)``."""
    return math.comb(2 * m, m - 1) / (m * 4 ** m)


def _summary_kemperman(cfg, rows):
    chk = cfg.check
    walks = _values(rows, "walks").sum()
    m, cnt = _pooled(rows, "chi_count")
    exact = branching.kemperman_pmf_range(cfg.degree.q, cfg.degree.p_c, int(cfg.params["m_max"]))
    emp = cnt / walks
    se = np.sqrt(exact[m - 1] * (1 - exact[m - 1]) / walks)
    z = np.abs(emp - exact[m - 1]) / se
    table = [{"m": int(a), "exact": float(b), "empirical": float(c), "z": float(d)}
             for a, b, c, d in zip(m, exact[m - 1], emp, z)]
    verdicts = {}
    if "z_max" in chk:
        verdicts["kemperman_vs_walks"] = _verdict(float(z.max()), chk["z_max"], z.max() <= chk["z_max"])
    regular3 = cfg.degree.pmf.size == 4 and cfg.degree.pmf[3] == 1.0
    if "exact_tol" in chk and regular3:
        diffs = [abs(branching.kemperman_pmf(cfg.degree.q, cfg.degree.p_c, k) - regular3_exact(k))
                 for k in (1, 2, 3)]
        verdicts["closed_form"] = _verdict(max(diffs), chk["exact_tol"], max(diffs) <= chk["exact_tol"],
                                           expected=[0.25, 0.125, 5 / 64])
    return {}, verdicts, {"walks": int(walks), "table": table}


def _summary_explosion(cfg, rows):
    ells = sorted(int(e) for e in cfg.params["ells"])
    theta = {ell: np.array([float(r["value"]) for r in _select(rows, "theta") if r["key"] == ell])
             for ell in ells}
    med = [float(np.nanmedian(theta[ell])) for ell in ells]
    gaps = [float(np.nanmedian(theta[b] - theta[a])) for a, b in zip(ells, ells[1:])]
    extra = {"ells": ells, "median_theta": med, "median_gap": gaps,
             "capped": int(_values(rows, "capped").sum())}
    try:
        extra["classifier"] = branching.classify_min_summable(cfg.weight).to_dict()
    except branching.ClassifierInconclusive as exc:
        extra["classifier"] = {"verdict": "inconclusive", "note": str(exc)}
    verdicts = {}
    if cfg.check.get("increment_decreasing"):
        verdicts["increment_decreasing"] = _verdict(gaps, None, all(b < a for a, b in zip(gaps, gaps[1:])))
    return {}, verdicts, extra


def _summary_coupling(cfg, rows):
    chk = cfg.check
    p = cfg.params
    per_n, verdicts = {}, {}
    for n in cfg.n_grid:
        early = _values(rows, "collision_early", n)
        k, cnt = [], []
        for r in _select(rows, "forward_degree", n):
            k.append(int(r["key"]))
            cnt.append(float(r["value"]))
        pmf = np.bincount(k, weights=cnt) / np.sum(cnt) if cnt else np.zeros(1)
        tv = stats.tv_distance(pmf, cfg.degree.q)
        b = _values(rows, "boundary", n)
        lo = chk.get("corridor_low", 0.1) * n ** (p["rho"] - p["eta"])
        hi = chk.get("corridor_high", 10.0) * n ** p["rho"]
        inside = float(np.mean((b >= lo) & (b <= hi)))
        per_n[n] = {"collision_fraction": float(early.mean()), "forward_tv": tv,
                    "boundary": stats.summarize(b[b >= 0]), "corridor": [lo, hi],
                    "corridor_fraction": inside,
                    "two_source_disjoint_fraction": float(_values(rows, "two_source_disjoint", n).mean())}
        for metric in ("s_eps_count", "s_eps_degree"):
            acc = defaultdict(list)
            for r in _select(rows, metric, n):
                acc[r["key"]].append(float(r["value"]))
            per_n[n][metric] = {str(e): float(np.median(v)) for e, v in sorted(acc.items())}
        if "collision_fraction_max" in chk:
            verdicts[f"collision_n{n}"] = _verdict(per_n[n]["collision_fraction"], chk["collision_fraction_max"],
                                                   per_n[n]["collision_fraction"] <= chk["collision_fraction_max"])
        if "tv_max" in chk:
            verdicts[f"forward_tv_n{n}"] = _verdict(tv, chk["tv_max"], tv < chk["tv_max"])
        if "corridor_fraction_min" in chk:
            verdicts[f"corridor_n{n}"] = _verdict(inside, chk["corridor_fraction_min"],
                                                  inside >= chk["corridor_fraction_min"], corridor=[lo, hi])
    return per_n, verdicts, {}


def _summary_isolated(cfg, rows):
    q1 = cfg.degree.q[1] if cfg.degree.q.size > 1 else 0.0
    per_n, verdicts = {}, {}
    for n in cfg.n_grid:
        longest = _values(rows, "longest", n)
        thr = (1.0 / (-2.0 * math.log(q1)) - cfg.params["slack"]) * math.log(n) if q1 > 0 else math.inf
        frac = float(np.mean(longest >= thr))
        per_n[n] = {"longest": stats.summarize(longest), "threshold": thr, "fraction": frac}
        if "fraction_min" in cfg.check:
            verdicts[f"isolated_path_n{n}"] = _verdict(frac, cfg.check["fraction_min"],
                                                       frac >= cfg.check["fraction_min"], length_threshold=thr)
    return per_n, verdicts, {}


def _summary_scaling(cfg, rows):
    per_n, verdicts = {}, {}
    for n in cfg.n_grid:
        scale = n ** (2.0 / 3.0)
        per_n[n] = {"largest_scaled": stats.summarize(_values(rows, "largest", n) / scale),
                    "pos_stubs_scaled": stats.summarize(_values(rows, "largest_pos_stubs", n) / scale)}
    if "ratio_factor_max" in cfg.check:
        fmax = cfg.check["ratio_factor_max"]
        for label in ("largest_scaled", "pos_stubs_scaled"):
            med = [per_n[n][label]["median"] for n in cfg.n_grid]
            factors = [max(a, b) / min(a, b) for a, b in zip(med, med[1:])]
            verdicts[f"{label}_stable"] = _verdict(factors, fmax, all(f < fmax for f in factors))
    return per_n, verdicts, {}


_SUMMARY = {
    "typical_time": _summary_typical_time, "flood": _summary_flood,
    "cluster_tails": _summary_cluster_tails, "kemperman_check": _summary_kemperman,
    "explosion": _summary_explosion, "coupling_tv": _summary_coupling,
    "isolated_path": _summary_isolated, "scaling_window": _summary_scaling,
}


def summarize_rows(cfg: ExperimentConfig, rows: list[dict]) -> dict:
    per_n, verdicts, extra = _SUMMARY[cfg.kind](cfg, rows)
    failures = [r for r in rows if r["metric"].endswith("failure")]
    summary = {"experiment": cfg.name, "kind": cfg.kind, "config_hash": cfg.config_hash,
               "seed": cfg.seed, "per_n": {str(k): v for k, v in per_n.items()},
               "verdicts": verdicts, "failures": len(failures)}
    summary.update(extra)
    return summary


# ---------------------------------------------------------------------------
# orchestration and persistence
# ---------------------------------------------------------------------------

@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list
    summary: dict
    raw_path: Path | None = None
    summary_path: Path | None = None

    @property
    def passed(self) -> bool:
        return all(v["passed"] for v in self.summary["verdicts"].values())


def _format(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_rows(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow([_format(r[c]) for c in COLUMNS])


def read_rows(path) -> list[dict]:
    """Read a raw CSV back; keys and values are parsed as numbers when possible."""
    def num(s):
        for cast in (int, float):
            try:
                return cast(s)
            except ValueError:
                pass
        return s

    with open(path, newline="") as fh:
        return [{"experiment": r["experiment"], "n": int(r["n"]), "replica": int(r["replica"]),
                 "seed": int(r["seed"]), "metric": r["metric"], "key": num(r["key"]),
                 "value": float(r["value"])} for r in csv.DictReader(fh)]


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return str(obj)


def collect_rows(cfg: ExperimentConfig, workers: int | None = None) -> list[dict]:
    tasks = _tasks(cfg)
    workers = cfg.workers if workers is None else workers
    log.info("%s: %d tasks on %d worker(s)", cfg.name, len(tasks), workers)
    if workers == 1:
        chunks = [_execute(cfg, t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_execute, repeat(cfg), tasks, chunksize=1))
    return [row for chunk in chunks for row in chunk]


def run_experiment(cfg: ExperimentConfig, workers: int | None = None, write: bool = True) -> ExperimentResult:
    rows = collect_rows(cfg, workers)
    summary = summarize_rows(cfg, rows)
    result = ExperimentResult(cfg, rows, summary)
    if write:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        result.raw_path = out / "raw.csv"
        result.summary_path = out / "summary.json"
        write_rows(result.raw_path, rows)
        with open(result.summary_path, "w") as fh:
            json.dump(summary, fh, indent=2, default=_json_default, allow_nan=True)
    return result
