"""TOML experiment configuration.

Sections::

    [experiment]  kind, name, n (list), replicas, seed, lambda, workers
    [degree]      pmf = [[k, p_k], ...]  or  regular = r;  optional eta, tau
    [weight]      family = "...", family parameters, atom = "critical" | float
    [params]      kind-specific knobs (see ``KIND_PARAMS``)
    [check]       kind-specific acceptance tolerances (see ``KIND_CHECKS``)
    [output]      dir

Unknown sections or keys raise :class:`ConfigError`.
"""
from __future__ import annotations

import copy
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..distributions import DegreeModel, WeightModel, positive_law_from_config

KINDS = ("typical_time", "flood", "cluster_tails", "kemperman_check", "explosion",
         "coupling_tv", "isolated_path", "scaling_window")

# defaults double as the list of accepted keys
KIND_PARAMS: dict[str, dict] = {
    "typical_time": {"limit_ell": 0, "limit_samples": 0, "cluster_cap": 10 ** 6, "probe": ""},
    "flood": {"source": 0},
    "cluster_tails": {"walks": 10 ** 6, "cap": 5 * 10 ** 4, "walk_m_min": 100, "walk_m_max": 10 ** 4,
                      "graph_m_min": 10, "graph_m_max": 1000, "points": 20, "chunks": 10},
    "kemperman_check": {"walks": 10 ** 6, "m_max": 20, "cap": 10 ** 3, "chunks": 10},
    "explosion": {"ells": [10, 100], "cluster_cap": 10 ** 6},
    "coupling_tv": {"collision_exponent": 0.4, "tv_exponent": 0.3, "rho": 0.375, "eta": 0.1,
                    "eps": [0.01, 0.05, 0.1]},
    "isolated_path": {"slack": 0.15},
    "scaling_window": {"top": 5},
}

KIND_CHECKS: dict[str, tuple] = {
    "typical_time": ("median_increment_max", "median_strictly_increasing", "ks_max"),
    "flood": ("ratio_floor", "floor_fraction_min", "median_nondecreasing"),
    "cluster_tails": ("slope_target", "walk_slope_tol", "graph_slope_tol"),
    "kemperman_check": ("z_max", "exact_tol"),
    "explosion": ("increment_decreasing",),
    "coupling_tv": ("collision_fraction_max", "tv_max", "corridor_low", "corridor_high",
                    "corridor_fraction_min"),
    "isolated_path": ("fraction_min",),
    "scaling_window": ("ratio_factor_max",),
}

EXPERIMENT_KEYS = {"kind", "name", "n", "replicas", "seed", "lambda", "workers"}
DEGREE_KEYS = {"pmf", "regular", "eta", "tau"}
SECTIONS = {"experiment", "degree", "weight", "params", "check", "output"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    name: str
    n_grid: tuple
    replicas: int
    seed: int
    lam: float
    workers: int
    degree: DegreeModel
    weight: WeightModel
    params: dict
    check: dict
    output_dir: Path
    raw: dict = field(repr=False, compare=False)

    @property
    def config_hash(self) -> str:
        """Digest of everything that affects results (workers and output excluded)."""
        body = {k: v for k, v in self.raw.items() if k != "output"}
        body["experiment"] = {k: v for k, v in body.get("experiment", {}).items() if k != "workers"}
        blob = json.dumps(body, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def with_overrides(self, *, n=None, replicas=None, seed=None, out=None, workers=None):
        raw = copy.deepcopy(self.raw)
        exp = raw.setdefault("experiment", {})
        if n is not None:
            exp["n"] = list(n)
        if replicas is not None:
            exp["replicas"] = replicas
        if seed is not None:
            exp["seed"] = seed
        if workers is not None:
            exp["workers"] = workers
        if out is not None:
            raw.setdefault("output", {})["dir"] = str(out)
        return parse_config(raw)


def _unknown(section: str, keys, allowed) -> None:
    extra = sorted(set(keys) - set(allowed))
    if extra:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(extra)}")


def _degree(sec: dict) -> DegreeModel:
    _unknown("degree", sec, DEGREE_KEYS)
    meta = {k: sec[k] for k in ("eta", "tau") if k in sec}
    if ("pmf" in sec) == ("regular" in sec):
        raise ConfigError("[degree] needs exactly one of pmf or regular")
    if "regular" in sec:
        d = DegreeModel.regular(int(sec["regular"]))
        return DegreeModel(d.pmf, **meta) if meta else d
    return DegreeModel.from_pairs(sec["pmf"], **meta)


def _weight(sec: dict, degree: DegreeModel) -> WeightModel:
    sec = dict(sec)
    family = sec.pop("family", None)
    if family is None:
        raise ConfigError("[weight] needs a family")
    atom = sec.pop("atom", "critical")
    law = positive_law_from_config(family, sec)
    if atom == "critical":
        return WeightModel.critical(degree, law)
    return WeightModel(float(atom), law)


def parse_config(raw: dict) -> ExperimentConfig:
    _unknown("top level", raw, SECTIONS)
    exp = dict(raw.get("experiment", {}))
    _unknown("experiment", exp, EXPERIMENT_KEYS)
    kind = exp.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"experiment kind must be one of {KINDS}, got {kind!r}")
    n_grid = exp.get("n", [0])
    n_grid = tuple(int(x) for x in (n_grid if isinstance(n_grid, list) else [n_grid]))
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ConfigError("n grid must be strictly increasing")
    replicas = int(exp.get("replicas", 1))
    if replicas < 1:
        raise ConfigError("replicas must be >= 1")
    workers = int(exp.get("workers", 1))
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    try:
        degree = _degree(raw.get("degree", {}))
        weight = _weight(raw.get("weight", {"family": "exponential"}), degree)
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"invalid model: {exc}") from exc
    params = dict(KIND_PARAMS[kind])
    given = raw.get("params", {})
    _unknown("params", given, params)
    params.update(given)
    check = dict(raw.get("check", {}))
    _unknown("check", check, KIND_CHECKS[kind])
    out = raw.get("output", {})
    _unknown("output", out, {"dir"})
    name = str(exp.get("name", kind))
    return ExperimentConfig(kind, name, n_grid, replicas, int(exp.get("seed", 0)),
                            float(exp.get("lambda", 0.0)), workers, degree, weight, params, check,
                            Path(out.get("dir", f"results/{name}")), raw)


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(raw)
