import csv
import json
import math

import numpy as np
import pytest
from scipy import stats as sps

from critfpp.harness import ConfigError, load_config, parse_config, run_experiment
from critfpp.harness.cli import EXIT_CHECK_FAILED, main
from critfpp.harness.experiments import read_rows, regular3_exact, summarize_rows, task_rng
from critfpp.harness.probes import (
    ZERO_ONE_CONSTANT,
    conjecture_probe_loglog_power,
    conjecture_probe_zero_one,
    loglog_comparator,
)
from critfpp.harness.stats import (
    EstimationError,
    compare_to_explosion_limit,
    empirical_pmf,
    fit_tail_slope,
    hill_estimator,
    ks_two_sample,
    log_grid,
    summarize,
    survival_from_histogram,
    survival_points,
    tv_distance,
)

from conftest import CONFIGS


def small_config(kind="typical_time", **over):
    raw = {
        "experiment": {"kind": kind, "name": f"small_{kind}", "n": [50, 100], "replicas": 3, "seed": 5},
        "degree": {"regular": 3},
        "weight": {"family": "power_near_zero", "a": 1.0},
    }
    for key, value in over.items():
        raw[key] = value
    return raw


def write_toml(path, text):
    path.write_text(text)
    return path


FLOOD_TOML = """
[experiment]
kind = "flood"
name = "cli_flood"
n = [100, 200]
replicas = 3
seed = 7

[degree]
pmf = [[2, 0.5], [4, 0.5]]

[weight]
family = "exponential"
rate = 1.0

[check]
ratio_floor = {floor}
floor_fraction_min = 0.5
"""


class TestConfig:
    def test_all_shipped_configs_parse(self):
        paths = sorted(CONFIGS.glob("*.toml"))
        assert len(paths) >= 10
        for p in paths:
            cfg = load_config(p)
            assert cfg.replicas >= 1
            assert list(cfg.n_grid) == sorted(set(cfg.n_grid))

    def test_defaults(self):
        cfg = parse_config(small_config())
        assert cfg.weight.atom_at_zero == 0.5
        assert cfg.lam == 0.0
        assert cfg.workers == 1
        assert cfg.params["limit_ell"] == 0

    @pytest.mark.parametrize("mutate", [
        lambda r: r.update(extra={}),
        lambda r: r["experiment"].update(colour="red"),
        lambda r: r["degree"].update(mean=3),
        lambda r: r.update(params={"bogus": 1}),
        lambda r: r.update(check={"bogus": 1}),
        lambda r: r["weight"].update(b=2.0),
    ])
    def test_unknown_keys_rejected(self, mutate):
        raw = small_config()
        mutate(raw)
        with pytest.raises(ConfigError):
            parse_config(raw)

    @pytest.mark.parametrize("mutate", [
        lambda r: r["experiment"].update(n=[100, 50]),
        lambda r: r["experiment"].update(replicas=0),
        lambda r: r["experiment"].update(kind="nonsense"),
        lambda r: r.update(degree={"pmf": [[1, 1.0]]}),
        lambda r: r.update(degree={"regular": 3, "pmf": [[3, 1.0]]}),
        lambda r: r.update(weight={"family": "power_near_zero", "a": -1.0}),
    ])
    def test_invalid_values_rejected(self, mutate):
        raw = small_config()
        mutate(raw)
        with pytest.raises(ConfigError):
            parse_config(raw)

    def test_explicit_atom(self):
        raw = small_config()
        raw["weight"]["atom"] = 0.25
        assert parse_config(raw).weight.atom_at_zero == 0.25

    def test_hash_ignores_workers_and_output(self):
        a = parse_config(small_config())
        b = a.with_overrides(workers=4, out="elsewhere")
        c = a.with_overrides(seed=6)
        assert a.config_hash == b.config_hash
        assert a.config_hash != c.config_hash

    def test_overrides(self):
        cfg = parse_config(small_config()).with_overrides(n=[20], replicas=2)
        assert cfg.n_grid == (20,) and cfg.replicas == 2

    def test_bad_toml(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write_toml(tmp_path / "x.toml", "[experiment\nkind="))


class TestStats:
    def test_ks_identical(self):
        x = np.random.default_rng(0).random(500)
        assert ks_two_sample(x, x.copy()) == 0.0
        assert compare_to_explosion_limit(x, x) == 0.0

    def test_ks_shifted(self):
        x = np.random.default_rng(0).random(500)
        assert ks_two_sample(x, x + 10.0) == 1.0

    def test_ks_matches_scipy(self, rng):
        a, b = rng.normal(size=300), rng.normal(0.2, size=400)
        assert ks_two_sample(a, b) == pytest.approx(sps.ks_2samp(a, b).statistic, abs=1e-12)

    def test_ks_empty(self):
        with pytest.raises(EstimationError):
            ks_two_sample([], [1.0])

    def test_slope_exact(self):
        m = np.arange(1, 21, dtype=float)
        assert fit_tail_slope(m, m ** -0.5).slope == pytest.approx(-0.5, abs=1e-12)
        assert fit_tail_slope(m, m ** -1.5).slope == pytest.approx(-1.5, abs=1e-12)

    def test_slope_pareto(self, rng):
        x = rng.pareto(0.5, 10 ** 6) + 1.0
        m = log_grid(10, 10 ** 4, 20)
        fit = fit_tail_slope(m, survival_points(x, m), rng)
        assert abs(fit.slope + 0.5) < 0.05
        assert fit.ci_low <= fit.slope <= fit.ci_high

    def test_slope_needs_points(self):
        with pytest.raises(EstimationError):
            fit_tail_slope([1, 2, 3, 4, 5], [1.0, 0.5, 0.0, 0.0, 0.0])

    def test_hill(self, rng):
        x = rng.pareto(0.5, 10 ** 5) + 1.0
        assert hill_estimator(x, 2000) == pytest.approx(0.5, abs=0.05)

    def test_tv_examples(self):
        assert tv_distance([0.5, 0.5], [0.5, 0.5]) == 0.0
        assert tv_distance([1.0, 0.0], [0.0, 1.0]) == 1.0
        assert tv_distance([0.5, 0.5], [0.75, 0.25]) == 0.25
        assert tv_distance([1.0], [0.0, 0.0, 1.0]) == 1.0

    def test_empirical_pmf(self):
        np.testing.assert_allclose(empirical_pmf([0, 2, 2, 2], size=4), [0.25, 0, 0.75, 0])

    def test_survival_helpers(self):
        assert survival_points([1, 2, 3, 4], [1, 3, 5]).tolist() == [1.0, 0.5, 0.0]
        s = survival_from_histogram([3, 1, 2], [1, 2, 1], [1, 2, 3, 4])
        np.testing.assert_allclose(s, [1.0, 0.5, 0.25, 0.0])

    def test_log_grid(self):
        g = log_grid(10, 1000, 5)
        assert g[0] == 10 and g[-1] == 1000 and np.all(np.diff(g) > 0)

    def test_summarize_monotone_quantiles(self, rng):
        s = summarize(rng.exponential(size=1000))
        assert s["q10"] <= s["q25"] <= s["median"] <= s["q75"] <= s["q90"]
        assert s["count"] == 1000

    def test_summarize_with_infinity(self):
        s = summarize([1.0, 2.0, math.inf])
        assert s["n_infinite"] == 1
        assert s["median"] == 2.0
        assert summarize([])["count"] == 0


class TestProbes:
    def _cfg(self, family, **params):
        raw = small_config(weight={"family": family, **params})
        raw["experiment"]["n"] = [1000]
        return parse_config(raw)

    def test_zero_one(self):
        cfg = self._cfg("point_mass", c=1.0)
        rows = [{"metric": "T", "n": 1000, "value": float(v)} for v in (2, 3, 3, 4)]
        out = conjecture_probe_zero_one(cfg, rows)
        assert "exploratory" in out["label"]
        assert out["comparator"] == pytest.approx(2.0 / math.log(2.0)) == ZERO_ONE_CONSTANT
        ratios = out["per_n"]["1000"]["ratios"]
        assert len(ratios) == 4 and all(r > 0 for r in ratios)

    def test_zero_one_needs_point_mass(self):
        with pytest.raises(ValueError):
            conjecture_probe_zero_one(self._cfg("exponential", rate=1.0), [])

    def test_loglog_comparator_increasing(self):
        cfg = self._cfg("double_exp", gamma=2.0)
        values = [loglog_comparator(cfg, n) for n in (10 ** 2, 10 ** 5, 10 ** 30, 10 ** 300)]
        ls = [v[0] for v in values]
        sums = [v[1] for v in values]
        assert all(s > 0 for s in sums)
        assert ls == sorted(ls) and ls[-1] > ls[0]
        assert np.all(np.diff(sums) > 0)

    def test_loglog_probe(self):
        cfg = self._cfg("double_exp", gamma=2.0)
        cfg = cfg.with_overrides(n=[10 ** 5])
        rows = [{"metric": "T", "n": 10 ** 5, "value": 1.5}] * 3
        out = conjecture_probe_loglog_power(cfg, rows)
        assert out["exponent"] == pytest.approx(0.5)
        assert out["per_n"][str(10 ** 5)]["comparator"] > 0
        with pytest.raises(ValueError):
            conjecture_probe_loglog_power(self._cfg("double_exp", gamma=0.5), rows)


class TestExperiments:
    def test_one_row_per_metric(self, tmp_path):
        raw = small_config(output={"dir": str(tmp_path)})
        raw["experiment"].update(n=[10], replicas=1)
        res = run_experiment(parse_config(raw))
        metrics = [r["metric"] for r in res.rows]
        assert sorted(metrics) == ["H", "T"]
        for r in res.rows:
            assert (r["n"], r["replica"], r["seed"]) == (10, 0, 5)

    def test_outputs_and_recompute(self, tmp_path):
        raw = small_config(output={"dir": str(tmp_path)}, params={"limit_ell": 10, "limit_samples": 4})
        cfg = parse_config(raw)
        res = run_experiment(cfg)
        summary = json.loads(res.summary_path.read_text())
        for key in ("experiment", "config_hash", "per_n", "verdicts", "seed", "kind"):
            assert key in summary
        with open(res.raw_path, newline="") as fh:
            header = next(csv.reader(fh))
        assert header == ["experiment", "n", "replica", "seed", "metric", "key", "value"]
        again = summarize_rows(cfg, read_rows(res.raw_path))
        assert json.dumps(again, sort_keys=True, default=str) == json.dumps(summary, sort_keys=True, default=str)

    def test_deterministic_across_workers(self, tmp_path):
        cfg = parse_config(small_config())
        a = run_experiment(cfg.with_overrides(out=tmp_path / "a", workers=1))
        b = run_experiment(cfg.with_overrides(out=tmp_path / "b", workers=2))
        assert a.raw_path.read_bytes() == b.raw_path.read_bytes()

    def test_task_rng_streams_differ(self):
        a = task_rng(1, 0, 10, 0).random()
        assert a == task_rng(1, 0, 10, 0).random()
        assert a != task_rng(1, 1, 10, 0).random()
        assert a != task_rng(1, 0, 10, 1).random()

    def test_regular3_exact(self):
        assert regular3_exact(1) == 0.25
        assert regular3_exact(3) == pytest.approx(5 / 64)

    @pytest.mark.parametrize("kind,extra", [
        ("flood", {}),
        ("isolated_path", {}),
        ("scaling_window", {}),
        ("kemperman_check", {"params": {"walks": 2000, "m_max": 5, "chunks": 2}}),
        ("explosion", {"params": {"ells": [5, 10], "cluster_cap": 1000}}),
        ("coupling_tv", {}),
        ("cluster_tails", {"params": {"walks": 2000, "cap": 500, "walk_m_min": 2, "walk_m_max": 50,
                                      "graph_m_min": 1, "graph_m_max": 20, "points": 8, "chunks": 2}}),
    ])
    def test_every_kind_runs(self, tmp_path, kind, extra):
        raw = small_config(kind, output={"dir": str(tmp_path)}, **extra)
        if kind in ("isolated_path", "flood"):
            raw["degree"] = {"pmf": [[2, 0.5], [4, 0.5]]}
        if kind == "coupling_tv":
            raw["experiment"]["n"] = [2000]
        res = run_experiment(parse_config(raw))
        assert res.summary["kind"] == kind
        assert res.summary["failures"] == 0
        assert res.rows


class TestCli:
    def test_experiment_check_pass_and_fail(self, tmp_path, capsys):
        ok = write_toml(tmp_path / "ok.toml", FLOOD_TOML.format(floor=0.0))
        bad = write_toml(tmp_path / "bad.toml", FLOOD_TOML.format(floor=1e9))
        assert main(["experiment", "--config", str(ok), "--out", str(tmp_path / "o1"), "--check"]) == 0
        assert main(["experiment", "--config", str(bad), "--out", str(tmp_path / "o2"), "--check"]) \
            == EXIT_CHECK_FAILED
        assert main(["experiment", "--config", str(bad), "--out", str(tmp_path / "o3")]) == 0
        assert (tmp_path / "o2" / "summary.json").exists()
        assert "FAIL" in capsys.readouterr().out

    def test_classify(self, capsys):
        assert main(["classify", "--config", str(CONFIGS / "ac4_typical_power.toml")]) == 0
        assert json.loads(capsys.readouterr().out)["verdict"] == "Explosive"

    def test_bp(self, tmp_path):
        out = tmp_path / "bp.csv"
        cfg = str(CONFIGS / "ac4_typical_power.toml")
        assert main(["bp", "--config", cfg, "--replicas", "2", "--max-theta", "5", "--prune",
                     "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "replica,ell,theta" and len(lines) == 11
        assert main(["bp", "--config", cfg]) == 1

    def test_gen_fpp_flood_percolate(self, tmp_path):
        cfg = write_toml(tmp_path / "f.toml", FLOOD_TOML.format(floor=0.0))
        g = tmp_path / "g.txt"
        assert main(["gen", "--config", str(cfg), "--n", "50", "--out", str(g)]) == 0
        assert g.read_text().splitlines()[0].split()[0] == "50"
        assert main(["fpp", "--config", str(cfg), "--replicas", "2", "--out", str(tmp_path / "t.csv")]) == 0
        assert len((tmp_path / "t.csv").read_text().splitlines()) == 1 + 2 * 2
        assert main(["flood", "--config", str(cfg), "--out", str(tmp_path / "fl.csv")]) == 0
        assert main(["percolate", "--config", str(cfg), "--seed", "3", "--out", str(tmp_path / "c.csv")]) == 0
        assert (tmp_path / "c.csv").read_text().startswith("replica,n,lambda,rank")

    def test_config_error_exit(self, tmp_path, capsys):
        bad = write_toml(tmp_path / "bad.toml", "[experiment]\nkind = 'flood'\nunknown = 1\n")
        assert main(["flood", "--config", str(bad)]) == 1
        assert "config error" in capsys.readouterr().err
