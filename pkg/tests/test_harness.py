import json
import math

import numpy as np
import pytest

from entropy_cpd.categorical import CategoricalDistribution
from entropy_cpd.exceptions import ConfigError
from entropy_cpd.harness import (
    ExperimentConfig,
    ResultTable,
    run_experiment,
    sidecar_path,
    simulate_counts,
    trajectory_stream,
)


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig("power_vs_psi")
        assert len(cfg.psi_grid) == 17 and cfg.psi_grid[8] == 0.0
        assert cfg.trials == 10_000 and cfg.k == 4 and cfg.n == 100

    @pytest.mark.parametrize("changes", [
        {"experiment": "nope"}, {"trials": 0}, {"trials": 2.5}, {"seed": -1}, {"seed": 2**64},
        {"alpha": 1.0}, {"k": 1}, {"levels": (1.2,)},
    ])
    def test_invalid(self, changes):
        data = {"experiment": "quantile_vs_n", **changes}
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(data)

    def test_equal_mean_constraints(self):
        with pytest.raises(ConfigError):
            ExperimentConfig("equal_mean_power", k=5)
        with pytest.raises(ConfigError):
            ExperimentConfig("equal_mean_power", p1_grid=(0.5,))

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"experiment": "cdf_envelope", "threads": 4})
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"k": 3})

    def test_json_round_trip(self, tmp_path):
        cfg = ExperimentConfig("quantile_vs_k", k_grid=[2, 3], trials=10, seed=7)
        path = tmp_path / "c.json"
        path.write_text(json.dumps(cfg.to_dict()))
        assert ExperimentConfig.from_json(path) == cfg
        with pytest.raises(ConfigError):
            ExperimentConfig.from_json(tmp_path / "missing.json")


class TestStreams:
    def test_reproducible(self):
        a = trajectory_stream(5, "x", 3).random(4)
        np.testing.assert_array_equal(a, trajectory_stream(5, "x", 3).random(4))

    def test_distinct(self):
        base = trajectory_stream(5, "x", 3).random(4)
        for other in (trajectory_stream(6, "x", 3), trajectory_stream(5, "y", 3), trajectory_stream(5, "x", 4)):
            assert not np.array_equal(base, other.random(4))

    def test_thread_count_irrelevant(self):
        draws = [(CategoricalDistribution.uniform(3), 50), (CategoricalDistribution([0.2, 0.3, 0.5]), 40)]
        a = simulate_counts(1, "t", 301, draws, threads=1)
        b = simulate_counts(1, "t", 301, draws, threads=4)
        np.testing.assert_array_equal(a, b)
        assert a.shape == (301, 2, 3)
        assert np.all(a[:, 0].sum(axis=1) == 50) and np.all(a[:, 1].sum(axis=1) == 40)

    def test_uncorrelated_trajectories(self):
        c = simulate_counts(2, "corr", 4000, [(CategoricalDistribution.uniform(2), 100)])[:, 0, 0]
        r = np.corrcoef(c[:-1], c[1:])[0, 1]
        assert abs(r) < 4 / math.sqrt(4000)


class TestExperiments:
    def test_cdf_columns(self):
        cfg = ExperimentConfig("cdf_envelope", k=2, n=1000, trials=200, grid_points=10)
        t = run_experiment(cfg)
        assert list(t.columns) == ["x", "empirical_cdf", "asymptotic_cdf", "lower", "upper", "se"]
        assert len(t) == 10
        assert np.all(np.diff(t["empirical_cdf"]) >= 0)
        assert np.all(t["lower"] <= t["upper"])

    def test_quantile_columns(self):
        cfg = ExperimentConfig("quantile_vs_k", k_grid=(2, 3, 10), trials=200, n=100,
                               methods=("asymptotic2", "mardia", "twosample3"))
        t = run_experiment(cfg)
        assert len(t) == 6
        assert {"empirical_one", "empirical_two", "mardia", "twosample3:unit"} <= set(t.columns)
        k = np.asarray(t["k"])
        assert np.all(np.isnan(t["twosample3:unit"][k == 10]))
        assert np.all(np.isfinite(t["twosample3:unit"][k <= 8]))
        assert any("k > 8" in note for note in t.notes)
        assert np.isnan(t["mardia"][k == 2]).all()

    def test_power_thread_determinism(self, tmp_path):
        cfg = ExperimentConfig("power_vs_psi", psi_grid=(0.0, 0.5), trials=500, seed=3,
                               methods=("asymptotic2", "twosample3:rp", "aic", "t", "f"))
        a, b = run_experiment(cfg, threads=1), run_experiment(cfg, threads=4)
        assert a.to_csv() == b.to_csv()
        csv_path, side = a.write(tmp_path / "p.csv")
        meta = json.loads(side.read_text())
        assert meta["config"]["seed"] == 3 and meta["columns"][0] == "psi"
        assert csv_path.read_text().splitlines()[0].startswith("psi,asymptotic2,asymptotic2_se")

    def test_power_increases(self):
        cfg = ExperimentConfig("power_vs_psi", psi_grid=(0.0, 0.8), trials=1000, methods=("asymptotic2",))
        t = run_experiment(cfg)
        assert t["asymptotic2"][1] > 0.9 > 0.1 > t["asymptotic2"][0]

    def test_bad_method(self):
        with pytest.raises(ConfigError):
            run_experiment(ExperimentConfig("power_vs_psi", trials=10, methods=("bogus",)))

    def test_sidecar_path(self, tmp_path):
        assert sidecar_path(tmp_path / "a.csv").name == "a.json"
        assert sidecar_path(tmp_path / "a.out").name == "a.out.json"

    def test_table_csv_formatting(self):
        cfg = ExperimentConfig("cdf_envelope")
        t = ResultTable({"a": np.array([0.1, math.nan]), "b": np.array([1, 2])}, cfg)
        assert t.to_csv() == "a,b\n0.1,1\n,2\n"
