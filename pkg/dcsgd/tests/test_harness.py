#!/usr/bin/env python

import json

import numpy as np
import pandas as pd
import pytest

from dcsgd import CompressorSpec, SamplingScheme
from dcsgd.config import ExperimentConfig
from dcsgd.defaults import RESOLVED_CONFIG_FILE, SUMMARY_FILE, METHODS_FILE, BOUNDS_FILE, Z_SCORE_THRESHOLD
from dcsgd.demo import counterexample_comparison, equal_budget_comparison
from dcsgd.exceptions import ConfigurationError, ParameterError
from dcsgd.harness import (
    _bias_z_scores,
    certification_panel,
    certify_compressor,
    certification_report,
    compare_bounds,
    per_iteration_bits,
    run_experiment,
    trace_file_name,
    write_bounds,
    SUMMARY_COLUMNS,
    METHODS_COLUMNS,
)


class TestCertification:
    def test_panel(self):
        panel = certification_panel(10)
        assert panel.shape == (5, 10)
        assert panel[0, 0] == 1 and panel[1, -1] == 1
        assert (panel[2] == 1).all()
        assert (np.abs(panel[3]) >= 1).all()

    def test_rand_k(self):
        row = certify_compressor(CompressorSpec.rand_k(2), 10, trials=10_000)
        assert row["unbiased"]
        assert row["classification"] == "unbiased"
        assert abs(row["delta_hat"] - 5.0) <= 3 * row["delta_se"]
        assert row["samples"] == 10_000

    def test_identity(self):
        row = certify_compressor(CompressorSpec.identity(), 10)
        assert row["max_bias_z"] == 0
        assert row["delta_hat"] == pytest.approx(1.0)
        assert row["contraction_hat"] == pytest.approx(0.0)
        assert row["samples"] == 1
        assert row["classification"] == "unbiased"

    def test_top_k(self):
        row = certify_compressor(CompressorSpec.top_k(2), 10)
        assert not row["unbiased"]
        assert row["contraction_hat"] <= 1 - 2 / 10 + 1e-12
        assert row["classification"] == "biased-contractive"

    @pytest.mark.parametrize(
        "spec,d",
        [
            (CompressorSpec.ternary(), 10),
            (CompressorSpec.ternary(), 20),
            (CompressorSpec.ternary(), 50),
            (CompressorSpec.ternary(), 100),
            (CompressorSpec.nu_rand1(), 50),
            (CompressorSpec.nu_rand1(), 100),
            (CompressorSpec.wangni(2), 50),
            (CompressorSpec.wangni(2), 100),
        ],
        ids=lambda v: v.label if isinstance(v, CompressorSpec) else str(v),
    )
    def test_unbiased_at_default_seed(self, spec, d):
        row = certify_compressor(spec, d, seed=0)
        assert row["max_bias_z"] <= Z_SCORE_THRESHOLD
        assert row["classification"] == "unbiased"

    def test_bias_z_scores(self):
        x = np.array([-4.360388714274667, 0.0, 1.0, 2.0, 2.0, 3.0])
        draws = np.zeros((1000, 6))
        draws[:, 0] = x[0]
        draws[0, 0] = np.nextafter(x[0], 0)
        draws[:5, 2] = 7.0
        draws[::2, 4] = 1.0
        draws[:, 5] = 2.0
        z = _bias_z_scores(draws, x)
        # constant up to rounding
        assert z[0] == 0
        # rarely or never observed
        assert z[1] == 0 and z[2] == 0 and z[3] == 0
        assert Z_SCORE_THRESHOLD < z[4] < np.inf
        assert z[5] == np.inf

    def test_too_few_trials(self):
        with pytest.raises(ParameterError):
            certify_compressor(CompressorSpec.rand_k(2), 10, trials=100)

    def test_report(self):
        specs = [CompressorSpec.identity(), CompressorSpec.top_k(1)]
        report = certification_report(specs, 6)
        assert list(report["compressor"]) == [s.label for s in specs]
        assert list(report["classification"]) == ["unbiased", "biased-contractive"]

    @pytest.mark.slow
    @pytest.mark.parametrize(
        "spec",
        [
            CompressorSpec.rand_k(3),
            CompressorSpec.nu_rand1(),
            CompressorSpec.wangni(3),
            CompressorSpec.ternary(),
            CompressorSpec.induced(CompressorSpec.top_k(2), CompressorSpec.rand_k(2)),
        ],
        ids=lambda s: s.label,
    )
    def test_unbiased_operators(self, spec):
        row = certify_compressor(spec, 10, trials=100_000, seed=1)
        assert row["classification"] == "unbiased"
        assert row["delta_hat"] <= row["delta_nominal"] + 4 * row["delta_se"]


class TestExperiment:
    def test_files(self, quadratic_config, tmp_path):
        result = run_experiment(quadratic_config, parallel=False)
        out = tmp_path / "results"
        names = {f.name for f in result.files}
        assert {RESOLVED_CONFIG_FILE, SUMMARY_FILE, METHODS_FILE} <= names
        for method in ["rand_k", "rand_k-pp", "top_k-ef"]:
            for seed in [0, 1]:
                assert (out / trace_file_name(method, seed)).exists()
        summary = pd.read_csv(out / SUMMARY_FILE)
        assert list(summary.columns) == SUMMARY_COLUMNS
        assert sorted(summary["k"].unique()) == [0, 12, 25, 38, 50]
        methods = pd.read_csv(out / METHODS_FILE)
        assert list(methods.columns) == METHODS_COLUMNS
        assert list(methods["n_runs"]) == [2, 2, 2]
        assert np.isnan(methods.set_index("method").loc["top_k-ef", "theorem_bound"])

    def test_resolved_config_round_trip(self, quadratic_config, tmp_path):
        run_experiment(quadratic_config, parallel=False)
        with open(tmp_path / "results" / RESOLVED_CONFIG_FILE) as handle:
            doc = json.load(handle)
        assert doc["methods"][1]["sampling"]["family"] == "b_nice"
        assert doc["methods"][0]["schedule"] == {"kind": "two_phase"}
        again = ExperimentConfig.from_dict(doc)
        assert again.to_dict() == doc

    def test_no_seeds(self, tmp_path):
        config = ExperimentConfig.from_dict(
            {
                "problem": {"kind": "counterexample"},
                "compressor": {"kind": "top_k", "k": 1},
                "schedule": {"kind": "constant", "eta": 0.01},
                "seeds": [],
                "output_dir": str(tmp_path / "empty"),
            }
        )
        result = run_experiment(config)
        assert result.records == []
        for name in [SUMMARY_FILE, METHODS_FILE]:
            lines = (tmp_path / "empty" / name).read_text().splitlines()
            assert len(lines) == 1

    def test_reruns_are_identical(self, quadratic_config, tmp_path):
        run_experiment(quadratic_config, parallel=False)
        out = tmp_path / "results"
        first = {p.name: p.read_bytes() for p in out.glob("*.csv")}
        run_experiment(quadratic_config, parallel=True)
        second = {p.name: p.read_bytes() for p in out.glob("*.csv")}
        assert first == second

    def test_counterexample(self, counterexample_config):
        result = run_experiment(counterexample_config, parallel=False)
        methods = result.methods.set_index("method")
        assert methods.loc["top1", "diverged"] == 2
        assert methods.loc["nu_rand1", "diverged"] == 0
        start = counterexample_config.instance.f_gap(counterexample_config.instance.x0)
        for record in result.records:
            if record.label == "nu_rand1":
                assert record.final_gap < 1e-3 * start
        assert all(name != "top1" for name, _ in result.unexpected_divergences)
        assert (methods["bits_per_iteration"] == 102).all()

    def test_unbiased_beats_error_feedback(self, tmp_path):
        config = ExperimentConfig.from_dict(counterexample_comparison(output_dir=tmp_path / "fig"))
        assert config.T == 2000 and len(config.seeds) == 5
        result = run_experiment(config, parallel=False)
        methods = result.methods.set_index("method")
        assert methods.loc["top1", "diverged"] == 5
        assert methods.loc["nu_rand1", "converged_runs"] == 5
        assert methods.loc["top1-ef", "converged_runs"] == 5
        assert methods.loc["nu_rand1", "iterations_to_target_mean"] < methods.loc["top1-ef", "iterations_to_target_mean"]
        assert methods.loc["nu_rand1", "bits_per_iteration"] == methods.loc["top1-ef", "bits_per_iteration"]
        assert result.unexpected_divergences == []

    def test_equal_budget(self, tmp_path):
        config = ExperimentConfig.from_dict(equal_budget_comparison(T=20, seeds=[0]))
        budgets = [per_iteration_bits(m, config) for m in config.methods]
        assert budgets[0] == budgets[1]
        result = run_experiment(config, output_dir=tmp_path / "budget", parallel=False)
        bits = result.methods["bits_per_iteration"].values
        assert bits.max() <= 2 * bits.min()


class TestBounds:
    @pytest.fixture
    def config(self, tmp_path):
        return ExperimentConfig.from_dict(
            {
                "problem": {"kind": "random_quadratic", "n": 4, "d": 8, "mu": 1.0, "L": 10.0, "sigma2": 0.5},
                "methods": [
                    {"name": "rand2", "compressor": {"kind": "rand_k", "k": 2}},
                    {"name": "exact", "compressor": {"kind": "identity"}},
                    {
                        "name": "rand2-full",
                        "mode": "pp",
                        "compressor": {"kind": "rand_k", "k": 2},
                        "sampling": {"family": "full"},
                    },
                ],
                "T": 500,
                "output_dir": str(tmp_path / "bounds"),
            }
        )

    def test_delta_n(self, config):
        table = compare_bounds(config).set_index("method")
        assert list(table.loc["rand2", "n"]) == [1, 2, 4, 8]
        assert np.allclose(table.loc["rand2", "delta_n"], [4.0, 2.5, 1.75, 1.375])
        assert (table.loc["rand2", "delta_ef"] == 4.0).all()
        assert np.allclose(table.loc["exact", "delta_n"], 1.0)
        assert table.loc["exact", "bound_pp"].isna().all()

    def test_bound_decreases_with_nodes(self, config):
        bounds = compare_bounds(config).set_index("method").loc["rand2", "bound_full"].values
        assert (np.diff(bounds) < 0).all()

    def test_full_participation_column(self, config):
        table = compare_bounds(config).set_index("method").loc["rand2-full"]
        assert np.allclose(table["a_s"], 0.0)
        assert np.allclose(table["bound_pp"], table["bound_full"])

    def test_non_uniform_independent(self, config, caplog):
        config.methods[2].sampling = SamplingScheme.independent([0.2, 0.4, 0.6, 0.8])
        table = compare_bounds(config).set_index("method").loc["rand2-full"].set_index("n")
        assert np.isfinite(table.loc[4, "bound_pp"])
        assert table.drop(index=4)["bound_pp"].isna().all()
        assert "cannot be resized" in caplog.text

    def test_write(self, config, tmp_path):
        path = write_bounds(config)
        assert path == tmp_path / "bounds" / BOUNDS_FILE
        assert len(pd.read_csv(path)) == 12

    def test_needs_iterations(self, config):
        config.T = 0
        with pytest.raises(ConfigurationError):
            compare_bounds(config)


class TestConfiguration:
    def test_collects_every_problem(self):
        with pytest.raises(ConfigurationError) as info:
            ExperimentConfig.from_dict(
                {
                    "problem": {"kind": "counterexample"},
                    "methods": [
                        {"name": "a", "mode": "pp", "compressor": {"kind": "top_k", "k": 1}},
                        {"name": "b", "compressor": {"kind": "top_k", "k": 7}},
                        {"name": "c", "compressor": {"kind": "rand_k", "k": 1}, "schedule": {"kind": "cosine"}},
                    ],
                    "T": -1,
                    "colour": "blue",
                }
            )
        assert len(info.value.problems) >= 5

    def test_single_method(self):
        config = ExperimentConfig.from_dict(
            {
                "problem": {"kind": "counterexample"},
                "mode": "ef",
                "compressor": {"kind": "top_k", "k": 1},
                "schedule": {"kind": "constant", "eta": 0.01},
                "T": 50,
            }
        )
        assert len(config.methods) == 1
        assert config.methods[0].name == "top_k(1)-ef"
        assert config.schedule_for(config.methods[0]).stepsize(3) == 0.01

    def test_duplicated_names(self):
        method = {"name": "same", "compressor": {"kind": "identity"}}
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_dict({"problem": {"kind": "counterexample"}, "methods": [method, method]})

    def test_improper_sampling(self):
        with pytest.raises(ConfigurationError) as info:
            ExperimentConfig.from_dict(
                {
                    "problem": {"kind": "counterexample"},
                    "mode": "pp",
                    "compressor": {"kind": "nu_rand1"},
                    "sampling": {"family": "explicit", "table": [[3, 1.0]]},
                }
            )
        assert any("never sampled" in problem for problem in info.value.problems)

    def test_problem_defaults_resolved(self, tmp_path):
        config = ExperimentConfig.from_dict(
            {
                "problem": {"kind": "random_quadratic", "n": 2, "d": 3, "mu": 1.0, "L": 4.0},
                "compressor": {"kind": "identity"},
                "schedule": {"kind": "constant", "eta": 0.1},
                "output_dir": str(tmp_path / "resolved"),
            }
        )
        assert config.to_dict()["problem"] == {
            "kind": "random_quadratic",
            "n": 2,
            "d": 3,
            "mu": 1.0,
            "L": 4.0,
            "heterogeneity": 0.0,
            "sigma2": 0.0,
            "seed": 0,
        }
        run_experiment(config, parallel=False)
        again = ExperimentConfig.from_json(tmp_path / "resolved" / RESOLVED_CONFIG_FILE)
        assert again.problem == config.problem
        for u, v in zip(again.instance.nodes, config.instance.nodes):
            assert np.array_equal(u.A, v.A) and np.array_equal(u.b, v.b)
        counterexample = ExperimentConfig.from_dict({"problem": {"kind": "counterexample"}})
        assert counterexample.to_dict()["problem"] == {"kind": "counterexample", "t": 1.0}

    def test_two_phase_schedule(self, quadratic_config):
        method = quadratic_config.methods[0]
        schedule = quadratic_config.schedule_for(method)
        c = quadratic_config.instance.constants
        assert schedule.a == c.mu
        assert schedule.d == pytest.approx(2 * (1 + (5 - 1) / 4) * c.L)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_json(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            ExperimentConfig.from_json(tmp_path / "missing.json")
