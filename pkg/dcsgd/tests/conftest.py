import numpy as np
import pytest

from dcsgd.config import ExperimentConfig
from dcsgd.demo import counterexample_comparison, random_quadratic_comparison
from dcsgd.problems import make_counterexample, make_random_quadratic


@pytest.fixture
def counterexample():
    return make_counterexample(1.0)


@pytest.fixture
def quadratic():
    return make_random_quadratic(n=4, d=5, mu=1.0, L=10.0, seed=0)


@pytest.fixture
def heterogeneous_quadratic():
    return make_random_quadratic(n=3, d=4, mu=0.5, L=5.0, heterogeneity=1.0, sigma2=0.1, seed=1)


@pytest.fixture
def vectors():
    rng = np.random.default_rng(42)
    return [
        np.array([1.0, -3.0, 2.0, 0.5]),
        np.array([0.0, 2.0, 0.0, -1.0]),
        rng.normal(size=4),
        np.array([1.0, 1.0, 1.0, 1.0]),
    ]


@pytest.fixture
def counterexample_config(tmp_path):
    return ExperimentConfig.from_dict(
        counterexample_comparison(T=600, seeds=[0, 1], output_dir=tmp_path / "results")
    )


@pytest.fixture
def quadratic_config(tmp_path):
    return ExperimentConfig.from_dict(
        random_quadratic_comparison(T=50, seeds=[0, 1], output_dir=tmp_path / "results")
    )
