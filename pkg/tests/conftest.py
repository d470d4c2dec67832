import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "src"))

from chain import FitConfig, PriorSpec  # noqa: E402
from data_loader import load_csv  # noqa: E402
from survival_data import SurvivalDataset  # noqa: E402
from synth_gen import SynthConfig, generate  # noqa: E402


DEFAULT_BETA0 = (1.0, 0.5, -1.5, 3.0)


def make_dataset(times, events, covariates) -> SurvivalDataset:
    return SurvivalDataset(
        times=np.asarray(times, dtype=float),
        events=np.asarray(events),
        covariates=np.asarray(covariates, dtype=float),
        column_names=(),
    )


def random_dataset(rng: np.random.Generator, n: int, P: int, ties: bool = False, censor: float = 0.3) -> SurvivalDataset:
    X = rng.standard_normal((n, P))
    times = rng.exponential(1.0, size=n)
    if ties:
        times = np.round(times * 4.0) / 4.0
    events = (rng.random(n) > censor).astype(int)
    #at least one event so pairs exist
    events[int(np.argmin(times))] = 1
    return make_dataset(times, events, X)


def fit_config(P: int, iterations: int = 1000, burn_in: int = 500, w: float = 1.0, seed: int = 0,
               variance: float = 100.0, threads: int = 0) -> FitConfig:
    return FitConfig(
        prior=PriorSpec.isotropic(P, variance=variance),
        iterations=iterations,
        burn_in=burn_in,
        learning_rate=w,
        seed=seed,
        threads=threads,
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture
def two_subjects() -> SurvivalDataset:
    '''scalar x = (1.5, -0.5), both events, T1 < T2'''
    return make_dataset([1.0, 2.0], [1, 1], [[1.5], [-0.5]])


@pytest.fixture(scope="session")
def default_scenario() -> SurvivalDataset:
    return generate(SynthConfig(n=300, beta0=DEFAULT_BETA0, seed=11))


@pytest.fixture(scope="session")
def lung_csv(tmp_path_factory) -> str:
    datasets = pytest.importorskip("lifelines.datasets")
    frame = datasets.load_lung()
    path = tmp_path_factory.mktemp("lung") / "lung.csv"
    frame.to_csv(path, index=False, na_rep="NA")
    return str(path)


@pytest.fixture(scope="session")
def lung(lung_csv) -> SurvivalDataset:
    return load_csv(lung_csv, status_event_code=2)
