import time

import numpy as np
import pytest

from conftest import DEFAULT_BETA0, fit_config
from gs4cox import gibbs_sweep
from mh_hessian import run_mh
from partial_lik import mple
from survival_data import build_pair_contrasts
from synth_gen import SynthConfig, generate


pytestmark = [pytest.mark.slow, pytest.mark.statistical]

REPEATS = 3


def median_seconds(fn, calls: int) -> float:
    '''median over REPEATS of the mean time per call'''
    runs = []
    for _ in range(REPEATS):
        t0 = time.perf_counter()
        for _ in range(calls):
            fn()
        runs.append((time.perf_counter() - t0) / calls)
    return float(np.median(runs))


def sweep_seconds(n: int):
    data = generate(SynthConfig(n=n, beta0=DEFAULT_BETA0, seed=70))
    pairs = build_pair_contrasts(data)
    cfg = fit_config(data.P)
    rng = np.random.default_rng(0)
    beta = mple(data)
    gibbs_sweep(pairs, beta, cfg, rng)
    return median_seconds(lambda: gibbs_sweep(pairs, beta, cfg, rng), calls=20), pairs.Q


def mh_step_seconds(n: int) -> float:
    data = generate(SynthConfig(n=n, beta0=DEFAULT_BETA0, seed=71))
    beta_hat = mple(data)
    runs = [
        run_mh(data, fit_config(data.P, iterations=300, burn_in=0, seed=s), beta_hat=beta_hat).chain.wall_seconds / 300
        for s in range(REPEATS)
    ]
    return float(np.median(runs))


def test_gibbs_sweep_grows_with_the_pair_count() -> None:
    small, q_small = sweep_seconds(400)
    large, q_large = sweep_seconds(800)
    assert large / small <= 1.3 * (q_large / q_small)


def test_mh_step_grows_linearly() -> None:
    small = mh_step_seconds(2000)
    large = mh_step_seconds(4000)
    assert large / small <= 1.3 * 2.0
