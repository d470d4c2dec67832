import numpy as np
import pytest

import gs4cox
from chain import Chain, CorrectionError, FitConfig, PriorSpec
from conftest import DEFAULT_BETA0, fit_config, make_dataset
from model_constants import TieMethod
from partial_lik import mple
from survival_data import PairContrasts, build_pair_contrasts
from synth_gen import SynthConfig, generate


LUNG_GS4COX = (0.01, -0.55, 0.74, 0.02, -0.01, 0.00, -0.01)


@pytest.fixture(scope="module")
def small_pairs() -> PairContrasts:
    data = make_dataset([1.0, 2.0, 2.5, 4.0], [1, 1, 0, 1], [[0.5, -1.0], [1.2, 0.3], [-0.7, 0.8], [0.1, 2.0]])
    return build_pair_contrasts(data)


@pytest.fixture(scope="module")
def default_fit(default_scenario):
    return gs4cox.fit(default_scenario, fit_config(4, seed=3))


def test_gaussian_update_matches_dense_solve(small_pairs) -> None:
    omega = np.linspace(0.1, 0.6, small_pairs.Q)
    prior = PriorSpec(mean=np.array([0.5, -0.2]), covariance=np.array([[2.0, 0.3], [0.3, 1.0]]))
    cfg = FitConfig(prior=prior, iterations=10, burn_in=0, learning_rate=0.7)
    update = gs4cox.gaussian_update(small_pairs, omega, cfg)

    D = small_pairs.contrasts
    precision = np.linalg.inv(prior.covariance) + 0.7 * sum(o * np.outer(d, d) for o, d in zip(omega, D))
    cov = np.linalg.inv(precision)
    mean = cov @ (np.linalg.inv(prior.covariance) @ prior.mean + 0.35 * D.sum(axis=0))
    np.testing.assert_allclose(update.mean, mean, rtol=1e-10)
    np.testing.assert_allclose(update.covariance, cov, rtol=1e-10)


def test_wrong_omega_length(small_pairs) -> None:
    with pytest.raises(ValueError):
        gs4cox.gaussian_update(small_pairs, np.ones(small_pairs.Q + 1), fit_config(2))


def test_draw_has_the_update_covariance(small_pairs) -> None:
    update = gs4cox.gaussian_update(small_pairs, np.full(small_pairs.Q, 0.25), fit_config(2))
    rng = np.random.default_rng(0)
    draws = np.array([update.draw(rng) for _ in range(20_000)])
    np.testing.assert_allclose(draws.mean(axis=0), update.mean, atol=4 * np.sqrt(np.diag(update.covariance) / 20_000).max())
    np.testing.assert_allclose(np.cov(draws.T), update.covariance, rtol=0, atol=0.05 * np.max(np.diag(update.covariance)))


def test_vanishing_weight_gives_the_prior(small_pairs) -> None:
    prior = PriorSpec(mean=np.array([1.0, -2.0]), covariance=np.diag([0.5, 2.0]))
    cfg = FitConfig(prior=prior, iterations=10_000, burn_in=0, learning_rate=1e-8, seed=4)
    draws = gs4cox.run(small_pairs, cfg).samples
    se = np.sqrt(np.diag(prior.covariance) / draws.shape[0])
    assert np.all(np.abs(draws.mean(axis=0) - prior.mean) < 4 * se)
    np.testing.assert_allclose(np.cov(draws.T), prior.covariance, rtol=0.06, atol=0.05)


def test_mean_is_free_of_w_under_a_flat_prior(small_pairs) -> None:
    omega = np.full(small_pairs.Q, 0.3)
    means = [
        gs4cox.gaussian_update(small_pairs, omega, fit_config(2, w=w, variance=1e12)).mean
        for w in (0.1, 1.0, 7.0)
    ]
    np.testing.assert_allclose(means[0], means[1], rtol=1e-6)
    np.testing.assert_allclose(means[1], means[2], rtol=1e-6)


def test_single_sweep(small_pairs) -> None:
    chain = gs4cox.run(small_pairs, fit_config(2, iterations=1, burn_in=0))
    assert chain.samples.shape == (1, 2)
    assert np.all(np.isfinite(chain.samples))


def test_same_seed_same_chain(small_pairs) -> None:
    a = gs4cox.run(small_pairs, fit_config(2, iterations=50, burn_in=10, seed=9))
    b = gs4cox.run(small_pairs, fit_config(2, iterations=50, burn_in=10, seed=9))
    c = gs4cox.run(small_pairs, fit_config(2, iterations=50, burn_in=10, seed=10))
    np.testing.assert_array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)


def test_threaded_chain_ignores_thread_count() -> None:
    data = generate(SynthConfig(n=120, beta0=(1.0, -0.5), seed=2))
    pairs = build_pair_contrasts(data)
    one = gs4cox.run(pairs, fit_config(2, iterations=30, burn_in=5, seed=6, threads=1))
    three = gs4cox.run(pairs, fit_config(2, iterations=30, burn_in=5, seed=6, threads=3))
    np.testing.assert_array_equal(one.samples, three.samples)


def test_correction_is_a_translation(default_fit) -> None:
    raw, final = default_fit
    assert not raw.corrected and final.corrected
    diff = final.samples - raw.samples
    np.testing.assert_allclose(diff, np.broadcast_to(final.correction, diff.shape), rtol=0, atol=1e-12)
    np.testing.assert_allclose(np.cov(final.post_burn_in().T), np.cov(raw.post_burn_in().T), rtol=1e-9, atol=1e-12)


def test_no_shift_at_the_mple(default_scenario) -> None:
    beta_hat = mple(default_scenario)
    chain = Chain(samples=np.tile(beta_hat, (20, 1)), burn_in=5, seed=0, wall_seconds=0.0, learning_rate=1.0)
    corrected = gs4cox.correct(chain, default_scenario)
    assert np.max(np.abs(corrected.correction)) < 1e-6


def test_correcting_twice_is_an_error(default_fit, default_scenario) -> None:
    with pytest.raises(CorrectionError):
        gs4cox.correct(default_fit[1], default_scenario)


def test_singular_correction_leaves_chain_uncorrected() -> None:
    #constant covariate: the partial likelihood Hessian is singular everywhere
    data = make_dataset([1.0, 2.0, 3.0, 4.0], [1, 1, 0, 1], [[1.0], [1.0], [1.0], [1.0]])
    chain = Chain(samples=np.zeros((10, 1)), burn_in=2, seed=0, wall_seconds=0.0, learning_rate=1.0)
    out = gs4cox.correct(chain, data)
    assert not out.corrected
    assert "correction_error" in out.extra
    with pytest.raises(CorrectionError):
        gs4cox.correct(chain, data, strict=True)


def test_lag_one_autocorrelation(default_fit) -> None:
    draws = default_fit[0].post_burn_in()
    for k in range(draws.shape[1]):
        assert np.corrcoef(draws[:-1, k], draws[1:, k])[0, 1] < 0.9


def test_corrected_mean_near_mple(default_fit, default_scenario) -> None:
    raw, final = default_fit
    beta_hat = mple(default_scenario)
    corrected_gap = np.abs(final.posterior_mean() - beta_hat)
    assert np.all(corrected_gap < 0.1)
    assert np.linalg.norm(raw.posterior_mean() - beta_hat) > np.linalg.norm(corrected_gap)


def test_correction_can_be_switched_off(default_scenario) -> None:
    raw, final = gs4cox.fit(default_scenario, fit_config(4, iterations=20, burn_in=5), apply_correction=False)
    assert raw is final and not final.corrected


def test_efron_correction_on_ties() -> None:
    data = generate(SynthConfig(n=200, beta0=(1.0, -1.0), rounding=0.01, seed=8))
    raw, final = gs4cox.fit(data, fit_config(2, iterations=400, burn_in=200), ties=TieMethod.EFRON)
    assert np.all(np.abs(final.posterior_mean() - mple(data, ties=TieMethod.EFRON)) < 0.1)


@pytest.mark.slow
@pytest.mark.statistical
def test_precorrection_mean_over_replications() -> None:
    means = []
    for s in range(100):
        data = generate(SynthConfig(n=300, beta0=DEFAULT_BETA0, seed=500 + s))
        means.append(gs4cox.fit(data, fit_config(4, seed=s), apply_correction=False)[0].posterior_mean())
    np.testing.assert_allclose(np.mean(means, axis=0), [1.02, 0.53, -1.54, 3.05], atol=0.15)


@pytest.mark.slow
def test_lung_fit(lung) -> None:
    _, final = gs4cox.fit(lung, fit_config(lung.P, w=0.5, seed=1))
    np.testing.assert_allclose(final.posterior_mean(), LUNG_GS4COX, atol=0.05)
