import numpy as np
import pytest

from chain import Chain
from conftest import fit_config, make_dataset
from gpc import CalibrationError, GpcConfig, calibrate, credible_region_contains, run_sampler, update_w
from model_constants import ModelConstants, SamplerMethod
from synth_gen import SynthConfig, generate


@pytest.fixture(scope="module")
def small_data():
    return generate(SynthConfig(n=60, beta0=(0.8, -0.5), seed=31))


def quick_config(**kwargs) -> GpcConfig:
    base = dict(bootstrap_count=4, max_rounds=2, inner_fit=fit_config(2, iterations=80, burn_in=20), seed=5)
    base.update(kwargs)
    return GpcConfig(**base)


def test_update_direction() -> None:
    #over-coverage means the posterior is too wide, so w grows
    assert update_w(1.0, 1.0, 0.05, 1) == pytest.approx(1.05)
    assert update_w(1.0, 0.5, 0.05, 2) == pytest.approx(1.0 - 0.45 / 2)
    assert update_w(1.0, 0.95, 0.05, 3) == pytest.approx(1.0)


def test_update_is_clamped() -> None:
    assert update_w(0.1, 0.0, 0.05, 1) == ModelConstants.GPC_W_MIN
    assert update_w(ModelConstants.GPC_W_MAX, 1.0, 0.05, 1) == ModelConstants.GPC_W_MAX


def test_credible_region() -> None:
    draws = np.random.default_rng(0).normal(size=(2000, 2))
    chain = Chain(samples=draws, burn_in=0, seed=0, wall_seconds=1.0, learning_rate=1.0)
    assert credible_region_contains(chain, np.zeros(2), 0.05)
    assert not credible_region_contains(chain, np.array([0.0, 4.0]), 0.05)
    #one coordinate outside is enough to miss
    assert not credible_region_contains(chain, np.array([-4.0, 0.0]), 0.05)


@pytest.mark.parametrize("kwargs", [
    {"bootstrap_count": 0},
    {"alpha": 1.0},
    {"tol": 0.0},
    {"max_rounds": 0},
    {"initial_w": 0.0},
    {"workers": -1},
])
def test_bad_config(kwargs) -> None:
    with pytest.raises(CalibrationError):
        GpcConfig(**kwargs)


def test_default_template() -> None:
    template = GpcConfig().fit_template(3)
    assert template.iterations == 600 and template.burn_in == 200
    assert template.prior.P == 3


def test_run_sampler_dispatch(small_data) -> None:
    cfg = fit_config(2, iterations=40, burn_in=10)
    raw, final = run_sampler(SamplerMethod.GS4COX, small_data, cfg)
    assert final.corrected and not raw.corrected
    raw, final = run_sampler(SamplerMethod.MH, small_data, cfg)
    assert raw is final and final.method == "mh"


def test_smoke_single_round(small_data) -> None:
    result = calibrate(small_data, SamplerMethod.GS4COX, quick_config(bootstrap_count=1, max_rounds=1))
    assert len(result.trace) == 1
    assert result.trace[0].w == 1.0
    assert result.trace[0].coverage in (0.0, 1.0)
    assert ModelConstants.GPC_W_MIN <= result.w <= ModelConstants.GPC_W_MAX
    assert list(result.to_dict()) == ["w", "converged", "target", "trace"]


def test_trace_is_deterministic(small_data) -> None:
    a = calibrate(small_data, SamplerMethod.GS4COX, quick_config())
    b = calibrate(small_data, SamplerMethod.GS4COX, quick_config())
    assert a.to_dict() == b.to_dict()


def test_workers_do_not_change_the_trace(small_data) -> None:
    a = calibrate(small_data, SamplerMethod.MH, quick_config())
    b = calibrate(small_data, SamplerMethod.MH, quick_config(workers=3))
    assert a.to_dict() == b.to_dict()


def test_rounds_follow_the_update(small_data) -> None:
    result = calibrate(small_data, SamplerMethod.GS4COX, quick_config(max_rounds=3, tol=1e-9))
    for prev, nxt in zip(result.trace, result.trace[1:]):
        assert nxt.w == pytest.approx(update_w(prev.w, prev.coverage, 0.05, prev.round))


def test_converges_immediately_at_nominal_coverage(small_data) -> None:
    #with tol = 1 every coverage is within tolerance, so w is never moved
    result = calibrate(small_data, SamplerMethod.GS4COX, quick_config(tol=1.0, initial_w=0.7))
    assert result.converged and result.w == 0.7 and len(result.trace) == 1


def test_singular_data_cannot_be_calibrated() -> None:
    #a constant covariate has no MPLE to calibrate against
    data = generate(SynthConfig(n=40, beta0=(1.0, 0.0), seed=2))
    X = data.covariates.copy()
    X[:, 1] = 0.0
    flat = make_dataset(data.times, data.events, X)
    with pytest.raises(CalibrationError):
        calibrate(flat, SamplerMethod.MH, quick_config())


def test_interval_width_shrinks_with_w(small_data) -> None:
    widths = []
    for w in (0.25, 1.0, 4.0):
        _, final = run_sampler(SamplerMethod.GS4COX, small_data, fit_config(2, iterations=600, burn_in=200, w=w, seed=1))
        draws = final.post_burn_in()
        widths.append(np.quantile(draws, 0.975, axis=0) - np.quantile(draws, 0.025, axis=0))
    assert np.all(widths[1] < widths[0]) and np.all(widths[2] < widths[1])


@pytest.mark.slow
@pytest.mark.statistical
@pytest.mark.parametrize("sampler, lo, hi", [(SamplerMethod.GS4COX, 0.3, 0.8), (SamplerMethod.MH, 0.2, 0.6)])
def test_lung_calibration(lung, sampler, lo, hi) -> None:
    result = calibrate(lung, sampler, GpcConfig(bootstrap_count=100, max_rounds=50, seed=1, workers=4))
    assert lo <= result.w <= hi
