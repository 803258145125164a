import math

import numpy as np
import pytest

from targetsel import (
    Scenario,
    ScenarioConfig,
    aipw_ate,
    aipw_overlap,
    diff_in_means,
    gen_iv,
    gen_observational,
    gen_proxy,
    generate,
    iv_ratio,
    normal_cdf,
    product_estimator,
    true_effect,
)
from targetsel.dgp import standard_normal


def plugin_cov(a, b):
    return float(np.mean((a - a.mean()) * (b - b.mean())))


@pytest.mark.parametrize("scenario", list(Scenario))
@pytest.mark.parametrize("s", [0.0, 0.7])
def test_generators_deterministic(scenario, s):
    config = ScenarioConfig(scenario, s=s, seed=123)
    a = generate(config)
    b = generate(config)
    np.testing.assert_array_equal(a.y, b.y)
    np.testing.assert_array_equal(a.t, b.t)
    np.testing.assert_array_equal(
        np.nan_to_num(a.aux, nan=-1), np.nan_to_num(b.aux, nan=-1)
    )


def test_standard_normal_moments_and_range(rng):
    z = standard_normal(rng, 200_000)
    assert np.isfinite(z).all()
    assert abs(z.mean()) < 4 / math.sqrt(len(z))
    assert abs(z.std() - 1.0) < 0.01
    # inverse-CDF from midpoint uniforms: symmetric tails, no clipping spikes
    assert abs((z > 0).mean() - 0.5) < 0.005


def test_normal_cdf_reference_values():
    assert abs(normal_cdf(0.0) - 0.5) < 1e-15
    assert abs(normal_cdf(1.0) - 0.8413447460685429) < 1e-12
    assert abs(normal_cdf(-1.0) - (1.0 - normal_cdf(1.0))) < 1e-15


def test_observational_default_size_and_assignment_rates():
    sample = generate(ScenarioConfig(Scenario.OBSERVATIONAL, s=0.0, seed=0))
    assert sample.n == 1000
    big = generate(ScenarioConfig(Scenario.OBSERVATIONAL, s=0.0, seed=4, n=10 ** 5))
    x0 = big.aux == 0.0
    rate = big.t[x0].mean()
    se = math.sqrt(0.05 * 0.95 / x0.sum())
    assert abs(rate - 0.05) < 3 * se


def test_observational_stratified_contrast_matches_effect():
    s = 0.0
    sample = generate(ScenarioConfig(Scenario.OBSERVATIONAL, s=s, seed=10, n=10 ** 6))
    theta = true_effect(Scenario.OBSERVATIONAL, s).theta0
    contrast, variance = 0.0, 0.0
    for x in (0.0, 1.0):
        mask = sample.aux == x
        share = mask.mean()
        y1 = sample.y[mask & (sample.t == 1.0)]
        y0 = sample.y[mask & (sample.t == 0.0)]
        contrast += share * (y1.mean() - y0.mean())
        variance += share ** 2 * (y1.var(ddof=1) / len(y1) + y0.var(ddof=1) / len(y0))
    assert abs(contrast - theta) < 3 * math.sqrt(variance)


def test_iv_instrument_treatment_covariance():
    sample = generate(
        ScenarioConfig(Scenario.IV_FUSION, s=0.3, seed=6, n_complete=10 ** 6, n_incomplete=1)
    )
    i = sample.aux[: sample.n_complete]
    t = sample.t[: sample.n_complete]
    se = math.sqrt((1.0 * 2.25 + 0.25) / len(i))  # Var(I)Var(T) + Cov^2 over n
    assert abs(plugin_cov(i, t) - 0.5) < 3 * se


def test_iv_ols_consistent_without_confounding():
    sample = generate(
        ScenarioConfig(Scenario.IV_FUSION, s=0.0, seed=12, n_complete=5 * 10 ** 5, n_incomplete=5 * 10 ** 5)
    )
    from targetsel import ols_slope

    se = math.sqrt(1.0 / (sample.n * 2.25))  # Var(eps_y) / (n Var(T))
    assert abs(ols_slope(sample) - 1.0) < 3 * se


def test_proxy_threshold_rates():
    sample = generate(ScenarioConfig(Scenario.PROXY, s=0.5, seed=9, n=10 ** 6))
    treated = sample.t == 1.0
    p1 = sample.aux[treated].mean()
    p0 = sample.aux[~treated].mean()
    target = normal_cdf(1.0)
    assert abs(p1 - target) < 3 * math.sqrt(target * (1 - target) / treated.sum())
    assert abs(p0 - 0.5) < 3 * math.sqrt(0.25 / (~treated).sum())


def test_true_effects_closed_forms():
    assert true_effect(Scenario.IV_FUSION, 0.0).theta0 == 1.0
    assert true_effect(Scenario.IV_FUSION, 1.7).theta0 == 1.0
    assert true_effect(Scenario.OBSERVATIONAL, 0.0).theta0 == 1.0
    assert true_effect(Scenario.OBSERVATIONAL, 1.0).theta0 == 2.5
    assert abs(true_effect(Scenario.PROXY, 0.0).theta0 - 0.1706723730342573) < 1e-12


@pytest.mark.parametrize(
    "scenario, s, expected",
    [
        (Scenario.PROXY, 0.0, 0.1706723730342573),
        (Scenario.OBSERVATIONAL, 1.0, 2.5),
        (Scenario.IV_FUSION, 1.3, 1.0),
    ],
)
def test_true_effect_against_potential_outcome_monte_carlo(scenario, s, expected):
    total, total_sq, count = 0.0, 0.0, 0
    chunks, chunk_n = 10, 10 ** 6
    for chunk in range(chunks):
        if scenario is Scenario.IV_FUSION:
            config = ScenarioConfig(
                scenario, s=s, seed=500 + chunk, n_complete=chunk_n // 2, n_incomplete=chunk_n // 2
            )
        else:
            config = ScenarioConfig(scenario, s=s, seed=500 + chunk, n=chunk_n)
        _, potentials = generate(config, keep_potential=True)
        gap = potentials.y1 - potentials.y0
        total += gap.sum()
        total_sq += (gap ** 2).sum()
        count += len(gap)
    mean = total / count
    sd = math.sqrt(max(total_sq / count - mean ** 2, 1e-30))
    assert abs(mean - expected) < max(4 * sd / math.sqrt(count), 1e-12)
    assert abs(true_effect(scenario, s).theta0 - expected) < 1e-12


BASELINES = {
    Scenario.OBSERVATIONAL: aipw_ate,
    Scenario.IV_FUSION: iv_ratio,
    Scenario.PROXY: diff_in_means,
}


def _sample_at(scenario, s, seed, n):
    if scenario is Scenario.IV_FUSION:
        config = ScenarioConfig(scenario, s=s, seed=seed, n_complete=n // 2, n_incomplete=n // 2)
    else:
        config = ScenarioConfig(scenario, s=s, seed=seed, n=n)
    return generate(config)


@pytest.mark.slow
@pytest.mark.parametrize("scenario", list(Scenario))
def test_baseline_consistency_chain(scenario):
    """Baseline on one large sample lands near the closed-form effect at every grid s."""
    from targetsel.experiments import DEFAULT_S_GRIDS

    estimator = BASELINES[scenario]
    for s in DEFAULT_S_GRIDS[scenario]:
        theta = true_effect(scenario, s).theta0
        pilot = np.array(
            [estimator(_sample_at(scenario, s, 7000 + k, 10 ** 5)) for k in range(12)]
        )
        se_large = pilot.std(ddof=1) / math.sqrt(10)  # scale 1e5 -> 1e6
        value = estimator(_sample_at(scenario, s, 81, 10 ** 6))
        assert abs(value - theta) < max(4 * se_large, 5e-4), (scenario, s)


@pytest.mark.slow
def test_proxy_surrogate_decomposition_at_s0():
    sample = _sample_at(Scenario.PROXY, 0.0, 17, 10 ** 6)
    pilot = np.array(
        [product_estimator(_sample_at(Scenario.PROXY, 0.0, 9000 + k, 10 ** 5)) for k in range(12)]
    )
    se = pilot.std(ddof=1) / math.sqrt(10)
    assert abs(product_estimator(sample) - true_effect(Scenario.PROXY, 0.0).theta0) < 4 * se


@pytest.mark.slow
def test_overlap_equals_ate_under_homogeneity():
    sample = _sample_at(Scenario.OBSERVATIONAL, 0.0, 23, 10 ** 6)
    pilot = np.array(
        [
            aipw_overlap(_sample_at(Scenario.OBSERVATIONAL, 0.0, 9500 + k, 10 ** 5))
            - aipw_ate(_sample_at(Scenario.OBSERVATIONAL, 0.0, 9500 + k, 10 ** 5))
            for k in range(12)
        ]
    )
    se = pilot.std(ddof=1) / math.sqrt(10)
    assert abs(aipw_overlap(sample) - aipw_ate(sample)) < 4 * se


def test_potential_outcomes_not_exported_by_default():
    sample = generate(ScenarioConfig(Scenario.PROXY, s=0.0, seed=1, n=20))
    assert not hasattr(sample, "y0")


def test_scenario_config_validation():
    with pytest.raises(ValueError):
        ScenarioConfig(Scenario.OBSERVATIONAL, s=-0.5, seed=0)
    with pytest.raises(ValueError):
        ScenarioConfig(Scenario.IV_FUSION, s=0.0, seed=0, n=100)
    with pytest.raises(ValueError):
        ScenarioConfig(Scenario.PROXY, s=0.0, seed=0, n=0)
    with pytest.raises(ValueError):
        gen_observational(ScenarioConfig(Scenario.PROXY, s=0.0, seed=0))


def test_specialised_generators_match_dispatch():
    config = ScenarioConfig(Scenario.IV_FUSION, s=0.4, seed=3)
    np.testing.assert_array_equal(gen_iv(config).y, generate(config).y)
    config = ScenarioConfig(Scenario.PROXY, s=0.4, seed=3)
    np.testing.assert_array_equal(gen_proxy(config).y, generate(config).y)
