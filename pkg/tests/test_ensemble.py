import math

import numpy as np
import pytest
from scipy.special import zeta

from zrplab import ensemble
from zrplab.ensemble import (
    DivergentDensityError,
    OutOfScopeError,
    asymptotic_predictor,
    fugacity_density,
    jump_rate,
    log_stationary_weight,
    truncated_site_law,
)

import helpers


def test_jump_rate_examples():
    assert jump_rate(2.0, 3) == pytest.approx(2.25, abs=0)
    assert jump_rate(3.7, 0) == 0.0
    assert jump_rate(0.4, 0) == 0.0
    assert jump_rate(1.0, 5) == pytest.approx(1.25)
    assert jump_rate(2.5, 1) == 1.0
    with pytest.raises(ValueError):
        jump_rate(2.0, -1)


def test_log_stationary_weight_examples():
    assert log_stationary_weight(1.0, 2) == pytest.approx(-math.log(2))
    assert log_stationary_weight(2.5, 1) == 0.0
    assert log_stationary_weight(1.0, 0) == 0.0
    assert log_stationary_weight(3.0, 10) == pytest.approx(-3 * math.log(10))


@pytest.mark.parametrize("alpha", [1.0, 1.5, 2.0, 2.5, 3.5])
def test_rate_weight_consistency(alpha):
    # g(k) = a(k-1)/a(k) reciprocal identity: g(k) = exp(w(k-1) - w(k))
    for k in range(2, 200):
        lhs = jump_rate(alpha, k)
        rhs = math.exp(log_stationary_weight(alpha, k - 1) - log_stationary_weight(alpha, k))
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_truncated_site_law_small_examples():
    law = truncated_site_law(1.0, 2)
    assert law.log_z == pytest.approx(math.log(2.5), rel=1e-14)
    assert law.masses == pytest.approx([0.4, 0.4, 0.2], rel=1e-14)
    assert law.mean == pytest.approx(0.8, rel=1e-14)

    law2 = truncated_site_law(2.0, 1)
    assert law2.masses == pytest.approx([0.5, 0.5], rel=1e-14)
    assert law2.mean == pytest.approx(0.5, rel=1e-14)


def test_truncated_site_law_mean_matches_direct_sum():
    mean, second = helpers.site_moments(1.5, 4)
    law = truncated_site_law(1.5, 4)
    assert law.mean == pytest.approx(mean, rel=1e-12)
    assert law.second_moment == pytest.approx(second, rel=1e-12)


@pytest.mark.parametrize("alpha", [1.0, 1.5, 2.0, 2.5, 3.5])
@pytest.mark.parametrize("cutoff", [1, 7, 100, 10**4, 10**6])
def test_site_law_normalized(alpha, cutoff):
    law = truncated_site_law(alpha, cutoff)
    assert np.exp(law.log_masses).sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("alpha", [1.0, 1.7, 3.0])
def test_site_law_mass_decreasing_at_critical(alpha):
    law = truncated_site_law(alpha, 300)
    # a(0) = a(1) = 1: the first two masses tie, then strict decrease
    assert law.log_masses[0] == law.log_masses[1]
    assert (np.diff(law.log_masses[1:]) < 0).all()


def test_site_law_rejects_bad_arguments():
    with pytest.raises(ValueError):
        truncated_site_law(2.0, -1)
    with pytest.raises(ValueError):
        truncated_site_law(2.0, 5, fugacity=1.2)
    with pytest.raises(ValueError):
        truncated_site_law(2.0, 5, fugacity=0.0)


def test_monotone_truncation_of_z():
    for alpha in (1.0, 1.5, 2.5):
        values = [math.exp(ensemble.log_z_truncated(alpha, n)) for n in (10, 100, 1000, 10000)]
        assert all(b >= a for a, b in zip(values, values[1:]))
    # alpha > 1: differences vanish
    diffs = [
        math.exp(ensemble.log_z_truncated(1.5, 10 * n)) - math.exp(ensemble.log_z_truncated(1.5, n))
        for n in (10, 100, 1000, 10000)
    ]
    assert all(b < a for a, b in zip(diffs, diffs[1:]))
    # alpha = 1: Z_N(1) / log N stays in the documented band
    for n in (10**3, 10**4, 10**5, 10**6):
        ratio = math.exp(ensemble.log_z_truncated(1.0, n)) / math.log(n)
        assert 0.9 <= ratio <= 1.3


def test_fugacity_density_critical_values_match_zeta_oracle():
    # rho_c = zeta(alpha-1) / (1 + zeta(alpha)): the k=0 weight a(0)=1
    # belongs to the normalizer Z(1) = 1 + zeta(alpha)
    for alpha in (2.5, 3.0, 3.5):
        expected = zeta(alpha - 1) / (1.0 + zeta(alpha))
        assert fugacity_density(alpha, 1.0) == pytest.approx(expected, rel=1e-9)
    assert fugacity_density(3.0, 1.0) == pytest.approx(0.746998892030, rel=1e-9)
    assert fugacity_density(2.5, 1.0) == pytest.approx(1.115690610998, rel=1e-9)


def test_fugacity_density_divergent_regime():
    with pytest.raises(DivergentDensityError):
        fugacity_density(1.5, 1.0)
    with pytest.raises(DivergentDensityError):
        fugacity_density(2.0, 1.0)


def test_fugacity_density_subcritical_matches_direct_sum():
    for alpha, phi in ((1.0, 0.5), (2.5, 0.9), (1.5, 0.3)):
        k = np.arange(1, 4000)
        w = phi**k * k ** (-alpha)
        expected = (k * w).sum() / (1.0 + w.sum())
        assert fugacity_density(alpha, phi) == pytest.approx(expected, rel=1e-9)


@pytest.mark.parametrize("alpha", [1.0, 1.5, 2.0, 3.0])
def test_density_strictly_increasing_in_fugacity(alpha):
    grid = [fugacity_density(alpha, phi) for phi in np.arange(0.1, 0.95, 0.1)]
    assert all(b > a for a, b in zip(grid, grid[1:]))


def test_asymptotic_predictor_examples():
    assert asymptotic_predictor("rho_cN", 1.5, 100) == pytest.approx(10.0)
    n = round(math.exp(10))
    assert asymptotic_predictor("rho_cN", 1.0, n) == pytest.approx(n / math.log(n))
    assert asymptotic_predictor("second_moment", 3.0, 1000) == pytest.approx(math.log(1000))
    assert asymptotic_predictor("rho_cN", 3.0, 50) == 1.0
    assert asymptotic_predictor("rho_cN", 2.0, 64) == pytest.approx(math.log(64))
    assert asymptotic_predictor("Z_N", 2.0, 64) == 1.0
    assert asymptotic_predictor("Z_N", 1.0, 64) == pytest.approx(math.log(64))
    assert asymptotic_predictor("second_moment", 3.5, 100) == 1.0
    assert asymptotic_predictor("second_moment", 1.0, 100) == pytest.approx(100**2 / math.log(100))


def test_asymptotic_predictor_errors():
    with pytest.raises(OutOfScopeError):
        asymptotic_predictor("rho_cN", 0.5, 100)
    with pytest.raises(ValueError):
        asymptotic_predictor("rho_cN", 2.0, 1)
    with pytest.raises(ValueError):
        asymptotic_predictor("zeta", 2.0, 100)


def test_alpha_scope_flag():
    assert ensemble.alpha_scope(1.0) == "theorem"
    assert ensemble.alpha_scope(0.3) == "outside-theorem-scope"
    # raw weights still evaluate below the theorem range
    assert jump_rate(0.3, 4) > 0
    assert log_stationary_weight(-1.0, 2) == pytest.approx(math.log(2))
