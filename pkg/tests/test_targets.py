import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from amis.distributions import logpdf_gaussian
from amis.targets import (
    Banana,
    BananaParams,
    Gaussian,
    ScaledTarget,
    banana_logpdf,
    banana_true_moments,
    discrete_target,
    make_target,
    sample_banana,
)

finite = st.floats(-50, 50, allow_nan=False)


def test_origin_value():
    # twisted y2 is -3 at the origin
    expected = -np.log(2 * np.pi) - 0.5 * np.log(100.0) - 4.5
    assert banana_logpdf(np.zeros(2), BananaParams()) == pytest.approx(expected, rel=1e-15)
    assert expected == pytest.approx(-8.640462159403391, abs=1e-14)


@given(st.lists(finite, min_size=4, max_size=4))
def test_no_twist_is_gaussian(y):
    y = np.array(y)
    params = BananaParams(p=4, b=0.0)
    cov = np.diag([100.0, 1.0, 1.0, 1.0])
    assert banana_logpdf(y, params) == pytest.approx(logpdf_gaussian(y, np.zeros(4), cov), rel=1e-12)


@given(finite, finite, finite)
def test_even_in_first_coordinate(y1, y2, y3):
    params = BananaParams(p=3)
    assert banana_logpdf([y1, y2, y3], params) == banana_logpdf([-y1, y2, y3], params)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        banana_logpdf(np.zeros(3), BananaParams(p=2))


def test_invalid_params():
    with pytest.raises(ValueError):
        BananaParams(p=1)
    with pytest.raises(ValueError):
        BananaParams(sigma2=0.0)


def test_true_moments():
    mean, var = banana_true_moments(BananaParams(p=5))
    np.testing.assert_array_equal(mean, np.zeros(5))
    np.testing.assert_allclose(var, [100, 19, 1, 1, 1], rtol=1e-14)
    assert banana_true_moments(BananaParams(b=0.0))[1][1] == 1.0
    assert banana_true_moments(BananaParams(b=0.1))[1][1] == pytest.approx(201.0, rel=1e-14)


@pytest.mark.parametrize("b", [0.03, 0.1])
def test_moments_against_monte_carlo(b):
    params = BananaParams(p=3, b=b)
    n = 10**6
    y = sample_banana(params, n, np.random.default_rng(0))
    mean, var = banana_true_moments(params)
    se_mean = np.sqrt(var / n)
    assert np.all(np.abs(y.mean(axis=0) - mean) <= 3 * se_mean)
    # standard error of a sample variance from the empirical fourth moment
    centered = y - y.mean(axis=0)
    se_var = np.sqrt((np.mean(centered**4, axis=0) - centered.var(axis=0) ** 2) / n)
    assert np.all(np.abs(y.var(axis=0) - var) <= 3 * se_var)


def test_generative_transform_is_uncorrelated():
    n = 10**6
    y = sample_banana(BananaParams(), n, np.random.default_rng(1))
    z = (y - y.mean(axis=0)) / y.std(axis=0)
    prod = z[:, 0] * z[:, 1]
    # y1 and y2 are dependent, so the standard error comes from the product itself
    assert abs(prod.mean()) <= 3 * prod.std() / np.sqrt(n)


def test_normalized_by_quadrature():
    params = BananaParams()
    # y2 ranges over the curved ridge, so integrate y2 first on a wide window
    def inner(y1):
        center = -0.03 * (y1**2 - 100)
        return integrate.quad(lambda y2: np.exp(banana_logpdf([y1, y2], params)),
                              center - 12, center + 12, epsabs=1e-13)[0]
    total, _ = integrate.quad(inner, -80, 80, limit=200, epsabs=1e-12)
    assert total == pytest.approx(1.0, abs=1e-3)


def test_banana_class_and_factory():
    target = make_target("banana", 4, sigma2=50.0, b=0.05)
    assert isinstance(target, Banana) and target.dim == 4
    y = np.ones((3, 4))
    np.testing.assert_array_equal(target(y), banana_logpdf(y, BananaParams(4, 50.0, 0.05)))
    with pytest.raises(ValueError):
        make_target("nope", 2)


def test_gaussian_target_known_moments():
    target = Gaussian([1.0, 2.0], np.diag([4.0, 9.0]))
    mean, var = target.known_moments()
    np.testing.assert_array_equal(mean, [1.0, 2.0])
    np.testing.assert_array_equal(var, [4.0, 9.0])


def test_scaled_target_adds_log_constant():
    base = Banana(p=2)
    scaled = ScaledTarget(base, 1e6)
    y = np.array([[0.0, 0.0], [3.0, -1.0]])
    np.testing.assert_allclose(scaled.log_density(y) - base.log_density(y), np.log(1e6), rtol=1e-12)


class TestDiscrete:
    def test_two_points(self):
        target = discrete_target([0.0, 1.0], [0.5, 0.5])
        assert target.expectation(lambda y: y[:, 0]) == 0.5

    def test_normalizes(self):
        target = discrete_target([0.0, 1.0, 2.0, 3.0, 4.0], np.array([1, 2, 3, 2, 1]) / 9)
        assert target.probabilities.sum() == pytest.approx(1.0, abs=1e-15)
        assert target.probabilities[2] == pytest.approx(3 / 9, rel=1e-15)

    def test_log_density_off_support(self):
        target = discrete_target([0.0, 1.0], [0.25, 0.75])
        np.testing.assert_allclose(target.log_density(np.array([[1.0], [0.0], [0.5]])),
                                   [np.log(0.75), np.log(0.25), -np.inf])

    @pytest.mark.parametrize("probs", [[0.5, -0.5, 1.0], [0.0, 1.0, 0.0], [np.nan, 1.0, 1.0]])
    def test_invalid(self, probs):
        with pytest.raises(ValueError):
            discrete_target([0.0, 1.0, 2.0], probs)


@settings(max_examples=25, deadline=None)
@given(st.floats(1.0, 400.0), st.floats(-0.2, 0.2))
def test_true_moment_formula(sigma2, b):
    var = banana_true_moments(BananaParams(p=2, sigma2=sigma2, b=b))[1]
    # E[(x2 - b(x1^2 - s2))^2] = 1 + b^2 Var(x1^2) with Var(x1^2) = 2 s2^2
    assert var[1] == pytest.approx(1 + b * b * 2 * sigma2**2, rel=1e-14)
