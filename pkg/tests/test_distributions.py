import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snedge import distributions as dist
from snedge.special_math import integrate


def test_catalog_ids_and_flags():
    laws = dist.catalog()
    assert {"gaussian", "uniform", "laplace", "gauss_mix"} <= set(laws)
    for law in laws.values():
        assert law.has_density and law.non_singular


@pytest.mark.parametrize(
    "law_id, mu4, mu6",
    [("gaussian", 3, 15), ("uniform", 9 / 5, 27 / 7), ("laplace", 6, 90)],
)
def test_catalog_moment_examples(law_id, mu4, mu6):
    law = dist.get_law(law_id)
    assert law.mu4 == pytest.approx(mu4, rel=1e-14)
    assert law.mu6 == pytest.approx(mu6, rel=1e-14)


def test_gauss_mix_moments_from_components():
    # Equal mixture of N(0, 0.5) and N(0, 1.5): mu_2k = (2k-1)!! (0.5^k + 1.5^k)/2
    law = dist.get_law("gauss_mix")
    assert law.mu4 == pytest.approx(3 * (0.25 + 2.25) / 2)
    assert law.mu6 == pytest.approx(15 * (0.125 + 3.375) / 2)


SUPPORT_PIECES = {
    "gaussian": [-12.0, 0.0, 12.0],
    "uniform": [-math.sqrt(3), 0.0, math.sqrt(3)],
    # exponential tails: exp(-40 sqrt 2) is below 1e-24
    "laplace": [-40.0, 0.0, 40.0],
    "gauss_mix": [-16.0, 0.0, 16.0],
}


@pytest.mark.parametrize("law_id", sorted(SUPPORT_PIECES))
def test_catalog_density_moments_by_quadrature(law_id):
    law = dist.get_law(law_id)
    pts = SUPPORT_PIECES[law_id]

    def integral(g):
        return sum(integrate(g, a, b) for a, b in zip(pts[:-1], pts[1:]))

    assert abs(integral(law.density) - 1) < 1e-8
    assert abs(integral(lambda x: x * x * law.density(x)) - 1) < 1e-8
    assert integral(lambda x: x**4 * law.density(x)) == pytest.approx(law.mu4, rel=1e-7)


@pytest.mark.parametrize("law_id", ["gaussian", "uniform", "laplace", "gauss_mix"])
def test_catalog_invariants(law_id):
    mu = dist.get_law(law_id).moments
    assert mu[0] == 1 and mu[2] == 1
    assert all(mu[k] == 0 for k in range(1, 13, 2))
    assert mu[4] >= 1 and mu[6] * mu[2] >= mu[4] ** 2


def test_unknown_law_names_valid_ids():
    with pytest.raises(KeyError, match="gaussian"):
        dist.get_law("cauchy")


def test_law_rejects_wrong_variance():
    mu = list(dist.get_law("gaussian").moments)
    mu[2] = 2.0
    with pytest.raises(ValueError):
        dist.SymmetricLaw("bad", tuple(mu))


def test_custom_law_has_no_sampler():
    law = dist.custom_law("c", {4: 2.5, 6: 9.0})
    assert law.mu4 == 2.5 and not law.has_density
    with pytest.raises(ValueError):
        dist.sample(law, 3, 1)
    with pytest.raises(ValueError):
        dist.custom_law("c", {5: 1.0})


def test_sample_determinism():
    law = dist.get_law("gaussian")
    assert np.array_equal(dist.sample(law, 4, 42), dist.sample(law, 4, 42))
    assert not np.array_equal(dist.sample(law, 4, 42), dist.sample(law, 4, 43))
    assert not np.array_equal(dist.sample(law, 4, 42, 0), dist.sample(law, 4, 42, 1))


@pytest.mark.parametrize("law_id, order, target", [("uniform", 2, 1.0), ("laplace", 4, 6.0)])
def test_sample_moment_within_4se(law_id, order, target):
    x = dist.sample(dist.get_law(law_id), 1_000_000, 123)
    mean, se = dist.sample_moment(x, order)
    assert abs(mean - target) < 4 * se


@pytest.mark.parametrize("law_id", ["gaussian", "uniform", "laplace", "gauss_mix"])
def test_sampler_symmetry(law_id):
    x = dist.sample(dist.get_law(law_id), 400_000, 9)
    for order in (1, 3):
        mean, se = dist.sample_moment(x, order)
        assert abs(mean) < 4 * se


@pytest.mark.parametrize("law_id", ["gaussian", "uniform", "laplace", "gauss_mix"])
def test_sampler_matches_cdf(law_id):
    from scipy import stats

    law = dist.get_law(law_id)
    x = dist.sample(law, 50_000, 77)
    assert stats.kstest(x, law.cdf).pvalue > 1e-3


def test_gaussian_cumulants_vanish():
    k = dist.moments_to_cumulants(dist.get_law("gaussian").moments)
    assert k[2] == pytest.approx(1)
    assert np.allclose(k[3:], 0, atol=1e-9)


def test_two_point_cumulants():
    a = 1.7
    mu = [a**k if k % 2 == 0 else 0.0 for k in range(7)]
    k = dist.moments_to_cumulants(mu)
    assert k[3] == 0
    assert k[4] == pytest.approx(-2 * a**4)
    assert k[6] == pytest.approx(16 * a**6)


@pytest.mark.parametrize("law_id", ["gaussian", "uniform", "laplace", "gauss_mix"])
def test_cumulant_round_trip(law_id):
    mu = np.asarray(dist.get_law(law_id).moments)
    back = dist.cumulants_to_moments(dist.moments_to_cumulants(mu))
    assert np.allclose(back, mu, rtol=1e-10, atol=1e-10)


def test_moments_to_cumulants_arity():
    with pytest.raises(dist.ArityError):
        dist.moments_to_cumulants([1.0])


def test_recursion_agrees_with_set_partition_oracle():
    mu = dist.get_law("laplace").moments
    k = dist.moments_to_cumulants(mu)
    for order in range(1, 9):
        assert dist.set_partition_cumulant(mu, order) == pytest.approx(k[order], rel=1e-10, abs=1e-9)


def test_set_partition_count_is_bell_number():
    assert sum(1 for _ in dist._set_partitions(list(range(6)))) == 203


def test_conditional_cumulant_examples():
    assert dist.conditional_cumulant(1.0, 6) == 16
    assert dist.conditional_cumulant(0.0, 4) == 0
    assert dist.conditional_cumulant(2.0, 4) == -32
    assert dist.conditional_cumulant(3.0, 2) == 9


def test_two_point_coefficients_exact():
    assert [dist._two_point_cumulant_coefficient(r) for r in (1, 2, 3)] == [
        Fraction(1), Fraction(-2), Fraction(16)
    ]
    # Next one in the sequence (tangent-number pattern), beyond the supported orders
    assert dist._two_point_cumulant_coefficient(4) == Fraction(-272)


def test_conditional_cumulant_unsupported():
    for order in (3, 8, 0):
        with pytest.raises(dist.UnsupportedOrderError):
            dist.conditional_cumulant(1.0, order)


@settings(max_examples=60)
@given(st.floats(0.0, 5.0), st.sampled_from([2, 4, 6]))
def test_conditional_cumulant_matches_oracle(x, order):
    mu = [x**k if k % 2 == 0 else 0.0 for k in range(order + 1)]
    oracle = dist.set_partition_cumulant(mu, order)
    assert math.isclose(dist.conditional_cumulant(x, order), oracle, rel_tol=1e-12, abs_tol=1e-300)


def test_partitions_with_weights_counts():
    # number of integer partitions of r
    assert [sum(1 for _ in dist.partitions_with_weights(r)) for r in range(1, 7)] == [1, 2, 3, 5, 7, 11]
    for k, u in dist.partitions_with_weights(5):
        assert sum((i + 1) * ki for i, ki in enumerate(k)) == 5 and u == sum(k)


def test_rng_streams_int_and_tuple():
    a = dist.rng_for(5, (3, 0)).random(3)
    b = dist.rng_for(5, (3, 0)).random(3)
    c = dist.rng_for(5, (3, 1)).random(3)
    assert np.array_equal(a, b) and not np.array_equal(a, c)
