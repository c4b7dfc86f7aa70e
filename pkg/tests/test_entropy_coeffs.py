import math

import pytest

from snedge import distributions as dist
from snedge.distributions import UnsupportedOrderError
from snedge.entropy_coeffs import (
    EntropyExpansion,
    analytic_c2,
    c_l,
    c_l_detail,
    compositions,
    entropy_expansion,
    entropy_prediction,
    normalized_sum_c2,
)
from snedge.metrics import relative_entropy
from snedge.simulate import gaussian_exact_density

CATALOG = ("gaussian", "uniform", "laplace", "gauss_mix")


def test_compositions():
    assert compositions(4, 2) == ((1, 3), (2, 2), (3, 1))
    # C(5, 2) compositions of 6 into 3 parts
    assert len(compositions(6, 3)) == 10
    assert compositions(3, 4) == ()


@pytest.mark.parametrize("law_id", CATALOG)
def test_c1_is_exactly_zero(law_id):
    assert c_l(dist.get_law(law_id), 1) == 0


def test_c2_examples():
    assert c_l(dist.get_law("gaussian"), 2) == pytest.approx(0.75, rel=1e-9)
    assert c_l(dist.get_law("uniform"), 2) == pytest.approx(0.27, rel=1e-9)


@pytest.mark.parametrize("law_id", CATALOG)
def test_c2_quadrature_matches_closed_form(law_id):
    law = dist.get_law(law_id)
    assert abs(c_l(law, 2) / analytic_c2(law.mu4) - 1) < 1e-6


@pytest.mark.parametrize("mu4", [1.8, 3.0, 6.0])
def test_c2_from_bare_moments(mu4):
    assert abs(c_l({4: mu4}, 2) / (mu4**2 / 12) - 1) < 1e-6


def test_analytic_c2_examples():
    assert analytic_c2(3) == 0.75
    assert analytic_c2(0) == 0
    assert analytic_c2(6) == 3.0


def test_c3_complete_and_gaussian_value():
    value, partial = c_l_detail(dist.get_law("gaussian"), 3)
    assert not partial
    assert value == pytest.approx(1.5, rel=1e-8)


def test_c3_gaussian_against_exact_density():
    # n^2 D - c_2 = c_3 / n + O(n^-2)
    est = []
    for n in (128, 256):
        f = gaussian_exact_density(n)
        est.append(n * (n * n * relative_entropy(f, (-12, 12), logp=f.logpdf) - 0.75))
    assert abs(est[1] - 1.5) < abs(est[0] - 1.5)
    assert est[1] == pytest.approx(1.5, rel=0.05)


def test_c3_needs_mu6():
    with pytest.raises(ValueError):
        c_l({4: 3.0}, 3)


@pytest.mark.parametrize("l", [0, 4])
def test_unsupported_order(l):
    with pytest.raises(UnsupportedOrderError):
        c_l(dist.get_law("gaussian"), l)


def test_expansion_object():
    exp = entropy_expansion(dist.get_law("laplace"), lmax=3)
    assert exp.coefficients[1] == 0 and exp.coefficients[2] == pytest.approx(3.0, rel=1e-9)
    assert exp.partial == {1: False, 2: False, 3: False}
    with pytest.raises(ValueError):
        EntropyExpansion(3.0, 15.0, {1: 0.1})


def test_entropy_prediction_examples():
    g = dist.get_law("gaussian")
    assert entropy_prediction(g, 6, 100) == pytest.approx(0.75e-4, rel=1e-9)
    assert entropy_prediction(g, 5, 100) == 0
    assert entropy_prediction(g, 4, 100) == 0
    assert normalized_sum_c2(3.0) == 0
    with pytest.raises(UnsupportedOrderError):
        entropy_prediction(g, 7, 10)


@pytest.mark.parametrize("law_id", CATALOG)
def test_self_normalized_exceeds_normalized_sum(law_id):
    mu4 = dist.get_law(law_id).mu4
    assert analytic_c2(mu4) > normalized_sum_c2(mu4)


def test_gaussian_entropy_approaches_c2():
    gaps = []
    for n in (32, 64, 128, 256):
        f = gaussian_exact_density(n)
        r = min(f.support, 12.0)
        gaps.append(abs(n * n * relative_entropy(f, (-r, r), logp=f.logpdf) - 0.75))
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 0.075
    assert math.isfinite(gaps[0])
