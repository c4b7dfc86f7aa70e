import math

import numpy as np
import pytest

from snedge import distributions as dist
from snedge.lambda_moments import (
    LambdaExpansion,
    TERMS,
    expected_lambda_terms,
    fit_expansion,
    gaussian_exact_lambda4_mean,
    gaussian_exact_lambda_means,
    mc_lambda_mean,
    published_lambda4_sq_second,
    recover_leading_coefficient,
    term_values,
)

GAUSS = expected_lambda_terms(3.0, 15.0, 105.0)


def test_gaussian_coefficients():
    assert GAUSS["lambda4"].first == pytest.approx(-0.25)
    assert GAUSS["lambda4"].second == pytest.approx(0.5)
    assert GAUSS["lambda6"].first == pytest.approx(1 / 3)
    assert GAUSS["lambda6"].second == pytest.approx(-2.0)
    assert GAUSS["lambda4_sq"].first == pytest.approx(9 / 288)
    assert GAUSS["lambda4_sq"].second == pytest.approx(-12 / 288)


def test_leading_coefficient_formula():
    for law in dist.catalog().values():
        assert expected_lambda_terms(law.mu4, law.mu6, law.mu8)["lambda4"].first == pytest.approx(-law.mu4 / 12)


def _asymptotic_coefficient(exact, expansion):
    # Richardson-style: (exact - leading) * n^order2 at growing n
    out = []
    for n in (10_000, 40_000):
        out.append((exact(n) - expansion.first * n ** -expansion.orders[0]) * n ** expansion.orders[1])
    return out


@pytest.mark.parametrize("term", TERMS)
def test_second_coefficients_against_gaussian_oracle(term):
    exp = GAUSS[term]
    c1, c2 = _asymptotic_coefficient(lambda n: gaussian_exact_lambda_means(n)[term], exp)
    # the remainder is O(1/n) so the gap shrinks by about 4x
    assert abs(c2 - exp.second) < abs(c1 - exp.second)
    assert c2 == pytest.approx(exp.second, abs=5e-4 * max(1.0, abs(exp.second)) + 1e-4)


def test_published_square_coefficient_disagrees_with_oracle():
    exact = _asymptotic_coefficient(lambda n: gaussian_exact_lambda_means(n)["lambda4_sq"], GAUSS["lambda4_sq"])[1]
    assert published_lambda4_sq_second(3.0, 15.0, 105.0) == pytest.approx(-192 / 288)
    assert abs(exact - published_lambda4_sq_second(3.0, 15.0, 105.0)) > 0.5


def test_exact_lambda4_mean_helpers_agree():
    for n in (1, 5, 64):
        assert gaussian_exact_lambda4_mean(n) == pytest.approx(gaussian_exact_lambda_means(n)["lambda4"])
        assert gaussian_exact_lambda4_mean(n) == pytest.approx(-0.25 / (n + 2))


def test_lambda_expansion_validates_orders():
    with pytest.raises(ValueError):
        LambdaExpansion("lambda4", 1.0, 1.0, (2, 3))
    with pytest.raises(ValueError):
        LambdaExpansion("lambda8", 1.0, 1.0, (1, 2))
    e = LambdaExpansion("lambda6", 2.0, 3.0, (2, 3))
    assert e(2) == pytest.approx(2 / 4 + 3 / 8)


def test_term_values_single_point():
    x = dist.sample_matrix(dist.get_law("uniform"), (50, 1), 3)
    assert np.allclose(term_values(x, "lambda4"), -1 / 12, rtol=1e-14)
    assert np.allclose(term_values(x, "lambda4_sq"), 0.5 / 144, rtol=1e-14)
    assert np.allclose(term_values(x, "lambda6"), 16 / 720, rtol=1e-14)


def test_term_values_zero_rows_and_unknown_term():
    x = np.zeros((3, 4))
    assert np.all(term_values(x, "lambda4") == 0)
    with pytest.raises(ValueError):
        term_values(x, "lambda5")


def test_mc_single_point_is_exact():
    est, se = mc_lambda_mean(dist.get_law("laplace"), 1, "lambda4", 2000, 1)
    assert est == pytest.approx(-1 / 12, rel=1e-14) and se < 1e-15


def test_mc_requires_replications():
    with pytest.raises(ValueError):
        mc_lambda_mean(dist.get_law("gaussian"), 8, "lambda4", 999, 0)


def test_mc_gaussian_n32_against_closed_form():
    # The two-term form misses -1/n^2 (about 1e-3 after scaling by n) at
    # n = 32, so the 4 SE comparison is meaningful only while MC error
    # dominates; 2 * 10^4 replications put 4 SE * n near 1.6e-3.
    n = 32
    est, se = mc_lambda_mean(dist.get_law("gaussian"), n, "lambda4", 20_000, 5)
    assert abs(est * n - (-0.25 + 0.5 / 32)) < 4 * se * n


def test_mc_gaussian_n32_against_exact_mean():
    n = 32
    est, se = mc_lambda_mean(dist.get_law("gaussian"), n, "lambda4", 200_000, 5)
    assert abs(est - gaussian_exact_lambda4_mean(n)) < 4 * se
    # at this precision the truncated two-term form is visibly off
    assert abs(est - GAUSS["lambda4"](n)) > 4 * se


@pytest.mark.parametrize("term", TERMS)
def test_mc_gaussian_all_terms_against_exact(term):
    est, se = mc_lambda_mean(dist.get_law("gaussian"), 24, term, 200_000, 6)
    assert abs(est - gaussian_exact_lambda_means(24)[term]) < 4 * se


def test_mc_uniform_n64_two_term():
    law = dist.get_law("uniform")
    n = 64
    closed = expected_lambda_terms(law.mu4, law.mu6, law.mu8)["lambda4"](n)
    est, se = mc_lambda_mean(law, n, "lambda4", 100_000, 7)
    assert abs(est * n - closed * n) < 4 * se * n


def test_mc_square_term_follows_derived_coefficient():
    # uniform: the derived n^-3 coefficient fits; the published one is far off
    law = dist.get_law("uniform")
    n = 64
    est, se = mc_lambda_mean(law, n, "lambda4_sq", 100_000, 8)
    derived = expected_lambda_terms(law.mu4, law.mu6, law.mu8)["lambda4_sq"](n)
    published = law.mu4**2 / 288 / n**2 + published_lambda4_sq_second(law.mu4, law.mu6, law.mu8) / n**3
    assert abs(est - derived) < 4 * se
    assert abs(est - published) > 20 * se


def test_mc_deterministic_and_block_invariant():
    law = dist.get_law("gauss_mix")
    a = mc_lambda_mean(law, 16, "lambda6", 5000, 11)
    b = mc_lambda_mean(law, 16, "lambda6", 5000, 11)
    assert a == b


@pytest.mark.parametrize("law_id", ["gaussian", "uniform", "laplace", "gauss_mix"])
def test_sign_of_lambda4(law_id):
    x = dist.sample_matrix(dist.get_law(law_id), (2000, 17), 12)
    assert np.all(term_values(x, "lambda4") < 0)


def test_fit_expansion_recovers_constructed_coefficients():
    ns = np.array([32, 64, 128, 256])
    y = -0.3 / ns + 0.7 / ns**2
    fit = fit_expansion(ns, y, np.full(4, 1e-6))
    assert fit.coefficients == pytest.approx((-0.3, 0.7), rel=1e-9)
    assert all(s > 0 for s in fit.standard_errors)


RECOVERY_WINDOWS = {
    "gaussian": (32, 64, 128, 256),
    "uniform": (32, 64, 128, 256),
    "gauss_mix": (32, 64, 128, 256),
    # mu_8 and mu_10 make the laplace remainder large below n ~ 100
    "laplace": (128, 256, 512, 1024),
}


@pytest.mark.parametrize("law_id", sorted(RECOVERY_WINDOWS))
def test_catalog_coefficient_recovery_three_columns(law_id):
    # an n^-3 column absorbs the remainder that biases the two-column fit
    law = dist.get_law(law_id)
    ns = RECOVERY_WINDOWS[law_id]
    rows = [mc_lambda_mean(law, n, "lambda4", 100_000, 300 + i) for i, n in enumerate(ns)]
    fit = fit_expansion(ns, [r[0] for r in rows], [r[1] for r in rows], (1, 2, 3))
    assert abs(fit.coefficients[0] + law.mu4 / 12) < 3 * fit.standard_errors[0]


def test_recover_leading_coefficient_gaussian():
    out = recover_leading_coefficient(dist.get_law("gaussian"), replications=20_000, seed=9)
    assert out["target"] == -0.25
    assert out["deviation_in_se"] < 3
    assert len(out["rows"]) == 4 and math.isfinite(out["fit"].standard_errors[0])
