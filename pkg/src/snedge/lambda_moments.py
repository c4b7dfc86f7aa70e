"""Large-n expansions of the expected conditional cumulant sums, and their Monte Carlo check."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .distributions import SymmetricLaw, conditional_cumulant_coefficient, sample_matrix
from .simulate import DEFAULT_BLOCK, MomentAccumulator, block_plan

TERMS = ("lambda4", "lambda6", "lambda4_sq")


@dataclass(frozen=True)
class LambdaExpansion:
    """``E[term] = first * n^-orders[0] + second * n^-orders[1] + O(n^-(orders[1]+1))``."""

    term: str
    first: float
    second: float
    orders: tuple[int, int]

    def __post_init__(self):
        if self.term not in TERMS:
            raise ValueError(f"unknown term {self.term!r}")
        expected = (1, 2) if self.term == "lambda4" else (2, 3)
        if self.orders != expected:
            raise ValueError(f"{self.term} expands in orders {expected}")

    def __call__(self, n: float) -> float:
        return self.first * n ** -self.orders[0] + self.second * n ** -self.orders[1]


def expected_lambda_terms(mu4: float, mu6: float, mu8: float) -> dict[str, LambdaExpansion]:
    """Two-term expansions of ``E[l4/4!]``, ``E[l6/6!]`` and ``E[(l4/4!)^2 / 2]``.

    The ``n^-3`` coefficient of the squared term comes from expanding
    ``V^-8 = n^-4 (1 - 4 d + 10 d^2 + ...)`` with ``d = V^2/n - 1``; see
    :func:`published_lambda4_sq_second` for the variant without the
    ``mu4^3`` contribution, which the Gaussian oracle rules out.
    """
    return {
        "lambda4": LambdaExpansion(
            "lambda4", -mu4 / 12.0, (2.0 * mu6 + mu4 - 3.0 * mu4**2) / 12.0, (1, 2)
        ),
        "lambda6": LambdaExpansion(
            "lambda6", mu6 / 45.0, -(3.0 * mu8 + 3.0 * mu6 - 6.0 * mu4 * mu6) / 45.0, (2, 3)
        ),
        "lambda4_sq": LambdaExpansion(
            "lambda4_sq", mu4**2 / 288.0, (mu8 + 10.0 * mu4**3 - 3.0 * mu4**2 - 8.0 * mu4 * mu6) / 288.0, (2, 3)
        ),
    }


def published_lambda4_sq_second(mu4: float, mu6: float, mu8: float) -> float:
    """``-(8 mu6 mu4 - 7 mu4^2 - mu8) / 288``, kept for comparison only.

    For Gaussian inputs it gives ``-192/288`` where the exact value is ``-12/288``.
    """
    return -(8.0 * mu6 * mu4 - 7.0 * mu4**2 - mu8) / 288.0


def term_values(x: np.ndarray, term: str) -> np.ndarray:
    """Per-row value of ``term`` for a matrix of draws (rows are configurations)."""
    a = np.abs(x)
    V2 = np.einsum("ij,ij->i", a, a)
    safe = np.where(V2 > 0, V2, 1.0)
    if term in ("lambda4", "lambda4_sq"):
        a2 = a * a
        s4 = np.einsum("ij,ij->i", a2, a2) / (safe * safe)
        l4 = np.where(V2 > 0, conditional_cumulant_coefficient(4) * s4 / 24.0, 0.0)
        return l4 if term == "lambda4" else 0.5 * l4 * l4
    if term == "lambda6":
        s6 = (a**6).sum(axis=1) / safe**3
        return np.where(V2 > 0, conditional_cumulant_coefficient(6) * s6 / 720.0, 0.0)
    raise ValueError(f"unknown term {term!r}")


def mc_lambda_mean(
    law: SymmetricLaw,
    n: int,
    term: str,
    replications: int,
    seed: int,
    block_size: int = DEFAULT_BLOCK,
) -> tuple[float, float]:
    """Monte Carlo mean of ``term`` over independent size-``n`` configurations.

    Returns ``(estimate, standard_error)``. Blocks use streams ``0, 1, ...``
    of ``seed`` and are merged in order, so the result does not depend on
    how the work was scheduled.
    """
    if replications < 1000:
        raise ValueError("need at least 1000 replications")
    if term not in TERMS:
        raise ValueError(f"unknown term {term!r}")
    acc = MomentAccumulator()
    for stream, rows in block_plan(replications, block_size):
        x = sample_matrix(law, (rows, n), seed, stream)
        acc = acc.merge(MomentAccumulator.from_values(term_values(x, term)))
    return acc.mean, acc.standard_error


@dataclass(frozen=True)
class CoefficientFit:
    coefficients: tuple[float, ...]
    standard_errors: tuple[float, ...]
    orders: tuple[int, ...]


def fit_expansion(
    ns: Sequence[int],
    estimates: Sequence[float],
    standard_errors: Sequence[float],
    orders: Iterable[int] = (1, 2),
) -> CoefficientFit:
    """Weighted least squares of estimates on ``n^-order`` columns (no intercept)."""
    ns = np.asarray(ns, dtype=float)
    y = np.asarray(estimates, dtype=float)
    se = np.asarray(standard_errors, dtype=float)
    orders = tuple(orders)
    X = np.column_stack([ns ** -o for o in orders])
    w = 1.0 / se
    coef, *_ = np.linalg.lstsq(X * w[:, None], y * w, rcond=None)
    cov = np.linalg.inv((X * w[:, None]).T @ (X * w[:, None]))
    return CoefficientFit(tuple(coef.tolist()), tuple(np.sqrt(np.diag(cov)).tolist()), orders)


def recover_leading_coefficient(
    law: SymmetricLaw,
    ns: Sequence[int] = (32, 64, 128, 256),
    replications: int = 100_000,
    seed: int = 2024,
) -> dict:
    """Regress MC means of ``E[l4/4!]`` over ``ns`` and compare the ``1/n`` coefficient with ``-mu4/12``."""
    rows = [mc_lambda_mean(law, n, "lambda4", replications, seed + i) for i, n in enumerate(ns)]
    fit = fit_expansion(ns, [r[0] for r in rows], [r[1] for r in rows], (1, 2))
    target = -law.mu4 / 12.0
    return {
        "fit": fit,
        "target": target,
        "deviation_in_se": abs(fit.coefficients[0] - target) / fit.standard_errors[0],
        "rows": rows,
    }


def gaussian_exact_lambda4_mean(n: int) -> float:
    """``E[l4/4!]`` for Gaussian inputs exactly: ``-(1/4)/(n+2)``.

    The direction ``X/|X|`` is uniform on the sphere and ``E u_1^4 = 3/(n(n+2))``.
    """
    return conditional_cumulant_coefficient(4) / 24.0 * 3.0 / (n + 2)


def gaussian_exact_lambda_means(n: int) -> dict[str, float]:
    """Exact Gaussian-input means of all three terms via sphere moments of ``u = X/|X|``.

    ``E u^4 = 3/(n(n+2))``, ``E u^6 = 15/(n(n+2)(n+4))``,
    ``E u^8 = 105/P``, ``E u_1^4 u_2^4 = 9/P`` with ``P = n(n+2)(n+4)(n+6)``.
    """
    P3 = (n + 2) * (n + 4)
    P4 = P3 * (n + 6)
    s4sq = (105.0 + 9.0 * (n - 1)) / P4
    return {
        "lambda4": -2.0 / 24.0 * 3.0 / (n + 2),
        "lambda6": 16.0 / 720.0 * 15.0 / P3,
        "lambda4_sq": 4.0 / 576.0 / 2.0 * s4sq,
    }


__all__ = [
    "CoefficientFit",
    "LambdaExpansion",
    "TERMS",
    "expected_lambda_terms",
    "fit_expansion",
    "gaussian_exact_lambda4_mean",
    "gaussian_exact_lambda_means",
    "mc_lambda_mean",
    "published_lambda4_sq_second",
    "recover_leading_coefficient",
    "term_values",
]

