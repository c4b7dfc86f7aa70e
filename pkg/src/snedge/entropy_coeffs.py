"""Coefficients of the large-n expansion of the relative entropy of T_n."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

from .distributions import UnsupportedOrderError
from .expansion import Moments, _moment_lookup, unconditional_terms
from .special_math import hermite_eval, normal_pdf, quad_integrate

MAX_L = 3


@lru_cache(maxsize=None)
def compositions(total: int, parts: int) -> tuple[tuple[int, ...], ...]:
    """Ordered tuples of ``parts`` positive integers summing to ``total``."""
    if parts == 1:
        return ((total,),) if total >= 1 else ()
    out = []
    for first in range(1, total - parts + 2):
        out.extend((first,) + rest for rest in compositions(total - first, parts - 1))
    return tuple(out)


def _ratio_poly(r: int, mu4: float, mu6, x):
    # q_r(x) / phi(x)
    return sum(c * hermite_eval(p, x) for p, c in unconditional_terms(r, mu4, mu6).items())


@dataclass(frozen=True)
class EntropyExpansion:
    mu4: float
    mu6: float
    coefficients: dict[int, float] = field(default_factory=dict)
    partial: dict[int, bool] = field(default_factory=dict)

    def __post_init__(self):
        if 1 in self.coefficients and self.coefficients[1] != 0:
            raise ValueError("c_1 must vanish")


def c_l_detail(moments: Moments, l: int) -> tuple[float, bool]:
    """Return ``(c_l, partial)``.

    ``c_l = sum_{k=2}^{2l} (-1)^k/(k(k-1)) sum int q_{r_1}...q_{r_k} / phi^{k-1}``
    over positive ``r_1 + ... + r_k = 2l``. Products with an odd index vanish.
    ``partial`` is set if an even index beyond the available closed forms
    (r > 4) had to be dropped; for ``l <= 3`` that never happens.
    """
    if not 1 <= l <= MAX_L:
        raise UnsupportedOrderError(f"c_l available for l in 1..{MAX_L}, got {l}")
    mu4 = _moment_lookup(moments, 4)
    mu6 = _moment_lookup(moments, 6)
    if mu4 is None:
        raise ValueError("c_l needs mu_4")
    partial = False
    total = 0.0
    for k in range(2, 2 * l + 1):
        weight = (-1) ** k / (k * (k - 1))
        for rs in compositions(2 * l, k):
            if any(r % 2 for r in rs):
                continue
            if any(r > 4 for r in rs):
                partial = True
                continue
            if any(r == 4 for r in rs) and mu6 is None:
                raise ValueError(f"c_{l} needs mu_6")

            def integrand(x, rs=rs):
                prod = normal_pdf(x)
                for r in rs:
                    prod = prod * _ratio_poly(r, mu4, mu6, x)
                return prod

            total += weight * quad_integrate(integrand)
    return total, partial


def c_l(moments: Moments, l: int) -> float:
    return c_l_detail(moments, l)[0]


def analytic_c2(mu4: float) -> float:
    """``mu4^2 / 12``: half of ``int q_2^2/phi`` with ``int phi H_4^2 = 24``."""
    return mu4 * mu4 / 12.0


def normalized_sum_c2(mu4: float) -> float:
    """Leading coefficient ``(mu4 - 3)^2 / 48`` of the relative entropy of ``S_n/sqrt(n)``."""
    return (mu4 - 3.0) ** 2 / 48.0


def entropy_expansion(moments: Moments, lmax: int = 2) -> EntropyExpansion:
    coeffs, partial = {}, {}
    for l in range(1, lmax + 1):
        coeffs[l], partial[l] = c_l_detail(moments, l)
    return EntropyExpansion(_moment_lookup(moments, 4), _moment_lookup(moments, 6), coeffs, partial)


def entropy_prediction(moments: Moments, m: int, n: int) -> float:
    """``sum_{l=2}^{floor((m-2)/2)} c_l / n^l``."""
    if m not in (4, 5, 6):
        raise UnsupportedOrderError(f"entropy prediction defined for m in 4..6, got {m}")
    top = (m - 2) // 2
    return math.fsum(c_l(moments, l) * n ** (-l) for l in range(2, top + 1))


__all__ = [
    "EntropyExpansion",
    "analytic_c2",
    "c_l",
    "c_l_detail",
    "compositions",
    "entropy_expansion",
    "entropy_prediction",
    "normalized_sum_c2",
]

