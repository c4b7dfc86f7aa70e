"""Fast invariant suite behind ``snedge check``."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from . import distributions as dist
from . import expansion as ex
from .entropy_coeffs import analytic_c2, c_l
from .metrics import relative_entropy
from .simulate import gaussian_exact_density, sample_block
from .special_math import (
    QuadratureSpec,
    gauss_hermite_inner,
    hermite_eval,
    int_inverse_cubed_root_quadratic,
    integrate,
    quad_integrate,
)


def check_hermite_orthogonality() -> bool:
    for j in range(11):
        for k in range(11):
            target = math.factorial(j) if j == k else 0.0
            scale = math.sqrt(math.factorial(j) * math.factorial(k))
            if abs(gauss_hermite_inner(j, k) - target) > 1e-8 * scale:
                return False
    return True


def check_hermite_recurrence() -> bool:
    x = np.linspace(-6, 6, 121)
    for k in range(1, 16):
        lhs = hermite_eval(k + 1, x)
        rhs = x * hermite_eval(k, x) - k * hermite_eval(k - 1, x)
        if not np.allclose(lhs, rhs, rtol=1e-10, atol=1e-10):
            return False
    return True


def check_integral_identities() -> bool:
    rng = np.random.default_rng(11)
    for a, b, l in rng.uniform(0.2, 3.0, size=(20, 3)):
        if abs(integrate(lambda x: (a * x * x + b) ** -1.5, -l, l) - int_inverse_cubed_root_quadratic(a, b, l)) > 1e-8:
            return False
        r = math.sqrt(a)
        spec = QuadratureSpec((-r, r), endpoint_singular=True)
        if abs(quad_integrate(lambda w: ((r - w) * (r + w)) ** -0.5, spec) - math.pi) > 1e-8:
            return False
    return True


def check_conditional_cumulants() -> bool:
    rng = np.random.default_rng(5)
    for x in rng.uniform(0.0, 3.0, 100):
        mu = [x**k if k % 2 == 0 else 0.0 for k in range(7)]
        for order in (2, 4, 6):
            oracle = dist.set_partition_cumulant(mu, order)
            if not math.isclose(dist.conditional_cumulant(x, order), oracle, rel_tol=1e-12, abs_tol=1e-300):
                return False
    return True


def check_entropy_c2() -> bool:
    return c_l({4: 3.0}, 1) == 0.0 and all(
        abs(c_l({4: mu4, 6: 15.0}, 2) / analytic_c2(mu4) - 1) < 1e-6 for mu4 in (1.8, 3.0, 6.0)
    )


def check_q_integrates_to_zero() -> bool:
    for law in dist.catalog().values():
        for r in (2, 4):
            if abs(quad_integrate(lambda x: ex.q_r(x, r, law.mu4, law.mu6))) > 1e-9:
                return False
    return True


def check_simulation_invariants(configs: int = 20_000) -> bool:
    law = dist.get_law("uniform")
    for n in (8, 64):
        t = sample_block(law, n, configs, seed=99, block=0)
        if np.max(np.abs(t)) > math.sqrt(n) * (1 + 1e-12):
            return False
        x = dist.sample_matrix(law, (configs, n), 99, (n, 1))
        _, sums = ex.batch_power_sums(x, [2, 3, 4, 5, 6, 7])
        if np.max(np.abs(sums[2] - 1)) > 1e-12 or max(np.max(s) for s in sums.values()) > 1 + 1e-12:
            return False
        roots = {k: sums[k] ** (1.0 / (k - 2)) for k in range(3, 8)}
        if any(np.any(roots[a] > roots[a + 1] * (1 + 1e-12)) for a in range(3, 7)):
            return False
    return True


def check_entropy_nonnegative() -> bool:
    for n in (8, 32):
        f = gaussian_exact_density(n)
        r = min(f.support, 12.0)
        if relative_entropy(f, (-r, r), logp=f.logpdf) < -1e-10:
            return False
    return True


CHECKS: dict[str, Callable[[], bool]] = {
    "hermite-orthogonality": check_hermite_orthogonality,
    "hermite-recurrence": check_hermite_recurrence,
    "integral-identities": check_integral_identities,
    "conditional-cumulants": check_conditional_cumulants,
    "entropy-c2": check_entropy_c2,
    "q-integrates-to-zero": check_q_integrates_to_zero,
    "simulation-invariants": check_simulation_invariants,
    "entropy-nonnegative": check_entropy_nonnegative,
}


def run_checks(emit: Callable[[str], None] = print) -> bool:
    ok_all = True
    for name, fn in CHECKS.items():
        try:
            ok = bool(fn())
        except Exception as exc:  # a crash counts as a failed invariant
            ok = False
            name = f"{name} ({type(exc).__name__}: {exc})"
        emit(f"{'PASS' if ok else 'FAIL'} {name}")
        ok_all &= ok
    return ok_all
