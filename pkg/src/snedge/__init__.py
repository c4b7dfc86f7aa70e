"""Edgeworth expansions, entropy coefficients and Monte Carlo checks for self-normalized sums."""

from .distributions import SymmetricLaw, catalog, custom_law, get_law
from .entropy_coeffs import c_l, entropy_expansion
from .expansion import ConditionalConfig, edgeworth_cdf, edgeworth_pdf
from .simulate import gaussian_exact_density, run_simulation

__version__ = "0.1.0"

__all__ = [
    "ConditionalConfig",
    "SymmetricLaw",
    "c_l",
    "catalog",
    "custom_law",
    "edgeworth_cdf",
    "edgeworth_pdf",
    "entropy_expansion",
    "gaussian_exact_density",
    "get_law",
    "run_simulation",
]
