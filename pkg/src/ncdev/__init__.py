"""Deviation inequalities for martingales in finite tracial matrix algebras.

Modules
-------
specalg
    Tracial algebras, spectral calculus, distribution functions and ``L_p`` norms.
condexp
    Pinching and partial-trace conditional expectations, filtrations, martingales.
mart
    Cuculescu projections, Hermitian dilation, truncation, square functions.
devine
    Verifiers for the Azuma, Cramer-type and ``L_p`` deviation bounds.
ergo
    Shift systems on a finite window and the martingale-coboundary split.
suite, cli
    Seeded ensembles, orchestration, report files and the ``ncdev`` command.
"""

from .condexp import Filtration, Martingale, SubalgebraSpec, conditional_expectation
from .errors import NcDevError
from .specalg import Operator, TracialAlgebra, distribution, lp_norm, singular_values

__version__ = "0.1.0"

__all__ = [
    "Filtration",
    "Martingale",
    "NcDevError",
    "Operator",
    "SubalgebraSpec",
    "TracialAlgebra",
    "conditional_expectation",
    "distribution",
    "lp_norm",
    "singular_values",
]
