"""Stochastic calculus for Clifford-valued processes.

Modules:

* :mod:`~stochclifford.algebra`: the real Clifford algebra Cl(n) with ``e_j^2 = -1``;
* :mod:`~stochclifford.fields`: Clifford-valued fields, Cauchy-Riemann operators, fixtures;
* :mod:`~stochclifford.process`: Brownian paths, martingale tests, hitting times;
* :mod:`~stochclifford.ito`: Itô integrals and the Itô formula as a path identity;
* :mod:`~stochclifford.dirichlet`: walk-on-spheres Dirichlet solver, cone and hyperplane experiments;
* :mod:`~stochclifford.cli`: batch front end and the acceptance suite runner.
"""

from .algebra import (
    Multivector, ParaVector, blade_product, clifford_inner_product, conjugate, mv_mul, para_norm, sc,
    vec,
)
from .fields import (
    CliffordField, cr_apply, cr_conj_apply, dirac_apply, fueter_product, fueter_variable,
    mean_value_check, monogenicity_check,
)
from .process import PathConfig, ProcessPath, martingale_test, sample_bm

__version__ = "0.1.0"

__all__ = [
    "Multivector", "ParaVector", "blade_product", "clifford_inner_product", "conjugate", "mv_mul",
    "para_norm", "sc", "vec", "CliffordField", "cr_apply", "cr_conj_apply", "dirac_apply",
    "fueter_product", "fueter_variable", "mean_value_check", "monogenicity_check", "PathConfig",
    "ProcessPath", "martingale_test", "sample_bm",
]
