"""Symbolic-numeric computations with linear q-difference modules over
germs of meromorphic functions at 0: canonical forms, slope factorization,
vector bundles on the Tate curve, moduli coordinates, difference Galois
groups and associated connections."""

from .errors import DomainError, NumericalError
from .qcore import (
    Config,
    ConstantClass,
    LaurentSeries,
    const_class_of,
    phi_apply,
    q_normalize,
    theta,
    theta_eval,
)

__all__ = [
    "Config",
    "ConstantClass",
    "LaurentSeries",
    "DomainError",
    "NumericalError",
    "const_class_of",
    "phi_apply",
    "q_normalize",
    "theta",
    "theta_eval",
]
