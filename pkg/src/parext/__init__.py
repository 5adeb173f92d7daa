"""Numerical toolkit for the parabolic convolution operator and its extremizers.

Modules: :mod:`~parext.grid` (sampled fields), :mod:`~parext.operators`
(``T``, its transpose and the Euler-Lagrange map), :mod:`~parext.weights`,
:mod:`~parext.spaces`, :mod:`~parext.spectral`, :mod:`~parext.extremize`,
:mod:`~parext.checks` and the :mod:`~parext.cli` front end.
"""

__version__ = "0.1.0"

from .grid import GridSpec, SampledField, make_grid, sample, lp_norm  # noqa: E402
from .operators import make_operator, apply_T, apply_T_star, apply_S  # noqa: E402

__all__ = [
    "__version__",
    "GridSpec",
    "SampledField",
    "make_grid",
    "sample",
    "lp_norm",
    "make_operator",
    "apply_T",
    "apply_T_star",
    "apply_S",
]
