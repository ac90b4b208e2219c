"""Numerical checks of second-derivative estimates for the parabolic p-Laplacian.

Submodules: :mod:`~pparabolic.jets` (pointwise algebra), :mod:`~pparabolic.grid`
(fields, stencils, quadrature), :mod:`~pparabolic.solver`, :mod:`~pparabolic.exact`,
:mod:`~pparabolic.verify` and the :mod:`~pparabolic.cli` entry point.
"""

__version__ = "0.1.0"
