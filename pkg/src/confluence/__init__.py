"""Computational complex analysis of a confluent singular ODE family.

Subpackages:

- ``series``: truncated multivariate power series (the shared substrate)
- ``normalform``: symplectic normal forms of planar Hamiltonian germs and
  the formal invariant of the associated singular vector field family
- ``model``: the exactly solvable model family, its branches and formal
  monodromy action
- ``geometry``: spiraling sectoral domains, their two-sheeted bookkeeping,
  and loop paths in the twice-punctured plane
- ``linear``: analytic continuation, monodromy and Stokes data for traceless
  2x2 linear systems with two merging singular points
- ``normalization``: nonlinear sectoral normalization (center manifolds,
  formal conjugacies, Borel-Laplace summation)
- ``painleve``: the Hamiltonian degeneration example wired to everything else
- ``cli``: command-line entry points and report generation
"""

from .series import TruncatedSeries, ts_arith, ts_borel, ts_calculus, ts_compose

__all__ = [
    "TruncatedSeries",
    "ts_arith",
    "ts_borel",
    "ts_calculus",
    "ts_compose",
]

__version__ = "0.1.0"
