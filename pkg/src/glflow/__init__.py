"""Conserved lattice interface dynamics and the fourth-order gradient flow.

The package provides, at desk scale:

* lattice geometry derived from a macroscopic domain (``domain``),
* discrete difference operators, Poisson solves and lattice norms (``ops``),
* microscopic potentials, surface tension estimation by Monte Carlo, and
  mollified surface-tension models (``potential``),
* the conserved Langevin lattice dynamics (``sde``),
* the spatially discretized fourth-order gradient flow (``pde``),
* cross-cutting diagnostics: energies, oscillation sums, interpolation,
  the constrained minimizer of total surface tension, and ensemble
  convergence studies (``analysis``),
* a JSON-configured command line front end (``cli``).
"""

__version__ = "0.1.0"

from . import analysis, domain, fields, ops, pde, potential, sde  # noqa: F401
from .domain import (  # noqa: F401
    MacroDomain,
    LatticeDomain,
    ball,
    box,
    build_lattice_domain,
    check_assumption_domain,
    graph_distance,
    indicator_grid,
)
from .errors import (  # noqa: F401
    ConfigError,
    DivergenceError,
    DomainError,
    GlflowError,
    InstabilityError,
    SolverError,
)
from .fields import BondField, HeightField, mean_zero_field  # noqa: F401
from .trajectory import TrajectoryRecord  # noqa: F401
