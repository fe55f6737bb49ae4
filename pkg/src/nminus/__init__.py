"""Workbench for negative-eigenvalue counts of 2D Schrodinger operators.

Three operator families share one counting engine: the discrete operator on
Z^2, the Kirchhoff operator on the unit-grid ("chessboard") metric graph,
and the standard operator on R^2.  Companion modules evaluate the
eigenvalue-bound functionals the counts are compared against.
"""

from .fem import carryover_check, cell_constants, count_negative_fem, interpolate_J0
from .functionals import (
    BoundReport,
    averaged_orlicz_norm,
    graph_lambda,
    graph_m,
    mu_sequence,
    mv_functional,
    mz94_functional,
    shargorodsky_functional,
    weak_l1,
    zeta_sequence,
)
from .graph import count_negative_graph, decoupling_check, dirichlet_component_count
from .inertia import (
    InertiaResult,
    SymSkylineMatrix,
    count_below,
    ldlt_inertia,
    rcm_order,
)
from .lattice import count_negative_lattice, hardy_ratio, sobolev_seminorm
from .potentials import (
    EdgePotentialField,
    LatticePotential,
    PlanePotential,
    edge_effective_lattice,
    effective_g,
    lift_lattice,
    make_family,
    radial_split,
)
from .sturm import halfline_count, mg_count, prufer_count_interval

__all__ = [
    "BoundReport",
    "EdgePotentialField",
    "InertiaResult",
    "LatticePotential",
    "PlanePotential",
    "SymSkylineMatrix",
    "averaged_orlicz_norm",
    "carryover_check",
    "cell_constants",
    "count_below",
    "count_negative_fem",
    "count_negative_graph",
    "count_negative_lattice",
    "decoupling_check",
    "dirichlet_component_count",
    "edge_effective_lattice",
    "effective_g",
    "graph_lambda",
    "graph_m",
    "halfline_count",
    "hardy_ratio",
    "interpolate_J0",
    "ldlt_inertia",
    "lift_lattice",
    "make_family",
    "mg_count",
    "mu_sequence",
    "mv_functional",
    "mz94_functional",
    "prufer_count_interval",
    "radial_split",
    "rcm_order",
    "shargorodsky_functional",
    "sobolev_seminorm",
    "weak_l1",
    "zeta_sequence",
]

__version__ = "0.1.0"
