"""The unit-grid metric graph: patches, Kirchhoff-form assembly, counts.

Vertex continuity is imposed by sharing endpoint unknowns between the edge
chains, which realizes the Kirchhoff matching weakly (it is exact for the
energy form).  Patch boundary vertices are clamped, so counts are
Dirichlet-monotone in the patch size, and P1 refinement in the subdivision
count m is also monotone (nested spaces).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .inertia import SymSkylineMatrix, ldlt_inertia, rcm_order
from .lattice import LatticeCountResult, count_negative_lattice, sobolev_seminorm
from .potentials import (
    Edge,
    EdgePotentialField,
    Site,
    canonical_edge,
    edge_effective_lattice,
    edge_origin_distance,
)
from .sturm import Potential1D, prufer_count_interval


@dataclass(frozen=True)
class ChessboardPatch:
    """Vertices [-L, L]^2 on Z^2, unit edges inside, m segments per edge.

    Vertices on the boundary square are Dirichlet-clamped; interior
    vertices keep degree 4.
    """

    half_width: int
    m: int = 16

    def __post_init__(self):
        if self.half_width < 1:
            raise ValueError("patch half-width must be >= 1")
        if self.m < 2:
            raise ValueError("need at least 2 segments per edge")

    def is_boundary(self, v: Site) -> bool:
        return max(abs(v[0]), abs(v[1])) == self.half_width

    def contains(self, v: Site) -> bool:
        return max(abs(v[0]), abs(v[1])) <= self.half_width

    def edges(self) -> list[Edge]:
        L = self.half_width
        out = []
        for x in range(-L, L + 1):
            for y in range(-L, L + 1):
                if x < L:
                    out.append(canonical_edge((x, y), (x + 1, y)))
                if y < L:
                    out.append(canonical_edge((x, y), (x, y + 1)))
        return out


@dataclass(frozen=True)
class EdgeMass:
    """Per-edge mass eta(e) and the exact distance from the origin to the
    nearest point of the (embedded) edge segment."""

    edge: Edge
    eta: float
    rho: float


def edge_masses(v: EdgePotentialField) -> list[EdgeMass]:
    return [
        EdgeMass(edge=e, eta=mass, rho=edge_origin_distance(e))
        for e, mass in sorted(v.masses.items())
    ]


@dataclass(frozen=True)
class GraphCountResult:
    patches: tuple[int, ...]
    counts: tuple[int, ...]
    converged: bool
    m: int
    alpha: float
    refinement_stable: bool | None = None

    @property
    def count(self) -> int:
        return self.counts[-1]


def _check_support(v: EdgePotentialField, patch: ChessboardPatch) -> None:
    for e in v.support:
        a, b = e
        if not (patch.contains(a) and patch.contains(b)):
            raise ValueError(f"support edge {e} lies outside the patch")
        if patch.is_boundary(a) or patch.is_boundary(b):
            raise ValueError(f"support edge {e} touches a clamped boundary vertex")


def assemble_graph(
    v: EdgePotentialField | None,
    alpha: float,
    patch: ChessboardPatch,
    sigma: float = 0.0,
    clamp_all_vertices: bool = False,
) -> SymSkylineMatrix:
    """P1 matrix of the form  |u'|^2 - alpha V |u|^2 - sigma |u|^2  on the
    patch.  ``clamp_all_vertices`` removes every vertex unknown, which
    decouples the edges (the fully Dirichlet comparison operator)."""
    if v is not None:
        _check_support(v, patch)
    L, m = patch.half_width, patch.m
    h = 1.0 / m
    vertex_id: dict[Site, int] = {}
    nxt = 0
    for x in range(-L, L + 1):
        for y in range(-L, L + 1):
            if patch.is_boundary((x, y)) or clamp_all_vertices:
                vertex_id[(x, y)] = -1
            else:
                vertex_id[(x, y)] = nxt
                nxt += 1
    edges = patch.edges()
    rows, cols, vals = [], [], []
    seg_mid = (np.arange(m) + 0.5) * h
    k_loc = np.array([[1.0, -1.0], [-1.0, 1.0]]) / h
    m_loc = np.array([[2.0, 1.0], [1.0, 2.0]]) * (h / 6.0)
    for e in edges:
        chain = np.empty(m + 1, dtype=np.int64)
        chain[0] = vertex_id[e[0]]
        chain[-1] = vertex_id[e[1]]
        chain[1:-1] = np.arange(nxt, nxt + m - 1)
        nxt += m - 1
        if v is not None and alpha != 0.0:
            q = alpha * np.asarray(v.value_on_edge(e, seg_mid), dtype=np.float64)
        else:
            q = np.zeros(m)
        for k in range(m):
            loc = k_loc - (q[k] + sigma) * m_loc
            n0, n1 = chain[k], chain[k + 1]
            if n0 >= 0:
                rows.append(n0), cols.append(n0), vals.append(loc[0, 0])
            if n1 >= 0:
                rows.append(n1), cols.append(n1), vals.append(loc[1, 1])
            if n0 >= 0 and n1 >= 0:
                rows.append(n0), cols.append(n1), vals.append(loc[0, 1])
    n = nxt
    rows = np.asarray(rows)
    cols = np.asarray(cols)
    vals = np.asarray(vals, dtype=np.float64)
    order = rcm_order((n, rows, cols))
    return SymSkylineMatrix.from_coo(n, rows, cols, vals, perm=order.perm)


def _patch_start(v: EdgePotentialField) -> int:
    L = 2
    need = v.bounding_halfwidth() + 1
    while L < need:
        L *= 2
    return L


def count_negative_graph(
    v: EdgePotentialField,
    alpha: float,
    patch_max: int = 16,
    m: int = 16,
    check_refinement: bool = False,
) -> GraphCountResult:
    """Counts over doubling patches at fixed subdivision; flags convergence
    when two consecutive patches agree, and optionally mesh stability m vs 2m."""
    if alpha < 0:
        raise ValueError("coupling must be >= 0")
    l_start = _patch_start(v)
    if l_start > patch_max:
        raise ValueError(
            f"support needs a patch beyond patch_max={patch_max} to sit inside"
        )
    patches, counts = [], []
    L = l_start
    while L <= patch_max:
        mat = assemble_graph(v, alpha, ChessboardPatch(L, m))
        counts.append(ldlt_inertia(mat).negatives)
        patches.append(L)
        if len(counts) >= 2 and counts[-1] == counts[-2]:
            break
        L *= 2
    converged = len(counts) >= 2 and counts[-1] == counts[-2]
    refinement = None
    if check_refinement:
        fine = ldlt_inertia(
            assemble_graph(v, alpha, ChessboardPatch(patches[-1], 2 * m))
        ).negatives
        refinement = fine == counts[-1]
    return GraphCountResult(
        tuple(patches), tuple(counts), converged, m, alpha, refinement
    )


def count_below_energy(
    v: EdgePotentialField | None,
    alpha: float,
    patch: ChessboardPatch,
    sigma: float,
) -> int:
    """Pencil eigenvalues below sigma on the patch (mass-matrix pencil)."""
    return ldlt_inertia(assemble_graph(v, alpha, patch, sigma=sigma)).negatives


def free_window_count(L: int, m: int, lo: float, hi: float) -> int:
    """Free-graph eigenvalues inside (lo, hi) on the patch [-L, L]^2."""
    patch = ChessboardPatch(L, m)
    return count_below_energy(None, 0.0, patch, hi) - count_below_energy(
        None, 0.0, patch, lo
    )


# ---------------------------------------------------------------------------
# edge-decoupled comparison


def edge_count(v: EdgePotentialField, alpha: float, e: Edge):
    """Dirichlet negative count of -u'' - alpha V on a single unit edge."""
    prof = v.edges.get(canonical_edge(*e))
    if prof is None or alpha == 0.0:
        return prufer_count_interval(Potential1D.constant(0.0))
    if np.isscalar(prof):
        q = Potential1D.constant(alpha * float(prof))
    else:
        nodes = np.linspace(0.0, 1.0, np.asarray(prof).size)
        q = Potential1D(nodes, alpha * np.asarray(prof, dtype=np.float64))
    return prufer_count_interval(q)


def dirichlet_component_count(v: EdgePotentialField, alpha: float) -> int:
    """Sum of the per-edge Dirichlet counts (the edge-decoupled operator)."""
    return sum(edge_count(v, alpha, e).count for e in v.support)


def kirchhoff_vs_decoupled(
    v: EdgePotentialField, alpha: float, patch: ChessboardPatch
) -> tuple[int, int]:
    """Counts with shared vertex unknowns vs all vertices clamped, on one
    patch and mesh.  Clamping restricts the form domain, so the decoupled
    count never exceeds the Kirchhoff count."""
    full = ldlt_inertia(assemble_graph(v, alpha, patch)).negatives
    dec = ldlt_inertia(
        assemble_graph(v, alpha, patch, clamp_all_vertices=True)
    ).negatives
    return full, dec


@dataclass(frozen=True)
class DecouplingReport:
    alpha: float
    lhs: int
    lhs_converged: bool
    rhs_dirichlet: int
    rhs_lattice: int
    rhs_lattice_converged: bool
    boundary_flags: int

    @property
    def rhs(self) -> int:
        return self.rhs_dirichlet + self.rhs_lattice

    @property
    def all_converged(self) -> bool:
        return self.lhs_converged and self.rhs_lattice_converged

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs


def decoupling_check(
    v: EdgePotentialField,
    alpha: float,
    patch_max: int = 16,
    m: int = 16,
    lattice_box_max: int = 64,
) -> DecouplingReport:
    """Graph count at half coupling against the edge-decoupled count plus the
    lattice count with the summed-mass effective potential."""
    if alpha <= 0:
        raise ValueError("coupling must be positive")
    lhs = count_negative_graph(v, alpha / 2.0, patch_max=patch_max, m=m)
    boundary = sum(
        1 for e in v.support if edge_count(v, alpha, e).boundary_case
    )
    rhs_d = dirichlet_component_count(v, alpha)
    lat: LatticeCountResult = count_negative_lattice(
        edge_effective_lattice(v), alpha, box_max=lattice_box_max
    )
    return DecouplingReport(
        alpha=alpha,
        lhs=lhs.count,
        lhs_converged=lhs.converged and (lhs.refinement_stable is not False),
        rhs_dirichlet=rhs_d,
        rhs_lattice=lat.count,
        rhs_lattice_converged=lat.converged,
        boundary_flags=boundary,
    )


# ---------------------------------------------------------------------------
# Hardy ratio for piecewise-linear extensions

_GAUSS = leggauss(32)


def hardy_weight_point(x: float, y: float) -> float:
    r = math.hypot(x, y)
    return 1.0 / (r * r * math.log(r + 2.0) ** 2)


def graph_hardy_ratio(u: dict[Site, float]) -> float:
    """Energy over the Hardy-weighted L2 mass of the piecewise-linear
    extension of a lattice function with u(0,0) = 0."""
    if u.get((0, 0), 0.0) != 0.0:
        raise ValueError("test function must vanish at the origin")
    energy = sobolev_seminorm(u)
    nodes, wts = _GAUSS
    s = 0.5 * (nodes + 1.0)
    w = 0.5 * wts
    edges = set()
    for (x, y) in u:
        for nb in ((x + 1, y), (x, y + 1), (x - 1, y), (x, y - 1)):
            edges.add(canonical_edge((x, y), nb))
    mass = 0.0
    for (a, b) in edges:
        ua = u.get(a, 0.0)
        ub = u.get(b, 0.0)
        if ua == 0.0 and ub == 0.0:
            continue
        px = a[0] + s * (b[0] - a[0])
        py = a[1] + s * (b[1] - a[1])
        vals = (ua + s * (ub - ua)) ** 2
        wgt = np.array([hardy_weight_point(x, y) for x, y in zip(px, py)])
        mass += float(np.sum(w * vals * wgt))
    if mass == 0.0:
        raise ValueError("test function must be nonzero somewhere")
    return energy / mass
