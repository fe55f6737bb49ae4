"""The R^2 side: Q1 finite elements on Dirichlet boxes, the bilinear
lattice-to-plane interpolation with its exact cell energies, the smooth
cutoff near the origin, and the lattice-to-plane count comparison.

The mesh is aligned to the unit squares (integer box half-width, step
h = 1/m), so lifted lattice potentials are constant per element and their
weighted mass matrices are assembled exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import eigh

from .inertia import SymSkylineMatrix, ldlt_inertia, rcm_order
from .lattice import count_negative_lattice
from .potentials import LatticePotential, PlanePotential, Site, lift_lattice

# Q1 element matrices on a square cell, corner order SW, SE, NE, NW.
# The stiffness matrix is mesh-size independent in 2D.
STIFFNESS_Q1 = np.array(
    [
        [4.0, -1.0, -2.0, -1.0],
        [-1.0, 4.0, -1.0, -2.0],
        [-2.0, -1.0, 4.0, -1.0],
        [-1.0, -2.0, -1.0, 4.0],
    ]
) / 6.0
MASS_Q1 = np.array(
    [
        [4.0, 2.0, 1.0, 2.0],
        [2.0, 4.0, 2.0, 1.0],
        [1.0, 2.0, 4.0, 2.0],
        [2.0, 1.0, 2.0, 4.0],
    ]
) / 36.0


@dataclass(frozen=True)
class FemBox:
    """Square Dirichlet box [-R, R]^2 meshed with step h = 1/m."""

    half_width: int
    m: int = 8

    def __post_init__(self):
        if self.half_width < 1:
            raise ValueError("box half-width must be >= 1")
        if self.m < 1:
            raise ValueError("need at least one subdivision per unit")

    @property
    def h(self) -> float:
        return 1.0 / self.m

    @property
    def nodes_per_side(self) -> int:
        return 2 * self.half_width * self.m + 1


@dataclass(frozen=True)
class FemCountResult:
    boxes: tuple[int, ...]
    counts: tuple[int, ...]
    converged: bool
    m: int
    alpha: float
    refinement_stable: bool | None = None

    @property
    def count(self) -> int:
        return self.counts[-1]


# ---------------------------------------------------------------------------
# bilinear interpolation of lattice functions


def _cell_energy(sw, se, ne, nw):
    """Exact Dirichlet energy of the bilinear function with these corners."""
    a = se - sw  # bottom edge difference
    b = ne - nw  # top edge difference
    c = nw - sw  # left edge difference
    d = ne - se  # right edge difference
    return (a * a + a * b + b * b + c * c + c * d + d * d) / 3.0


class BilinearInterpolant:
    """Piecewise-bilinear extension of a finitely supported lattice function."""

    def __init__(self, u: Mapping[Site, float]):
        self.u = {(int(x), int(y)): float(v) for (x, y), v in u.items() if v != 0.0}
        cells = set()
        for (x, y) in self.u:
            for cx, cy in ((x, y), (x - 1, y), (x, y - 1), (x - 1, y - 1)):
                cells.add((cx, cy))
        self.cells = sorted(cells)

    def corner_values(self, cell):
        cx, cy = cell
        g = self.u.get
        return (
            g((cx, cy), 0.0),
            g((cx + 1, cy), 0.0),
            g((cx + 1, cy + 1), 0.0),
            g((cx, cy + 1), 0.0),
        )

    def dirichlet_energy(self) -> float:
        return sum(_cell_energy(*self.corner_values(c)) for c in self.cells)

    def value(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        cx = np.floor(x).astype(np.int64)
        cy = np.floor(y).astype(np.int64)
        fx = x - cx
        fy = y - cy
        out = np.zeros(np.broadcast(x, y).shape)
        it = np.nditer(out, flags=["multi_index"], op_flags=["writeonly"])
        for o in it:
            i = it.multi_index
            a, b = int(np.broadcast_to(cx, out.shape)[i]), int(
                np.broadcast_to(cy, out.shape)[i]
            )
            sw, se, ne, nw = self.corner_values((a, b))
            s = np.broadcast_to(fx, out.shape)[i]
            t = np.broadcast_to(fy, out.shape)[i]
            o[...] = (
                sw * (1 - s) * (1 - t)
                + se * s * (1 - t)
                + ne * s * t
                + nw * (1 - s) * t
            )
        return out if out.ndim else float(out)

    def gradient(self, cell, fx, fy):
        sw, se, ne, nw = self.corner_values(cell)
        gx = (se - sw) * (1 - fy) + (ne - nw) * fy
        gy = (nw - sw) * (1 - fx) + (ne - se) * fx
        return gx, gy

    def grid_dump(self, path, points_per_cell: int = 8) -> None:
        """Plain-text rows x y value over the support cells."""
        with open(path, "w") as fh:
            fh.write("# x y value\n")
            for (cx, cy) in self.cells:
                for i in range(points_per_cell + 1):
                    for j in range(points_per_cell + 1):
                        x = cx + i / points_per_cell
                        y = cy + j / points_per_cell
                        fh.write(f"{x} {y} {self.value(x, y)}\n")


def interpolate_J0(u: Mapping[Site, float]) -> BilinearInterpolant:
    """The unique piecewise-bilinear function matching u at the corners."""
    return BilinearInterpolant(u)


def cell_constants() -> tuple[float, float]:
    """Extreme ratios of cell Dirichlet energy to the squared-difference form
    over bilinear functions modulo constants (3x3 generalized eigenproblem)."""
    d4 = STIFFNESS_Q1  # energy form in corner coordinates
    q4 = np.array(
        [
            [2.0, -1.0, 0.0, -1.0],
            [-1.0, 2.0, -1.0, 0.0],
            [0.0, -1.0, 2.0, -1.0],
            [-1.0, 0.0, -1.0, 2.0],
        ]
    )
    basis = np.array(
        [
            [1.0, -1.0, 0.0, 0.0],
            [0.0, 1.0, -1.0, 0.0],
            [0.0, 0.0, 1.0, -1.0],
        ]
    ).T  # spans the complement of constants
    d3 = basis.T @ d4 @ basis
    q3 = basis.T @ q4 @ basis
    lam = eigh(d3, q3, eigvals_only=True)
    return float(lam[0]), float(lam[-1])


# ---------------------------------------------------------------------------
# cutoff


@dataclass(frozen=True)
class CutoffProfile:
    """Radial quintic smoothstep: 0 up to r0, 1 beyond r1 (defaults 1/4, 1/2)."""

    r0: float = 0.25
    r1: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.r0 <= self.r1:
            raise ValueError("need 0 <= r0 <= r1")
        if self.r1 > 1.0:
            raise ValueError("cutoff must settle within the four central cells")

    def __call__(self, rho):
        rho = np.asarray(rho, dtype=np.float64)
        if self.r1 == self.r0:
            out = np.where(rho >= self.r1, 1.0, 0.0)
            return out if out.ndim else float(out)
        s = np.clip((rho - self.r0) / (self.r1 - self.r0), 0.0, 1.0)
        out = s**3 * (10.0 - 15.0 * s + 6.0 * s * s)
        return out if out.ndim else float(out)

    def derivative(self, rho):
        rho = np.asarray(rho, dtype=np.float64)
        if self.r1 == self.r0:
            out = np.zeros_like(rho)
            return out if out.ndim else float(out)
        s = np.clip((rho - self.r0) / (self.r1 - self.r0), 0.0, 1.0)
        out = 30.0 * s * s * (1.0 - s) ** 2 / (self.r1 - self.r0)
        return out if out.ndim else float(out)


_CENTRAL_CELLS = ((0, 0), (-1, 0), (0, -1), (-1, -1))


class CutoffInterpolant:
    """Pointwise product psi * U0; energy exact off the central cells."""

    def __init__(self, u0: BilinearInterpolant, psi: CutoffProfile,
                 panels: int = 8, gauss: int = 4):
        self.u0 = u0
        self.psi = psi
        self.panels = panels
        self.gauss = gauss

    def value(self, x, y):
        rho = np.hypot(np.asarray(x, float), np.asarray(y, float))
        return self.psi(rho) * self.u0.value(x, y)

    def dirichlet_energy(self) -> float:
        total = 0.0
        for cell in self.u0.cells:
            if cell in _CENTRAL_CELLS:
                continue
            total += _cell_energy(*self.u0.corner_values(cell))
        for cell in _CENTRAL_CELLS:
            total += self._central_cell_energy(cell)
        return total

    def _central_cell_energy(self, cell) -> float:
        sw, se, ne, nw = self.u0.corner_values(cell)
        if sw == se == ne == nw == 0.0:
            return 0.0
        nodes, wts = leggauss(self.gauss)
        h = 1.0 / self.panels
        offs = (np.arange(self.panels) + 0.5) * h
        f = (offs[:, None] + nodes[None, :] * h / 2).reshape(-1)  # in (0, 1)
        w1 = np.tile(wts * h / 2, self.panels)
        fx, fy = np.meshgrid(f, f, indexing="ij")
        wgt = np.outer(w1, w1)
        x = cell[0] + fx
        y = cell[1] + fy
        rho = np.hypot(x, y)
        u = (
            sw * (1 - fx) * (1 - fy)
            + se * fx * (1 - fy)
            + ne * fx * fy
            + nw * (1 - fx) * fy
        )
        ux = (se - sw) * (1 - fy) + (ne - nw) * fy
        uy = (nw - sw) * (1 - fx) + (ne - se) * fx
        p = self.psi(rho)
        dp = self.psi.derivative(rho)
        with np.errstate(invalid="ignore", divide="ignore"):
            nx = np.where(rho > 0, x / rho, 0.0)
            ny = np.where(rho > 0, y / rho, 0.0)
        gx = p * ux + u * dp * nx
        gy = p * uy + u * dp * ny
        return float(np.sum(wgt * (gx * gx + gy * gy)))


def apply_cutoff(u0: BilinearInterpolant, psi: CutoffProfile | None = None) -> CutoffInterpolant:
    return CutoffInterpolant(u0, psi or CutoffProfile())


# ---------------------------------------------------------------------------
# assembly and counting


def _element_potentials(v: PlanePotential, box: FemBox) -> np.ndarray:
    """Per-element potential value: exact for unit-square lifts, midpoint else."""
    n_el = 2 * box.half_width * box.m
    h = box.h
    centers = -box.half_width + (np.arange(n_el) + 0.5) * h
    cx, cy = np.meshgrid(centers, centers, indexing="ij")
    return np.asarray(v.value_xy(cx, cy), dtype=np.float64)


def assemble_fem(
    v: PlanePotential | None,
    alpha: float,
    box: FemBox,
    sigma: float = 0.0,
) -> SymSkylineMatrix:
    """Stiffness minus alpha * (potential-weighted mass) minus sigma * mass,
    Q1 elements, Dirichlet boundary, RCM-ordered.

    Counting the pencil eigenvalues below sigma reduces to the inertia of
    this matrix at shift 0 because the mass matrix is positive definite.
    """
    if v is not None and v.support_radius > box.half_width:
        raise ValueError(
            f"support radius {v.support_radius} escapes the R={box.half_width} box"
        )
    nps = box.nodes_per_side
    n_el = nps - 1
    h = box.h

    def unknown_ids():
        ids = -np.ones((nps, nps), dtype=np.int64)
        inner = np.arange(1, nps - 1)
        ids[np.ix_(inner, inner)] = np.arange(inner.size**2).reshape(
            inner.size, inner.size
        )
        return ids, inner.size**2

    ids, n_unknown = unknown_ids()
    ex, ey = np.meshgrid(np.arange(n_el), np.arange(n_el), indexing="ij")
    corner_nodes = np.stack(
        [
            ids[ex, ey],  # SW
            ids[ex + 1, ey],  # SE
            ids[ex + 1, ey + 1],  # NE
            ids[ex, ey + 1],  # NW
        ],
        axis=-1,
    ).reshape(-1, 4)
    if v is not None and alpha != 0.0:
        vel = alpha * _element_potentials(v, box).reshape(-1)
    else:
        vel = np.zeros(corner_nodes.shape[0])
    rows, cols, vals = [], [], []
    mass_scale = h * h
    for a in range(4):
        for b in range(a, 4):
            coef = STIFFNESS_Q1[a, b] - (vel + sigma) * mass_scale * MASS_Q1[a, b]
            ia = corner_nodes[:, a]
            ib = corner_nodes[:, b]
            keep = (ia >= 0) & (ib >= 0)
            rows.append(ia[keep])
            cols.append(ib[keep])
            vals.append(coef[keep])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    order = rcm_order((n_unknown, rows, cols))
    return SymSkylineMatrix.from_coo(n_unknown, rows, cols, vals, perm=order.perm)


def count_negative_fem(
    v: PlanePotential,
    alpha: float,
    box_max: int = 16,
    m: int = 8,
    check_refinement: bool = False,
) -> FemCountResult:
    """Counts over doubling Dirichlet boxes at fixed mesh; Dirichlet-monotone
    in R.  Optionally re-counts the final box at 2m to flag mesh stability."""
    if alpha < 0:
        raise ValueError("coupling must be >= 0")
    r_start = max(2, int(math.ceil(v.support_radius - 1e-12)))
    if r_start > box_max:
        raise ValueError(
            f"support radius {v.support_radius} needs a box beyond box_max={box_max}"
        )
    boxes, counts = [], []
    r = r_start
    while r <= box_max:
        mat = assemble_fem(v, alpha, FemBox(r, m))
        counts.append(ldlt_inertia(mat).negatives)
        boxes.append(r)
        if len(counts) >= 2 and counts[-1] == counts[-2]:
            break
        r *= 2
    converged = len(counts) >= 2 and counts[-1] == counts[-2]
    refinement = None
    if check_refinement:
        fine = ldlt_inertia(assemble_fem(v, alpha, FemBox(boxes[-1], 2 * m))).negatives
        refinement = fine == counts[-1]
    return FemCountResult(
        tuple(boxes), tuple(counts), converged, m, alpha, refinement
    )


def count_below_energy(
    v: PlanePotential | None, alpha: float, box: FemBox, sigma: float
) -> int:
    """Pencil eigenvalues below sigma on the given box (mass-matrix pencil)."""
    return ldlt_inertia(assemble_fem(v, alpha, box, sigma=sigma)).negatives


# ---------------------------------------------------------------------------
# lattice -> plane count comparison


@dataclass(frozen=True)
class CarryoverReport:
    alpha: float
    lattice_count: int
    lattice_converged: bool
    fem_counts: tuple[tuple[float, int], ...]  # (gamma, count)
    least_gamma: float | None
    holds_at_max: bool


def carryover_check(
    v0: LatticePotential,
    alpha: float,
    gamma_grid=(0.5, 1.0, 2.0, 4.0),
    box_max: int = 16,
    m: int = 8,
    lattice_box_max: int = 64,
) -> CarryoverReport:
    """Compare the lattice count with plane counts of the lifted potential
    scaled by each gamma; report the least grid gamma that dominates."""
    if alpha <= 0:
        raise ValueError("coupling must be positive")
    gamma_grid = tuple(sorted(gamma_grid))
    lat = count_negative_lattice(v0, alpha, box_max=lattice_box_max)
    lifted = lift_lattice(v0)
    fem_counts = []
    least = None
    for g in gamma_grid:
        res = count_negative_fem(lifted, g * alpha, box_max=box_max, m=m)
        fem_counts.append((g, res.count))
        if least is None and res.count >= lat.count:
            least = g
    holds = fem_counts[-1][1] >= lat.count if fem_counts else lat.count == 0
    return CarryoverReport(
        alpha=alpha,
        lattice_count=lat.count,
        lattice_converged=lat.converged,
        fem_counts=tuple(fem_counts),
        least_gamma=least,
        holds_at_max=holds,
    )
