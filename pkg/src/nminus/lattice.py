"""The discrete operator on Z^2: assembly, counting, seminorm, Hardy ratios.

The quadratic form is the nearest-neighbor difference sum (both axis
directions), truncated to Dirichlet boxes [-L, L]^2.  Truncation restricts
the form domain, so box counts are monotone lower bounds of the full count
and become exact once they stop moving.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.linalg import eigsh

from .inertia import SymSkylineMatrix, count_below, ldlt_inertia, rcm_order
from .potentials import LatticePotential, Site


@dataclass(frozen=True)
class BoxTruncation:
    """Dirichlet box [-L, L]^2; sites outside are clamped to zero."""

    half_width: int

    def __post_init__(self):
        if self.half_width < 1:
            raise ValueError("box half-width must be >= 1")

    @property
    def sites(self) -> int:
        return (2 * self.half_width + 1) ** 2


@dataclass(frozen=True)
class LatticeCountResult:
    """Counts per box size; converged means the last two boxes agree
    (claimed only for support strictly inside the box and alpha >= 1)."""

    boxes: tuple[int, ...]
    counts: tuple[int, ...]
    converged: bool
    rank_bound: int
    alpha: float

    @property
    def count(self) -> int:
        return self.counts[-1]


def _box_indexer(L: int):
    width = 2 * L + 1

    def idx(x: int, y: int) -> int:
        return (x + L) * width + (y + L)

    return idx, width * width


def _assemble_entries(v: LatticePotential, alpha: float, L: int):
    idx, n = _box_indexer(L)
    rows, cols, vals = [], [], []
    width = 2 * L + 1
    for x in range(-L, L + 1):
        for y in range(-L, L + 1):
            i = idx(x, y)
            rows.append(i)
            cols.append(i)
            vals.append(4.0 - alpha * v.value((x, y)))
            if x < L:
                rows.append(i)
                cols.append(idx(x + 1, y))
                vals.append(-1.0)
            if y < L:
                rows.append(i)
                cols.append(idx(x, y + 1))
                vals.append(-1.0)
    return n, np.array(rows), np.array(cols), np.array(vals, dtype=np.float64)


def assemble_lattice(
    v: LatticePotential, alpha: float, box: BoxTruncation
) -> SymSkylineMatrix:
    """Matrix of the Dirichlet-truncated form; diagonal 4 - alpha V(x),
    off-diagonal -1 per nearest-neighbor pair, rows RCM-ordered."""
    if alpha < 0:
        raise ValueError("coupling must be >= 0")
    L = box.half_width
    if v.bounding_halfwidth() >= L and v.support:
        warnings.warn(
            f"support reaches the boundary of the L={L} box; counts are "
            "lower bounds only",
            stacklevel=2,
        )
    n, rows, cols, vals = _assemble_entries(v, alpha, L)
    order = rcm_order((n, rows, cols))
    return SymSkylineMatrix.from_coo(n, rows, cols, vals, perm=order.perm)


def count_negative_lattice(
    v: LatticePotential,
    alpha: float,
    box_max: int = 64,
    box_start: int = 2,
) -> LatticeCountResult:
    """Negative count over doubling Dirichlet boxes, stopping when two
    consecutive boxes agree.  Non-convergence is flagged, not raised."""
    if alpha <= 0:
        return LatticeCountResult((box_start,), (0,), True, len(v.support), alpha)
    if not v.support:
        return LatticeCountResult((box_start,), (0,), True, 0, alpha)
    boxes, counts = [], []
    L = box_start
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        while L <= box_max:
            m = assemble_lattice(v, alpha, BoxTruncation(L))
            counts.append(ldlt_inertia(m).negatives)
            boxes.append(L)
            if len(counts) >= 2 and counts[-1] == counts[-2] and _inside(v, boxes[-2]):
                break
            L *= 2
    converged = (
        len(counts) >= 2
        and counts[-1] == counts[-2]
        and _inside(v, boxes[-2])
        and alpha >= 1.0
    )
    return LatticeCountResult(
        tuple(boxes), tuple(counts), converged, len(v.support), alpha
    )


def _inside(v: LatticePotential, L: int) -> bool:
    return v.bounding_halfwidth() < L


def count_at_shift(v: LatticePotential, alpha: float, L: int, sigma: float) -> int:
    """Eigenvalues of the box operator strictly below sigma."""
    m = assemble_lattice(v, alpha, BoxTruncation(L))
    return count_below(m, sigma)


# ---------------------------------------------------------------------------
# seminorm and Hardy machinery


def sobolev_seminorm(u: Mapping[Site, float]) -> float:
    """Sum over both axis directions of squared nearest-neighbor differences."""
    total = 0.0
    for (x, y), val in u.items():
        for nb in ((x + 1, y), (x, y + 1)):
            total += (u.get(nb, 0.0) - val) ** 2
        for nb in ((x - 1, y), (x, y - 1)):
            if nb not in u:
                total += val * val
    return total


def hardy_weight(site: Site) -> float:
    """|x|^{-2} (log(|x| + 2))^{-2}; undefined at the origin."""
    r = math.hypot(*site)
    if r == 0:
        raise ValueError("Hardy weight is singular at the origin")
    return 1.0 / (r * r * math.log(r + 2.0) ** 2)


def hardy_ratio(u: Mapping[Site, float]) -> float:
    """Seminorm over the Hardy-weighted square sum, for u with u(0,0) = 0."""
    if u.get((0, 0), 0.0) != 0.0:
        raise ValueError("test function must vanish at the origin")
    num = sobolev_seminorm(u)
    den = sum(val * val * hardy_weight(s) for s, val in u.items() if s != (0, 0))
    if den == 0.0:
        raise ValueError("test function must be nonzero away from the origin")
    return num / den


def hardy_min_ratio(L: int) -> float:
    """Smallest generalized eigenvalue of (seminorm form, weight form) on the
    box with the origin unknown removed; a decreasing-in-L upper estimate of
    the best Hardy constant."""
    idx, n = _box_indexer(L)
    origin = idx(0, 0)
    keep = np.concatenate((np.arange(origin), np.arange(origin + 1, n)))
    remap = -np.ones(n, dtype=np.int64)
    remap[keep] = np.arange(n - 1)
    _, rows, cols, vals = _assemble_entries(LatticePotential({}), 0.0, L)
    mask = (remap[rows] >= 0) & (remap[cols] >= 0)
    k = csr_matrix(
        (vals[mask], (remap[rows[mask]], remap[cols[mask]])), shape=(n - 1, n - 1)
    )
    k = k + k.T - csr_matrix(
        (k.diagonal(), (np.arange(n - 1), np.arange(n - 1))), shape=k.shape
    )
    w = np.empty(n - 1)
    for x in range(-L, L + 1):
        for y in range(-L, L + 1):
            if (x, y) == (0, 0):
                continue
            w[remap[idx(x, y)]] = hardy_weight((x, y))
    dhalf = 1.0 / np.sqrt(w)
    b = csr_matrix(k.multiply(dhalf[:, None]).multiply(dhalf[None, :]))
    lam = eigsh(b, k=1, sigma=0.0, which="LM", return_eigenvectors=False)
    return float(lam[0])
