"""Eigenvalue counting for symmetric matrices via LDL^T inertia.

Every discretized Hamiltonian in the workbench is reduced to a
:class:`SymSkylineMatrix`; the number of its eigenvalues below a shift is
read off the pivot signs of an envelope LDL^T factorization (Sylvester's
law of inertia).  No eigenvectors, no iterative solvers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import reverse_cuthill_mckee

from ._kernels import envelope_fill, ldlt_envelope

DEFAULT_ZERO_TOL = 1e-12
DEFAULT_PERT_SCALE = 1e-10


class FactorizationError(RuntimeError):
    """Raised when the factorization stays blocked after all retries."""


@dataclass(frozen=True)
class InertiaResult:
    """Signature (negatives, zeros, positives) of ``m - shift*I``.

    Pivots with ``|pivot| <= tol * max|entry|`` count as zeros.  When a
    zero pivot blocks the plain factorization (the shift sits on an exact
    eigenvalue of a leading minor), the count is re-derived from the two
    side shifts ``shift -/+ eps``: negatives from the lower side, zeros as
    the number of eigenvalues caught between the two.  The jitter magnitude
    is reported in ``perturbation_used``; ``negatives`` is then certified
    only up to ``zeros``.
    """

    negatives: int
    zeros: int
    positives: int
    shift: float
    perturbation_used: float

    @property
    def dimension(self) -> int:
        return self.negatives + self.zeros + self.positives


@dataclass(frozen=True)
class OrderingResult:
    perm: np.ndarray
    envelope_before: int
    envelope_after: int


class SymSkylineMatrix:
    """Symmetric matrix stored as the row envelope of its lower triangle.

    Row i holds columns start[i]..i contiguously; the diagonal entry is
    always stored.  Instances are immutable; factorizations work on copies.
    """

    def __init__(self, n: int, start: np.ndarray, ptr: np.ndarray, data: np.ndarray):
        self.n = int(n)
        self.start = start
        self.ptr = ptr
        self.data = data
        for a in (start, ptr, data):
            a.flags.writeable = False

    @classmethod
    def from_coo(cls, n, rows, cols, vals, perm=None) -> "SymSkylineMatrix":
        """Build from symmetric COO triples (each unordered pair given once).

        ``perm`` relabels indices: new position k corresponds to old index
        perm[k] (the convention of scipy's reverse_cuthill_mckee).
        """
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if not np.all(np.isfinite(vals)):
            raise ValueError("matrix entries must be finite")
        if perm is not None:
            pos = np.empty(n, dtype=np.int64)
            pos[np.asarray(perm, dtype=np.int64)] = np.arange(n, dtype=np.int64)
            rows = pos[rows]
            cols = pos[cols]
        lo = np.minimum(rows, cols)
        hi = np.maximum(rows, cols)
        start = np.arange(n, dtype=np.int64)
        if hi.size:
            np.minimum.at(start, hi, lo)
        counts = np.arange(n, dtype=np.int64) - start + 1
        ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=ptr[1:])
        data = np.zeros(ptr[-1], dtype=np.float64)
        envelope_fill(start, ptr, hi, lo, vals, data)
        return cls(n, start, ptr, data)

    @classmethod
    def from_dense(cls, a) -> "SymSkylineMatrix":
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("expected a square matrix")
        if not np.allclose(a, a.T, atol=0.0, rtol=0.0, equal_nan=True):
            raise ValueError("expected an exactly symmetric matrix")
        n = a.shape[0]
        rows, cols = np.tril_indices(n)
        mask = (a[rows, cols] != 0.0) | (rows == cols)
        return cls.from_coo(n, rows[mask], cols[mask], a[rows, cols][mask])

    @property
    def diag_index(self) -> np.ndarray:
        return self.ptr[1:] - 1

    def envelope_size(self) -> int:
        return int(self.ptr[-1])

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.data))) if self.data.size else 0.0

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for i in range(self.n):
            js = np.arange(self.start[i], i + 1)
            row = self.data[self.ptr[i]: self.ptr[i + 1]]
            a[i, js] = row
            a[js, i] = row
        return a

    def to_matrix_market(self, path) -> None:
        """Dump the stored lower triangle in Matrix Market coordinate format."""
        with open(path, "w") as fh:
            fh.write("%%MatrixMarket matrix coordinate real symmetric\n")
            nz = []
            for i in range(self.n):
                row = self.data[self.ptr[i]: self.ptr[i + 1]]
                for off, v in enumerate(row):
                    j = self.start[i] + off
                    if v != 0.0 or j == i:
                        nz.append((i + 1, j + 1, v))
            fh.write(f"{self.n} {self.n} {len(nz)}\n")
            for i, j, v in nz:
                fh.write(f"{i} {j} {float(v)!r}\n")


def _pattern_to_csr(pattern):
    """Accept a scipy sparse matrix, dense array, or (n, rows, cols) triple."""
    if isinstance(pattern, tuple) and len(pattern) == 3:
        n, rows, cols = pattern
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        data = np.ones(rows.size, dtype=np.int8)
        g = csr_matrix((data, (rows, cols)), shape=(n, n))
        return g + g.T
    if isinstance(pattern, np.ndarray):
        return csr_matrix(pattern != 0.0)
    return csr_matrix(pattern)


def _envelope_of(csr, order=None) -> int:
    n = csr.shape[0]
    coo = csr.tocoo()
    if order is None:
        pi, pj = coo.row.astype(np.int64), coo.col.astype(np.int64)
    else:
        pos = np.empty(n, dtype=np.int64)
        pos[np.asarray(order, dtype=np.int64)] = np.arange(n, dtype=np.int64)
        pi, pj = pos[coo.row], pos[coo.col]
    lo = np.minimum(pi, pj)
    hi = np.maximum(pi, pj)
    first = np.arange(n, dtype=np.int64)
    if hi.size:
        np.minimum.at(first, hi, lo)
    return int(np.sum(np.arange(n) - first + 1))


def rcm_order(pattern) -> OrderingResult:
    """Reverse Cuthill-McKee ordering of a symmetric sparsity pattern.

    Falls back to the identity if (on a pathological pattern) the permuted
    envelope would exceed the original, so the reported envelope size never
    increases.
    """
    g = _pattern_to_csr(pattern)
    before = _envelope_of(g)
    perm = reverse_cuthill_mckee(g, symmetric_mode=True).astype(np.int64)
    after = _envelope_of(g, perm)
    if after > before:
        perm = np.arange(g.shape[0], dtype=np.int64)
        after = before
    return OrderingResult(perm=perm, envelope_before=before, envelope_after=after)


def _pivot_signs(m: SymSkylineMatrix, shift: float, ztol: float):
    """Pivot sign counts of ``m - shift*I`` or None if a zero pivot blocks."""
    work = m.data.copy()
    if shift != 0.0:
        work[m.diag_index] -= shift
    d = np.empty(m.n, dtype=np.float64)
    if ldlt_envelope(m.start, m.ptr, work, d, ztol) >= 0:
        return None
    negatives = int(np.count_nonzero(d < -ztol))
    zeros = int(np.count_nonzero(np.abs(d) <= ztol))
    return negatives, zeros, m.n - negatives - zeros


def ldlt_inertia(
    m: SymSkylineMatrix,
    shift: float = 0.0,
    *,
    zero_tol: float = DEFAULT_ZERO_TOL,
    pert_scale: float = DEFAULT_PERT_SCALE,
    max_retries: int = 4,
) -> InertiaResult:
    """Inertia of ``m - shift*I`` from envelope LDL^T pivots.

    Uses no pivoting.  A blocked zero pivot means the shift sits on an
    eigenvalue of some leading minor; the fallback factors at the two side
    shifts ``shift -/+ eps`` (eps = ``pert_scale * max|entry|``, escalated
    tenfold per retry) and brackets: negatives below the lower side are
    certainly negative, eigenvalues caught in the window are reported as
    zeros.  Deterministic, so repeated calls agree.
    """
    if m.n == 0:
        return InertiaResult(0, 0, 0, float(shift), 0.0)
    if shift != 0.0:
        scale_diag = m.data[m.diag_index] - shift
        scale = max(
            float(np.max(np.abs(m.data))), float(np.max(np.abs(scale_diag)))
        )
    else:
        scale = float(np.max(np.abs(m.data))) if m.data.size else 0.0
    if scale == 0.0:
        return InertiaResult(0, m.n, 0, float(shift), 0.0)
    ztol = zero_tol * scale
    direct = _pivot_signs(m, shift, ztol)
    if direct is not None:
        neg, zer, pos = direct
        return InertiaResult(neg, zer, pos, float(shift), 0.0)
    for attempt in range(1, max_retries + 1):
        eps = pert_scale * scale * 10.0 ** (attempt - 1)
        below = _pivot_signs(m, shift - eps, ztol)
        above = _pivot_signs(m, shift + eps, ztol)
        if below is None or above is None:
            continue
        negatives = below[0]
        zeros = max(above[0] + above[1] - negatives, below[1])
        return InertiaResult(
            negatives, zeros, m.n - negatives - zeros, float(shift), eps
        )
    raise FactorizationError(
        f"zero pivot persisted after {max_retries} jittered retries"
    )


def count_below(m: SymSkylineMatrix, sigma: float, **kw) -> int:
    """Number of eigenvalues of ``m`` strictly below ``sigma``."""
    return ldlt_inertia(m, sigma, **kw).negatives
