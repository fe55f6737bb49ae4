"""Eigenvalue-bound functionals: Orlicz norms, sequence quasinorms, and
the weighted sums/integrals the counted eigenvalue numbers are tested
against.

The complementary pair of N-functions used throughout is
B(t) = (1+t)log(1+t) - t and A(t) = exp(t) - t - 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad
from scipy.optimize import brentq

from .potentials import (
    EdgePotentialField,
    EffectivePotential1D,
    LatticePotential,
    PlanePotential,
    edge_origin_distance,
    effective_g,
    radial_split,
)

# ---------------------------------------------------------------------------
# the N-function pair


def orlicz_b(t):
    t = np.asarray(t, dtype=np.float64)
    out = (1.0 + t) * np.log1p(t) - t
    return out if out.ndim else float(out)


def orlicz_a(t):
    t = np.asarray(t, dtype=np.float64)
    out = np.expm1(t) - t
    return out if out.ndim else float(out)


def orlicz_a_inv(y: float) -> float:
    """Inverse of A(t) = exp(t) - t - 1 on t >= 0, by bracketed root finding."""
    if y < 0:
        raise ValueError("A is nonnegative")
    if y == 0:
        return 0.0
    hi = 1.0
    while orlicz_a(hi) < y:
        hi *= 2.0
    return float(brentq(lambda t: orlicz_a(t) - y, 0.0, hi, xtol=1e-15, rtol=8.9e-16))


@dataclass(frozen=True)
class OrliczPair:
    """The complementary pair with evaluators and the numeric inverse of A."""

    b = staticmethod(orlicz_b)
    a = staticmethod(orlicz_a)
    a_inv = staticmethod(orlicz_a_inv)


# ---------------------------------------------------------------------------
# averaged Orlicz norm of piecewise-constant functions


@dataclass(frozen=True)
class AveragedNormResult:
    value: float
    multiplier: float  # Lagrange multiplier of the budget constraint
    residual: float  # achieved |budget - |E|| of the maximizer

    def __float__(self):
        return self.value


def averaged_orlicz_norm(values, measures, domain_measure: float) -> AveragedNormResult:
    """sup { integral(v g) : integral(A(|g|)) <= |E| } for piecewise-constant v >= 0.

    The maximizer is g = log(1 + v / lam) with lam > 0 chosen so the budget
    is met with equality; for piecewise-constant v this dual form is exact.
    Uses A(log(1 + x)) = x - log(1 + x) to keep the budget equation stable.
    """
    v = np.asarray(values, dtype=np.float64)
    m = np.asarray(measures, dtype=np.float64)
    if v.shape != m.shape:
        raise ValueError("values and measures must align")
    if np.any(v < 0) or np.any(m < 0):
        raise ValueError("values and measures must be >= 0")
    if domain_measure <= 0:
        raise ValueError("domain measure must be positive")
    keep = (v > 0) & (m > 0)
    v = v[keep]
    m = m[keep]
    if v.size == 0:
        return AveragedNormResult(0.0, math.inf, 0.0)

    def budget(lam):
        x = v / lam
        return float(np.sum(m * (x - np.log1p(x)))) - domain_measure

    lam0 = float(np.sum(m * v)) / domain_measure  # budget(lam0) <= 0
    lo = hi = max(lam0, 1e-300)
    while budget(lo) <= 0.0:
        lo /= 16.0
        if lo < 1e-280:
            break
    while budget(hi) > 0.0:
        hi *= 16.0
    lam = float(brentq(budget, lo, hi, xtol=1e-300, rtol=8.9e-16))
    value = float(np.sum(m * v * np.log1p(v / lam)))
    return AveragedNormResult(value, lam, abs(budget(lam)))


def luxemburg_norm(values, measures) -> float:
    """inf { k > 0 : integral(B(|v|/k)) <= 1 } for piecewise-constant v."""
    v = np.asarray(values, dtype=np.float64)
    m = np.asarray(measures, dtype=np.float64)
    keep = (v > 0) & (m > 0)
    v = v[keep]
    m = m[keep]
    if v.size == 0:
        return 0.0

    def excess(k):
        return float(np.sum(m * orlicz_b(v / k))) - 1.0

    hi = max(float(np.max(v)), 1.0)
    while excess(hi) > 0.0:
        hi *= 4.0
    lo = hi
    while excess(lo) <= 0.0:
        lo /= 4.0
        if lo < 1e-280:
            break
    return float(brentq(excess, lo, hi, xtol=1e-300, rtol=8.9e-16))


# ---------------------------------------------------------------------------
# sequence functionals


@dataclass(frozen=True)
class ZetaSequence:
    """Weighted integrals of a 1D effective potential over dyadic-in-log bins."""

    values: np.ndarray
    truncation_index: int

    def __post_init__(self):
        self.values.flags.writeable = False


def _pl_integral(nodes, vals, a: float, b: float, weight: str = "one") -> float:
    """Exact integral of the piecewise-linear tabulation times 1 or |t|."""
    a = max(a, float(nodes[0]))
    b = min(b, float(nodes[-1]))
    if b <= a:
        return 0.0
    inner = nodes[(nodes > a) & (nodes < b)]
    pts = np.concatenate(([a], inner, [b]))
    if weight == "abs_t" and pts[0] < 0.0 < pts[-1]:
        pts = np.unique(np.concatenate((pts, [0.0])))
    g = np.interp(pts, nodes, vals, left=0.0, right=0.0)
    t0, t1 = pts[:-1], pts[1:]
    g0, g1 = g[:-1], g[1:]
    if weight == "one":
        return float(np.sum((t1 - t0) * (g0 + g1) / 2.0))
    dt = t1 - t0
    slope = (g1 - g0) / dt
    const = g0 - slope * t0
    seg = const * (t1**2 - t0**2) / 2.0 + slope * (t1**3 - t0**3) / 3.0
    sign = np.where(t0 >= 0.0, 1.0, -1.0)
    return float(np.sum(sign * seg))


def zeta_sequence(g: EffectivePotential1D) -> ZetaSequence:
    """Bin integrals: index 0 is the plain integral over (-1, 1); index j >= 1
    integrates |t| g(t) over |t| in (e^{j-1}, e^j)."""
    extent = g.support_extent()
    j_max = max(int(math.ceil(math.log(max(extent, 1.0)))) + 1, 1)
    out = np.zeros(j_max + 1)
    out[0] = _pl_integral(g.t_nodes, g.values, -1.0, 1.0, "one")
    for j in range(1, j_max + 1):
        lo, hi = math.exp(j - 1), math.exp(j)
        out[j] = _pl_integral(g.t_nodes, g.values, lo, hi, "abs_t") + _pl_integral(
            g.t_nodes, g.values, -hi, -lo, "abs_t"
        )
    return ZetaSequence(out, j_max)


def weak_l1(seq) -> float:
    """sup_{s>0} s * #{j : seq_j > s}, computed as max_k k * (k-th largest)."""
    a = np.sort(np.asarray(seq, dtype=np.float64))[::-1]
    a = a[a > 0]
    if a.size == 0:
        return 0.0
    return float(np.max(np.arange(1, a.size + 1) * a))


# ---------------------------------------------------------------------------
# annuli partition and the averaged-norm sequence


def annulus_bounds(k: int) -> tuple[float, float]:
    if k == 0:
        return 0.0, 1.0
    return 2.0 ** (k - 1), 2.0**k


def annulus_area(k: int) -> float:
    lo, hi = annulus_bounds(k)
    return math.pi * (hi * hi - lo * lo)


def disk_square_area(rho: float, x0: float, y0: float, side: float = 1.0) -> float:
    """Area of the square [x0, x0+side] x [y0, y0+side] inside radius rho."""
    if rho <= 0:
        return 0.0
    x1, y1 = x0 + side, y0 + side
    cx = min(max(0.0, x0), x1)
    cy = min(max(0.0, y0), y1)
    if math.hypot(cx, cy) >= rho:
        return 0.0
    far = max(math.hypot(px, py) for px in (x0, x1) for py in (y0, y1))
    if far <= rho:
        return side * side

    def chord(x):
        g = math.sqrt(max(rho * rho - x * x, 0.0))
        return max(0.0, min(y1, g) - max(y0, -g))

    a = max(x0, -rho)
    b = min(x1, rho)
    pts = [0.0]
    for y in (abs(y0), abs(y1)):
        if y < rho:
            pts.append(math.sqrt(rho * rho - y * y))
            pts.append(-math.sqrt(rho * rho - y * y))
    pts = sorted(p for p in pts if a < p < b)
    val, _ = quad(chord, a, b, points=pts or None, limit=200)
    return float(val)


_RADIUS_PARAMS = ("radius", "r_inner", "r_outer", "cutoff")


def _pieces_in_ring(v: PlanePotential, r_in: float, r_out: float):
    """(values, measures) of a piecewise-constant model of v on the ring."""
    prof = v.radial_profile()
    if prof is not None:
        jumps = [v.params[k] for k in _RADIUS_PARAMS if v.params.get(k, 0) > 0]
        lo = max(r_in, 0.0)
        hi = min(r_out, v.support_radius)
        if hi <= lo:
            return np.zeros(0), np.zeros(0)
        nodes = np.unique(
            np.concatenate(
                (np.linspace(lo, hi, 257), [j for j in jumps if lo < j < hi])
            )
        )
        mids = 0.5 * (nodes[:-1] + nodes[1:])
        vals = np.asarray(prof(mids), dtype=np.float64)
        meas = math.pi * (nodes[1:] ** 2 - nodes[:-1] ** 2)
        return vals, meas
    if v.kind == "lattice-lift":
        vals, meas = [], []
        for (x, y), w in v.lattice.entries.items():
            m = disk_square_area(r_out, x, y) - disk_square_area(r_in, x, y)
            if m > 1e-14:
                vals.append(w)
                meas.append(m)
        return np.asarray(vals), np.asarray(meas)
    if v.kind == "polar-grid":
        g = v.grid
        r = g.r
        lo = np.maximum(r[:-1], r_in)
        hi = np.minimum(r[1:], r_out)
        keep = hi > lo
        if not np.any(keep):
            return np.zeros(0), np.zeros(0)
        ring = math.pi * (hi[keep] ** 2 - lo[keep] ** 2) / g.theta.size
        centers = 0.5 * (g.values[:-1][keep] + g.values[1:][keep])
        vals = centers.reshape(-1)
        meas = np.repeat(ring, g.theta.size)
        return vals, meas
    raise ValueError(f"no ring decomposition for kind {v.kind!r}")


@dataclass(frozen=True)
class MuSequence:
    values: np.ndarray

    def __post_init__(self):
        self.values.flags.writeable = False

    def l1(self) -> float:
        return float(np.sum(self.values))


def mu_sequence(v: PlanePotential) -> MuSequence:
    """Averaged Orlicz norms of v over the dyadic annuli."""
    k_max = max(int(math.ceil(math.log2(max(v.support_radius, 1.0)))) + 1, 1)
    out = np.zeros(k_max + 1)
    for k in range(k_max + 1):
        vals, meas = _pieces_in_ring(v, *annulus_bounds(k))
        if vals.size:
            out[k] = averaged_orlicz_norm(vals, meas, annulus_area(k)).value
    return MuSequence(out)


# ---------------------------------------------------------------------------
# the weighted-sum functionals


def mv_functional(v: LatticePotential) -> float:
    """Sum of V(x) log(2 + |x|) over the lattice support (natural log)."""
    return float(
        sum(w * math.log(2.0 + math.hypot(x, y)) for (x, y), w in v.entries.items())
    )


@dataclass(frozen=True)
class Mz94Terms:
    mu_l1: float
    log_integral: float


_CORNER_SQUARE_LOGWEIGHT = None


def _corner_square_logweight() -> float:
    """integral of |log r| over a unit square with one corner at the origin."""
    global _CORNER_SQUARE_LOGWEIGHT
    if _CORNER_SQUARE_LOGWEIGHT is None:

        def inner(theta):
            R = 1.0 / math.cos(theta)
            return R * R / 2.0 * math.log(R) - R * R / 4.0 + 0.5

        val, _ = quad(inner, 0.0, math.pi / 4.0, limit=100)
        _CORNER_SQUARE_LOGWEIGHT = 2.0 * val
    return _CORNER_SQUARE_LOGWEIGHT


def _square_log_integral(x0: int, y0: int) -> float:
    """integral of |log r| over the unit square [x0, x0+1] x [y0, y0+1]."""
    if (x0, y0) in ((0, 0), (-1, 0), (-1, -1), (0, -1)):
        return _corner_square_logweight()
    near = math.hypot(min(max(0, x0), x0 + 1), min(max(0, y0), y0 + 1))
    far = max(math.hypot(px, py) for px in (x0, x0 + 1) for py in (y0, y0 + 1))
    panels = 16 if near < 1.0 < far else 3  # finer split across the log kink
    nodes, wts = leggauss(5)
    h = 1.0 / panels
    offs = (np.arange(panels) + 0.5) * h
    xs = (offs[:, None] + nodes[None, :] * h / 2).reshape(-1) + x0
    ws = np.tile(wts * h / 2, panels)
    xx, yy = np.meshgrid(xs, xs + (y0 - x0), indexing="ij")
    wgt = np.outer(ws, ws)
    rr = np.hypot(xx, yy)
    return float(np.sum(wgt * np.abs(np.log(rr))))


def mz94_functional(v: PlanePotential) -> Mz94Terms:
    """The annuli-norm l1 sum and the |log|x||-weighted integral of v."""
    mu = mu_sequence(v).l1()
    prof = v.radial_profile()
    if prof is not None:
        jumps = {v.params[k] for k in _RADIUS_PARAMS if k in v.params} | {1.0}
        pts = sorted(j for j in jumps if 0 < j < v.support_radius)
        val, _ = quad(
            lambda r: float(prof(r)) * abs(math.log(r)) * r,
            0.0,
            v.support_radius,
            points=pts or None,
            limit=200,
        )
        log_int = 2.0 * math.pi * val
    elif v.kind == "lattice-lift":
        log_int = sum(
            w * _square_log_integral(x, y) for (x, y), w in v.lattice.entries.items()
        )
    elif v.kind == "polar-grid":
        g = v.grid
        t = g.t
        fbar = g.values.mean(axis=1) * np.abs(t) * np.exp(2.0 * t)
        log_int = 2.0 * math.pi * float(np.trapezoid(fbar, t))
    else:
        raise ValueError(f"no log integral for kind {v.kind!r}")
    return Mz94Terms(mu_l1=mu, log_integral=float(log_int))


@dataclass(frozen=True)
class ShargTerms:
    weak_l1_term: float
    x_norm_term: float
    zeta: ZetaSequence = field(compare=False, default=None)


def shargorodsky_functional(
    v: PlanePotential, mode: str = "jacobian", circle_norm: str = "averaged"
) -> ShargTerms:
    """Weak-l1 quasinorm of the zeta sequence of the effective potential,
    plus the radial integral of per-circle Orlicz norms of the non-radial
    part (domain measure 2*pi per circle)."""
    split = radial_split(v)
    g = effective_g(split, mode)
    z = zeta_sequence(g)
    wl1 = weak_l1(z.values)
    n_theta = split.theta.size
    dth = 2.0 * math.pi / n_theta
    meas = np.full(n_theta, dth)
    norms = np.zeros(split.t.size)
    for i in range(split.t.size):
        row = np.abs(split.v_nrad[i])
        if not np.any(row > 0):
            continue
        if circle_norm == "averaged":
            norms[i] = averaged_orlicz_norm(row, meas, 2.0 * math.pi).value
        elif circle_norm == "luxemburg":
            norms[i] = luxemburg_norm(row, meas)
        else:
            raise ValueError("circle_norm must be 'averaged' or 'luxemburg'")
    x_norm = float(np.trapezoid(norms * np.exp(2.0 * split.t), split.t))
    return ShargTerms(weak_l1_term=float(wl1), x_norm_term=x_norm, zeta=z)


# ---------------------------------------------------------------------------
# metric-graph functionals

_GAUSS_EDGE = leggauss(32)


def graph_lambda(v: EdgePotentialField) -> float:
    """Sum of edge masses weighted by log(2 + distance of the edge to 0)."""
    return float(
        sum(
            mass * math.log(2.0 + edge_origin_distance(e))
            for e, mass in v.masses.items()
        )
    )


def graph_m(v: EdgePotentialField) -> float:
    """integral over the edge set of V(z) log(2 + |z|) dz by per-edge Gauss rule."""
    nodes, wts = _GAUSS_EDGE
    s = 0.5 * (nodes + 1.0)
    w = 0.5 * wts
    total = 0.0
    for e in v.edges:
        (ax, ay), (bx, by) = e
        px = ax + s * (bx - ax)
        py = ay + s * (by - ay)
        vals = v.value_on_edge(e, s)
        total += float(np.sum(w * vals * np.log(2.0 + np.hypot(px, py))))
    return total


# ---------------------------------------------------------------------------
# report container


@dataclass
class BoundReport:
    """Evaluated functionals next to the counts they are compared with.

    Fields are None when the corresponding layer was not evaluated; fitted
    calibration constants (never taken from the literature) live in
    ``constants``.
    """

    mv: float | None = None
    mz94_mu_l1: float | None = None
    mz94_log_integral: float | None = None
    sharg_weak_l1: float | None = None
    sharg_x_norm: float | None = None
    lambda_sum: float | None = None
    m_integral: float | None = None
    counts: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    def functional_items(self):
        for name in (
            "mv",
            "mz94_mu_l1",
            "mz94_log_integral",
            "sharg_weak_l1",
            "sharg_x_norm",
            "lambda_sum",
            "m_integral",
        ):
            val = getattr(self, name)
            if val is not None:
                yield name, val

    def to_json_dict(self) -> dict:
        return {
            "functionals": dict(self.functional_items()),
            "counts": dict(self.counts),
            "constants": dict(self.constants),
            "flags": dict(self.flags),
        }
