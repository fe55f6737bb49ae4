"""Oscillation counting for 1D Schrodinger operators at zero energy.

The number of negative Dirichlet eigenvalues of -u'' - q on an interval
equals the number of zeros of the zero-energy solution, read off the
Prufer angle theta with theta' = cos^2(theta) + q(t) sin^2(theta).  For
q >= 0 the angle is strictly increasing through multiples of pi, so zeros
cannot be lost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

ANGLE_RTOL = 1e-10
ANGLE_ATOL = 1e-12
BOUNDARY_TOL = 1e-6  # radians; endpoint angle this close to k*pi is flagged
PIECEWISE_LIMIT = 64  # piece count above which a single interp pass is used


@dataclass(frozen=True)
class Potential1D:
    """Nonnegative 1D potential on [nodes[0], nodes[-1]], zero outside.

    ``interpolation`` is "linear" (values at nodes) or "constant"
    (values per interval, len(nodes) - 1 of them).
    """

    nodes: np.ndarray
    values: np.ndarray
    interpolation: str = "linear"

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("need at least two nodes")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        expect = nodes.size if self.interpolation == "linear" else nodes.size - 1
        if values.size != expect:
            raise ValueError("values length does not match interpolation mode")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("potential values must be finite and >= 0")
        nodes.flags.writeable = False
        values.flags.writeable = False

    @classmethod
    def constant(cls, value: float, a: float = 0.0, b: float = 1.0) -> "Potential1D":
        return cls(np.array([a, b]), np.array([value, value]))

    @property
    def a(self) -> float:
        return float(self.nodes[0])

    @property
    def b(self) -> float:
        return float(self.nodes[-1])

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.interpolation == "linear":
            out = np.interp(t, self.nodes, self.values, left=0.0, right=0.0)
        else:
            idx = np.clip(np.searchsorted(self.nodes, t, side="right") - 1, 0, None)
            inside = (t >= self.nodes[0]) & (t <= self.nodes[-1])
            idx = np.minimum(idx, self.values.size - 1)
            out = np.where(inside, self.values[idx], 0.0)
        return out if out.ndim else float(out)

    def support_end(self) -> float:
        """Largest node beyond which the potential vanishes."""
        nz = np.nonzero(self.values > 0)[0]
        if nz.size == 0:
            return self.a
        if self.interpolation == "linear":
            i = min(nz[-1] + 1, self.nodes.size - 1)
            return float(self.nodes[i])
        return float(self.nodes[nz[-1] + 1])


@dataclass(frozen=True)
class OscillationCount:
    count: int
    theta_end: float
    boundary_case: bool


@dataclass(frozen=True)
class HalfLineCount:
    count: int
    truncation: float
    stable: bool
    boundary_case: bool


@dataclass(frozen=True)
class WholeLineCount:
    count: int
    right: HalfLineCount
    left: HalfLineCount


class AngleMonotonicityError(RuntimeError):
    """The integrated Prufer angle decreased; step control rejected."""


def _integrate_angle(q: Potential1D, a: float, b: float, theta0: float = 0.0) -> float:
    """Prufer angle at b, starting from theta0 at a."""
    if b <= a:
        return theta0
    breaks = q.nodes[(q.nodes > a) & (q.nodes < b)]
    pieces = np.concatenate(([a], breaks, [b]))
    theta = theta0
    if pieces.size - 1 <= PIECEWISE_LIMIT:
        for t0, t1 in zip(pieces[:-1], pieces[1:]):
            theta = _integrate_smooth(q, t0, t1, theta)
    else:
        # Dense tabulated potential: one pass, capped steps across kinks.
        max_step = max(4.0 * float(np.median(np.diff(q.nodes))), (b - a) / 4096.0)
        theta = _integrate_smooth(q, a, b, theta, max_step=max_step)
    return theta


def _integrate_smooth(q, t0, t1, theta0, max_step=np.inf):
    if q.interpolation == "constant":
        mid = 0.5 * (t0 + t1)
        qv = float(q(mid))

        def rhs(t, y):
            s = math.sin(y[0])
            c = math.cos(y[0])
            return (c * c + qv * s * s,)

    else:

        def rhs(t, y):
            s = math.sin(y[0])
            c = math.cos(y[0])
            return (c * c + float(q(t)) * s * s,)

    sol = solve_ivp(
        rhs,
        (t0, t1),
        [theta0],
        method="RK45",
        rtol=ANGLE_RTOL,
        atol=ANGLE_ATOL,
        max_step=max_step,
    )
    if not sol.success:
        raise RuntimeError(f"angle integration failed on [{t0}, {t1}]: {sol.message}")
    theta = sol.y[0]
    if np.any(np.diff(theta) < -1e-9):
        raise AngleMonotonicityError("Prufer angle decreased between accepted steps")
    return float(theta[-1])


def _count_from_angle(theta: float) -> OscillationCount:
    k = math.floor(theta / math.pi + 1e-13)
    nearest = round(theta / math.pi) * math.pi
    return OscillationCount(int(k), theta, abs(theta - nearest) < BOUNDARY_TOL)


def prufer_count_interval(q: Potential1D) -> OscillationCount:
    """Negative Dirichlet eigenvalues of -u'' - q on [q.a, q.b].

    Equals floor(theta(b)/pi).  An endpoint angle within BOUNDARY_TOL of a
    multiple of pi flags a boundary case (possible zero eigenvalue) rather
    than silently rounding.
    """
    theta = _integrate_angle(q, q.a, q.b)
    return _count_from_angle(theta)


def halfline_count(
    q: Potential1D, truncation: float | None = None, max_doublings: int = 4
) -> HalfLineCount:
    """Dirichlet count on [0, T], doubling T until two values agree.

    The count is nondecreasing in T and stabilizes once the (linear)
    zero-potential tail stops producing sign changes.
    """
    if q.a < 0:
        raise ValueError("half-line potential must live in t >= 0")
    support = max(q.support_end(), 0.0)
    if truncation is not None and support > truncation:
        raise ValueError("support extends beyond the requested truncation")
    t_cap = truncation if truncation is not None else support + 8.0
    theta = _integrate_angle(q, 0.0, t_cap)
    prev = _count_from_angle(theta)
    t_used = t_cap
    stable = False
    for _ in range(max_doublings):
        theta = _integrate_angle(q, t_used, 2.0 * t_used, theta0=theta)
        cur = _count_from_angle(theta)
        t_used *= 2.0
        if cur.count == prev.count:
            stable = True
            prev = cur
            break
        prev = cur
    return HalfLineCount(prev.count, t_used, stable, prev.boundary_case)


def mg_count(g, truncation: float | None = None) -> WholeLineCount:
    """Negative eigenvalues of -phi'' - g(t) phi on R with phi(0) = 0.

    The Dirichlet condition at 0 splits the line into two half-lines whose
    counts add.  ``g`` is anything with ``t_nodes``/``values`` arrays
    (a tabulated effective potential) or a Potential1D on a symmetric grid.
    """
    if isinstance(g, Potential1D):
        nodes, values = g.nodes, g.values
        if g.interpolation != "linear":
            raise ValueError("whole-line counting expects a node-sampled potential")
    else:
        nodes, values = np.asarray(g.t_nodes), np.asarray(g.values)
    right = _half_from_tab(nodes, values, +1)
    left = _half_from_tab(nodes, values, -1)
    r = halfline_count(right, truncation)
    l = halfline_count(left, truncation)
    return WholeLineCount(r.count + l.count, r, l)


def _half_from_tab(nodes, values, sign):
    if sign > 0:
        mask = nodes >= 0.0
        t = nodes[mask]
        v = values[mask]
    else:
        mask = nodes <= 0.0
        t = -nodes[mask][::-1]
        v = values[mask][::-1]
    if t.size == 0 or t[0] > 0.0:
        v0 = np.interp(0.0, nodes, values, left=0.0, right=0.0)
        t = np.concatenate(([0.0], t))
        v = np.concatenate(([v0], v))
    if t.size < 2:
        t = np.concatenate((t, [t[-1] + 1.0]))
        v = np.concatenate((v, [0.0]))
    return Potential1D(t, v, "linear")
