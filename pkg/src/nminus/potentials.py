"""Potential models on the lattice Z^2, the plane, and unit-grid edges.

Conversions between the three layers live here as well: lattice -> plane
lift (piecewise constant on unit squares), edge field -> lattice effective
potential (summed edge masses), and plane -> half-line effective potential
via the radial average and the log change of variable r = exp(t).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping

import numpy as np

Site = tuple[int, int]
Edge = tuple[Site, Site]

DEFAULT_N_RADIAL = 1024
DEFAULT_N_ANGULAR = 512  # power of two: the mean of equal samples is exact
DEFAULT_RMIN_FACTOR = 1e-8


class ConfigurationError(ValueError):
    """Malformed grids or family parameters."""


def canonical_edge(a: Site, b: Site) -> Edge:
    a = (int(a[0]), int(a[1]))
    b = (int(b[0]), int(b[1]))
    if abs(a[0] - b[0]) + abs(a[1] - b[1]) != 1:
        raise ConfigurationError(f"not a unit-grid edge: {a}-{b}")
    return (a, b) if a <= b else (b, a)


def edge_origin_distance(e: Edge) -> float:
    """Distance from the origin to the nearest point of the segment."""
    (ax, ay), (bx, by) = e
    dx, dy = bx - ax, by - ay
    t = -(ax * dx + ay * dy)  # segment length is 1
    t = min(max(t, 0.0), 1.0)
    return math.hypot(ax + t * dx, ay + t * dy)


# ---------------------------------------------------------------------------
# lattice potentials


@dataclass(frozen=True, eq=False)
class LatticePotential:
    """Finitely supported nonnegative function on Z^2 (absent sites are 0)."""

    entries: Mapping[Site, float]
    meta: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        clean = {}
        for site, v in self.entries.items():
            v = float(v)
            if not math.isfinite(v) or v < 0:
                raise ConfigurationError(f"value at {site} must be finite and >= 0")
            if v > 0:
                clean[(int(site[0]), int(site[1]))] = v
        object.__setattr__(self, "entries", MappingProxyType(clean))

    def value(self, site: Site) -> float:
        return self.entries.get((int(site[0]), int(site[1])), 0.0)

    @property
    def support(self) -> tuple[Site, ...]:
        return tuple(sorted(self.entries))

    def total_mass(self) -> float:
        return float(sum(self.entries.values()))

    def max_value(self) -> float:
        return max(self.entries.values(), default=0.0)

    def bounding_radius(self) -> float:
        """Largest Euclidean |x| over the support (0 if empty)."""
        return max((math.hypot(*s) for s in self.entries), default=0.0)

    def bounding_halfwidth(self) -> int:
        """Largest max-norm coordinate over the support (0 if empty)."""
        return max((max(abs(s[0]), abs(s[1])) for s in self.entries), default=0)

    def scaled(self, c: float) -> "LatticePotential":
        if c < 0:
            raise ConfigurationError("scaling must be nonnegative")
        return LatticePotential({s: c * v for s, v in self.entries.items()}, self.meta)

    def dense_window(self):
        """(values array, (x0, y0)) covering the support; cached."""
        cached = getattr(self, "_window", None)
        if cached is None:
            if not self.entries:
                cached = (np.zeros((1, 1)), (0, 0))
            else:
                xs = [s[0] for s in self.entries]
                ys = [s[1] for s in self.entries]
                x0, y0 = min(xs), min(ys)
                arr = np.zeros((max(xs) - x0 + 1, max(ys) - y0 + 1))
                for (x, y), v in self.entries.items():
                    arr[x - x0, y - y0] = v
                arr.flags.writeable = False
                cached = (arr, (x0, y0))
            object.__setattr__(self, "_window", cached)
        return cached

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "value"])
            for (x, y) in self.support:
                w.writerow([x, y, repr(self.entries[(x, y)])])

    @classmethod
    def from_csv(cls, path) -> "LatticePotential":
        entries = {}
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                entries[(int(row["x"]), int(row["y"]))] = float(row["value"])
        return cls(entries)


# ---------------------------------------------------------------------------
# plane potentials


@dataclass(frozen=True)
class PolarGrid:
    """Samples on a (log r, theta) tensor grid; theta uniform and periodic."""

    t: np.ndarray  # log-radius nodes, strictly increasing
    theta: np.ndarray  # uniform on [0, 2pi)
    values: np.ndarray  # (n_r, n_theta), >= 0

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64)
        theta = np.asarray(self.theta, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "values", values)
        if np.any(np.diff(t) <= 0):
            raise ConfigurationError("log-radius grid must be strictly increasing")
        dth = np.diff(theta)
        if theta.size < 4 or not np.allclose(dth, 2 * np.pi / theta.size, atol=1e-12):
            raise ConfigurationError("theta grid must be uniform with period 2*pi")
        if values.shape != (t.size, theta.size):
            raise ConfigurationError("values shape must be (n_r, n_theta)")
        if np.any(values < 0):
            raise ConfigurationError("sampled values must be >= 0")
        for a in (t, theta, values):
            a.flags.writeable = False

    @property
    def r(self) -> np.ndarray:
        return np.exp(self.t)


@dataclass(frozen=True, eq=False)
class PlanePotential:
    """Nonnegative potential on R^2, zero outside ``support_radius``.

    ``kind`` is one of the analytic families ("radial-indicator",
    "gaussian", "annulus"), a lattice lift ("lattice-lift"), or raw polar
    samples ("polar-grid").
    """

    kind: str
    params: Mapping[str, float]
    support_radius: float
    lattice: LatticePotential | None = None
    grid: PolarGrid | None = None
    meta: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))
        if self.support_radius < 0:
            raise ConfigurationError("support radius must be >= 0")
        if self.kind == "lattice-lift" and self.lattice is None:
            raise ConfigurationError("lattice-lift requires the lattice potential")
        if self.kind == "polar-grid" and self.grid is None:
            raise ConfigurationError("polar-grid requires sampled values")

    @property
    def is_radial(self) -> bool:
        return self.kind in ("radial-indicator", "gaussian", "annulus")

    def radial_profile(self) -> Callable[[np.ndarray], np.ndarray] | None:
        """Exact radial profile for the analytic radial families."""
        p = self.params
        if self.kind == "radial-indicator":
            return lambda r: np.where(np.asarray(r) <= p["radius"], p["value"], 0.0)
        if self.kind == "annulus":
            r0, r1 = p["r_inner"], p["r_outer"]
            return lambda r: np.where(
                (np.asarray(r) >= r0) & (np.asarray(r) <= r1), p["value"], 0.0
            )
        if self.kind == "gaussian":
            a, s, rc = p["amplitude"], p["sigma"], p["cutoff"]
            return lambda r: np.where(
                np.asarray(r) <= rc, a * np.exp(-0.5 * (np.asarray(r) / s) ** 2), 0.0
            )
        return None

    def value_xy(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if self.kind == "lattice-lift":
            arr, (x0, y0) = self.lattice.dense_window()
            shape = np.broadcast(x, y).shape
            ix = np.floor(np.broadcast_to(x, shape)).astype(np.int64) - x0
            iy = np.floor(np.broadcast_to(y, shape)).astype(np.int64) - y0
            inside = (
                (ix >= 0) & (ix < arr.shape[0]) & (iy >= 0) & (iy < arr.shape[1])
            )
            out = np.zeros(shape)
            out[inside] = arr[ix[inside], iy[inside]]
            return out if out.ndim else float(out)
        r = np.hypot(x, y)
        theta = np.mod(np.arctan2(y, x), 2 * np.pi)
        return self.value_polar(r, theta)

    def value_polar(self, r, theta):
        r = np.asarray(r, dtype=np.float64)
        theta = np.asarray(theta, dtype=np.float64)
        prof = self.radial_profile()
        if prof is not None:
            return np.broadcast_to(prof(r), np.broadcast(r, theta).shape).copy()
        if self.kind == "lattice-lift":
            x = r * np.cos(theta)
            y = r * np.sin(theta)
            return self.value_xy(x, y)
        if self.kind == "polar-grid":
            return self._interp_grid(r, theta)
        raise ConfigurationError(f"unknown plane potential kind {self.kind!r}")

    def _interp_grid(self, r, theta):
        g = self.grid
        shape = np.broadcast(r, theta).shape
        r = np.broadcast_to(r, shape).reshape(-1)
        theta = np.mod(np.broadcast_to(theta, shape).reshape(-1), 2 * np.pi)
        with np.errstate(divide="ignore"):
            t = np.log(r)
        t = np.clip(t, g.t[0], g.t[-1])
        it = np.clip(np.searchsorted(g.t, t) - 1, 0, g.t.size - 2)
        wt = (t - g.t[it]) / (g.t[it + 1] - g.t[it])
        dth = 2 * np.pi / g.theta.size
        jt = np.floor(theta / dth).astype(np.int64) % g.theta.size
        wj = theta / dth - np.floor(theta / dth)
        j1 = (jt + 1) % g.theta.size
        v = (
            g.values[it, jt] * (1 - wt) * (1 - wj)
            + g.values[it + 1, jt] * wt * (1 - wj)
            + g.values[it, j1] * (1 - wt) * wj
            + g.values[it + 1, j1] * wt * wj
        )
        v = np.where(np.exp(t) > self.support_radius * (1 + 1e-12), 0.0, v)
        out = v.reshape(shape)
        return out if out.ndim else float(out)


def sample_polar(
    v: PlanePotential,
    n_radial: int = DEFAULT_N_RADIAL,
    n_angular: int = DEFAULT_N_ANGULAR,
    rmin_factor: float = DEFAULT_RMIN_FACTOR,
) -> PolarGrid:
    """Tabulate a plane potential on a (log r, theta) tensor grid."""
    if v.grid is not None:
        return v.grid
    if v.support_radius <= 0:
        t = np.array([-1.0, 0.0])
        theta = np.arange(4) * (2 * np.pi / 4)
        return PolarGrid(t, theta, np.zeros((2, 4)))
    r_max = v.support_radius
    t = np.linspace(math.log(r_max * rmin_factor), math.log(r_max), n_radial)
    theta = np.arange(n_angular) * (2 * np.pi / n_angular)
    rr, th = np.meshgrid(np.exp(t), theta, indexing="ij")
    return PolarGrid(t, theta, np.asarray(v.value_polar(rr, th)))


# ---------------------------------------------------------------------------
# radial splitting and the 1D effective potential


@dataclass(frozen=True)
class RadialSplit:
    """Radial mean and the mean-zero angular residual on a polar grid."""

    t: np.ndarray
    theta: np.ndarray
    v_rad: np.ndarray  # (n_r,)
    v_nrad: np.ndarray  # (n_r, n_theta), zero angular mean per radius

    @property
    def r(self) -> np.ndarray:
        return np.exp(self.t)


def radial_split(v: PlanePotential, **sample_kw) -> RadialSplit:
    """Split into the angular mean and the residual, per radius.

    The mean uses the periodic trapezoid rule, which on the uniform
    periodic theta grid is the plain average; the residual is the sampled
    potential minus that mean, so recombination is exact at the samples.
    """
    g = sample_polar(v, **sample_kw)
    v_rad = g.values.mean(axis=1)
    v_nrad = g.values - v_rad[:, None]
    # rows sampled from an angle-independent function are bitwise constant;
    # their residual is exactly zero, not summation noise
    constant_rows = np.ptp(g.values, axis=1) == 0.0
    v_nrad[constant_rows] = 0.0
    v_rad = np.where(constant_rows, g.values[:, 0], v_rad)
    return RadialSplit(g.t, g.theta, v_rad, v_nrad)


@dataclass(frozen=True)
class EffectivePotential1D:
    """Tabulated g(t) on a symmetric grid [-T, T], zero outside the data.

    jacobian mode: g(t) = exp(2t) * v_rad(exp(t)), the change-of-variables
    weight of r = exp(t) in the radial Dirichlet form.  literal mode uses
    exp(2|t|) instead.
    """

    t_nodes: np.ndarray
    values: np.ndarray
    mode: str
    truncation_radius: float  # radii below this were dropped as zero

    def __post_init__(self):
        for a in (self.t_nodes, self.values):
            a.flags.writeable = False

    def __call__(self, t):
        return np.interp(t, self.t_nodes, self.values, left=0.0, right=0.0)

    @property
    def half_width(self) -> float:
        return float(self.t_nodes[-1])

    def support_extent(self) -> float:
        nz = np.nonzero(self.values > 0)[0]
        if nz.size == 0:
            return 0.0
        lo = self.t_nodes[max(nz[0] - 1, 0)]
        hi = self.t_nodes[min(nz[-1] + 1, self.t_nodes.size - 1)]
        return float(max(abs(lo), abs(hi)))


def effective_g(split: RadialSplit, mode: str = "jacobian") -> EffectivePotential1D:
    if mode not in ("jacobian", "literal"):
        raise ConfigurationError("mode must be 'jacobian' or 'literal'")
    t = split.t
    weight = np.exp(2.0 * t) if mode == "jacobian" else np.exp(2.0 * np.abs(t))
    g = weight * split.v_rad
    half = float(max(abs(t[0]), abs(t[-1])))
    nodes = [t]
    vals = [g]
    dt = float(t[1] - t[0]) if t.size > 1 else 1.0
    if t[0] > -half:
        nodes.insert(0, np.array([-half, t[0] - dt]))
        vals.insert(0, np.zeros(2))
    if t[-1] < half:
        nodes.append(np.array([t[-1] + dt, half]))
        vals.append(np.zeros(2))
    t_all = np.concatenate(nodes)
    g_all = np.concatenate(vals)
    keep = np.concatenate(([True], np.diff(t_all) > 0))
    return EffectivePotential1D(
        t_all[keep], g_all[keep], mode, truncation_radius=float(np.exp(t[0]))
    )


# ---------------------------------------------------------------------------
# edge potentials on the unit grid


@dataclass(frozen=True, eq=False)
class EdgePotentialField:
    """Nonnegative potential on unit-grid edges.

    Each edge carries a constant value or a sampled profile on [0, 1]
    (uniform nodes, linear interpolation, parameter running from the
    lexicographically smaller endpoint).  Per-edge masses eta(e) are the
    trapezoid integrals, cached at construction.
    """

    edges: Mapping[Edge, float | np.ndarray]
    meta: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        clean = {}
        masses = {}
        for e, prof in self.edges.items():
            e = canonical_edge(*e)
            if np.isscalar(prof):
                pv = float(prof)
                if not math.isfinite(pv) or pv < 0:
                    raise ConfigurationError(f"edge {e}: value must be >= 0")
                clean[e] = pv
                masses[e] = pv
            else:
                arr = np.asarray(prof, dtype=np.float64)
                if arr.ndim != 1 or arr.size < 2:
                    raise ConfigurationError(f"edge {e}: profile needs >= 2 samples")
                if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                    raise ConfigurationError(f"edge {e}: profile must be >= 0")
                arr.flags.writeable = False
                clean[e] = arr
                masses[e] = float(np.trapezoid(arr, dx=1.0 / (arr.size - 1)))
        object.__setattr__(self, "edges", MappingProxyType(clean))
        object.__setattr__(self, "_masses", MappingProxyType(masses))

    def eta(self, e: Edge) -> float:
        return self._masses.get(canonical_edge(*e), 0.0)

    @property
    def masses(self) -> Mapping[Edge, float]:
        return self._masses

    @property
    def support(self) -> tuple[Edge, ...]:
        return tuple(sorted(e for e, m in self._masses.items() if m > 0))

    def value_on_edge(self, e: Edge, s):
        """Pointwise value at parameter s in [0, 1] along the edge."""
        prof = self.edges.get(canonical_edge(*e))
        if prof is None:
            return np.zeros_like(np.asarray(s, dtype=float))
        if np.isscalar(prof):
            return np.full_like(np.asarray(s, dtype=float), prof)
        nodes = np.linspace(0.0, 1.0, prof.size)
        return np.interp(s, nodes, prof)

    def max_pointwise(self) -> float:
        vals = [
            (p if np.isscalar(p) else float(np.max(p))) for p in self.edges.values()
        ]
        return max(vals, default=0.0)

    def scaled(self, c: float) -> "EdgePotentialField":
        if c < 0:
            raise ConfigurationError("scaling must be nonnegative")
        return EdgePotentialField(
            {e: (c * p if np.isscalar(p) else c * np.asarray(p)) for e, p in self.edges.items()},
            self.meta,
        )

    def bounding_halfwidth(self) -> int:
        out = 0
        for (a, b) in self.support:
            out = max(out, abs(a[0]), abs(a[1]), abs(b[0]), abs(b[1]))
        return out


# ---------------------------------------------------------------------------
# conversions


def lift_lattice(v: LatticePotential) -> PlanePotential:
    """Piecewise-constant plane potential: value v([x1], [x2]) per unit square."""
    radius = 0.0
    for (x, y) in v.support:
        for cx, cy in ((x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)):
            radius = max(radius, math.hypot(cx, cy))
    return PlanePotential(
        kind="lattice-lift",
        params={},
        support_radius=radius,
        lattice=v,
        meta=v.meta,
    )


def edge_effective_lattice(v: EdgePotentialField) -> LatticePotential:
    """Vertex potential summing the masses of the (up to four) incident edges."""
    acc: dict[Site, float] = {}
    for e, mass in v.masses.items():
        for vertex in e:
            acc[vertex] = acc.get(vertex, 0.0) + mass
    return LatticePotential(acc, meta=v.meta)


# ---------------------------------------------------------------------------
# named families


def make_family(name: str, params: dict | None = None, seed: int | None = None):
    """Deterministic named potentials; `seed` drives the random families."""
    params = dict(params or {})
    try:
        builder = _FAMILIES[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown family {name!r}; known: {sorted(_FAMILIES)}"
        ) from None
    pot = builder(params, np.random.default_rng(seed))
    meta = {"kind": name, "params": params, "seed": seed}
    object.__setattr__(pot, "meta", meta)
    return pot


def family_config(pot) -> dict:
    if pot.meta is None:
        raise ConfigurationError("potential was not built by make_family")
    return dict(pot.meta)


def from_config(cfg: dict):
    return make_family(cfg["kind"], cfg.get("params"), cfg.get("seed"))


def to_json(pot, path) -> None:
    with open(path, "w") as fh:
        json.dump(family_config(pot), fh, indent=2, sort_keys=True)


def from_json(path):
    with open(path) as fh:
        return from_config(json.load(fh))


def _fam_single_site(p, rng):
    site = tuple(p.get("site", (0, 0)))
    return LatticePotential({site: p.get("value", 1.0)})


def _fam_random_box(p, rng):
    half = int(p.get("half_width", 20))
    count = int(p.get("count", 5))
    vmin = float(p.get("vmin", 1.0))
    vmax = float(p.get("vmax", 10.0))
    coords = rng.choice((2 * half + 1) ** 2, size=count, replace=False)
    entries = {}
    for c in np.sort(coords):
        x = int(c % (2 * half + 1)) - half
        y = int(c // (2 * half + 1)) - half
        entries[(x, y)] = float(rng.uniform(vmin, vmax))
    return LatticePotential(entries)


def _fam_radial_indicator(p, rng):
    radius = float(p.get("radius", 1.0))
    return PlanePotential(
        "radial-indicator",
        {"radius": radius, "value": float(p.get("value", 1.0))},
        support_radius=radius,
    )


def _fam_gaussian(p, rng):
    sigma = float(p.get("sigma", 1.0))
    cutoff = float(p.get("cutoff", 6.0 * sigma))
    return PlanePotential(
        "gaussian",
        {"amplitude": float(p.get("amplitude", 1.0)), "sigma": sigma, "cutoff": cutoff},
        support_radius=cutoff,
    )


def _fam_annulus(p, rng):
    r0 = float(p.get("r_inner", 1.0))
    r1 = float(p.get("r_outer", 2.0))
    if not 0 <= r0 < r1:
        raise ConfigurationError("annulus needs 0 <= r_inner < r_outer")
    return PlanePotential(
        "annulus",
        {"r_inner": r0, "r_outer": r1, "value": float(p.get("value", 1.0))},
        support_radius=r1,
    )


def _fam_lattice_lift(p, rng):
    inner = p.get("lattice", {"kind": "single-site", "params": {}, "seed": None})
    base = make_family(inner["kind"], inner.get("params"), inner.get("seed"))
    return lift_lattice(base)


def _fam_edge_constant(p, rng):
    radius = float(p.get("radius", 1.0))
    value = float(p.get("value", 1.0))
    half = int(math.ceil(radius)) + 1
    edges = {}
    for x in range(-half, half + 1):
        for y in range(-half, half + 1):
            for b in ((x + 1, y), (x, y + 1)):
                e = canonical_edge((x, y), b)
                if edge_origin_distance(e) <= radius:
                    edges[e] = value
    return EdgePotentialField(edges)


def _fam_edge_random(p, rng):
    half = int(p.get("half_width", 3))
    count = int(p.get("count", 4))
    vmin = float(p.get("vmin", 1.0))
    vmax = float(p.get("vmax", 10.0))
    pool = []
    for x in range(-half, half):
        for y in range(-half, half):
            pool.append(canonical_edge((x, y), (x + 1, y)))
            pool.append(canonical_edge((x, y), (x, y + 1)))
    pool = sorted(set(pool))
    idx = rng.choice(len(pool), size=min(count, len(pool)), replace=False)
    return EdgePotentialField(
        {pool[i]: float(rng.uniform(vmin, vmax)) for i in np.sort(idx)}
    )


_FAMILIES = {
    "single-site": _fam_single_site,
    "random-box": _fam_random_box,
    "radial-indicator": _fam_radial_indicator,
    "gaussian": _fam_gaussian,
    "annulus": _fam_annulus,
    "lattice-lift": _fam_lattice_lift,
    "edge-constant": _fam_edge_constant,
    "edge-random": _fam_edge_random,
}
