"""Plane FEM: interpolation energies, cell constants, cutoff, counting."""

import math

import numpy as np
import pytest

from nminus.fem import (
    CutoffProfile,
    FemBox,
    apply_cutoff,
    assemble_fem,
    carryover_check,
    cell_constants,
    count_below_energy,
    count_negative_fem,
    interpolate_J0,
)
from nminus.inertia import ldlt_inertia
from nminus.lattice import sobolev_seminorm
from nminus.potentials import LatticePotential, lift_lattice, make_family


def cell_energy_oracle(sw, se, ne, nw, n=200):
    """Midpoint quadrature of |grad U|^2 for the bilinear U on a unit cell."""
    s = (np.arange(n) + 0.5) / n
    fx, fy = np.meshgrid(s, s, indexing="ij")
    gx = (se - sw) * (1 - fy) + (ne - nw) * fy
    gy = (nw - sw) * (1 - fx) + (ne - se) * fx
    return float(np.mean(gx * gx + gy * gy))


def random_lattice_function(rng, half=10, points=25):
    pts = rng.integers(-half, half + 1, size=(points, 2))
    return {(int(x), int(y)): float(rng.standard_normal()) for x, y in pts}


class TestInterpolation:
    def test_delta_energy(self):
        u0 = interpolate_J0({(0, 0): 1.0})
        assert u0.dirichlet_energy() == pytest.approx(8.0 / 3.0, rel=1e-14)
        assert u0.dirichlet_energy() / sobolev_seminorm({(0, 0): 1.0}) == pytest.approx(
            2.0 / 3.0
        )

    def test_zero(self):
        assert interpolate_J0({}).dirichlet_energy() == 0.0

    def test_constant_patch_interior_cells_flat(self):
        u = {(x, y): 2.0 for x in range(3) for y in range(3)}
        u0 = interpolate_J0(u)
        # interior cells contribute nothing; oracle over all cells agrees
        total = sum(cell_energy_oracle(*u0.corner_values(c)) for c in u0.cells)
        assert u0.dirichlet_energy() == pytest.approx(total, rel=1e-3)
        inner = cell_energy_oracle(2.0, 2.0, 2.0, 2.0)
        assert inner == 0.0

    def test_matches_quadrature_oracle(self):
        rng = np.random.default_rng(1)
        u0 = interpolate_J0(random_lattice_function(rng, half=3, points=8))
        total = sum(cell_energy_oracle(*u0.corner_values(c)) for c in u0.cells)
        assert u0.dirichlet_energy() == pytest.approx(total, rel=1e-3)

    def test_value_interpolates_corners(self):
        u = {(0, 0): 1.0, (1, 0): -2.0}
        u0 = interpolate_J0(u)
        assert u0.value(0.0, 0.0) == 1.0
        assert u0.value(1.0, 0.0) == -2.0
        assert u0.value(0.5, 0.0) == pytest.approx(-0.5)

    def test_global_interpolation_inequality(self):
        rng = np.random.default_rng(2)
        for _ in range(300):
            u = random_lattice_function(rng)
            assert interpolate_J0(u).dirichlet_energy() <= sobolev_seminorm(u)

    def test_grid_dump(self, tmp_path):
        u0 = interpolate_J0({(0, 0): 1.0})
        path = tmp_path / "interp.txt"
        u0.grid_dump(path, points_per_cell=2)
        lines = path.read_text().strip().splitlines()
        assert lines[0].startswith("#")
        assert all(len(line.split()) == 3 for line in lines[1:])


class TestCellConstants:
    def test_values(self):
        lo, hi = cell_constants()
        assert lo == pytest.approx(1.0 / 6.0, abs=1e-10)
        assert hi == pytest.approx(0.5, abs=1e-10)

    def test_extremal_patterns(self):
        # A = -B pattern attains 1/6; A = B, C = D attains 1/2
        def q_form(sw, se, ne, nw):
            return (
                (sw - se) ** 2 + (se - ne) ** 2 + (ne - nw) ** 2 + (nw - sw) ** 2
            )

        lo_pat = (0.0, 1.0, 0.0, 1.0)
        hi_pat = (0.0, 1.0, 2.0, 1.0)
        for pat, val in [(lo_pat, 1.0 / 6.0), (hi_pat, 0.5)]:
            d = cell_energy_oracle(*pat, n=400)
            q = q_form(*pat)
            assert d / q == pytest.approx(val, rel=1e-4)

    def test_per_cell_sandwich(self):
        rng = np.random.default_rng(3)
        lo, hi = cell_constants()
        corners = rng.standard_normal((1000, 4))
        for sw, se, ne, nw in corners:
            q = (sw - se) ** 2 + (se - ne) ** 2 + (ne - nw) ** 2 + (nw - sw) ** 2
            d = (
                (se - sw) ** 2
                + (se - sw) * (ne - nw)
                + (ne - nw) ** 2
                + (nw - sw) ** 2
                + (nw - sw) * (ne - se)
                + (ne - se) ** 2
            ) / 3.0
            assert lo * q - 1e-12 <= d <= hi * q + 1e-12


class TestCutoff:
    def test_profile_shape(self):
        psi = CutoffProfile()
        assert psi(0.1) == 0.0 and psi(0.25) == 0.0
        assert psi(0.5) == 1.0 and psi(2.0) == 1.0
        assert 0.0 < psi(0.375) < 1.0
        # C1: derivative vanishes at both plateau ends
        assert psi.derivative(0.25) == 0.0 and psi.derivative(0.5) == 0.0

    def test_identity_cutoff_matches_plain_energy(self):
        u = {(1, 0): 1.0, (2, 1): -0.5}
        plain = interpolate_J0(u).dirichlet_energy()
        cut = apply_cutoff(interpolate_J0(u), CutoffProfile(0.0, 0.0))
        assert cut.dirichlet_energy() == pytest.approx(plain, rel=1e-12)

    def test_zero_function(self):
        assert apply_cutoff(interpolate_J0({})).dirichlet_energy() == 0.0

    def test_energy_ratio_finite_on_suite(self):
        rng = np.random.default_rng(4)
        worst = 0.0
        for _ in range(60):
            u = random_lattice_function(rng, half=5, points=10)
            u.pop((0, 0), None)
            s = sobolev_seminorm(u)
            if s == 0:
                continue
            e = apply_cutoff(interpolate_J0(u)).dirichlet_energy()
            worst = max(worst, e / s)
        assert worst <= 10.0  # empirical ceiling for the default suite

    def test_quadrature_panel_refinement(self):
        from nminus.fem import CutoffInterpolant

        u0 = interpolate_J0({(1, 0): 1.0})
        coarse = CutoffInterpolant(u0, CutoffProfile(), panels=8, gauss=4)
        fine = CutoffInterpolant(u0, CutoffProfile(), panels=24, gauss=6)
        assert coarse.dirichlet_energy() == pytest.approx(
            fine.dirichlet_energy(), rel=1e-4
        )


class TestCounting:
    def test_free_positive_definite(self):
        for m in (2, 4):
            mat = assemble_fem(None, 0.0, FemBox(2, m))
            assert ldlt_inertia(mat).negatives == 0

    def test_indicator_alpha100(self):
        v = make_family("radial-indicator", {"radius": 1.0})
        mat = assemble_fem(v, 100.0, FemBox(8, 8))
        neg = ldlt_inertia(mat).negatives
        assert neg >= 1

    def test_counts_stabilize_under_refinement(self):
        v = make_family("radial-indicator", {"radius": 1.0})
        counts = [
            ldlt_inertia(assemble_fem(v, 30.0, FemBox(4, m))).negatives
            for m in (4, 8, 16)
        ]
        assert counts[-1] == counts[-2]  # stabilized value recorded: 8
        assert counts[-1] == 8

    def test_monotone_in_box(self):
        v = make_family("gaussian", {"amplitude": 4.0, "sigma": 1.0})
        res = count_negative_fem(v, 10.0, box_max=16, m=4)
        assert list(res.counts) == sorted(res.counts)

    def test_support_escape_raises(self):
        v = make_family("radial-indicator", {"radius": 4.0})
        with pytest.raises(ValueError):
            assemble_fem(v, 1.0, FemBox(2, 4))
        with pytest.raises(ValueError):
            count_negative_fem(v, 1.0, box_max=2, m=4)

    def test_alpha_zero(self):
        v = make_family("radial-indicator", {"radius": 1.0})
        assert count_negative_fem(v, 0.0, box_max=4, m=4).count == 0

    def test_pencil_slicing_counts_low_modes(self):
        # Dirichlet box eigenvalues of the free problem: pi^2 (j^2 + k^2) / (2R)^2
        R = 2
        sigma = (math.pi**2) * 2.6 / 16.0  # between the 2nd and 3rd level pair
        got = count_below_energy(None, 0.0, FemBox(R, 8), sigma)
        lam = [
            (j * j + k * k) * math.pi**2 / 16.0
            for j in range(1, 9)
            for k in range(1, 9)
        ]
        want = sum(1 for x in sorted(lam) if x < sigma)
        assert got == want

    def test_pencil_slicing_matches_dense_generalized_eigensolve(self):
        from scipy.linalg import eigh

        box = FemBox(2, 4)
        v = make_family("radial-indicator", {"radius": 1.0})
        a0 = assemble_fem(v, 20.0, box, sigma=0.0).to_dense()
        a1 = assemble_fem(v, 20.0, box, sigma=1.0).to_dense()
        mass = a0 - a1  # sigma enters linearly through the mass matrix
        lam = eigh(a0, mass, eigvals_only=True)
        for sigma in (-5.0, -1.0, 0.0, 2.0, 7.0):
            got = count_below_energy(v, 20.0, box, sigma)
            assert got == int(np.sum(lam < sigma)), sigma


class TestCarryover:
    def test_zero_potential_trivial(self):
        rep = carryover_check(LatticePotential({}), 10.0, gamma_grid=(1.0,))
        assert rep.lattice_count == 0 and rep.holds_at_max

    def test_single_site(self):
        rep = carryover_check(LatticePotential({(0, 0): 1.0}), 10.0)
        assert rep.lattice_count == 1
        assert rep.holds_at_max
        assert rep.least_gamma is not None

    def test_random_suite_at_max_gamma(self):
        for seed in range(3):
            v = make_family("random-box", {"half_width": 3, "count": 4}, seed=seed)
            rep = carryover_check(v, 8.0, box_max=8)
            assert rep.holds_at_max
