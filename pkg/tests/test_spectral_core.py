"""Tests for transforms, derivatives, vertical operators, parity and norms."""


import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hydrostat import spectral_core as sc
from hydrostat.errors import DimensionError, PreconditionError
from hydrostat.spectral_core import Grid3, PhysicalField3D, SpectralField3D

from .conftest import field, random_physical

PI = np.pi


class TestGrid3:
    def test_geometry(self):
        g = Grid3(8, 6, 4, 2.0)
        assert g.shape == (8, 6, 4)
        assert g.volume == pytest.approx(4.0)
        assert g.dz == pytest.approx(1.0)
        assert g.z[0] == pytest.approx(-2.0)
        assert g.x[1] == pytest.approx(1 / 8)

    @pytest.mark.parametrize("dims", [(7, 8, 8), (8, 2, 8), (8, 8, 0), (8, 8, -4)])
    def test_rejects_odd_or_small(self, dims):
        with pytest.raises(ValueError):
            Grid3(*dims)

    def test_rejects_nonpositive_h(self):
        with pytest.raises(ValueError):
            Grid3(8, 8, 8, 0.0)

    def test_wavevector_is_physical(self):
        g = Grid3(8, 8, 8, 2.0)
        assert np.max(g.kx) == pytest.approx(2 * PI * 3)
        assert g.kz.ravel()[1] == pytest.approx(PI / 2.0)

    def test_frozen(self, grid8):
        with pytest.raises(Exception):
            grid8.nx = 16


class TestTransform:
    def test_constant_is_zero_mode(self, grid8):
        f = field(grid8, lambda X, Y, Z: 3.5 + 0 * X)
        expected = np.zeros(grid8.shape, complex)
        expected[0, 0, 0] = 3.5
        assert np.allclose(f.coeffs, expected, atol=1e-14)

    def test_sine_has_two_modes(self, grid8):
        f = field(grid8, lambda X, Y, Z: np.sin(2 * PI * X) + 0 * Y + 0 * Z)
        nonzero = np.argwhere(np.abs(f.coeffs) > 1e-13)
        assert len(nonzero) == 2
        assert f.coeffs[1, 0, 0] == pytest.approx(-0.5j)
        assert f.coeffs[-1, 0, 0] == pytest.approx(0.5j)

    def test_vertical_basis_is_anchored_at_bottom(self, grid8):
        # the coefficient of e^{i pi z / h} for cos(pi z / h) must be 1/2 even though z starts at -h
        f = field(grid8, lambda X, Y, Z: np.cos(PI * Z) + 0 * X + 0 * Y)
        assert f.coeffs[0, 0, 1] == pytest.approx(0.5)
        assert f.coeffs[0, 0, -1] == pytest.approx(0.5)

    @pytest.mark.parametrize("n", [8, 16, 32, 64])
    def test_round_trip(self, n):
        g = Grid3(n, n, n)
        f = random_physical(g, seed=n)
        back = sc.transform(sc.transform(f, "forward"), "inverse")
        assert np.max(np.abs(back.values - f.values)) < 1e-12

    def test_parseval(self, grid16):
        f = random_physical(grid16, seed=3)
        quad = grid16.volume * np.mean(f.values**2)
        assert sc.l2_norm_sq(sc.forward(f)) == pytest.approx(quad, rel=1e-12)

    def test_shape_mismatch(self, grid8):
        with pytest.raises(DimensionError):
            PhysicalField3D(grid8, np.zeros((8, 8, 4)))
        with pytest.raises(DimensionError):
            SpectralField3D(grid8, np.zeros((4, 8, 8), complex))

    def test_bad_direction(self, grid8):
        with pytest.raises(ValueError):
            sc.transform(sc.zeros(grid8), "sideways")

    def test_field_arithmetic_checks_grids(self, grid8, grid16):
        with pytest.raises(DimensionError):
            sc.zeros(grid8) + sc.zeros(grid16)


class TestDerivative:
    def test_dx_sine(self, grid8):
        f = field(grid8, lambda X, Y, Z: np.sin(2 * PI * X) + 0 * Y + 0 * Z)
        X, _, _ = grid8.mesh()
        d = sc.derivative(f, "x").values
        assert np.allclose(d, 2 * PI * np.cos(2 * PI * X) * np.ones(grid8.shape), atol=1e-12)

    def test_dz_flips_parity(self, grid8):
        f = field(grid8, lambda X, Y, Z: np.cos(PI * Z) + 0 * X + 0 * Y, "even")
        assert sc.derivative(f, "z").parity == "odd"
        assert sc.derivative(f, "z", 2).parity == "even"
        assert sc.derivative(f, "x").parity == "even"

    @pytest.mark.parametrize("h", [1.0, 0.5, 2.0])
    def test_dzz_sine(self, h):
        g = Grid3(8, 8, 16, h)
        f = field(g, lambda X, Y, Z: np.sin(PI * Z / h) + 0 * X + 0 * Y, "odd")
        expected = -((PI / h) ** 2) * f.values
        assert np.allclose(sc.derivative(f, "z", 2).values, expected, atol=1e-11)

    def test_rejects_bad_order(self, grid8):
        with pytest.raises(ValueError):
            sc.derivative(sc.zeros(grid8), "x", 3)


class TestVerticalIntegral:
    def test_zero(self, grid8):
        assert sc.l2_norm(sc.vertical_integral_from_bottom(sc.zeros(grid8))) == 0.0

    def test_cosine(self):
        h = 1.5
        g = Grid3(8, 8, 16, h)
        f = field(g, lambda X, Y, Z: np.cos(PI * Z / h) + 0 * X + 0 * Y, "even")
        _, _, Z = g.mesh()
        F = sc.vertical_integral_from_bottom(f)
        assert np.allclose(F.values, (h / PI) * np.sin(PI * Z / h) * np.ones(g.shape), atol=1e-13)
        assert F.parity == "odd"

    def test_sine(self):
        h = 0.7
        g = Grid3(8, 8, 16, h)
        f = field(g, lambda X, Y, Z: np.sin(PI * Z / h) + 0 * X + 0 * Y, "odd")
        _, _, Z = g.mesh()
        F = sc.vertical_integral_from_bottom(f)
        assert np.allclose(F.values, -(h / PI) * (np.cos(PI * Z / h) + 1) * np.ones(g.shape), atol=1e-13)

    def test_rejects_nonzero_mean(self, grid8):
        f = field(grid8, lambda X, Y, Z: 1.0 + np.cos(PI * Z) + 0 * X + 0 * Y)
        with pytest.raises(PreconditionError):
            sc.vertical_integral_from_bottom(f)

    def test_derivative_inverts_integral(self, grid16):
        g = sc.dealias(sc.forward(random_physical(grid16, 5)))
        _, tilde = sc.vertical_average_split(g)
        F = sc.vertical_integral_from_bottom(tilde)
        assert np.max(np.abs(sc.derivative(F, "z").coeffs - tilde.coeffs)) < 1e-12
        assert np.max(np.abs(sc.evaluate_at_z(F, -grid16.h))) < 1e-12


class TestVerticalAverage:
    def test_z_independent_fixed_point(self, grid8):
        f = field(grid8, lambda X, Y, Z: np.sin(2 * PI * X) + np.cos(2 * PI * Y) + 0 * Z)
        bar, tilde = sc.vertical_average_split(f)
        assert np.allclose(bar.coeffs, f.coeffs)
        assert sc.l2_norm(tilde) < 1e-14

    def test_odd_field_has_no_mean(self, grid8):
        f = field(grid8, lambda X, Y, Z: np.sin(PI * Z) * np.cos(2 * PI * X) + 0 * Y)
        bar, tilde = sc.vertical_average_split(f)
        assert sc.l2_norm(bar) < 1e-14
        assert np.allclose(tilde.coeffs, f.coeffs)

    def test_one_plus_cosine(self, grid8):
        f = field(grid8, lambda X, Y, Z: 1 + np.cos(PI * Z) + 0 * X + 0 * Y)
        bar, tilde = sc.vertical_average_split(f)
        assert np.allclose(bar.values, 1.0)
        _, _, Z = grid8.mesh()
        assert np.allclose(tilde.values, np.cos(PI * Z) * np.ones(grid8.shape), atol=1e-14)

    def test_orthogonal_decomposition(self, grid16):
        f = sc.forward(random_physical(grid16, 9))
        bar, tilde = sc.vertical_average_split(f)
        assert sc.l2_norm_sq(bar) + sc.l2_norm_sq(tilde) == pytest.approx(sc.l2_norm_sq(f), rel=1e-12)
        assert np.array_equal((bar + tilde).coeffs, f.coeffs)


class TestParity:
    def test_even_projection_of_sine(self, grid8):
        f = field(grid8, lambda X, Y, Z: np.sin(PI * Z) + 0 * X + 0 * Y)
        assert sc.l2_norm(sc.parity_project(f, "even")) < 1e-14
        assert sc.parity_residual(f, "even") == pytest.approx(sc.l2_norm(f))
        assert sc.l2_norm(f) == pytest.approx(1.0)  # |sin(pi z)|^2 over the 1 x 1 x 2 box

    def test_odd_field_unchanged(self, grid8):
        f = field(grid8, lambda X, Y, Z: np.sin(PI * Z) * np.cos(2 * PI * Y) + 0 * X, "odd")
        assert np.allclose(sc.parity_project(f, "odd").coeffs, f.coeffs, atol=1e-15)
        assert sc.parity_residual(f, "odd") < 1e-14

    def test_split_mixed(self, grid8):
        f = field(grid8, lambda X, Y, Z: np.cos(PI * Z) + np.sin(2 * PI * Z) + 0 * X + 0 * Y)
        _, _, Z = grid8.mesh()
        ones = np.ones(grid8.shape)
        assert np.allclose(sc.parity_project(f, "even").values, np.cos(PI * Z) * ones, atol=1e-14)
        assert np.allclose(sc.parity_project(f, "odd").values, np.sin(2 * PI * Z) * ones, atol=1e-14)

    def test_projection_is_physical_reflection(self, grid8):
        f = random_physical(grid8, 2)
        even = sc.parity_project(sc.forward(f), "even").values
        mirror = f.values[:, :, grid8.reflect_index(2)]
        assert np.allclose(even, 0.5 * (f.values + mirror), atol=1e-13)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000), st.sampled_from(["even", "odd"]))
    def test_idempotent(self, seed, parity):
        g = Grid3(8, 8, 8)
        f = sc.forward(random_physical(g, seed))
        once = sc.parity_project(f, parity)
        assert np.array_equal(sc.parity_project(once, parity).coeffs, once.coeffs)


class TestDealias:
    def test_band_limited_unchanged(self, grid16):
        f = field(grid16, lambda X, Y, Z: np.sin(2 * PI * 3 * X) * np.cos(5 * PI * Z) + np.cos(2 * PI * 5 * Y))
        assert np.allclose(sc.dealias(f).coeffs, f.coeffs, rtol=0, atol=1e-15)

    def test_nyquist_removed(self, grid16):
        f = field(grid16, lambda X, Y, Z: np.cos(2 * PI * 8 * X) + 0 * Y + 0 * Z)
        assert sc.l2_norm(f) > 0
        assert sc.l2_norm(sc.dealias(f)) < 1e-14

    def test_cutoff(self, grid16):
        kept = field(grid16, lambda X, Y, Z: np.cos(2 * PI * 5 * X) + 0 * Y + 0 * Z)
        cut = field(grid16, lambda X, Y, Z: np.cos(2 * PI * 6 * X) + 0 * Y + 0 * Z)
        assert sc.l2_norm(sc.dealias(kept)) == pytest.approx(sc.l2_norm(kept))
        assert sc.l2_norm(sc.dealias(cut)) < 1e-14

    def test_idempotent(self, grid16):
        f = sc.forward(random_physical(grid16, 1))
        once = sc.dealias(f)
        assert np.array_equal(sc.dealias(once).coeffs, once.coeffs)


class TestNorms:
    def test_sine_l2(self, grid8):
        f = field(grid8, lambda X, Y, Z: np.sin(2 * PI * X) + 0 * Y + 0 * Z)
        assert sc.l2_norm_sq(f) == pytest.approx(1.0)

    def test_gradient_scaling(self, grid8):
        f = field(grid8, lambda X, Y, Z: np.sin(2 * PI * X) + 0 * Y + 0 * Z)
        assert sc.l2_norm(sc.derivative(f, "x")) == pytest.approx(2 * PI * sc.l2_norm(f))

    def test_sobolev_single_mode(self):
        h = 2.0
        g = Grid3(8, 8, 8, h)
        f = field(g, lambda X, Y, Z: np.cos(2 * PI * X) * np.cos(PI * Z / h) + 0 * Y)
        k2 = (2 * PI) ** 2 + (PI / h) ** 2
        assert sc.sobolev_norm_sq(f, 2) == pytest.approx((1 + k2) ** 2 * sc.l2_norm_sq(f))

    def test_inner_matches_quadrature(self, grid16):
        a, b = random_physical(grid16, 1), random_physical(grid16, 2)
        quad = grid16.volume * np.mean(a.values * b.values)
        assert sc.inner(sc.forward(a), sc.forward(b)) == pytest.approx(quad, rel=1e-12)

    def test_evaluate_at_z_matches_grid_plane(self, grid8):
        f = sc.forward(random_physical(grid8, 4))
        k = 3
        assert np.allclose(sc.evaluate_at_z(f, grid8.z[k]), sc.values_at_z_index(f, k), atol=1e-12)

    def test_max_abs(self, grid8):
        f = field(grid8, lambda X, Y, Z: -2.5 * np.cos(2 * PI * X) + 0 * Y + 0 * Z)
        assert sc.max_abs(f) == pytest.approx(2.5)
