"""Finite-difference oracle: difference quotients, the explicit solver and its constraints."""

import numpy as np
import pytest

from hydrostat import oracle_fd as fd
from hydrostat.errors import PreconditionError
from hydrostat.spectral_core import Grid3, PhysicalField3D
from hydrostat.state_model import Params

from .conftest import random_physical

PI = np.pi


def grid_inner(a, b):
    return float(np.sum(a.values * b.values))


class TestDifferenceQuotient:
    def test_constant(self, grid8):
        f = PhysicalField3D(grid8, np.full(grid8.shape, 2.0))
        for axis, l in ((1, grid8.dx), (2, 2 * grid8.dy), (3, -grid8.dz)):
            assert np.all(fd.difference_quotient(f, axis, l).values == 0)

    def test_linear_in_z(self, grid8):
        _, _, Z = grid8.mesh()
        f = PhysicalField3D(grid8, 1.7 * Z * np.ones(grid8.shape))
        d = fd.difference_quotient(f, 3, grid8.dz).values
        # exact wherever the shifted point does not wrap around the periodic seam
        assert np.allclose(d[:, :, :-1], 1.7, atol=1e-13)

    @pytest.mark.parametrize("axis,cells", [(1, 1), (2, 3), (3, -2)])
    def test_adjoint(self, grid8, axis, cells):
        f, g = random_physical(grid8, 1), random_physical(grid8, 2)
        l = cells * (grid8.dx, grid8.dy, grid8.dz)[axis - 1]
        lhs = grid_inner(fd.difference_quotient(f, axis, l), g)
        rhs = -grid_inner(f, fd.difference_quotient(g, axis, -l))
        assert lhs == pytest.approx(rhs, abs=1e-14 * 100)

    def test_product_rule(self, grid8):
        f, g = random_physical(grid8, 3), random_physical(grid8, 4)
        l = grid8.dz
        fg = PhysicalField3D(grid8, f.values * g.values)
        lhs = fd.difference_quotient(fg, 3, l).values
        g_shift = np.roll(g.values, -1, axis=2)
        rhs = f.values * fd.difference_quotient(g, 3, l).values + g_shift * fd.difference_quotient(f, 3, l).values
        assert np.allclose(lhs, rhs, atol=1e-12)

    def test_rejects_off_grid_shift(self, grid8):
        with pytest.raises(ValueError):
            fd.difference_quotient(random_physical(grid8), 1, 0.3 * grid8.dx)

    def test_rejects_zero_and_bad_axis(self, grid8):
        with pytest.raises(ValueError):
            fd.difference_quotient(random_physical(grid8), 1, 0.0)
        with pytest.raises(ValueError):
            fd.difference_quotient(random_physical(grid8), 4, grid8.dx)


class TestSolver:
    def test_zero_state(self, grid8, params):
        s = fd.make_fd_state(*(np.zeros(grid8.shape) for _ in range(3)), grid8, params)
        out = fd.fd_step(s, 1e-3)
        assert all(np.all(a == 0) for a in (out.v1, out.v2, out.T))

    def test_vertical_diffusion_rate(self):
        g = Grid3(4, 4, 16)
        p = Params(R3=2.0)
        _, _, Z = g.mesh()
        T0 = np.sin(PI * Z) * np.ones(g.shape)
        s = fd.make_fd_state(np.zeros(g.shape), np.zeros(g.shape), T0, g, p)
        t_end = 0.1
        out = fd.fd_integrate(s, t_end)
        # the centred stencil damps sin(pi z) at rate (2 - 2 cos(pi dz)) / dz^2 / R3
        discrete_rate = (2 - 2 * np.cos(PI * g.dz)) / g.dz**2 / 2.0
        assert np.allclose(out.T, np.exp(-discrete_rate * t_end) * T0, atol=1e-9)
        exact = np.exp(-(PI**2) * t_end / 2.0) * T0
        rel = np.max(np.abs(out.T - exact)) / np.max(np.abs(exact))
        assert rel < (PI * g.dz) ** 2 / 12 * PI**2 * t_end / 2.0 * 1.1

    def test_repeatable(self, grid8, params):
        rng = np.random.default_rng(0)
        s = fd.make_fd_state(*(rng.standard_normal(grid8.shape) for _ in range(3)), grid8, params)
        a, b = fd.fd_step(s, 1e-4), fd.fd_step(s, 1e-4)
        assert np.array_equal(a.v1, b.v1) and np.array_equal(a.T, b.T)

    def test_constraints_preserved(self, grid8, params):
        rng = np.random.default_rng(1)
        s = fd.make_fd_state(*(rng.standard_normal(grid8.shape) for _ in range(3)), grid8, params)
        fd.check_fd_state(s)
        out = fd.fd_integrate(s, 5e-3)
        fd.check_fd_state(out)

    def test_check_flags_bad_state(self, grid8, params):
        rng = np.random.default_rng(2)
        s = fd.make_fd_state(*(rng.standard_normal(grid8.shape) for _ in range(3)), grid8, params)
        bad = fd.FdState(s.v1, s.v2, s.T + 1.0, grid8, params)
        with pytest.raises(PreconditionError):
            fd.check_fd_state(bad)

    def test_shear_decay(self):
        g = Grid3(16, 16, 4)
        p = Params(R1=1.0)
        _, Y, _ = g.mesh()
        v1 = np.sin(2 * PI * Y) * np.ones(g.shape)
        s = fd.make_fd_state(v1, np.zeros(g.shape), np.zeros(g.shape), g, p)
        out = fd.fd_integrate(s, 0.02)
        rate = (2 - 2 * np.cos(2 * PI * g.dy)) / g.dy**2
        assert np.allclose(out.v1, np.exp(-rate * 0.02) * v1, atol=1e-8)

    def test_rejects_negative_span(self, grid8, params):
        s = fd.make_fd_state(*(np.zeros(grid8.shape) for _ in range(3)), grid8, params, time=1.0)
        with pytest.raises(ValueError):
            fd.fd_integrate(s, 0.5)
