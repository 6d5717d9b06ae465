"""Second-order finite-difference solver used only to cross-check the
spectral code path.

It shares nothing with the spectral machinery: derivatives are centred
differences via ``np.roll``, ``w`` and ``int T`` come from cumulative
trapezoidal sums, the surface pressure is a dense least-squares solve of the
discrete ``div grad`` system, and time stepping is classical explicit RK4.
Intended for grids up to 32^3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .errors import BlowUpError, PreconditionError
from .spectral_core import Grid3, PhysicalField3D
from .state_model import Params

PARITY_TOL = 1e-8


def difference_quotient(f: PhysicalField3D, axis: int, l: float) -> PhysicalField3D:
    """``(f(x + l e_axis) - f(x)) / l`` for a shift ``l`` that is a whole number of grid cells."""
    if axis not in (1, 2, 3):
        raise ValueError(f"axis must be 1, 2 or 3, got {axis}")
    if l == 0:
        raise ValueError("shift l must be nonzero")
    grid = f.grid
    spacing = (grid.dx, grid.dy, grid.dz)[axis - 1]
    cells = l / spacing
    shift = int(round(cells))
    if abs(cells - shift) > 1e-9 * max(1.0, abs(cells)):
        raise ValueError(f"shift {l} is not a multiple of the grid spacing {spacing}")
    shifted = np.roll(f.values, -shift, axis=axis - 1)
    return PhysicalField3D(grid, (shifted - f.values) / l)


# --- centred differences -------------------------------------------------


def _d1(a: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (np.roll(a, -1, axis) - np.roll(a, 1, axis)) / (2.0 * h)


def _d2(a: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (np.roll(a, -1, axis) - 2.0 * a + np.roll(a, 1, axis)) / h**2


def _cumtrapz_z(a: np.ndarray, dz: float) -> np.ndarray:
    """``int_{-h}^{z_k} a`` by the trapezoidal rule, zero at k = 0."""
    out = np.zeros_like(a)
    out[:, :, 1:] = np.cumsum(0.5 * dz * (a[:, :, 1:] + a[:, :, :-1]), axis=2)
    return out


def _reflect_z(a: np.ndarray) -> np.ndarray:
    nz = a.shape[2]
    return a[:, :, (-np.arange(nz)) % nz]


@lru_cache(maxsize=8)
def _poisson_pinv(nx: int, ny: int) -> np.ndarray:
    """Pseudo-inverse of the wide-stencil Laplacian D.G on the periodic (nx, ny) grid."""
    dx, dy = 1.0 / nx, 1.0 / ny
    n = nx * ny
    eye = np.eye(n).reshape(n, nx, ny)
    cols = (
        (np.roll(eye, -2, 1) - 2 * eye + np.roll(eye, 2, 1)) / (4 * dx**2)
        + (np.roll(eye, -2, 2) - 2 * eye + np.roll(eye, 2, 2)) / (4 * dy**2)
    )
    A = cols.reshape(n, n).T
    return np.linalg.pinv(A, rcond=1e-12)


def _project_barotropic(F1: np.ndarray, F2: np.ndarray, dx: float, dy: float):
    nx, ny, _ = F1.shape
    b1 = F1.mean(axis=2)
    b2 = F2.mean(axis=2)
    div = _d1(b1, 0, dx) + _d1(b2, 1, dy)
    ps = (_poisson_pinv(nx, ny) @ div.ravel()).reshape(nx, ny)
    F1 = F1 - _d1(ps, 0, dx)[:, :, None]
    F2 = F2 - _d1(ps, 1, dy)[:, :, None]
    return F1, F2, ps


@dataclass(frozen=True, eq=False)
class FdState:
    v1: np.ndarray
    v2: np.ndarray
    T: np.ndarray
    grid: Grid3
    params: Params
    time: float = 0.0


def make_fd_state(v1, v2, T, grid: Grid3, params: Params, time: float = 0.0) -> FdState:
    """Symmetrise and make the vertical mean discretely divergence free."""
    v1 = 0.5 * (np.asarray(v1, float) + _reflect_z(np.asarray(v1, float)))
    v2 = 0.5 * (np.asarray(v2, float) + _reflect_z(np.asarray(v2, float)))
    T = 0.5 * (np.asarray(T, float) - _reflect_z(np.asarray(T, float)))
    v1, v2, _ = _project_barotropic(v1, v2, grid.dx, grid.dy)
    return FdState(v1, v2, T, grid, params, float(time))


def fd_w(state: FdState) -> np.ndarray:
    g = state.grid
    div = _d1(state.v1, 0, g.dx) + _d1(state.v2, 1, g.dy)
    return -_cumtrapz_z(div, g.dz)


def fd_rhs(state: FdState):
    g, p = state.grid, state.params
    v1, v2, T = state.v1, state.v2, state.T
    dx, dy, dz = g.dx, g.dy, g.dz
    w = fd_w(state)
    buoy = _cumtrapz_z(T, dz)

    def lap_h(a):
        return _d2(a, 0, dx) + _d2(a, 1, dy)

    def adv(a):
        return v1 * _d1(a, 0, dx) + v2 * _d1(a, 1, dy) + w * _d1(a, 2, dz)

    F1 = -adv(v1) + p.f0 * v2 + _d1(buoy, 0, dx) + lap_h(v1) / p.R1 + _d2(v1, 2, dz) / p.R2
    F2 = -adv(v2) - p.f0 * v1 + _d1(buoy, 1, dy) + lap_h(v2) / p.R1 + _d2(v2, 2, dz) / p.R2
    F1, F2, _ = _project_barotropic(F1, F2, dx, dy)
    FT = -adv(T) - w / p.h + _d2(T, 2, dz) / p.R3 + p.epsilon * lap_h(T)
    return F1, F2, FT


def stable_dt(grid: Grid3, params: Params, safety: float = 0.5) -> float:
    """RK4 step bound from the largest diffusive eigenvalue (|z| <= 2.78 on the real axis)."""
    lam_v = 4.0 * (1 / grid.dx**2 + 1 / grid.dy**2) / params.R1 + 4.0 / grid.dz**2 / params.R2
    lam_T = 4.0 / grid.dz**2 / params.R3 + 4.0 * params.epsilon * (1 / grid.dx**2 + 1 / grid.dy**2)
    return safety * 2.78 / max(lam_v, lam_T)


def fd_step(state: FdState, dt: float) -> FdState:
    """One classical RK4 step."""

    def shifted(k, c):
        return replace(state, v1=state.v1 + c * k[0], v2=state.v2 + c * k[1], T=state.T + c * k[2])

    k1 = fd_rhs(state)
    k2 = fd_rhs(shifted(k1, 0.5 * dt))
    k3 = fd_rhs(shifted(k2, 0.5 * dt))
    k4 = fd_rhs(shifted(k3, dt))
    new = [
        u + dt / 6.0 * (a + 2 * b + 2 * c + d)
        for u, a, b, c, d in zip((state.v1, state.v2, state.T), k1, k2, k3, k4)
    ]
    for a in new:
        if not np.all(np.isfinite(a)) or np.max(np.abs(a)) > 1e12:
            raise BlowUpError(f"finite-difference solver blew up after t={state.time:.6g}", last_valid_time=state.time)
    return replace(state, v1=new[0], v2=new[1], T=new[2], time=state.time + dt)


def fd_integrate(state: FdState, t_end: float, dt: float | None = None) -> FdState:
    """Uniform steps from ``state.time`` to ``t_end`` (dt shrunk to divide the interval)."""
    span = t_end - state.time
    if span < 0:
        raise ValueError("t_end precedes the state time")
    if span == 0:
        return state
    bound = stable_dt(state.grid, state.params)
    dt = bound if dt is None else min(dt, bound)
    n = max(1, math.ceil(span / dt - 1e-9))
    dt = span / n
    for _ in range(n):
        state = fd_step(state, dt)
    return state


def constraint_violations(state: FdState) -> dict[str, float]:
    g = state.grid
    divbar = _d1(state.v1.mean(axis=2), 0, g.dx) + _d1(state.v2.mean(axis=2), 1, g.dy)
    return {
        "v_odd_part": float(np.max(np.abs(state.v1 - _reflect_z(state.v1)))),
        "T_even_part": float(np.max(np.abs(state.T + _reflect_z(state.T)))),
        "divbar_max": float(np.max(np.abs(divbar))),
    }


def check_fd_state(state: FdState, tol: float = PARITY_TOL) -> None:
    bad = {k: v for k, v in constraint_violations(state).items() if v > tol}
    if bad:
        raise PreconditionError(f"finite-difference state violates constraints: {bad}")
