"""Prognostic state, parameters, diagnostic w and pressure, and the
half-domain <-> periodic-box conversions."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal, Sequence

import numpy as np

from . import spectral_core as sc
from .errors import DimensionError, IncompatibilityError, PreconditionError
from .spectral_core import Grid3, PhysicalField3D, SpectralField3D

#: Tolerance on T at z = -h and z = 0 for half-domain data.
EXTENSION_TOL = 1e-8


@dataclass(frozen=True)
class Params:
    """Physical parameters.

    R1, R2: horizontal and vertical Reynolds numbers for the momentum viscosity.
    R3: inverse vertical eddy diffusivity for temperature.
    h: half-height of the periodic box (the physical layer is (-h, 0)).
    f0: Coriolis parameter.
    epsilon: horizontal temperature diffusion; 0 selects the vertical-only system.
    """

    R1: float = 1.0
    R2: float = 1.0
    R3: float = 1.0
    h: float = 1.0
    f0: float = 1.0
    epsilon: float = 0.0

    def __post_init__(self):
        for name in ("R1", "R2", "R3", "h"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value}")
        if not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")
        if not math.isfinite(self.f0):
            raise ValueError(f"f0 must be finite, got {self.f0}")

    def with_epsilon(self, epsilon: float) -> "Params":
        return replace(self, epsilon=epsilon)


@dataclass(frozen=True, eq=False)
class State:
    v1: SpectralField3D
    v2: SpectralField3D
    T: SpectralField3D
    params: Params
    time: float = 0.0

    def __post_init__(self):
        if not (self.v1.grid == self.v2.grid == self.T.grid):
            raise DimensionError("state fields live on different grids")
        if not math.isclose(self.grid.h, self.params.h, rel_tol=1e-14):
            raise DimensionError(f"grid half-height {self.grid.h} differs from params.h {self.params.h}")

    @property
    def grid(self) -> Grid3:
        return self.v1.grid

    def fields(self) -> tuple[SpectralField3D, SpectralField3D, SpectralField3D]:
        return (self.v1, self.v2, self.T)

    def replace(self, **changes) -> "State":
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class DerivedFields:
    w: SpectralField3D
    p_s: SpectralField3D
    p: SpectralField3D


def leray_barotropic(v1: SpectralField3D, v2: SpectralField3D) -> tuple[SpectralField3D, SpectralField3D]:
    """Remove the gradient part of the vertical mean of (v1, v2).

    Only the m = 0 plane is touched, so the baroclinic part is unchanged.
    """
    grid = v1.grid
    kx = grid.kx_int[:, :, 0]
    ky = grid.ky_int[:, :, 0]
    k2 = kx**2 + ky**2
    a = v1.coeffs.copy()
    b = v2.coeffs.copy()
    a0, b0 = a[:, :, 0], b[:, :, 0]
    div = kx * a0 + ky * b0
    scale = np.divide(div, k2, out=np.zeros_like(div), where=k2 > 0)
    a[:, :, 0] = a0 - kx * scale
    b[:, :, 0] = b0 - ky * scale
    return SpectralField3D(grid, a, v1.parity), SpectralField3D(grid, b, v2.parity)


def project_fields(
    v1: SpectralField3D, v2: SpectralField3D, T: SpectralField3D
) -> tuple[SpectralField3D, SpectralField3D, SpectralField3D]:
    """Parity projection, 2/3 dealiasing and barotropic Leray projection."""
    v1 = sc.dealias(sc.parity_project(v1, "even"))
    v2 = sc.dealias(sc.parity_project(v2, "even"))
    T = sc.dealias(sc.parity_project(T, "odd"))
    v1, v2 = leray_barotropic(v1, v2)
    return v1, v2, T


def make_state(
    v0_phys: Sequence[PhysicalField3D],
    T0_phys: PhysicalField3D,
    params: Params,
    time: float = 0.0,
) -> State:
    """Build a State from physical samples, projecting onto the constraint set."""
    a, b = v0_phys
    grid = T0_phys.grid
    if not (a.grid == b.grid == grid):
        raise DimensionError("initial fields live on different grids")
    for f in (a, b, T0_phys):
        if not np.all(np.isfinite(f.values)):
            raise ValueError("initial data contain NaN or inf")
    v1, v2, T = project_fields(sc.forward(a), sc.forward(b), sc.forward(T0_phys))
    return State(v1, v2, T, params, float(time))


def state_from_functions(grid: Grid3, params: Params, v1_fn, v2_fn, T_fn, time: float = 0.0) -> State:
    """Convenience wrapper: sample callables ``f(x, y, z)`` and call make_state."""
    X, Y, Z = grid.mesh()

    def sample(fn):
        return PhysicalField3D(grid, np.array(np.broadcast_to(fn(X, Y, Z), grid.shape), dtype=float))

    return make_state((sample(v1_fn), sample(v2_fn)), sample(T_fn), params, time)


def compute_w(state: State) -> SpectralField3D:
    """Vertical velocity ``w = -int_{-h}^{z} div_H v``."""
    div = sc.horizontal_divergence(state.v1, state.v2)
    return -sc.vertical_integral_from_bottom(div)


def surface_pressure(F1: SpectralField3D, F2: SpectralField3D) -> SpectralField3D:
    """Zero-mean ``p_s`` with ``Lap_H p_s = div_H`` of the vertical mean of (F1, F2)."""
    grid = F1.grid
    bar1, _ = sc.vertical_average_split(F1)
    bar2, _ = sc.vertical_average_split(F2)
    div = sc.horizontal_divergence(bar1, bar2).coeffs
    kh2 = np.broadcast_to(grid.kh2, grid.shape)
    ps = np.divide(div, -kh2, out=np.zeros_like(div), where=kh2 > 0)
    return SpectralField3D(grid, ps, "even")


def compute_pressure(
    state: State, explicit_tendency: tuple[SpectralField3D, SpectralField3D]
) -> DerivedFields:
    """Surface pressure from the explicit barotropic tendency and the full
    hydrostatic pressure ``p = p_s - int_{-h}^{z} T``."""
    F1, F2 = explicit_tendency
    p_s = surface_pressure(F1, F2)
    p = p_s - sc.vertical_integral_from_bottom(state.T)
    return DerivedFields(w=compute_w(state), p_s=p_s, p=p.with_parity("even"))


# --- half domain (-h, 0) <-> periodic box (-h, h) -------------------------

def half_z(grid: Grid3) -> np.ndarray:
    """Heights of the half-domain samples: z_k for k = 0..nz/2 (both ends included)."""
    return grid.z[: grid.nz // 2 + 1].copy()


def extend_to_full_domain(
    v0_half: Sequence[np.ndarray], T0_half: np.ndarray, grid: Grid3
) -> tuple[PhysicalField3D, PhysicalField3D, PhysicalField3D]:
    """Even (velocity) and odd (temperature) reflection about z = 0.

    Half-domain arrays carry ``nz/2 + 1`` vertical samples at ``half_z(grid)``.
    """
    nz = grid.nz
    half_shape = (grid.nx, grid.ny, nz // 2 + 1)
    T0_half = np.asarray(T0_half, dtype=float)
    arrays = [np.asarray(a, dtype=float) for a in v0_half]
    for a in (*arrays, T0_half):
        if a.shape != half_shape:
            raise DimensionError(f"half-domain array shape {a.shape}, expected {half_shape}")
    bottom = float(np.max(np.abs(T0_half[:, :, 0])))
    top = float(np.max(np.abs(T0_half[:, :, -1])))
    if max(bottom, top) > EXTENSION_TOL:
        raise IncompatibilityError(
            f"shifted temperature must vanish at z=-h and z=0 (got {bottom:.2e}, {top:.2e}); "
            "its odd extension would not be periodic-smooth"
        )
    mirror = nz - np.arange(nz // 2 + 1, nz)

    def extend(a, sign):
        full = np.empty(grid.shape)
        full[:, :, : nz // 2 + 1] = a
        full[:, :, nz // 2 + 1 :] = sign * a[:, :, mirror]
        return full

    v1 = PhysicalField3D(grid, extend(arrays[0], 1.0))
    v2 = PhysicalField3D(grid, extend(arrays[1], 1.0))
    T = PhysicalField3D(grid, extend(T0_half, -1.0))
    return v1, v2, T


def restrict_to_half_domain(f: PhysicalField3D) -> np.ndarray:
    return f.values[:, :, : f.grid.nz // 2 + 1].copy()


def shift_temperature(
    T: np.ndarray, z: np.ndarray, h: float, direction: Literal["shift", "unshift"] = "shift"
) -> np.ndarray:
    """``T + z/h`` (shift) or ``T - z/h`` (unshift); ``z`` broadcasts along the last axis."""
    profile = np.asarray(z, dtype=float) / h
    if direction == "shift":
        return np.asarray(T, dtype=float) + profile
    if direction == "unshift":
        return np.asarray(T, dtype=float) - profile
    raise ValueError(f"direction must be 'shift' or 'unshift', got {direction!r}")


def constraint_violations(state: State) -> dict[str, float]:
    """Sizes of the departures from the invariant subspace and from div_H vbar = 0."""
    bar1, _ = sc.vertical_average_split(state.v1)
    bar2, _ = sc.vertical_average_split(state.v2)
    divbar = sc.horizontal_divergence(bar1, bar2)
    return {
        "v_odd_part": math.hypot(sc.parity_residual(state.v1, "even"), sc.parity_residual(state.v2, "even")),
        "T_even_part": sc.parity_residual(state.T, "odd"),
        "divbar_l2": sc.l2_norm(divbar),
    }


def check_state(state: State, tol: float = 1e-10) -> None:
    bad = {k: v for k, v in constraint_violations(state).items() if v > tol}
    if bad:
        raise PreconditionError(f"state violates constraints: {bad}")
