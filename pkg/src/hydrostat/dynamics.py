"""Explicit tendencies of the pressure-eliminated primitive equations.

The stiff linear parts (viscosity, vertical heat diffusion and the optional
horizontal heat diffusion ``epsilon * Lap_H T``) are left to the time stepper.
What remains is

    dv/dt = -(v.grad_H) v - w dz v - f0 k x v + grad_H int_{-h}^{z} T - grad_H p_s + Q_v
    dT/dt = -v.grad_H T - w (dz T + 1/h) + Q_T

with ``w = -int_{-h}^{z} div_H v`` and ``p_s`` fixed by requiring the vertical
mean of dv/dt to be divergence free.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import spectral_core as sc
from .spectral_core import PhysicalField3D, SpectralField3D, dealias
from .state_model import DerivedFields, State, compute_w, surface_pressure

SourceFn = Callable[[np.ndarray, np.ndarray, np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class SourceSpec:
    """Analytic forcing ``Q(x, y, z, t)``; any entry may be None."""

    Q_v1: Optional[SourceFn] = None
    Q_v2: Optional[SourceFn] = None
    Q_T: Optional[SourceFn] = None

    def sample(self, grid: sc.Grid3, t: float):
        X, Y, Z = grid.mesh()
        out = []
        for fn, parity in ((self.Q_v1, "even"), (self.Q_v2, "even"), (self.Q_T, "odd")):
            if fn is None:
                out.append(None)
                continue
            values = np.broadcast_to(np.asarray(fn(X, Y, Z, t), dtype=float), grid.shape)
            out.append(dealias(sc.forward(PhysicalField3D(grid, np.array(values)), parity)))
        return out


@dataclass(frozen=True, eq=False)
class Tendency:
    dv1: SpectralField3D
    dv2: SpectralField3D
    dT: SpectralField3D
    w: SpectralField3D
    p_s: SpectralField3D

    @property
    def barotropic(self) -> tuple[SpectralField3D, SpectralField3D]:
        return barotropic_baroclinic_split(self)[0]

    @property
    def baroclinic(self) -> tuple[SpectralField3D, SpectralField3D]:
        return barotropic_baroclinic_split(self)[1]


def tendency(state: State, source: SourceSpec | None = None, time: float | None = None) -> Tendency:
    """Explicit right-hand side at ``state`` (time defaults to ``state.time``)."""
    grid = state.grid
    params = state.params
    t = state.time if time is None else time
    v1, v2, T = state.v1, state.v2, state.T

    w = compute_w(state)

    phys = {}
    for name, field in (
        ("v1", v1), ("v2", v2), ("w", w),
        ("v1x", sc.derivative(v1, "x")), ("v1y", sc.derivative(v1, "y")), ("v1z", sc.derivative(v1, "z")),
        ("v2x", sc.derivative(v2, "x")), ("v2y", sc.derivative(v2, "y")), ("v2z", sc.derivative(v2, "z")),
        ("Tx", sc.derivative(T, "x")), ("Ty", sc.derivative(T, "y")), ("Tz", sc.derivative(T, "z")),
    ):
        phys[name] = sc.inverse(field).values

    u, v, ww = phys["v1"], phys["v2"], phys["w"]
    adv1 = u * phys["v1x"] + v * phys["v1y"] + ww * phys["v1z"]
    adv2 = u * phys["v2x"] + v * phys["v2y"] + ww * phys["v2z"]
    advT = u * phys["Tx"] + v * phys["Ty"] + ww * phys["Tz"]

    def spec(values, parity):
        return dealias(sc.forward(PhysicalField3D(grid, values), parity))

    A1 = spec(adv1, "even")
    A2 = spec(adv2, "even")
    AT = spec(advT, "odd") + dealias(w) * (1.0 / params.h)

    buoy = sc.vertical_integral_from_bottom(T)
    F1 = -A1 + params.f0 * v2 + sc.derivative(buoy, "x")
    F2 = -A2 - params.f0 * v1 + sc.derivative(buoy, "y")
    dT = -AT

    if source is not None:
        Q1, Q2, QT = source.sample(grid, t)
        if Q1 is not None:
            F1 = F1 + Q1
        if Q2 is not None:
            F2 = F2 + Q2
        if QT is not None:
            dT = dT + QT

    p_s = surface_pressure(F1, F2)
    F1 = F1 - sc.derivative(p_s, "x")
    F2 = F2 - sc.derivative(p_s, "y")
    return Tendency(
        dv1=F1.with_parity("even"),
        dv2=F2.with_parity("even"),
        dT=dT.with_parity("odd"),
        w=w,
        p_s=p_s,
    )


def derived_fields(state: State, source: SourceSpec | None = None) -> DerivedFields:
    """w, p_s and the full pressure at ``state``."""
    tend = tendency(state, source)
    p = tend.p_s - sc.vertical_integral_from_bottom(state.T)
    return DerivedFields(w=tend.w, p_s=tend.p_s, p=p.with_parity("even"))


def barotropic_baroclinic_split(t: Tendency):
    """((bar dv1, bar dv2), (tilde dv1, tilde dv2)) of the momentum tendency."""
    bar1, tilde1 = sc.vertical_average_split(t.dv1)
    bar2, tilde2 = sc.vertical_average_split(t.dv2)
    return (bar1, bar2), (tilde1, tilde2)


def implicit_symbols(grid: sc.Grid3, params) -> tuple[np.ndarray, np.ndarray]:
    """Fourier symbols of the implicit operators for v and T."""
    lam_v = grid.kh2 / params.R1 + grid.kz**2 / params.R2
    lam_T = grid.kz**2 / params.R3 + params.epsilon * grid.kh2
    return np.broadcast_to(lam_v, grid.shape), np.broadcast_to(lam_T, grid.shape)


__all__ = [
    "SourceSpec",
    "Tendency",
    "tendency",
    "derived_fields",
    "barotropic_baroclinic_split",
    "implicit_symbols",
    "dealias",
]
