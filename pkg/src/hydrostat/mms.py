"""Manufactured solution with sympy-derived forcing.

The exact fields are built so that ``w`` and ``int_{-h}^{z} T`` have closed
forms:

    v    = a(t) * (vbar(x, y) + S'(z) V(x, y))      S(z) = sin(pi z/h) exp(cos(pi z/h))
    T    = a(t) * R'(z) Theta(x, y)                 R(z) = exp(cos(pi z/h))
    w    = -a(t) * S(z) div_H V
    int T = a(t) * (R(z) - R(-h)) Theta

``vbar`` is divergence free, ``S'`` is even with zero vertical mean and ``R'``
is odd, so the fields lie in the invariant subspace.  None of the profiles is
band-limited, which makes the spatial error visible.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy as sp

from .dynamics import SourceSpec
from .spectral_core import Grid3
from .state_model import Params, State, state_from_functions

x, y, z, t = sp.symbols("x y z t", real=True)


@dataclass(frozen=True)
class ManufacturedSolution:
    params: Params
    v1: callable
    v2: callable
    T: callable
    w: callable
    source: SourceSpec

    def initial_state(self, grid: Grid3, time: float = 0.0) -> State:
        return state_from_functions(
            grid,
            self.params,
            lambda X, Y, Z: self.v1(X, Y, Z, time),
            lambda X, Y, Z: self.v2(X, Y, Z, time),
            lambda X, Y, Z: self.T(X, Y, Z, time),
            time,
        )

    def exact_values(self, grid: Grid3, time: float):
        X, Y, Z = grid.mesh()
        return tuple(np.broadcast_to(f(X, Y, Z, time), grid.shape) for f in (self.v1, self.v2, self.T))


def _symbolic(params: Params):
    h = sp.Float(params.h)
    pi = sp.pi
    amp = sp.exp(-t)
    S = sp.sin(pi * z / h) * sp.exp(sp.cos(pi * z / h))
    Rz = sp.exp(sp.cos(pi * z / h))
    dS = sp.diff(S, z)
    dR = sp.diff(Rz, z)

    vbar1 = sp.Rational(1, 2) * sp.exp(sp.cos(2 * pi * y))
    vbar2 = sp.Rational(1, 2) * sp.exp(sp.cos(2 * pi * x))
    V1 = sp.Rational(3, 10) * sp.exp(sp.sin(2 * pi * x)) * sp.cos(2 * pi * y)
    V2 = sp.Rational(3, 10) * sp.cos(2 * pi * x) * sp.exp(sp.sin(2 * pi * y))
    Theta = sp.Rational(2, 5) * sp.exp(sp.cos(2 * pi * (x - y)))

    v1 = amp * (vbar1 + dS * V1)
    v2 = amp * (vbar2 + dS * V2)
    T = amp * dR * Theta
    w = -amp * S * (sp.diff(V1, x) + sp.diff(V2, y))
    intT = amp * (Rz - Rz.subs(z, -h)) * Theta
    return v1, v2, T, w, intT


@lru_cache(maxsize=8)
def manufactured(params: Params) -> ManufacturedSolution:
    """Exact fields and matching forcing for the given parameters."""
    v1, v2, T, w, intT = _symbolic(params)
    R1, R2, R3 = (sp.Float(params.R1), sp.Float(params.R2), sp.Float(params.R3))
    f0, eps, h = sp.Float(params.f0), sp.Float(params.epsilon), sp.Float(params.h)

    def lap_h(f):
        return sp.diff(f, x, 2) + sp.diff(f, y, 2)

    def adv(f):
        return v1 * sp.diff(f, x) + v2 * sp.diff(f, y) + w * sp.diff(f, z)

    # surface pressure is left out: the gradient part of the barotropic forcing is projected away
    Q1 = sp.diff(v1, t) - lap_h(v1) / R1 - sp.diff(v1, z, 2) / R2 + adv(v1) - f0 * v2 - sp.diff(intT, x)
    Q2 = sp.diff(v2, t) - lap_h(v2) / R1 - sp.diff(v2, z, 2) / R2 + adv(v2) + f0 * v1 - sp.diff(intT, y)
    QT = sp.diff(T, t) - sp.diff(T, z, 2) / R3 - eps * lap_h(T) + adv(T) + w / h

    def fn(expr):
        return sp.lambdify((x, y, z, t), expr, "numpy")

    source = SourceSpec(Q_v1=fn(Q1), Q_v2=fn(Q2), Q_T=fn(QT))
    return ManufacturedSolution(params, fn(v1), fn(v2), fn(T), fn(w), source)
