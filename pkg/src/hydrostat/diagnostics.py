"""Norms, energy budgets, regularity functionals and stability envelopes.

All quantities are squared L2 norms (or inner products) over the full
periodic box, evaluated spectrally with the physical wavevector
``(2 pi kx, 2 pi ky, m pi / h)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import spectral_core as sc
from .dynamics import SourceSpec, tendency
from .spectral_core import SpectralField3D
from .state_model import Params, State, compute_w

# --- reports ---------------------------------------------------------------


@dataclass(frozen=True)
class EnergyReport:
    time: float
    v_L2: float
    v_H1: float
    v_H2: float
    T_L2: float
    T_H1: float
    T_H2: float
    diss_v_horizontal: float  # (1/R1) |grad_H v|^2
    diss_v_vertical: float  # (1/R2) |dz v|^2
    diss_T_vertical: float  # (1/R3) |dz T|^2
    diss_T_horizontal: float  # epsilon |grad_H T|^2
    coupling_v: float  # <grad_H int_{-h}^z T, v>
    coupling_T: float  # (1/h) <int_{-h}^z div_H v, T>
    divbar_L2: float
    w_boundary_max: float
    residual_v: float = float("nan")  # semi-discrete identity residuals (relative)
    residual_T: float = float("nan")

    @property
    def energy_v(self) -> float:
        return 0.5 * self.v_L2**2

    @property
    def energy_T(self) -> float:
        return 0.5 * self.T_L2**2

    @property
    def diss_v(self) -> float:
        return self.diss_v_horizontal + self.diss_v_vertical

    @property
    def diss_T(self) -> float:
        return self.diss_T_vertical + self.diss_T_horizontal


@dataclass(frozen=True)
class RegularityReport:
    time: float
    eta_L2: float
    eta_H1: float
    eta_H2: float
    theta_L2: float
    theta_H1: float
    theta_H2: float
    C_R: float
    X: float
    Y: float
    Z: float
    weighted_eta_theta_H2: float  # t^2 (|eta|_H2^2 + |theta|_H2^2)
    weighted_u_H2: float  # t |u|_H2^2, u = dz v
    anisotropic_ratio: float
    X_terms: dict = field(default_factory=dict)
    Y_terms: dict = field(default_factory=dict)


# --- helpers ---------------------------------------------------------------


def _sq(coeffs: np.ndarray, grid: sc.Grid3, weight=1.0) -> float:
    """Volume-weighted sum of weight * |c|^2."""
    return grid.volume * float(np.sum(weight * sc.power(coeffs)))


def _grad_h_sq(f: SpectralField3D) -> float:
    return _sq(f.coeffs, f.grid, f.grid.kh2)


def _dz_sq(f: SpectralField3D) -> float:
    return _sq(f.coeffs, f.grid, f.grid.kz**2)


def _vec_sobolev(fields: Sequence[SpectralField3D], s: int) -> float:
    return math.sqrt(sum(sc.sobolev_norm_sq(f, s) for f in fields))


def c_r(params: Params) -> float:
    R1, R2, R3 = params.R1, params.R2, params.R3
    return 2.0 * R1**2 * (R1 + R2) * (R2 - R3) ** 2 / (R2**2 * R3)


def coupling_terms(state: State) -> tuple[float, float, SpectralField3D]:
    """(<grad_H int T, v>, (1/h) <int div_H v, T>, w)."""
    buoy = sc.vertical_integral_from_bottom(state.T)
    cv = sc.inner(sc.derivative(buoy, "x"), state.v1) + sc.inner(sc.derivative(buoy, "y"), state.v2)
    w = compute_w(state)
    cT = -sc.inner(w, state.T) / state.params.h
    return cv, cT, w


def semi_discrete_residuals(state: State, source: SourceSpec | None = None) -> tuple[float, float]:
    """Relative residual of the continuous-time energy identities for the
    spatially discrete system: ``<v, N_v> - coupling_v`` (advection, Coriolis
    and surface pressure must drop out) and the temperature analogue."""
    tend = tendency(state, source)
    cv, cT, _ = coupling_terms(state)
    pv = sc.inner(state.v1, tend.dv1) + sc.inner(state.v2, tend.dv2)
    pT = sc.inner(state.T, tend.dT)
    if source is not None:
        Q1, Q2, QT = source.sample(state.grid, state.time)
        for q, f in ((Q1, state.v1), (Q2, state.v2)):
            if q is not None:
                cv += sc.inner(q, f)
        if QT is not None:
            cT += sc.inner(QT, state.T)
    scale_v = (
        sc.l2_norm(state.v1) * sc.l2_norm(tend.dv1) + sc.l2_norm(state.v2) * sc.l2_norm(tend.dv2) + abs(cv)
    )
    scale_T = sc.l2_norm(state.T) * sc.l2_norm(tend.dT) + abs(cT)
    rv = abs(pv - cv) / scale_v if scale_v > 0 else 0.0
    rT = abs(pT - cT) / scale_T if scale_T > 0 else 0.0
    return rv, rT


# --- operations ------------------------------------------------------------


def norms(state: State, with_residuals: bool = False, source: SourceSpec | None = None) -> EnergyReport:
    p = state.params
    v = (state.v1, state.v2)
    cv, cT, w = coupling_terms(state)
    bar1, _ = sc.vertical_average_split(state.v1)
    bar2, _ = sc.vertical_average_split(state.v2)
    divbar = sc.l2_norm(sc.horizontal_divergence(bar1, bar2))
    w_bnd = max(
        float(np.max(np.abs(sc.evaluate_at_z(w, -p.h)))),
        float(np.max(np.abs(sc.evaluate_at_z(w, p.h)))),
    )
    rv = rT = float("nan")
    if with_residuals:
        rv, rT = semi_discrete_residuals(state, source)
    return EnergyReport(
        time=state.time,
        v_L2=_vec_sobolev(v, 0),
        v_H1=_vec_sobolev(v, 1),
        v_H2=_vec_sobolev(v, 2),
        T_L2=sc.sobolev_norm(state.T, 0),
        T_H1=sc.sobolev_norm(state.T, 1),
        T_H2=sc.sobolev_norm(state.T, 2),
        diss_v_horizontal=(_grad_h_sq(state.v1) + _grad_h_sq(state.v2)) / p.R1,
        diss_v_vertical=(_dz_sq(state.v1) + _dz_sq(state.v2)) / p.R2,
        diss_T_vertical=_dz_sq(state.T) / p.R3,
        diss_T_horizontal=p.epsilon * _grad_h_sq(state.T),
        coupling_v=cv,
        coupling_T=cT,
        divbar_L2=divbar,
        w_boundary_max=w_bnd,
        residual_v=rv,
        residual_T=rT,
    )


def eta_theta(state: State) -> tuple[SpectralField3D, SpectralField3D]:
    """``eta = dx u2 - dy u1`` and ``theta = dx u1 + dy u2 + R1 T`` with ``u = dz v``."""
    u1 = sc.derivative(state.v1, "z")
    u2 = sc.derivative(state.v2, "z")
    eta = sc.derivative(u2, "x") - sc.derivative(u1, "y")
    theta = sc.horizontal_divergence(u1, u2) + state.params.R1 * state.T
    return eta.with_parity("odd"), theta.with_parity("odd")


def regularity_functionals(state: State, t: float | None = None) -> RegularityReport:
    t = state.time if t is None else t
    grid = state.grid
    kh2, kz2 = grid.kh2, grid.kz**2
    CR = c_r(state.params)
    eta, theta = eta_theta(state)
    vbar = [sc.vertical_average_split(f)[0] for f in (state.v1, state.v2)]
    T = state.T

    def sq(f, weight):
        return _sq(f.coeffs, grid, weight)

    X_terms = {
        "grad_lap_vbar": sum(sq(f, kh2**3) for f in vbar),
        "CR_lap_T": CR * sq(T, kh2**2),
        "CR_grad_dz_T": CR * sq(T, kh2 * kz2),
        "lap_eta": sq(eta, kh2**2),
        "grad_dz_eta": sq(eta, kh2 * kz2),
        "lap_theta": sq(theta, kh2**2),
        "grad_dz_theta": sq(theta, kh2 * kz2),
    }
    Y_terms = {
        "bilap_vbar": sum(sq(f, kh2**4) for f in vbar),
        "lap_dz_T": sq(T, kh2**2 * kz2),
        "grad_dzz_T": sq(T, kh2 * kz2**2),
        "grad_lap_eta": sq(eta, kh2**3),
        "lap_dz_eta": sq(eta, kh2**2 * kz2),
        "grad_lap_theta": sq(theta, kh2**3),
        "lap_dz_theta": sq(theta, kh2**2 * kz2),
    }
    X = 1.0 + sum(X_terms.values())
    Y = sum(Y_terms.values())
    eta_H2 = sc.sobolev_norm_sq(eta, 2)
    theta_H2 = sc.sobolev_norm_sq(theta, 2)
    u_H2 = sum(sc.sobolev_norm_sq(sc.derivative(f, "z"), 2) for f in (state.v1, state.v2))
    ratio = anisotropic_ratio(sc.derivative(T, "z"), state.v1, state.v1)[0]
    return RegularityReport(
        time=t,
        eta_L2=sc.sobolev_norm(eta, 0),
        eta_H1=sc.sobolev_norm(eta, 1),
        eta_H2=math.sqrt(eta_H2),
        theta_L2=sc.sobolev_norm(theta, 0),
        theta_H1=sc.sobolev_norm(theta, 1),
        theta_H2=math.sqrt(theta_H2),
        C_R=CR,
        X=X,
        Y=Y,
        Z=math.log(X),
        weighted_eta_theta_H2=t**2 * (eta_H2 + theta_H2),
        weighted_u_H2=t * u_H2,
        anisotropic_ratio=ratio,
        X_terms=X_terms,
        Y_terms=Y_terms,
    )


def anisotropic_ratio(f: SpectralField3D, g: SpectralField3D, hh: SpectralField3D) -> tuple[float, float]:
    """LHS / RHS for both forms of the anisotropic trilinear estimate.

    LHS = | int_M (int f dz) (int g*hh dz) dxdy |; the RHS factors use
    ``|.|^{1/2} (|.|^{1/2} + |grad_H .|^{1/2})`` on two of the three fields.
    Returns (0, 0) when the LHS vanishes.
    """
    grid = f.grid
    # int_{-h}^{h} f dz = 2h * fbar; its horizontal pairing follows from the m = 0 planes
    fbar = f.coeffs[:, :, 0]
    prod = sc.forward(sc.PhysicalField3D(grid, g.values * hh.values))
    gbar = prod.coeffs[:, :, 0]
    lhs = abs((2 * grid.h) ** 2 * float(np.sum((np.conj(fbar) * gbar).real)))
    if lhs == 0.0:
        return 0.0, 0.0

    def n(a):
        return sc.l2_norm(a)

    def gn(a):
        return math.sqrt(_grad_h_sq(a))

    def half(a):
        return math.sqrt(n(a)) * (math.sqrt(n(a)) + math.sqrt(gn(a)))

    rhs1 = half(f) * n(g) * half(hh)
    rhs2 = n(f) * half(g) * half(hh)
    return lhs / rhs1, lhs / rhs2


@dataclass(frozen=True)
class IdentityResiduals:
    t_mid: np.ndarray
    residual_v: np.ndarray
    residual_T: np.ndarray


def energy_identity_residual(window: Sequence[EnergyReport]) -> IdentityResiduals:
    """Per-interval residuals of the energy identities.

    Over [t_i, t_{i+1}] the change of 1/2|.|^2 divided by the interval
    is compared with the trapezoidal average of dissipation minus coupling,
    which is second-order accurate about the interval midpoint.
    """
    if len(window) < 2:
        raise ValueError("energy_identity_residual needs at least 2 samples")
    t = np.array([r.time for r in window])
    Ev = np.array([r.energy_v for r in window])
    ET = np.array([r.energy_T for r in window])
    Dv = np.array([r.diss_v for r in window])
    DT = np.array([r.diss_T for r in window])
    Cv = np.array([r.coupling_v for r in window])
    CT = np.array([r.coupling_T for r in window])
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise ValueError("sample times must be strictly increasing")

    def avg(a):
        return 0.5 * (a[1:] + a[:-1])

    rv = np.abs(np.diff(Ev) / dt + avg(Dv) - avg(Cv))
    rT = np.abs(np.diff(ET) / dt + avg(DT) - avg(CT))
    return IdentityResiduals(t_mid=avg(t), residual_v=rv, residual_T=rT)


@dataclass(frozen=True)
class GronwallReport:
    times: np.ndarray
    difference: np.ndarray  # d(t) = |vA - vB|^2 + |TA - TB|^2
    log_envelope: np.ndarray  # log d(0) + int_0^t (1 + |vB|_H2^4 + |TB|_H2^4)
    multiplier: float
    violations: list[float]

    @property
    def envelope(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_envelope)

    @property
    def passed(self) -> bool:
        return not self.violations


def difference_gronwall(
    traj_a: Sequence[State], traj_b: Sequence[State], multiplier: float = 10.0
) -> GronwallReport:
    """Compare d(t) with the exponential envelope driven by trajectory B."""
    if len(traj_a) != len(traj_b):
        raise ValueError("trajectories have different numbers of samples")
    times = np.array([s.time for s in traj_a])
    if not np.allclose(times, [s.time for s in traj_b], rtol=0, atol=1e-12):
        raise ValueError("trajectories are sampled at different times")
    if any(a.grid != b.grid for a, b in zip(traj_a, traj_b)):
        raise ValueError("trajectories live on different grids")
    d = np.array(
        [
            sc.l2_norm_sq(a.v1 - b.v1) + sc.l2_norm_sq(a.v2 - b.v2) + sc.l2_norm_sq(a.T - b.T)
            for a, b in zip(traj_a, traj_b)
        ]
    )
    rate = np.array(
        [1.0 + _vec_sobolev((b.v1, b.v2), 2) ** 4 + sc.sobolev_norm(b.T, 2) ** 4 for b in traj_b]
    )
    integral = np.concatenate([[0.0], np.cumsum(0.5 * (rate[1:] + rate[:-1]) * np.diff(times))])
    with np.errstate(divide="ignore"):
        log_env = np.log(d[0]) + integral if d[0] > 0 else np.full_like(integral, -np.inf)
    violations = []
    for t, di, le in zip(times, d, log_env):
        if di > 0 and (le == -np.inf or math.log(di) > math.log(multiplier) + le):
            violations.append(float(t))
    return GronwallReport(times, d, log_env, multiplier, violations)


def report_row(energy: EnergyReport, regularity: RegularityReport | None = None) -> dict:
    """Flat dict for the CSV trace (fixed key order)."""
    row = {k: v for k, v in asdict(energy).items()}
    if regularity is not None:
        for k, v in asdict(regularity).items():
            if k in ("time", "X_terms", "Y_terms"):
                continue
            row[k] = v
    return row
