"""IMEX time integration.

Viscosity and heat diffusion are diagonal in Fourier space, so every
implicit solve is a per-mode division.  Two schemes are provided:

``imex_euler``
    u1 = (u0 + dt N(u0)) / (1 + dt lam)

``imex_rk2``
    three-stage additive Runge-Kutta scheme with an explicit first stage.
    The implicit tableau is the A-stable third-order SDIRK of Ascher, Ruuth
    and Spiteri's (2,3,3) pair (gamma = (3 + sqrt 3)/6); the explicit
    tableau shares its abscissae (0, gamma, 1 - gamma) but is only second
    order, so the pair is second order overall while the stiff linear part
    alone is integrated to third order.  Stage 1 is explicit so stiff
    forced modes see their forcing from the first implicit solve onward.

Every stage is re-projected onto the invariant subspace (parity,
dealiasing, divergence-free vertical mean).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence, Union

import numpy as np

from . import spectral_core as sc
from .dynamics import SourceSpec, implicit_symbols, tendency
from .errors import BlowUpError
from .spectral_core import SpectralField3D
from .state_model import State, compute_w, project_fields

SCHEMES = ("imex_euler", "imex_rk2")
GAMMA = (3.0 + math.sqrt(3.0)) / 6.0
RK2_A = ((0.0, 0.0, 0.0), (0.0, GAMMA, 0.0), (0.0, 1.0 - 2.0 * GAMMA, GAMMA))
RK2_AHAT = ((0.0, 0.0, 0.0), (GAMMA, 0.0, 0.0), (1.0 - GAMMA, 0.0, 0.0))
RK2_B = (0.0, 0.5, 0.5)  # shared by both tableaux
RK2_C = (0.0, GAMMA, 1.0 - GAMMA)
BLOWUP_NORM = 1e12


@dataclass(frozen=True)
class StepperConfig:
    scheme: str = "imex_rk2"
    dt: Union[float, str] = 1e-3  # a step size or "adaptive"
    cfl_safety: float = 0.5
    t_end: float = 1.0
    dt_max: float = 1e-2

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.dt != "adaptive" and not (isinstance(self.dt, (int, float)) and self.dt > 0):
            raise ValueError(f"dt must be positive or 'adaptive', got {self.dt!r}")
        if not (0 < self.cfl_safety <= 1):
            raise ValueError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        if not self.dt_max > 0:
            raise ValueError("dt_max must be positive")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")

    @property
    def adaptive(self) -> bool:
        return self.dt == "adaptive"


def _fields(state: State):
    return state.v1.coeffs, state.v2.coeffs, state.T.coeffs


def _assemble(state: State, a: np.ndarray, b: np.ndarray, c: np.ndarray, time: float) -> State:
    grid = state.grid
    v1, v2, T = project_fields(
        SpectralField3D(grid, a, "even"), SpectralField3D(grid, b, "even"), SpectralField3D(grid, c, "odd")
    )
    return State(v1, v2, T, state.params, time)


def _check_finite(new: State, old: State) -> None:
    for f in new.fields():
        norm = sc.l2_norm(f)
        if not math.isfinite(norm) or norm > BLOWUP_NORM:
            raise BlowUpError(
                f"state blew up between t={old.time:.6g} and t={new.time:.6g} (norm {norm:.3e})",
                last_valid_time=old.time,
            )


def step(state: State, dt: float, cfg: StepperConfig, source: SourceSpec | None = None) -> State:
    """Advance ``state`` by ``dt``."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    lam_v, lam_T = implicit_symbols(state.grid, state.params)
    lam = (lam_v, lam_v, lam_T)
    u0 = _fields(state)
    t0 = state.time

    if cfg.scheme == "imex_euler":
        F = tendency(state, source)
        new = [(u + dt * f.coeffs) / (1.0 + dt * l) for u, f, l in zip(u0, (F.dv1, F.dv2, F.dT), lam)]
        out = _assemble(state, *new, t0 + dt)
    else:
        stages: list[State] = []
        implicit: list[tuple[np.ndarray, ...]] = []
        explicit: list[tuple[np.ndarray, ...]] = []
        for i in range(3):
            ti = t0 + RK2_C[i] * dt
            if i == 0:
                y = state
            else:
                rhs = []
                for k in range(3):
                    acc = u0[k].copy()
                    for j in range(i):
                        if RK2_A[i][j]:
                            acc = acc + dt * RK2_A[i][j] * implicit[j][k]
                        if RK2_AHAT[i][j]:
                            acc = acc + dt * RK2_AHAT[i][j] * explicit[j][k]
                    rhs.append(acc / (1.0 + dt * RK2_A[i][i] * lam[k]))
                y = _assemble(state, *rhs, ti)
            stages.append(y)
            implicit.append(tuple(-l * c for l, c in zip(lam, _fields(y))))
            N = tendency(y, source, time=ti)
            explicit.append((N.dv1.coeffs, N.dv2.coeffs, N.dT.coeffs))
        new = []
        for k in range(3):
            acc = u0[k].copy()
            for i in range(3):
                if RK2_B[i]:
                    acc = acc + dt * RK2_B[i] * (implicit[i][k] + explicit[i][k])
            new.append(acc)
        out = _assemble(state, *new, t0 + dt)

    _check_finite(out, state)
    return out


def cfl_dt(state: State, cfg: StepperConfig) -> float:
    """Advective step bound ``safety * min(dx/max|v1|, dy/max|v2|, dz/max|w|)``, capped at dt_max."""
    grid = state.grid
    limits = []
    for f, spacing in ((state.v1, grid.dx), (state.v2, grid.dy), (compute_w(state), grid.dz)):
        peak = sc.max_abs(f)
        if peak > 0:
            limits.append(spacing / peak)
    if not limits:
        return cfg.dt_max
    return min(cfg.dt_max, cfg.cfl_safety * min(limits))


Trigger = Union[float, Sequence[float]]
Observer = Callable[[State], Any]


@dataclass
class Trajectory:
    """Observer outputs keyed by callback index, plus the final state."""

    records: list[list[tuple[float, Any]]] = field(default_factory=list)
    final: State | None = None
    steps: int = 0
    blown_up: bool = False
    message: str = ""

    def times(self, index: int = 0) -> list[float]:
        return [t for t, _ in self.records[index]]

    def values(self, index: int = 0) -> list[Any]:
        return [v for _, v in self.records[index]]


def _time_tol(t: float) -> float:
    return 1e-12 * max(1.0, abs(t))


def _trigger_times(trigger: Trigger, t0: float, t_end: float) -> list[float]:
    if isinstance(trigger, (int, float)):
        cadence = float(trigger)
        if cadence <= 0:
            raise ValueError("observer cadence must be positive")
        k = math.ceil((t0 - _time_tol(t0)) / cadence)
        times = []
        while k * cadence <= t_end + _time_tol(t_end):
            t = k * cadence
            times.append(t_end if abs(t - t_end) <= _time_tol(t_end) else t)
            k += 1
        return times
    return sorted(float(t) for t in trigger if t0 - _time_tol(t0) <= t <= t_end + _time_tol(t_end))


def integrate(
    state: State,
    cfg: StepperConfig,
    callbacks: Iterable[tuple[Trigger, Observer]] = (),
    source: SourceSpec | None = None,
) -> Trajectory:
    """Step from ``state.time`` to ``cfg.t_end`` landing exactly on every requested observation time."""
    callbacks = list(callbacks)
    traj = Trajectory(records=[[] for _ in callbacks])
    t_end = cfg.t_end
    if t_end < state.time - _time_tol(state.time):
        raise ValueError(f"t_end={t_end} precedes the state time {state.time}")
    if abs(t_end - state.time) <= _time_tol(t_end):
        traj.final = state
        return traj

    schedules = [_trigger_times(trig, state.time, t_end) for trig, _ in callbacks]
    targets = sorted({t for s in schedules for t in s} | {t_end})
    cursor = [0] * len(callbacks)

    def fire(current: State):
        for i, (_, observer) in enumerate(callbacks):
            sched = schedules[i]
            while cursor[i] < len(sched) and sched[cursor[i]] <= current.time + _time_tol(current.time):
                if abs(sched[cursor[i]] - current.time) <= _time_tol(current.time):
                    traj.records[i].append((current.time, observer(current)))
                cursor[i] += 1

    fire(state)
    current = state
    target_idx = 0
    while current.time < t_end - _time_tol(t_end):
        while targets[target_idx] <= current.time + _time_tol(current.time):
            target_idx += 1
        target = targets[target_idx]
        dt = cfl_dt(current, cfg) if cfg.adaptive else float(cfg.dt)
        snap = current.time + dt >= target - 1e-6 * dt
        if snap:
            dt = target - current.time
        try:
            nxt = step(current, dt, cfg, source)
        except BlowUpError as exc:
            traj.final = current
            traj.blown_up = True
            traj.message = str(exc)
            exc.trajectory = traj
            raise
        if snap:
            nxt = nxt.replace(time=target)
        current = nxt
        traj.steps += 1
        fire(current)
    traj.final = current
    return traj
