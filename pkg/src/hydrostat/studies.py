"""Initial-condition presets, single runs and multi-run studies.

Every driver takes a :class:`~hydrostat.io.RunConfig`.  Member runs of a
study are independent trajectories executed on a thread pool whose size is
capped by the ``HYDROSTAT_THREADS`` environment variable; each member writes
only its own files.
"""

from __future__ import annotations

import json
import math
import os
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import oracle_fd as fd
from . import spectral_core as sc
from .diagnostics import (
    GronwallReport,
    difference_gronwall,
    norms,
    regularity_functionals,
    report_row,
)
from .dynamics import SourceSpec
from .errors import BlowUpError, ConfigError
from .io import CsvTrace, RunConfig, read_snapshot, write_csv, write_snapshot
from .mms import manufactured
from .spectral_core import Grid3, PhysicalField3D, SpectralField3D
from .state_model import (
    Params,
    State,
    compute_w,
    extend_to_full_domain,
    half_z,
    make_state,
    project_fields,
    shift_temperature,
    state_from_functions,
)
from .timestepper import integrate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_IO = 4

ANALYTIC_PRESETS = ("zero", "conduction", "shear", "smooth")

# --- presets -----------------------------------------------------------------

FieldFn = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def preset_functions(name: str, amplitude: float, h: float) -> tuple[FieldFn, FieldFn, FieldFn]:
    """Shifted-variable initial fields ``(v1, v2, T)`` of an analytic preset."""
    pi = np.pi
    A = amplitude
    if name in ("zero", "conduction"):
        # the conduction profile T = -z/h is zero once shifted
        def zero(X, Y, Z):
            return np.zeros(np.broadcast_shapes(X.shape, Y.shape, Z.shape))

        return zero, zero, zero
    if name == "shear":
        return (
            lambda X, Y, Z: A * np.sin(2 * pi * Y) + 0 * X + 0 * Z,
            lambda X, Y, Z: 0 * (X + Y + Z),
            lambda X, Y, Z: 0 * (X + Y + Z),
        )
    if name == "smooth":
        return (
            lambda X, Y, Z: 0.4 * A * (np.sin(2 * pi * Y) + 0.6 * np.cos(pi * Z / h) * np.cos(2 * pi * X)),
            lambda X, Y, Z: 0.4 * A * (np.sin(2 * pi * X) + 0.6 * np.cos(pi * Z / h) * np.sin(2 * pi * Y)),
            lambda X, Y, Z: 0.7
            * A
            * np.sin(pi * Z / h)
            * (np.cos(2 * pi * X) * np.cos(2 * pi * Y) + 0.5 * np.sin(2 * pi * X)),
        )
    raise ConfigError(f"preset {name!r} has no closed form")


def conduction_state(grid: Grid3, params: Params) -> State:
    """Conduction profile taken through the shift and parity extension."""
    zh = half_z(grid)
    shape = (grid.nx, grid.ny, zh.size)
    T_raw = np.broadcast_to(-zh / params.h, shape)
    T_half = shift_temperature(T_raw, zh, params.h, "shift")
    zeros = np.zeros(shape)
    v1, v2, T = extend_to_full_domain((zeros, zeros), T_half, grid)
    return make_state((v1, v2), T, params)


def random_state(
    grid: Grid3, params: Params, amplitude: float = 1.0, seed: int = 0, band: int | None = None
) -> State:
    """Band-limited random data in the invariant subspace; velocity and temperature each have L2 norm ``amplitude``."""
    rng = np.random.default_rng(seed)
    band = max(1, min(grid.nx, grid.ny, grid.nz) // 4) if band is None else band
    keep = (
        (np.abs(grid.kx_int) <= band) & (np.abs(grid.ky_int) <= band) & (np.abs(grid.m_int) <= band)
    )
    fields = []
    for _ in range(3):
        f = sc.forward(PhysicalField3D(grid, rng.standard_normal(grid.shape)))
        fields.append(SpectralField3D(grid, np.where(keep, f.coeffs, 0), "none"))
    v1, v2, T = project_fields(*fields)
    # one common factor for (v1, v2) so the barotropic part stays divergence-free
    nv = math.hypot(sc.l2_norm(v1), sc.l2_norm(v2))
    nT = sc.l2_norm(T)
    if nv > 0:
        v1, v2 = v1 * (amplitude / nv), v2 * (amplitude / nv)
    if nT > 0:
        T = T * (amplitude / nT)
    return State(v1, v2, T, params=params, time=0.0)


def initial_state(config: RunConfig, grid: Grid3 | None = None) -> tuple[State, SourceSpec | None]:
    """Initial state and forcing described by ``config.initial``."""
    grid = config.grid if grid is None else grid
    params, spec = config.params, config.initial
    if spec.preset == "conduction":
        return conduction_state(grid, params), None
    if spec.preset in ANALYTIC_PRESETS:
        fns = preset_functions(spec.preset, spec.amplitude, params.h)
        return state_from_functions(grid, params, *fns), None
    if spec.preset == "random":
        return random_state(grid, params, spec.amplitude, spec.seed), None
    if spec.preset == "manufactured":
        m = manufactured(params)
        return m.initial_state(grid), m.source
    state = read_snapshot(spec.path)
    if state.grid != grid:
        raise ConfigError(f"snapshot grid {state.grid} differs from configured grid {grid}")
    return replace(state, params=params), None


def source_for(config: RunConfig) -> SourceSpec | None:
    return manufactured(config.params).source if config.initial.preset == "manufactured" else None


# --- single run ----------------------------------------------------------------


@dataclass
class RunResult:
    exit_code: int
    final: State | None
    csv_path: Path | None
    summary_path: Path | None
    snapshots: list[Path] = field(default_factory=list)
    message: str = ""


def diagnostic_row(state: State, source: SourceSpec | None = None) -> dict:
    energy = norms(state, with_residuals=True, source=source)
    return report_row(energy, regularity_functionals(state))


def _snapshot_name(t: float) -> str:
    return f"snap_t{t:.6f}.bin"


def _final_norms(state: State) -> dict:
    return {
        "time": state.time,
        "v_L2": math.sqrt(sc.l2_norm_sq(state.v1) + sc.l2_norm_sq(state.v2)),
        "T_L2": sc.l2_norm(state.T),
        "v_H2": math.sqrt(sc.sobolev_norm_sq(state.v1, 2) + sc.sobolev_norm_sq(state.v2, 2)),
        "T_H2": sc.sobolev_norm(state.T, 2),
    }


def run(config: RunConfig, out_dir=None, resume=None, quiet: bool = True) -> RunResult:
    """Integrate one trajectory, writing ``diagnostics.csv``, snapshots and ``summary.json``.

    Returns a RunResult whose ``exit_code`` is 0, 3 (blow-up) or 4 (I/O error).
    With ``resume`` the run continues from that snapshot instead of the preset.
    """
    out = Path(out_dir or config.out_dir)
    started = _time.perf_counter()
    try:
        out.mkdir(parents=True, exist_ok=True)
        if resume is not None:
            state = read_snapshot(resume)
            if state.params != config.params:
                state = replace(state, params=config.params)
            source = source_for(config)
        else:
            state, source = initial_state(config)
    except OSError as exc:
        return RunResult(EXIT_IO, None, None, None, message=str(exc))

    csv_path = out / "diagnostics.csv"
    summary_path = out / "summary.json"
    snapshots: list[Path] = []
    trace: CsvTrace | None = None

    def record(s: State):
        nonlocal trace
        row = diagnostic_row(s, source)
        if trace is None:
            trace = CsvTrace(csv_path, list(row))
        trace.write(row)
        if not quiet:
            print(f"t={s.time:.6g}  |v|={row['v_L2']:.6g}  |T|={row['T_L2']:.6g}")
        return None

    def snap(s: State):
        path = out / _snapshot_name(s.time)
        write_snapshot(path, s)
        snapshots.append(path)
        return None

    callbacks = [(config.diagnostics_every, record)]
    if config.snapshot_times:
        callbacks.append((config.snapshot_times, snap))

    exit_code, message, final, blown = EXIT_OK, "", state, False
    try:
        traj = integrate(state, config.stepper, callbacks, source)
        final = traj.final
        write_snapshot(out / "final.bin", final)
    except BlowUpError as exc:
        exit_code, message, blown = EXIT_BLOWUP, str(exc), True
        if exc.trajectory is not None and exc.trajectory.final is not None:
            final = exc.trajectory.final
    except OSError as exc:
        exit_code, message = EXIT_IO, str(exc)
    finally:
        if trace is not None:
            trace.close()

    summary = {
        "exit_code": exit_code,
        "blown_up": blown,
        "message": message,
        "final": _final_norms(final),
        "snapshots": [p.name for p in snapshots],
        "wall_time_s": _time.perf_counter() - started,
    }
    try:
        summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True))
    except OSError as exc:
        return RunResult(EXIT_IO, final, csv_path, None, snapshots, str(exc))
    return RunResult(exit_code, final, csv_path if trace else None, summary_path, snapshots, message)


# --- concurrency ---------------------------------------------------------------


def worker_count() -> int:
    text = os.environ.get("HYDROSTAT_THREADS", "").strip()
    if not text:
        return os.cpu_count() or 1
    try:
        n = int(text)
    except ValueError as exc:
        raise ConfigError(f"HYDROSTAT_THREADS must be an integer, got {text!r}") from exc
    if n < 1:
        raise ConfigError("HYDROSTAT_THREADS must be >= 1")
    return n


def _map(fn, items):
    items = list(items)
    with ThreadPoolExecutor(max_workers=min(worker_count(), max(1, len(items)))) as pool:
        return list(pool.map(fn, items))


def _sampled(state: State, config: RunConfig, source=None, cadence=None):
    """States at every diagnostic time (including the initial one)."""
    traj = integrate(state, config.stepper, [(cadence or config.diagnostics_every, lambda s: s)], source)
    return traj.values(0)


def _state_diff_sq(a: State, b: State) -> float:
    return sc.l2_norm_sq(a.v1 - b.v1) + sc.l2_norm_sq(a.v2 - b.v2) + sc.l2_norm_sq(a.T - b.T)


def _state_norm_sq(s: State) -> float:
    return sc.l2_norm_sq(s.v1) + sc.l2_norm_sq(s.v2) + sc.l2_norm_sq(s.T)


def _add(a: State, b: State, scale: float = 1.0) -> State:
    return replace(a, v1=a.v1 + b.v1 * scale, v2=a.v2 + b.v2 * scale, T=a.T + b.T * scale)


def _h2(state: State) -> float:
    return math.sqrt(
        sc.sobolev_norm_sq(state.v1, 2) + sc.sobolev_norm_sq(state.v2, 2) + sc.sobolev_norm_sq(state.T, 2)
    )


# --- epsilon sweep ---------------------------------------------------------------


@dataclass
class SweepReport:
    epsilons: list[float]
    final_difference: dict[float, float]  # L2 distance to the epsilon = 0 run at t_end
    sup_H2: dict[float, float]  # max over samples of |(v, T)|_H2
    failures: dict[float, str]

    @property
    def differences_decrease(self) -> bool:
        positive = [e for e in self.epsilons if e > 0 and e in self.final_difference]
        diffs = [self.final_difference[e] for e in sorted(positive, reverse=True)]
        return all(a > b for a, b in zip(diffs, diffs[1:]))

    @property
    def sup_H2_spread(self) -> float:
        vals = list(self.sup_H2.values())
        return (max(vals) - min(vals)) / max(vals) if vals and max(vals) > 0 else 0.0


def epsilon_sweep(config: RunConfig, out_dir=None) -> SweepReport:
    """Run every epsilon from the same initial data and compare with epsilon = 0."""
    if 0.0 not in config.epsilons:
        raise ConfigError("epsilon sweep needs 0 in the epsilon list")
    out = Path(out_dir or config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base, source = initial_state(config)

    def member(eps):
        params = config.params.with_epsilon(eps)
        start = replace(base, params=params)
        try:
            states = _sampled(start, config, source)
        except BlowUpError as exc:
            return eps, None, str(exc)
        rows = [{"time": s.time, "H2": _h2(s), "L2": math.sqrt(_state_norm_sq(s))} for s in states]
        write_csv(out / f"eps_{eps:.6g}.csv", rows)
        return eps, states, ""

    results = _map(member, config.epsilons)
    finals = {eps: states[-1] for eps, states, _ in results if states is not None}
    failures = {eps: msg for eps, states, msg in results if states is None}
    sup = {eps: max(_h2(s) for s in states) for eps, states, _ in results if states is not None}
    diff = {}
    if 0.0 in finals:
        ref = finals[0.0]
        diff = {eps: math.sqrt(_state_diff_sq(s, ref)) for eps, s in finals.items()}
    report = SweepReport(list(config.epsilons), diff, sup, failures)
    write_csv(
        out / "sweep.csv",
        [
            {
                "epsilon": e,
                "final_L2_difference": diff.get(e, float("nan")),
                "sup_H2": sup.get(e, float("nan")),
                "failed": int(e in failures),
            }
            for e in config.epsilons
        ],
    )
    return report


# --- continuous dependence ----------------------------------------------------------


def perturb(state: State, magnitude: float, seed: int) -> State:
    """``state`` plus a random admissible perturbation of combined L2 norm ``magnitude``."""
    if magnitude == 0:
        return state
    direction = random_state(state.grid, state.params, 1.0, seed)
    return _add(state, direction, magnitude / math.sqrt(_state_norm_sq(direction)))


@dataclass
class DependenceReport:
    magnitudes: list[float]
    final_difference: dict[float, float]  # sqrt(d(t_end)) per magnitude
    gronwall: dict[float, GronwallReport]
    scaling_ratio: float  # observed / expected final-difference ratio of the two largest magnitudes

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.gronwall.values())


def dependence_study(config: RunConfig, out_dir=None) -> DependenceReport:
    out = Path(out_dir or config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = config.perturbation
    base, source = initial_state(config)

    def member(mag):
        return _sampled(perturb(base, mag, spec.seed), config, source)

    base_states = _sampled(base, config, source)
    pert_states = _map(member, spec.magnitudes)
    reports, finals = {}, {}
    for mag, states in zip(spec.magnitudes, pert_states):
        rep = difference_gronwall(states, base_states, spec.multiplier)
        reports[mag] = rep
        finals[mag] = math.sqrt(rep.difference[-1])
        write_csv(
            out / f"dependence_{mag:.6g}.csv",
            [
                {"time": t, "difference": d, "log_envelope": le, "violation": int(t in rep.violations)}
                for t, d, le in zip(rep.times, rep.difference, rep.log_envelope)
            ],
        )
    nonzero = sorted((m for m in spec.magnitudes if m > 0), reverse=True)
    ratio = float("nan")
    if len(nonzero) >= 2 and finals[nonzero[1]] > 0:
        ratio = (finals[nonzero[0]] / finals[nonzero[1]]) / (nonzero[0] / nonzero[1])
    report = DependenceReport(list(spec.magnitudes), finals, reports, ratio)
    (out / "dependence.json").write_text(
        json.dumps(
            {
                "passed": report.passed,
                "scaling_ratio": ratio,
                "final_difference": {repr(k): v for k, v in finals.items()},
            },
            indent=2,
        )
    )
    return report


# --- spectral versus finite differences ------------------------------------------------


@dataclass
class CrossValidationReport:
    resolutions: list[int]
    reference_n: int
    rel_v: dict[int, float]
    rel_T: dict[int, float]
    rel_w: dict[int, float]

    def refinement_ratio(self, key: str = "v") -> float:
        table = {"v": self.rel_v, "T": self.rel_T, "w": self.rel_w}[key]
        a, b = sorted(self.resolutions)[:2]
        return table[a] / table[b]


def _rel(diff_sq: float, ref_sq: float) -> float:
    return math.sqrt(diff_sq / ref_sq) if ref_sq > 0 else math.sqrt(diff_sq)


def cross_validate(config: RunConfig, out_dir=None) -> CrossValidationReport:
    """Compare the finite-difference oracle at each resolution with a spectral
    reference computed at the finest resolution, on the FD grid points."""
    if config.initial.preset not in ANALYTIC_PRESETS:
        raise ConfigError(f"cross-validation needs an analytic preset, not {config.initial.preset!r}")
    resolutions = sorted(config.fd_resolutions)
    n_ref = resolutions[-1]
    if any(n_ref % n for n in resolutions):
        raise ConfigError("every FD resolution must divide the finest one")
    h, params = config.params.h, config.params
    fns = preset_functions(config.initial.preset, config.initial.amplitude, h)
    ref_grid = Grid3(n_ref, n_ref, n_ref, h)
    ref = integrate(state_from_functions(ref_grid, params, *fns), config.stepper).final
    ref_w = compute_w(ref).values

    def member(n):
        grid = Grid3(n, n, n, h)
        X, Y, Z = grid.mesh()
        vals = [np.broadcast_to(f(X, Y, Z), grid.shape) for f in fns]
        s = fd.make_fd_state(*vals, grid, params)
        return n, fd.fd_integrate(s, config.stepper.t_end)

    rel_v, rel_T, rel_w = {}, {}, {}
    for n, s in _map(member, resolutions):
        st = n_ref // n
        sub = (slice(None, None, st),) * 3
        r1, r2, rT = ref.v1.values[sub], ref.v2.values[sub], ref.T.values[sub]
        rel_v[n] = _rel(np.sum((s.v1 - r1) ** 2 + (s.v2 - r2) ** 2), np.sum(r1**2 + r2**2))
        rel_T[n] = _rel(np.sum((s.T - rT) ** 2), np.sum(rT**2))
        rw = ref_w[sub]
        rel_w[n] = _rel(np.sum((fd.fd_w(s) - rw) ** 2), np.sum(rw**2))
    report = CrossValidationReport(resolutions, n_ref, rel_v, rel_T, rel_w)
    out = Path(out_dir or config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(
        out / "cross_validation.csv",
        [{"n": n, "rel_v": rel_v[n], "rel_T": rel_T[n], "rel_w": rel_w[n]} for n in resolutions],
    )
    return report


# --- manufactured-solution convergence ---------------------------------------------------


@dataclass
class ConvergenceReport:
    resolutions: list[int]
    spatial_error: dict[int, float]  # max-norm error against the exact fields
    dts: list[float]
    temporal_error: dict[float, float]  # max-norm distance to the smallest-dt run

    @property
    def orders_of_magnitude(self) -> float:
        errs = [self.spatial_error[n] for n in sorted(self.resolutions)]
        return math.log10(errs[0] / errs[-1])

    @property
    def temporal_ratios(self) -> list[float]:
        errs = [self.temporal_error[d] for d in sorted(self.dts, reverse=True)[:-1]]
        return [a / b for a, b in zip(errs, errs[1:])]


def _max_err(state: State, exact) -> float:
    return max(float(np.max(np.abs(f.values - e))) for f, e in zip(state.fields(), exact))


def convergence(config: RunConfig, out_dir=None) -> ConvergenceReport:
    """Spatial refinement against the manufactured solution at the configured dt,
    then dt refinement (self-convergence) at the middle resolution."""
    m = manufactured(config.params)
    h = config.params.h
    resolutions = sorted(config.mms_resolutions)

    def spatial(n):
        grid = Grid3(n, n, n, h)
        final = integrate(m.initial_state(grid), config.stepper, source=m.source).final
        return n, _max_err(final, m.exact_values(grid, final.time))

    spatial_error = dict(_map(spatial, resolutions))
    n_mid = resolutions[len(resolutions) // 2]
    grid = Grid3(n_mid, n_mid, n_mid, h)
    dts = sorted(config.mms_dts, reverse=True)

    def temporal(dt):
        cfg = replace(config.stepper, dt=dt)
        return dt, integrate(m.initial_state(grid), cfg, source=m.source).final

    finals = dict(_map(temporal, dts))
    finest = finals[dts[-1]]
    temporal_error = {
        dt: _max_err(finals[dt], [f.values for f in finest.fields()]) for dt in dts[:-1]
    }
    temporal_error[dts[-1]] = 0.0
    report = ConvergenceReport(resolutions, spatial_error, dts, temporal_error)
    out = Path(out_dir or config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "convergence_space.csv", [{"n": n, "max_error": spatial_error[n]} for n in resolutions])
    write_csv(out / "convergence_time.csv", [{"dt": d, "max_difference": temporal_error[d]} for d in dts])
    return report
