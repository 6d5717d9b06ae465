"""Snapshots, run configuration files and diagnostic traces.

Snapshot layout (all little-endian)::

    8s   magic  b"HYDSNAP\\0"
    B    format version
    3I   nx, ny, nz
    7d   h, R1, R2, R3, f0, epsilon, time
    3s   parity tags of v1, v2, T (b"e", b"o" or b"n")
    ...  three complex128 blocks of nx*ny*nz coefficients (v1, v2, T), C order
    32s  SHA-256 of every preceding byte
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import math
import os
import struct
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, IntegrityError
from .spectral_core import Grid3, SpectralField3D
from .state_model import Params, State
from .timestepper import StepperConfig

MAGIC = b"HYDSNAP\0"
VERSION = 1
_HEADER = struct.Struct("<8sB3I7d3s")
_DIGEST = 32
_PARITY_CODES = {"even": b"e", "odd": b"o", "none": b"n"}
_PARITY_NAMES = {v: k for k, v in _PARITY_CODES.items()}


def encode_snapshot(state: State) -> bytes:
    g, p = state.grid, state.params
    tags = b"".join(_PARITY_CODES[f.parity] for f in state.fields())
    header = _HEADER.pack(MAGIC, VERSION, g.nx, g.ny, g.nz, g.h, p.R1, p.R2, p.R3, p.f0, p.epsilon, state.time, tags)
    body = b"".join(np.ascontiguousarray(f.coeffs, dtype="<c16").tobytes() for f in state.fields())
    payload = header + body
    return payload + hashlib.sha256(payload).digest()


def decode_snapshot(blob: bytes) -> State:
    if len(blob) < _HEADER.size + _DIGEST:
        raise IntegrityError("snapshot truncated: shorter than its header")
    payload, digest = blob[:-_DIGEST], blob[-_DIGEST:]
    magic, version, nx, ny, nz, h, R1, R2, R3, f0, eps, time, tags = _HEADER.unpack_from(payload)
    if magic != MAGIC:
        raise IntegrityError("not a hydrostat snapshot (bad magic bytes)")
    if version != VERSION:
        raise IntegrityError(f"unsupported snapshot version {version}")
    n = nx * ny * nz
    expected = _HEADER.size + 3 * n * 16
    if len(payload) != expected:
        raise IntegrityError(f"snapshot has {len(payload)} payload bytes, expected {expected}")
    if hashlib.sha256(payload).digest() != digest:
        raise IntegrityError("snapshot checksum mismatch")
    grid = Grid3(nx, ny, nz, h)
    params = Params(R1=R1, R2=R2, R3=R3, h=h, f0=f0, epsilon=eps)
    blocks = []
    for i in range(3):
        start = _HEADER.size + i * n * 16
        coeffs = np.frombuffer(payload, dtype="<c16", count=n, offset=start).reshape(grid.shape).astype(complex)
        blocks.append(SpectralField3D(grid, coeffs, _PARITY_NAMES[tags[i : i + 1]]))
    return State(*blocks, params=params, time=time)


def snapshot_io(path, state: State | None = None, direction: str = "write") -> State | None:
    """Write ``state`` to ``path`` (atomically) or read a State back."""
    path = Path(path)
    if direction == "write":
        if state is None:
            raise ValueError("writing a snapshot requires a state")
        tmp = path.with_name(path.name + ".tmp")
        with open(tmp, "wb") as fh:
            fh.write(encode_snapshot(state))
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
        return None
    if direction == "read":
        return decode_snapshot(path.read_bytes())
    raise ValueError(f"direction must be 'write' or 'read', got {direction!r}")


def write_snapshot(path, state: State) -> None:
    snapshot_io(path, state, "write")


def read_snapshot(path) -> State:
    return snapshot_io(path, direction="read")


# --- configuration ---------------------------------------------------------

PRESETS = ("zero", "conduction", "shear", "smooth", "random", "manufactured", "file")


@dataclass(frozen=True)
class InitialSpec:
    preset: str = "smooth"
    amplitude: float = 1.0
    seed: int = 0
    path: str = ""


@dataclass(frozen=True)
class PerturbationSpec:
    magnitudes: tuple[float, ...] = (1e-3, 1e-4)
    seed: int = 1
    multiplier: float = 10.0


@dataclass(frozen=True)
class RunConfig:
    grid: Grid3 = Grid3(16, 16, 16, 1.0)
    params: Params = Params()
    initial: InitialSpec = InitialSpec()
    stepper: StepperConfig = StepperConfig()
    diagnostics_every: float = 0.01
    snapshot_times: tuple[float, ...] = ()
    out_dir: str = "out"
    epsilons: tuple[float, ...] = (1e-1, 1e-2, 1e-3, 0.0)
    perturbation: PerturbationSpec = PerturbationSpec()
    fd_resolutions: tuple[int, ...] = (16, 32)
    mms_resolutions: tuple[int, ...] = (8, 16, 32)
    mms_dts: tuple[float, ...] = (2e-3, 1e-3, 5e-4)

    def __post_init__(self):
        if self.initial.preset not in PRESETS:
            raise ConfigError(f"unknown initial preset {self.initial.preset!r}; choose from {PRESETS}")
        if self.initial.preset == "file" and not self.initial.path:
            raise ConfigError("preset 'file' needs initial.path")
        if not self.diagnostics_every > 0:
            raise ConfigError("diagnostics_every must be positive")
        if any(e < 0 for e in self.epsilons):
            raise ConfigError("epsilon values must be nonnegative")
        if any(a < b for a, b in zip(self.epsilons, self.epsilons[1:])):
            raise ConfigError("epsilon list must be nonincreasing")
        if any(n < 4 or n % 2 for n in (*self.fd_resolutions, *self.mms_resolutions)):
            raise ConfigError("resolutions must be even integers >= 4")
        if any(m < 0 for m in self.perturbation.magnitudes):
            raise ConfigError("perturbation magnitudes must be nonnegative")


DEFAULT_CONFIG_TEXT = """\
# hydrostat run configuration.  Lengths are nondimensional (horizontal period 1),
# times are nondimensional model time units.

[grid]
nx = 16            ; collocation points in x (even, >= 4)
ny = 16            ; collocation points in y
nz = 16            ; collocation points over the full period (-h, h)
h = 1.0            ; half-height of the box; the physical layer is (-h, 0)

[params]
R1 = 1.0           ; horizontal Reynolds number (momentum)
R2 = 1.0           ; vertical Reynolds number (momentum)
R3 = 1.0           ; inverse vertical eddy diffusivity (temperature)
f0 = 1.0           ; Coriolis parameter
epsilon = 0.0      ; horizontal temperature diffusion; 0 = vertical diffusion only

[initial]
preset = smooth    ; zero | conduction | shear | smooth | random | manufactured | file
amplitude = 1.0    ; multiplies the preset fields
seed = 0           ; random preset only
path =             ; snapshot file for preset = file

[stepper]
scheme = imex_rk2  ; imex_euler | imex_rk2
dt = 1e-3          ; step size (time units) or "adaptive"
cfl_safety = 0.5   ; fraction of the advective limit used when dt = adaptive
dt_max = 1e-2      ; ceiling on adaptive steps (time units)
t_end = 0.1        ; final time (time units)

[output]
diagnostics_every = 0.01   ; time between diagnostic rows (time units)
snapshot_times =           ; comma-separated times at which to write snapshots
directory = out

[sweep]
epsilons = 1e-1, 1e-2, 1e-3, 0   ; nonincreasing, must contain 0

[perturbation]
magnitudes = 1e-3, 1e-4    ; L2 size of the initial perturbation
seed = 1
multiplier = 10            ; allowed ratio of d(t) to the Gronwall envelope

[studies]
fd_resolutions = 16, 32    ; finite-difference grids for cross-validation
mms_resolutions = 8, 16, 32
mms_dts = 2e-3, 1e-3, 5e-4
"""


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(s) for s in text.replace(";", ",").split(",") if s.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(s) for s in text.split(",") if s.strip())


def parse_config(text: str, base_dir: str | os.PathLike = ".") -> RunConfig:
    """Parse INI-style configuration text (unknown keys are rejected)."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(DEFAULT_CONFIG_TEXT)
        defaults = {s: set(cp[s]) for s in cp.sections()}
        user = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        user.read_string(text)
        for section in user.sections():
            if section not in defaults:
                raise ConfigError(f"unknown config section [{section}]")
            for key, value in user[section].items():
                if key not in defaults[section]:
                    raise ConfigError(f"unknown key {key!r} in [{section}]")
                cp[section][key] = value
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from exc

    try:
        g = cp["grid"]
        h = g.getfloat("h")
        grid = Grid3(g.getint("nx"), g.getint("ny"), g.getint("nz"), h)
        p = cp["params"]
        params = Params(
            R1=p.getfloat("R1"), R2=p.getfloat("R2"), R3=p.getfloat("R3"), h=h,
            f0=p.getfloat("f0"), epsilon=p.getfloat("epsilon"),
        )
        i = cp["initial"]
        path = i.get("path", "").strip()
        if path and not os.path.isabs(path):
            path = str(Path(base_dir) / path)
        initial = InitialSpec(i.get("preset").strip(), i.getfloat("amplitude"), i.getint("seed"), path)
        s = cp["stepper"]
        dt_text = s.get("dt").strip()
        stepper = StepperConfig(
            scheme=s.get("scheme").strip(),
            dt="adaptive" if dt_text == "adaptive" else float(dt_text),
            cfl_safety=s.getfloat("cfl_safety"),
            t_end=s.getfloat("t_end"),
            dt_max=s.getfloat("dt_max"),
        )
        o = cp["output"]
        out_dir = o.get("directory").strip() or "out"
        if not os.path.isabs(out_dir):
            out_dir = str(Path(base_dir) / out_dir)
        pert = cp["perturbation"]
        st = cp["studies"]
        return RunConfig(
            grid=grid,
            params=params,
            initial=initial,
            stepper=stepper,
            diagnostics_every=o.getfloat("diagnostics_every"),
            snapshot_times=_floats(o.get("snapshot_times")),
            out_dir=out_dir,
            epsilons=_floats(cp["sweep"].get("epsilons")),
            perturbation=PerturbationSpec(
                _floats(pert.get("magnitudes")), pert.getint("seed"), pert.getfloat("multiplier")
            ),
            fd_resolutions=_ints(st.get("fd_resolutions")),
            mms_resolutions=_ints(st.get("mms_resolutions")),
            mms_dts=_floats(st.get("mms_dts")),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, base_dir=path.parent)


# --- CSV traces ------------------------------------------------------------


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


class CsvTrace:
    """Append-only CSV writer with a fixed column order; flushed after every row."""

    def __init__(self, path, columns: Sequence[str]):
        self.path = Path(path)
        self.columns = list(columns)
        self._fh = open(self.path, "w", newline="")
        self._writer = csv.writer(self._fh, lineterminator="\r\n")
        self._writer.writerow(self.columns)
        self._fh.flush()

    def write(self, row: dict) -> None:
        self._writer.writerow([format_value(row[c]) for c in self.columns])
        self._fh.flush()

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_csv(path, rows: Iterable[dict], columns: Sequence[str] | None = None) -> None:
    rows = list(rows)
    if columns is None:
        columns = list(rows[0]) if rows else []
    with CsvTrace(path, columns) as trace:
        for row in rows:
            trace.write(row)


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]
