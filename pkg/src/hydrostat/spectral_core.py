"""Periodic grid, Fourier transforms and spectral operators on the box
(0,1) x (0,1) x (-h,h).

Coefficients are stored in the basis exp(2*pi*i*(kx*x + ky*y)) * exp(i*m*pi*z/h)
and normalised so that a single real mode ``sin(2*pi*x)`` has amplitude
``-i/2`` at ``kx = +1``.  Because the vertical grid starts at ``z = -h`` the
raw FFT output is multiplied by ``(-1)**m`` to land in that basis.

All norms are computed from the coefficients via Parseval, so they are
exact for band-limited fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Literal, Union

import numpy as np

from .errors import DimensionError, PreconditionError

Parity = Literal["even", "odd", "none"]
_PARITIES = ("even", "odd", "none")

#: Absolute tolerance on the vertical mean accepted by vertical_integral_from_bottom.
VERTICAL_MEAN_TOL = 1e-10


@dataclass(frozen=True)
class Grid3:
    """Collocation grid ``x_j = j/nx``, ``y_j = j/ny``, ``z_k = -h + 2hk/nz``."""

    nx: int
    ny: int
    nz: int
    h: float = 1.0

    def __post_init__(self):
        for name in ("nx", "ny", "nz"):
            n = getattr(self, name)
            if int(n) != n or n < 4 or n % 2:
                raise ValueError(f"{name} must be an even integer >= 4, got {n}")
        if not self.h > 0:
            raise ValueError(f"h must be positive, got {self.h}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def size(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def volume(self) -> float:
        return 2.0 * self.h

    @property
    def dx(self) -> float:
        return 1.0 / self.nx

    @property
    def dy(self) -> float:
        return 1.0 / self.ny

    @property
    def dz(self) -> float:
        return 2.0 * self.h / self.nz

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.nx) / self.nx

    @cached_property
    def y(self) -> np.ndarray:
        return np.arange(self.ny) / self.ny

    @cached_property
    def z(self) -> np.ndarray:
        return -self.h + 2.0 * self.h * np.arange(self.nz) / self.nz

    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, self.z, indexing="ij")

    # integer wavenumbers, broadcastable against (nx, ny, nz)
    @cached_property
    def kx_int(self) -> np.ndarray:
        return np.rint(np.fft.fftfreq(self.nx) * self.nx).reshape(-1, 1, 1)

    @cached_property
    def ky_int(self) -> np.ndarray:
        return np.rint(np.fft.fftfreq(self.ny) * self.ny).reshape(1, -1, 1)

    @cached_property
    def m_int(self) -> np.ndarray:
        return np.rint(np.fft.fftfreq(self.nz) * self.nz).reshape(1, 1, -1)

    # physical wavenumbers
    @cached_property
    def kx(self) -> np.ndarray:
        return 2.0 * np.pi * self.kx_int

    @cached_property
    def ky(self) -> np.ndarray:
        return 2.0 * np.pi * self.ky_int

    @cached_property
    def kz(self) -> np.ndarray:
        return np.pi * self.m_int / self.h

    @cached_property
    def kh2(self) -> np.ndarray:
        """|k_H|^2 with the physical horizontal wavevector, shape (nx, ny, 1)."""
        return self.kx**2 + self.ky**2

    @cached_property
    def k2(self) -> np.ndarray:
        return self.kh2 + self.kz**2

    @cached_property
    def zphase(self) -> np.ndarray:
        return np.where(self.m_int % 2 == 0, 1.0, -1.0)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        return (
            (np.abs(self.kx_int) <= self.nx / 3)
            & (np.abs(self.ky_int) <= self.ny / 3)
            & (np.abs(self.m_int) <= self.nz / 3)
        )

    def reflect_index(self, axis: int) -> np.ndarray:
        """Index permutation taking wavenumber k to -k along ``axis``."""
        n = self.shape[axis]
        return (-np.arange(n)) % n


@dataclass(frozen=True, eq=False)
class PhysicalField3D:
    grid: Grid3
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise DimensionError(f"values shape {self.values.shape} does not match grid {self.grid.shape}")


@dataclass(frozen=True, eq=False)
class SpectralField3D:
    grid: Grid3
    coeffs: np.ndarray
    parity: Parity = "none"

    def __post_init__(self):
        if self.coeffs.shape != self.grid.shape:
            raise DimensionError(f"coeffs shape {self.coeffs.shape} does not match grid {self.grid.shape}")
        if self.parity not in _PARITIES:
            raise ValueError(f"unknown parity {self.parity!r}")

    def _combine(self, other, op):
        if isinstance(other, SpectralField3D):
            if other.grid != self.grid:
                raise DimensionError("fields live on different grids")
            parity = self.parity if self.parity == other.parity else "none"
            return SpectralField3D(self.grid, op(self.coeffs, other.coeffs), parity)
        return NotImplemented

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __neg__(self):
        return SpectralField3D(self.grid, -self.coeffs, self.parity)

    def __mul__(self, scalar):
        if isinstance(scalar, SpectralField3D):
            return NotImplemented
        return SpectralField3D(self.grid, self.coeffs * scalar, self.parity)

    __rmul__ = __mul__

    def with_parity(self, parity: Parity) -> "SpectralField3D":
        return SpectralField3D(self.grid, self.coeffs, parity)

    def to_physical(self) -> PhysicalField3D:
        return inverse(self)

    @property
    def values(self) -> np.ndarray:
        return inverse(self).values


FieldLike = Union[PhysicalField3D, SpectralField3D]


def zeros(grid: Grid3, parity: Parity = "none") -> SpectralField3D:
    return SpectralField3D(grid, np.zeros(grid.shape, dtype=complex), parity)


def forward(f: PhysicalField3D, parity: Parity = "none") -> SpectralField3D:
    grid = f.grid
    values = np.asarray(f.values, dtype=float)
    if values.shape != grid.shape:
        raise DimensionError(f"values shape {values.shape} does not match grid {grid.shape}")
    coeffs = np.fft.fftn(values) / grid.size * grid.zphase
    return SpectralField3D(grid, coeffs, parity)


def inverse(f: SpectralField3D) -> PhysicalField3D:
    grid = f.grid
    values = np.fft.ifftn(f.coeffs * grid.zphase).real * grid.size
    return PhysicalField3D(grid, values)


def transform(f: FieldLike, direction: Literal["forward", "inverse"]) -> FieldLike:
    """Move a field between physical samples and Fourier coefficients."""
    if direction == "forward":
        if not isinstance(f, PhysicalField3D):
            raise TypeError("forward transform expects a PhysicalField3D")
        return forward(f)
    if direction == "inverse":
        if not isinstance(f, SpectralField3D):
            raise TypeError("inverse transform expects a SpectralField3D")
        return inverse(f)
    raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")


def from_function(
    grid: Grid3, fn: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray], parity: Parity = "none"
) -> SpectralField3D:
    """Sample ``fn(x, y, z)`` on the collocation grid and transform."""
    X, Y, Z = grid.mesh()
    values = np.broadcast_to(np.asarray(fn(X, Y, Z), dtype=float), grid.shape)
    return forward(PhysicalField3D(grid, np.array(values)), parity)


def _axis_symbol(grid: Grid3, axis: str, order: int) -> np.ndarray:
    if axis == "x":
        k, n_int, n = grid.kx, grid.kx_int, grid.nx
    elif axis == "y":
        k, n_int, n = grid.ky, grid.ky_int, grid.ny
    elif axis == "z":
        k, n_int, n = grid.kz, grid.m_int, grid.nz
    else:
        raise ValueError(f"axis must be x, y or z, got {axis!r}")
    symbol = (1j * k) ** order
    if order % 2:
        # Nyquist mode has no real odd derivative on the grid
        symbol = np.where(np.abs(n_int) == n // 2, 0.0, symbol)
    return symbol


def derivative(f: SpectralField3D, axis: str, order: int = 1) -> SpectralField3D:
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    coeffs = f.coeffs * _axis_symbol(f.grid, axis, order)
    parity = f.parity
    if axis == "z" and order % 2:
        parity = {"even": "odd", "odd": "even"}.get(parity, "none")
    return SpectralField3D(f.grid, coeffs, parity)


def apply_symbol(f: SpectralField3D, symbol: np.ndarray, parity: Parity | None = None) -> SpectralField3D:
    return SpectralField3D(f.grid, f.coeffs * symbol, f.parity if parity is None else parity)


def vertical_integral_from_bottom(g: SpectralField3D, tol: float = VERTICAL_MEAN_TOL) -> SpectralField3D:
    """Primitive ``F(z) = int_{-h}^{z} g`` with ``F(-h) = 0``.

    Raises PreconditionError when some horizontal mode of ``g`` has a
    vertical mean larger than ``tol``; the vertical Nyquist mode is not
    representable as a primitive on the grid and is dropped.
    """
    grid = g.grid
    mean = g.coeffs[:, :, 0]
    worst = float(np.max(np.abs(mean))) if mean.size else 0.0
    if worst > tol:
        raise PreconditionError(f"vertical mean {worst:.3e} exceeds {tol:.1e}; primitive would not be periodic")
    m = grid.m_int
    kz = grid.kz
    ok = (m != 0) & (np.abs(m) != grid.nz // 2)
    safe_kz = np.where(ok, kz, 1.0)
    out = np.where(ok, g.coeffs / (1j * safe_kz), 0.0)
    out[:, :, 0] = -np.sum(out * grid.zphase, axis=2)
    parity = {"even": "odd", "odd": "even"}.get(g.parity, "none")
    return SpectralField3D(grid, out, parity)


def vertical_average_split(f: SpectralField3D) -> tuple[SpectralField3D, SpectralField3D]:
    bar = np.zeros_like(f.coeffs)
    bar[:, :, 0] = f.coeffs[:, :, 0]
    bar_parity = "even" if f.parity == "even" else ("odd" if f.parity == "odd" else "none")
    return (
        SpectralField3D(f.grid, bar, bar_parity),
        SpectralField3D(f.grid, f.coeffs - bar, f.parity),
    )


def _reflect_z(coeffs: np.ndarray, grid: Grid3) -> np.ndarray:
    return coeffs[:, :, grid.reflect_index(2)]


def parity_project(f: SpectralField3D, parity: Literal["even", "odd"]) -> SpectralField3D:
    """Projection onto fields even (or odd) under ``z -> -z``."""
    reflected = _reflect_z(f.coeffs, f.grid)
    if parity == "even":
        coeffs = 0.5 * (f.coeffs + reflected)
    elif parity == "odd":
        coeffs = 0.5 * (f.coeffs - reflected)
    else:
        raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
    return SpectralField3D(f.grid, coeffs, parity)


def parity_residual(f: SpectralField3D, parity: Literal["even", "odd"]) -> float:
    """L2 norm of the part of ``f`` that ``parity_project(f, parity)`` discards."""
    other = "odd" if parity == "even" else "even"
    return l2_norm(parity_project(f, other))


def dealias(f: SpectralField3D) -> SpectralField3D:
    """2/3 rule: zero every mode with |k_x| > nx/3, |k_y| > ny/3 or |m| > nz/3."""
    return SpectralField3D(f.grid, np.where(f.grid.dealias_mask, f.coeffs, 0.0), f.parity)


# --- norms and inner products (Parseval) ---------------------------------

def power(coeffs: np.ndarray) -> np.ndarray:
    return coeffs.real**2 + coeffs.imag**2


def l2_norm_sq(f: SpectralField3D) -> float:
    return f.grid.volume * float(np.sum(power(f.coeffs)))


def l2_norm(f: SpectralField3D) -> float:
    return float(np.sqrt(l2_norm_sq(f)))


def inner(f: SpectralField3D, g: SpectralField3D) -> float:
    """Real L2 inner product over the full box."""
    return f.grid.volume * float(np.sum((np.conj(f.coeffs) * g.coeffs).real))


def sobolev_norm_sq(f: SpectralField3D, s: int) -> float:
    weight = (1.0 + f.grid.k2) ** s
    return f.grid.volume * float(np.sum(weight * power(f.coeffs)))


def sobolev_norm(f: SpectralField3D, s: int) -> float:
    return float(np.sqrt(sobolev_norm_sq(f, s)))


def max_abs(f: SpectralField3D) -> float:
    return float(np.max(np.abs(inverse(f).values)))


def horizontal_divergence(a: SpectralField3D, b: SpectralField3D) -> SpectralField3D:
    return derivative(a, "x") + derivative(b, "y")


def values_at_z_index(f: SpectralField3D, k: int) -> np.ndarray:
    """Physical samples on the horizontal plane ``z = z_k``."""
    return inverse(f).values[:, :, k]


def evaluate_at_z(f: SpectralField3D, z: float) -> np.ndarray:
    """Exact trigonometric evaluation on the horizontal grid at an arbitrary height."""
    grid = f.grid
    phase = np.exp(1j * grid.kz.ravel() * z)
    plane = np.tensordot(f.coeffs, phase, axes=([2], [0]))
    return np.fft.ifft2(plane).real * (grid.nx * grid.ny)
