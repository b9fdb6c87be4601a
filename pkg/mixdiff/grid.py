"""
Periodic torus grids, lattice fields and their Fourier spectra.

The torus [-L, L)^N stands in for R^N. Every spectral operation in the
package goes through ``to_spectrum``/``from_spectrum`` here, which fix the
normalization: the mode-0 coefficient is the mean of the field, and the
coefficients are those of the Fourier series sum_k c_k exp(i xi_k . x) with
xi_k = pi k / L.
"""

import logging
from functools import cached_property
from typing import Sequence, Tuple

import numpy as np
import pydantic
import scipy.fft as sfft
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

logger = logging.getLogger(__name__)


class GridError(ValueError):
    """Raised for grids outside the supported lattice family."""


class SpectralResidueError(AssertionError):
    """Raised when an inverse transform leaves a non-negligible imaginary part."""


RESIDUE_TOLERANCE = 1e-10


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


class Grid(BaseModel):
    model_config = ConfigDict(frozen=True)

    dim: int = pydantic.Field(..., description="Spatial dimension N (1 or 2)")
    half_width: float = pydantic.Field(..., description="Torus half-width L")
    points_per_dim: int = pydantic.Field(..., description="Lattice points M per axis")

    @field_validator("dim")
    @classmethod
    def validate_dim(cls, v):
        if v not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {v}")
        return v

    @field_validator("half_width")
    @classmethod
    def validate_half_width(cls, v):
        if not np.isfinite(v) or v <= 0:
            raise ValueError(f"half_width must be positive and finite, got {v}")
        return float(v)

    @field_validator("points_per_dim")
    @classmethod
    def validate_points(cls, v):
        if v < 8 or v & (v - 1):
            raise ValueError(f"points_per_dim must be a power of two >= 8, got {v}")
        return v

    def __eq__(self, other):
        return isinstance(other, Grid) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    @property
    def key(self) -> Tuple[int, float, int]:
        return (self.dim, self.half_width, self.points_per_dim)

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.points_per_dim,) * self.dim

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.points_per_dim

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    @property
    def volume(self) -> float:
        return (2.0 * self.half_width) ** self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        """Node coordinates -L + j dx along one axis."""
        return _readonly(-self.half_width + self.spacing * np.arange(self.points_per_dim))

    @cached_property
    def modes(self) -> np.ndarray:
        """Integer mode numbers in FFT order along one axis."""
        return _readonly(np.rint(sfft.fftfreq(self.points_per_dim, d=1.0 / self.points_per_dim)).astype(np.int64))

    @cached_property
    def frequencies(self) -> np.ndarray:
        return _readonly(np.pi * self.modes / self.half_width)

    @cached_property
    def mesh(self) -> Tuple[np.ndarray, ...]:
        return tuple(_readonly(a) for a in np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    @cached_property
    def wavevectors(self) -> Tuple[np.ndarray, ...]:
        return tuple(_readonly(a) for a in np.meshgrid(*([self.frequencies] * self.dim), indexing="ij"))

    @cached_property
    def radius(self) -> np.ndarray:
        return _readonly(np.sqrt(sum(x * x for x in self.mesh)))

    @cached_property
    def xi_norm(self) -> np.ndarray:
        return _readonly(np.sqrt(sum(k * k for k in self.wavevectors)))

    @cached_property
    def parity(self) -> np.ndarray:
        # Coordinates start at -L, so node j of mode k carries exp(-i pi k).
        sign = np.where(self.modes % 2 == 0, 1.0, -1.0)
        out = sign
        for _ in range(self.dim - 1):
            out = np.multiply.outer(out, sign)
        return _readonly(out)

    def index_of(self, point: Sequence[float]) -> Tuple[int, ...]:
        """Lattice index of a coordinate that sits on a node."""
        coords = np.atleast_1d(np.asarray(point, dtype=float))
        if coords.shape != (self.dim,):
            raise GridError(f"point must have {self.dim} coordinates, got {coords.shape}")
        raw = (coords + self.half_width) / self.spacing
        index = np.rint(raw)
        if np.max(np.abs(raw - index)) > 1e-6:
            raise GridError(f"point {coords.tolist()} is not a lattice node")
        return tuple(int(i) % self.points_per_dim for i in index)


def make_grid(dim: int, half_width: float, points_per_dim: int) -> Grid:
    try:
        return Grid(dim=dim, half_width=half_width, points_per_dim=points_per_dim)
    except pydantic.ValidationError as exc:
        raise GridError(exc.errors()[0]["msg"]) from exc


class Field(BaseModel):
    """A real lattice function on a grid; values are read-only."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: Grid
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def validate_values(cls, v):
        arr = np.array(v, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError("field values must be finite")
        return _readonly(arr)

    @model_validator(mode="after")
    def validate_shape(self):
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} does not match grid {self.grid.shape}")
        return self

    @classmethod
    def sample(cls, grid: Grid, func) -> "Field":
        """Evaluate ``func(*coordinates)`` on the lattice."""
        return cls(grid=grid, values=np.broadcast_to(func(*grid.mesh), grid.shape))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "Field":
        return cls(grid=grid, values=np.full(grid.shape, float(value)))

    def like(self, values: np.ndarray) -> "Field":
        return Field(grid=self.grid, values=values)

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))


class Spectrum(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: Grid
    coefficients: np.ndarray

    @field_validator("coefficients", mode="before")
    @classmethod
    def validate_coefficients(cls, v):
        arr = np.array(v, dtype=np.complex128)
        if not np.all(np.isfinite(arr)):
            raise ValueError("spectral coefficients must be finite")
        return _readonly(arr)

    @model_validator(mode="after")
    def validate_shape(self):
        if self.coefficients.shape != self.grid.shape:
            raise ValueError(
                f"coefficients shape {self.coefficients.shape} does not match grid {self.grid.shape}"
            )
        return self

    def scaled(self, multiplier: np.ndarray) -> "Spectrum":
        return Spectrum(grid=self.grid, coefficients=self.coefficients * multiplier)

    def hermitian_defect(self) -> float:
        """Relative distance from conjugate symmetry c_{-k} = conj(c_k)."""
        c = self.coefficients
        mirrored = c
        for axis in range(c.ndim):
            mirrored = np.roll(np.flip(mirrored, axis=axis), 1, axis=axis)
        scale = max(float(np.max(np.abs(c))), 1e-300)
        return float(np.max(np.abs(c - np.conj(mirrored)))) / scale


def to_spectrum(f: Field) -> Spectrum:
    coefficients = sfft.fftn(f.values, norm="forward") * f.grid.parity
    return Spectrum(grid=f.grid, coefficients=coefficients)


def from_spectrum(s: Spectrum) -> Field:
    raw = sfft.ifftn(s.coefficients * s.grid.parity, norm="forward")
    real = raw.real
    residue = float(np.max(np.abs(raw.imag)))
    scale = max(1.0, float(np.max(np.abs(real))))
    if residue > RESIDUE_TOLERANCE * scale:
        raise SpectralResidueError(f"imaginary residue {residue:.3e} exceeds {RESIDUE_TOLERANCE:.0e} of {scale:.3e}")
    return Field(grid=s.grid, values=real)


def norm(f: Field, q) -> float:
    if q in (np.inf, "inf", "sup"):
        return f.sup
    if q not in (1, 2):
        raise ValueError(f"q must be 1, 2 or inf, got {q}")
    return lr_norm(f, q)


def lr_norm(f: Field, r: float) -> float:
    """Riemann-sum L^r norm for any r >= 1."""
    if r == np.inf:
        return f.sup
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    return float(np.sum(np.abs(f.values) ** r) * f.grid.cell_volume) ** (1.0 / r)


def integrate(f: Field) -> float:
    return float(np.sum(f.values) * f.grid.cell_volume)


def convolve(f: Field, g: Field) -> Field:
    """Periodic convolution (f * g)(x) = integral of f(x - y) g(y) over the torus."""
    if f.grid != g.grid:
        raise GridError("convolution requires fields on the same grid")
    product = to_spectrum(f).coefficients * to_spectrum(g).coefficients * f.grid.volume
    return from_spectrum(Spectrum(grid=f.grid, coefficients=product))


def gradient(f: Field) -> Tuple[Field, ...]:
    """Spectral partial derivatives, one field per axis."""
    grid = f.grid
    spectrum = to_spectrum(f)
    nyquist = grid.modes == -(grid.points_per_dim // 2)
    parts = []
    for axis, k in enumerate(grid.wavevectors):
        multiplier = 1j * k
        # The Nyquist mode has no real-valued derivative.
        selector = [np.newaxis] * grid.dim
        selector[axis] = slice(None)
        multiplier = np.where(nyquist[tuple(selector)], 0.0, multiplier)
        parts.append(from_spectrum(spectrum.scaled(multiplier)))
    return tuple(parts)


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log y against log x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("loglog_slope needs two equally sized samples of length >= 2")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("loglog_slope needs positive samples")
    slope, _ = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope)
