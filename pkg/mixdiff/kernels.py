"""
Heat kernels of the Gaussian, alpha-stable and mixed diffusions on the torus.

Kernels are the periodized densities, built from their Fourier symbols so
that the discrete mass is one at the multiplier level. The Gaussian also has
a closed-form path, and the alpha = 1 Poisson kernel is available as an
oracle only.
"""

import logging
from pathlib import Path
from typing import Dict, Literal, Optional, Tuple

import numpy as np
import pydantic
from pydantic import BaseModel, ConfigDict, model_validator

from .artifacts import write_field_csv
from .grid import (
    Field,
    Grid,
    Spectrum,
    from_spectrum,
    gradient,
    integrate,
    lr_norm,
    loglog_slope,
    make_grid,
    to_spectrum,
)

logger = logging.getLogger(__name__)

# Kernel scale must stay below L / WINDOW_FRACTION to avoid wraparound.
WINDOW_FRACTION = 6.0
STABLE_POSITIVITY = 1e-6
POSITIVITY = 1e-9


class KernelRangeError(ValueError):
    """Raised when a kernel's spatial scale does not fit the torus."""


class KernelSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["gauss", "stable", "mixed"]
    alpha: Optional[float] = pydantic.Field(None, description="Stability index, unused for gauss")

    @model_validator(mode="after")
    def validate_alpha(self):
        if self.kind != "gauss":
            if self.alpha is None or not 0.0 < self.alpha < 2.0:
                raise ValueError(f"{self.kind} kernel needs 0 < alpha < 2, got {self.alpha}")
        return self

    @property
    def decay_index(self) -> float:
        """Index governing large-time decay: alpha, or 2 for the Gaussian."""
        return 2.0 if self.kind == "gauss" else float(self.alpha)

    def symbol(self, grid: Grid) -> np.ndarray:
        xi = grid.xi_norm
        if self.kind == "gauss":
            return xi**2
        if self.kind == "stable":
            return xi**self.alpha
        return xi**2 + xi**self.alpha

    def scales(self, t: float) -> Dict[str, float]:
        out = {}
        if self.kind in ("gauss", "mixed"):
            out["sqrt(t)"] = float(np.sqrt(t))
        if self.kind in ("stable", "mixed"):
            out["t^(1/alpha)"] = float(t ** (1.0 / self.alpha))
        return out

    def max_time(self, grid: Grid) -> float:
        """Largest t whose kernel still fits the validity window."""
        limit = grid.half_width / WINDOW_FRACTION
        bounds = []
        if self.kind in ("gauss", "mixed"):
            bounds.append(limit**2)
        if self.kind in ("stable", "mixed"):
            bounds.append(limit**self.alpha)
        return min(bounds)


class KernelSlice(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    spec: KernelSpec
    time: float = pydantic.Field(..., gt=0)
    field: Field

    @model_validator(mode="after")
    def validate_positivity(self):
        tolerance = STABLE_POSITIVITY if self.spec.kind == "stable" else POSITIVITY
        low = float(np.min(self.field.values))
        if low < -tolerance:
            raise ValueError(f"{self.spec.kind} kernel at t={self.time} dips to {low:.3e} below -{tolerance:.0e}")
        return self

    @property
    def mass(self) -> float:
        return integrate(self.field)

    def to_csv(self, path: Path) -> Path:
        return write_field_csv(path, self.field)


def _check_window(spec: KernelSpec, grid: Grid, t: float, strict: bool) -> None:
    if t <= 0:
        raise KernelRangeError(f"kernel time must be positive, got {t}")
    limit = grid.half_width / WINDOW_FRACTION
    for name, scale in spec.scales(t).items():
        if scale > limit:
            message = f"{spec.kind} kernel scale {name}={scale:.4g} exceeds L/{WINDOW_FRACTION:g}={limit:.4g}"
            if strict:
                raise KernelRangeError(message)
            logger.warning(f"⚠️ {message}; kernel is periodized over the torus")


def _spectral_kernel(spec: KernelSpec, grid: Grid, t: float) -> KernelSlice:
    coefficients = np.exp(-t * spec.symbol(grid)) / grid.volume
    field = from_spectrum(Spectrum(grid=grid, coefficients=coefficients))
    return KernelSlice(spec=spec, time=t, field=field)


def gauss_kernel(grid: Grid, t: float, strict: bool = True) -> KernelSlice:
    """Closed-form (4 pi t)^{-N/2} exp(-|x|^2 / 4t)."""
    spec = KernelSpec(kind="gauss")
    _check_window(spec, grid, t, strict)
    values = (4.0 * np.pi * t) ** (-grid.dim / 2.0) * np.exp(-grid.radius**2 / (4.0 * t))
    return KernelSlice(spec=spec, time=t, field=Field(grid=grid, values=values))


def stable_kernel(grid: Grid, alpha: float, t: float, strict: bool = True) -> KernelSlice:
    spec = KernelSpec(kind="stable", alpha=alpha)
    _check_window(spec, grid, t, strict)
    return _spectral_kernel(spec, grid, t)


def mixed_kernel(grid: Grid, alpha: float, t: float, strict: bool = True) -> KernelSlice:
    spec = KernelSpec(kind="mixed", alpha=alpha)
    _check_window(spec, grid, t, strict)
    return _spectral_kernel(spec, grid, t)


def kernel_slice(spec: KernelSpec, grid: Grid, t: float, strict: bool = True) -> KernelSlice:
    if spec.kind == "gauss":
        return gauss_kernel(grid, t, strict)
    if spec.kind == "stable":
        return stable_kernel(grid, spec.alpha, t, strict)
    return mixed_kernel(grid, spec.alpha, t, strict)


def poisson_kernel(grid: Grid, t: float) -> Field:
    """Periodized Cauchy density, the alpha = 1 stable kernel in closed form (1D)."""
    if grid.dim != 1:
        raise ValueError("poisson_kernel is one-dimensional")
    L = grid.half_width
    a = np.pi * t / L
    x = grid.axis
    values = np.sinh(a) / (np.cosh(a) - np.cos(np.pi * x / L)) / (2.0 * L)
    return Field(grid=grid, values=values)


def apply_semigroup(spec: KernelSpec, tau: float, f: Field) -> Field:
    """S(tau) f = E(tau) * f as the multiplier exp(-tau * symbol)."""
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    if tau == 0:
        return f
    return from_spectrum(to_spectrum(f).scaled(np.exp(-tau * spec.symbol(f.grid))))


def discrete_delta(grid: Grid, point: Optional[Tuple[float, ...]] = None) -> Field:
    values = np.zeros(grid.shape)
    index = grid.index_of(point if point is not None else (0.0,) * grid.dim)
    values[index] = 1.0 / grid.cell_volume
    return Field(grid=grid, values=values)


def first_moment(g: Field) -> float:
    """The weighted norm of |x| g(x) in L^1."""
    return float(np.sum(g.grid.radius * np.abs(g.values)) * g.grid.cell_volume)


def taylor_discrepancy(spec: KernelSpec, g: Field, t: float, strict: bool = True) -> float:
    """L^1 distance between E(t) * g and M_g E(t), with M_g the mass of g."""
    kernel = kernel_slice(spec, g.grid, t, strict).field
    evolved = apply_semigroup(spec, t, g)
    residual = evolved.values - integrate(g) * kernel.values
    return float(np.sum(np.abs(residual)) * g.grid.cell_volume)


def taylor_bound(spec: KernelSpec, g: Field, t: float) -> float:
    return min(t**-0.5, t ** (-1.0 / spec.decay_index)) * first_moment(g)


def self_similarity_error(alpha: float, t: float, grid: Grid) -> float:
    """
    Max relative deviation from P(x, t) = t^{-N/alpha} P(x t^{-1/alpha}, 1)
    over the central half, comparing ``grid`` at time t with a companion grid
    of half-width L t^{-1/alpha} at time 1.
    """
    companion = make_grid(grid.dim, grid.half_width * t ** (-1.0 / alpha), grid.points_per_dim)
    at_t = stable_kernel(grid, alpha, t).field.values
    at_one = stable_kernel(companion, alpha, 1.0).field.values
    predicted = t ** (-grid.dim / alpha) * at_one
    interior = np.all([np.abs(x) <= grid.half_width / 2.0 for x in grid.mesh], axis=0)
    return float(np.max(np.abs(at_t - predicted)[interior]) / np.max(np.abs(predicted[interior])))


def smoothing_ratio(spec: KernelSpec, grid: Grid, tau: float, r: float, q: float) -> float:
    """
    ||E(tau) * v||_q / ||v||_r with the data v matched to the estimate:
    the discrete delta for r = 1, the kernel E(tau) itself otherwise.
    """
    if r == 1:
        data = discrete_delta(grid)
    else:
        data = kernel_slice(spec, grid, tau).field
    return lr_norm(apply_semigroup(spec, tau, data), q) / lr_norm(data, r)


def gradient_norm(spec: KernelSpec, grid: Grid, tau: float, q: float = 1.0) -> float:
    """Norm of the gradient of E(tau), computed spectrally."""
    kernel = kernel_slice(spec, grid, tau).field
    parts = gradient(kernel)
    magnitude = np.sqrt(sum(p.values**2 for p in parts))
    return lr_norm(kernel.like(magnitude), q)


class SlopeFit(BaseModel):
    """Fitted log-log slopes against the small- and large-time exponents."""

    model_config = ConfigDict(frozen=True)

    small_slope: float
    small_expected: float
    large_slope: float
    large_expected: float
    taus_small: Tuple[float, ...]
    taus_large: Tuple[float, ...]
    values_small: Tuple[float, ...]
    values_large: Tuple[float, ...]

    def within(self, fraction: float) -> bool:
        return all(
            abs(got - want) <= fraction * abs(want)
            for got, want in ((self.small_slope, self.small_expected), (self.large_slope, self.large_expected))
        )


# Grids resolving each time regime at desk scale (1D).
SMALL_TIME_GRID = (2.0, 4096)
LARGE_TIME_GRID = (8000.0, 4096)


def _fit_slopes(measure, small_expected: float, large_expected: float, dim: int) -> SlopeFit:
    taus_small = tuple(np.geomspace(1e-3, 1e-2, 5))
    taus_large = tuple(np.geomspace(1e2, 1e3, 5))
    small_grid = make_grid(dim, *SMALL_TIME_GRID) if dim == 1 else make_grid(dim, 2.0, 256)
    large_grid = make_grid(dim, *LARGE_TIME_GRID) if dim == 1 else make_grid(dim, 8000.0, 256)
    values_small = tuple(measure(small_grid, tau) for tau in taus_small)
    values_large = tuple(measure(large_grid, tau) for tau in taus_large)
    return SlopeFit(
        small_slope=loglog_slope(taus_small, values_small),
        small_expected=small_expected,
        large_slope=loglog_slope(taus_large, values_large),
        large_expected=large_expected,
        taus_small=taus_small,
        taus_large=taus_large,
        values_small=values_small,
        values_large=values_large,
    )


def smoothing_slopes(alpha: float, r: float = 1.0, q: float = np.inf, dim: int = 1) -> SlopeFit:
    """Exponents of ||E(tau) * v||_q / ||v||_r at small and large tau."""
    spec = KernelSpec(kind="mixed", alpha=alpha)
    gap = 1.0 / r - (0.0 if q == np.inf else 1.0 / q)
    return _fit_slopes(
        lambda grid, tau: smoothing_ratio(spec, grid, tau, r, q),
        small_expected=-dim / 2.0 * gap,
        large_expected=-dim / alpha * gap,
        dim=dim,
    )


def gradient_slopes(alpha: float, q: float = 1.0, dim: int = 1) -> SlopeFit:
    """Exponents of ||grad E(tau)||_q at small and large tau."""
    spec = KernelSpec(kind="mixed", alpha=alpha)
    gap = 1.0 - (0.0 if q == np.inf else 1.0 / q)
    return _fit_slopes(
        lambda grid, tau: gradient_norm(spec, grid, tau, q),
        small_expected=-dim / 2.0 * gap - 0.5,
        large_expected=-dim / alpha * gap - 1.0 / alpha,
        dim=dim,
    )
