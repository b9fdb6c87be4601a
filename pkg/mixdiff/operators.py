"""
Fractional, classical and mixed Laplacians.

The Fourier multiplier is the production definition of every operator.
``fractional_laplacian_quadrature`` evaluates the principal-value singular
integral independently and only serves as a cross-check.
"""

import logging
from functools import lru_cache
from typing import Literal, Optional, Sequence, Union

import numpy as np
import pydantic
from pydantic import BaseModel, ConfigDict, model_validator
from scipy import integrate as sintegrate
from scipy.special import gamma, zeta

from .grid import Field, Grid, from_spectrum, gradient, to_spectrum

logger = logging.getLogger(__name__)

# Image boxes per side summed exactly before the continuum tail in 2D.
IMAGE_SHELLS = 8


class QuadratureRangeError(ValueError):
    """Raised for quadrature evaluation points outside the central half of the torus."""


class OperatorSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["laplacian", "fractional", "mixed"]
    s: float = pydantic.Field(..., description="Order: (-Delta)^s, or alpha/2 for the mixed operator")

    @model_validator(mode="after")
    def validate_order(self):
        if self.kind == "laplacian" and self.s != 1.0:
            raise ValueError("laplacian has order s = 1")
        if self.kind == "fractional" and not 0.0 < self.s < 1.0:
            raise ValueError(f"fractional order must satisfy 0 < s < 1, got {self.s}")
        if self.kind == "mixed" and not 0.0 < self.s < 1.0:
            raise ValueError(f"mixed operator needs 0 < alpha < 2, got alpha={2 * self.s}")
        return self

    @classmethod
    def laplacian(cls) -> "OperatorSpec":
        return cls(kind="laplacian", s=1.0)

    @classmethod
    def fractional(cls, s: float) -> "OperatorSpec":
        return cls(kind="fractional", s=s)

    @classmethod
    def mixed(cls, alpha: float) -> "OperatorSpec":
        return cls(kind="mixed", s=alpha / 2.0)

    @property
    def alpha(self) -> float:
        return 2.0 * self.s


def symbol(spec: OperatorSpec, grid: Grid) -> np.ndarray:
    xi = grid.xi_norm
    if spec.kind == "laplacian":
        return xi**2
    if spec.kind == "fractional":
        return xi ** (2.0 * spec.s)
    return xi**2 + xi**spec.alpha


def apply_operator(spec: OperatorSpec, f: Field) -> Field:
    return from_spectrum(to_spectrum(f).scaled(symbol(spec, f.grid)))


def c_ns(dim: int, s: float) -> float:
    """Normalization constant of the singular-integral form of (-Delta)^s."""
    if not 0.0 < s < 1.0:
        raise ValueError(f"c_ns needs 0 < s < 1, got {s}")
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    return float(s * 4.0**s * gamma(dim / 2.0 + s) / (np.pi ** (dim / 2.0) * gamma(1.0 - s)))


def _square_angle_integral(exponent: float) -> float:
    """Integral of (cos theta)^exponent over [0, pi/4]."""
    value, _ = sintegrate.quad(lambda theta: np.cos(theta) ** exponent, 0.0, np.pi / 4.0)
    return value


@lru_cache(maxsize=32)
def _periodized_kernel(grid: Grid, s: float) -> np.ndarray:
    """Sum over periodic images of |r|^{-N-2s} on the displacement lattice.

    The displacement lattice is the grid itself, with r = 0 at index M/2.
    The r = 0 entry is set to zero since that cell is handled separately.
    """
    sigma = grid.dim + 2.0 * s
    period = 2.0 * grid.half_width
    if grid.dim == 1:
        u = np.abs(grid.axis) / period
        u[grid.points_per_dim // 2] = 0.5  # placeholder, zeroed below
        kernel = period**-sigma * (zeta(sigma, u) + zeta(sigma, 1.0 - u))
    else:
        x, y = grid.mesh
        kernel = np.zeros(grid.shape)
        shells = np.arange(-IMAGE_SHELLS, IMAGE_SHELLS + 1)
        for nx in shells:
            for ny in shells:
                rx = x + period * nx
                ry = y + period * ny
                r2 = rx * rx + ry * ry
                with np.errstate(divide="ignore"):
                    kernel += np.where(r2 > 0, r2 ** (-sigma / 2.0), 0.0)
        # Images outside the summed square, as a midpoint-rule continuum.
        a = (2 * IMAGE_SHELLS + 1) * grid.half_width
        tail = 8.0 * a ** (-2.0 * s) / (2.0 * s) * _square_angle_integral(2.0 * s) / period**2
        kernel += tail
    kernel[(grid.points_per_dim // 2,) * grid.dim] = 0.0
    kernel.setflags(write=False)
    return kernel


def _singular_cell_moment(grid: Grid, s: float) -> float:
    """Integral of |r|^{2-N-2s} over the lattice cell centred at the origin."""
    h = grid.spacing
    if grid.dim == 1:
        return 2.0 * (h / 2.0) ** (2.0 - 2.0 * s) / (2.0 - 2.0 * s)
    angular = _square_angle_integral(-(2.0 - 2.0 * s)) * 2.0 ** (-(2.0 - 2.0 * s))
    return h ** (2.0 - 2.0 * s) * 8.0 / (2.0 - 2.0 * s) * angular


def fractional_laplacian_quadrature(
    s: float,
    f: Field,
    x: Union[float, Sequence[float]],
    inner_radius: Optional[float] = None,
) -> float:
    """
    Evaluate (-Delta)^s f at a lattice node by midpoint summation of the
    principal-value integral C_{N,s} * int (f(x) - f(y)) / |x - y|^{N+2s} dy.

    For s >= 1/2 the integrand inside |x - y| < inner_radius also carries the
    first-order Taylor correction grad f(x) . (y - x). The excluded singular
    cell contributes -Laplacian f(x) * omega / (2N), omega being the cell
    moment of |r|^{2-N-2s}.
    """
    grid = f.grid
    if not 0.0 < s < 1.0:
        raise ValueError(f"quadrature needs 0 < s < 1, got {s}")
    coords = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(np.abs(coords) > grid.half_width / 2.0):
        raise QuadratureRangeError(
            f"point {coords.tolist()} lies outside the central half |x_i| <= {grid.half_width / 2.0}"
        )
    delta = 8.0 * grid.spacing if inner_radius is None else float(inner_radius)
    if delta <= 0:
        raise ValueError(f"inner_radius must be positive, got {delta}")

    index = grid.index_of(coords)
    centre = grid.points_per_dim // 2
    shift = tuple(centre - i for i in index)
    axes = tuple(range(grid.dim))
    # shifted[j] = f(x + r_j) where r_j runs over the displacement lattice.
    shifted = np.roll(f.values, shift, axis=axes)
    fx = f.values[index]
    integrand = fx - shifted

    if s >= 0.5:
        grad = [g.values[index] for g in gradient(f)]
        r = grid.mesh
        inner = grid.radius < delta
        linear = sum(gk * rk for gk, rk in zip(grad, r))
        integrand = integrand + np.where(inner, linear, 0.0)

    kernel = _periodized_kernel(grid, s)
    total = float(np.sum(integrand * kernel) * grid.cell_volume)

    laplacian = -apply_operator(OperatorSpec.laplacian(), f).values[index]
    total -= laplacian * _singular_cell_moment(grid, s) / (2.0 * grid.dim)
    return c_ns(grid.dim, s) * total
