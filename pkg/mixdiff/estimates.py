"""
Quadrature checks of the test-function estimates.

Checks are bounded-ratio or slope-fit assertions: the estimates hide their
constants, so no constant is ever matched.
"""

import logging
from typing import List, Optional, Sequence

import numpy as np
import pydantic
from pydantic import BaseModel, ConfigDict, model_validator

from .grid import Field, Grid, Spectrum, from_spectrum, loglog_slope, make_grid, to_spectrum
from .operators import OperatorSpec, apply_operator

logger = logging.getLogger(__name__)

BOUNDARY_TOLERANCE = 1e-3
MIN_SPAN = 8


class EstimateError(ValueError):
    """Raised when a test-function check cannot be set up faithfully."""


class TestFunctionSpec(BaseModel):
    """Phi_R(x) = <x/R>^{-q0} on a grid wide enough for its tail."""

    __test__ = False  # not a pytest class
    model_config = ConfigDict(frozen=True)

    q0: float
    R: float = pydantic.Field(..., gt=0)
    p: float = pydantic.Field(..., gt=1)
    alpha: float = pydantic.Field(..., gt=0, lt=2)
    grid: Grid

    @model_validator(mode="after")
    def validate_hypotheses(self):
        n = self.grid.dim
        if not n < self.q0 < n + self.alpha * self.p:
            raise ValueError(f"need N < q0 < N + alpha p, got q0={self.q0} with N={n}, alpha p={self.alpha * self.p}")
        if self.grid.half_width < MIN_SPAN * self.R:
            raise ValueError(f"grid half-width {self.grid.half_width} is below {MIN_SPAN} R = {MIN_SPAN * self.R}")
        return self

    @property
    def integrability_exponent(self) -> float:
        """(N + alpha) p / (p - 1) - q0 / (p - 1), which must exceed N."""
        return ((self.grid.dim + self.alpha) * self.p - self.q0) / (self.p - 1.0)


def bracket(values: np.ndarray) -> np.ndarray:
    """Japanese bracket <x> = (1 + |x|^2)^{1/2}."""
    return np.sqrt(1.0 + values**2)


def phi_r(spec: TestFunctionSpec) -> Field:
    return Field(grid=spec.grid, values=bracket(spec.grid.radius / spec.R) ** (-spec.q0))


def boundary_value(spec: TestFunctionSpec) -> float:
    """Phi_R at the nearest boundary point, relative to Phi_R(0) = 1."""
    return float(bracket(spec.grid.half_width / spec.R) ** (-spec.q0))


def lemma5_bound(spec: TestFunctionSpec) -> float:
    n, p, R = spec.grid.dim, spec.p, spec.R
    return R ** (-2.0 * p / (p - 1.0) + n) + R ** (-spec.alpha * p / (p - 1.0) + n)


def dominant_exponent(dim: int, p: float, alpha: float) -> float:
    return max(-2.0 * p / (p - 1.0) + dim, -alpha * p / (p - 1.0) + dim)


def lemma5_integrand(spec: TestFunctionSpec, operator: Optional[Field] = None) -> Field:
    """Phi_R^{-1/(p-1)} |L Phi_R|^{p/(p-1)}, with L the mixed operator unless given."""
    phi = phi_r(spec)
    if operator is None:
        operator = apply_operator(OperatorSpec.mixed(spec.alpha), phi)
    p = spec.p
    values = phi.values ** (-1.0 / (p - 1.0)) * np.abs(operator.values) ** (p / (p - 1.0))
    return phi.like(values)


class Lemma5Report(BaseModel):
    model_config = ConfigDict(frozen=True)

    R: float
    integral: float
    bound: float
    ratio: float
    center_integrand: float
    boundary_integrand: float = pydantic.Field(..., description="Largest integrand value on the torus boundary")
    boundary_phi: float
    split_integral: float = pydantic.Field(..., description="Integral with |Delta Phi| + |(-Delta)^{alpha/2} Phi|")


def lemma5_integral(spec: TestFunctionSpec) -> Lemma5Report:
    if spec.integrability_exponent <= spec.grid.dim:
        raise EstimateError(f"integrability exponent {spec.integrability_exponent:.4g} does not exceed N")
    edge = boundary_value(spec)
    if edge > BOUNDARY_TOLERANCE:
        raise EstimateError(
            f"Phi_R at the boundary is {edge:.3e} > {BOUNDARY_TOLERANCE:g}; widen the grid beyond L={spec.grid.half_width}"
        )
    grid = spec.grid
    phi = phi_r(spec)
    integrand = lemma5_integrand(spec)
    local = apply_operator(OperatorSpec.laplacian(), phi)
    nonlocal_part = apply_operator(OperatorSpec.fractional(spec.alpha / 2.0), phi)
    split = lemma5_integrand(spec, phi.like(np.abs(local.values) + np.abs(nonlocal_part.values)))

    edges = np.zeros(grid.shape, dtype=bool)
    for axis in range(grid.dim):
        selector = [slice(None)] * grid.dim
        selector[axis] = 0
        edges[tuple(selector)] = True
    center = grid.index_of((0.0,) * grid.dim)

    integral = float(np.sum(integrand.values) * grid.cell_volume)
    bound = lemma5_bound(spec)
    report = Lemma5Report(
        R=spec.R,
        integral=integral,
        bound=bound,
        ratio=integral / bound,
        center_integrand=float(integrand.values[center]),
        boundary_integrand=float(np.max(integrand.values[edges])),
        boundary_phi=edge,
        split_integral=float(np.sum(split.values) * grid.cell_volume),
    )
    logger.debug(f"Test-function integral at R={spec.R}: {integral:.6e} (ratio {report.ratio:.4f})")
    return report


def sweep_span(q0: float, tolerance: float = BOUNDARY_TOLERANCE) -> int:
    """Smallest power-of-two multiple of R (at least 8) keeping Phi_R below tolerance at the boundary."""
    span = MIN_SPAN
    while bracket(float(span)) ** (-q0) > tolerance:
        span *= 2
    return span


class Lemma5Sweep(BaseModel):
    model_config = ConfigDict(frozen=True)

    p: float
    alpha: float
    q0: float
    dim: int
    span: int
    reports: List[Lemma5Report]
    slope: float
    slope_window: float
    expected_slope: float

    @property
    def ratio_spread(self) -> float:
        ratios = [r.ratio for r in self.reports]
        return max(ratios) / min(ratios)

    @property
    def slope_error(self) -> float:
        return abs(self.slope - self.expected_slope) / abs(self.expected_slope)


def lemma5_sweep(
    p: float,
    alpha: float,
    q0: float,
    radii: Sequence[float] = (1, 2, 4, 8, 16, 32, 64),
    points_per_dim: int = 4096,
    dim: int = 1,
    slope_window: float = 16.0,
) -> Lemma5Sweep:
    """Run lemma5_integral over R on grids of half-width span * R; fit the slope over R >= slope_window."""
    span = sweep_span(q0)
    reports = []
    for R in radii:
        grid = make_grid(dim, span * float(R), points_per_dim)
        reports.append(lemma5_integral(TestFunctionSpec(q0=q0, R=float(R), p=p, alpha=alpha, grid=grid)))
    large = [r for r in reports if r.R >= slope_window]
    if len(large) < 2:
        large = reports
    slope = loglog_slope([r.R for r in large], [r.integral for r in large])
    sweep = Lemma5Sweep(
        p=p,
        alpha=alpha,
        q0=q0,
        dim=dim,
        span=span,
        reports=reports,
        slope=slope,
        slope_window=slope_window,
        expected_slope=dominant_exponent(dim, p, alpha),
    )
    logger.info(
        f"Test-function sweep p={p}, alpha={alpha}, q0={q0}: slope {slope:.4f} "
        f"(dominant {sweep.expected_slope:.4f}), ratio spread {sweep.ratio_spread:.3f}"
    )
    return sweep


def _power(s: float) -> OperatorSpec:
    return OperatorSpec.laplacian() if s == 1.0 else OperatorSpec.fractional(s)


def interior_mask(grid: Grid) -> np.ndarray:
    return np.all([np.abs(x) <= grid.half_width / 2.0 for x in grid.mesh], axis=0)


class Lemma3Report(BaseModel):
    model_config = ConfigDict(frozen=True)

    s: float
    q0: float
    max_ratio: float
    refined_max_ratio: float
    center_ratio: float
    relative_change: float
    stable: bool


def envelope_ratio(s: float, q0: float, grid: Grid) -> Field:
    """|(-Delta)^s <x>^{-q0}| <x>^{N+2s} over the whole grid."""
    psi = Field(grid=grid, values=bracket(grid.radius) ** (-q0))
    applied = apply_operator(_power(s), psi)
    return psi.like(np.abs(applied.values) * bracket(grid.radius) ** (grid.dim + 2.0 * s))


def lemma3_envelope(s: float, q0: float, grid: Grid, stability: float = 0.2) -> Lemma3Report:
    if not 0.0 < s <= 1.0:
        raise EstimateError(f"Decay envelope needs 0 < s <= 1, got {s}")
    if q0 <= grid.dim:
        raise EstimateError(f"Decay envelope needs q0 > N, got q0={q0}")
    refined = make_grid(grid.dim, grid.half_width, 2 * grid.points_per_dim)
    coarse_ratio = envelope_ratio(s, q0, grid)
    fine_ratio = envelope_ratio(s, q0, refined)
    coarse_max = float(np.max(coarse_ratio.values[interior_mask(grid)]))
    fine_max = float(np.max(fine_ratio.values[interior_mask(refined)]))
    change = abs(fine_max - coarse_max) / coarse_max
    return Lemma3Report(
        s=s,
        q0=q0,
        max_ratio=coarse_max,
        refined_max_ratio=fine_max,
        center_ratio=float(coarse_ratio.values[grid.index_of((0.0,) * grid.dim)]),
        relative_change=change,
        stable=bool(np.isfinite(coarse_max) and change <= stability),
    )


def dilate(psi: Field, R: int) -> Field:
    """psi(x / R) on the grid of half-width R L with R M points, by spectral interpolation."""
    grid = psi.grid
    companion = make_grid(grid.dim, R * grid.half_width, R * grid.points_per_dim)
    coefficients = np.zeros(companion.shape, dtype=complex)
    # Mode k keeps its index; on the wider box it carries frequency pi k / (R L).
    index = grid.modes % companion.points_per_dim
    coefficients[np.ix_(*([index] * grid.dim))] = to_spectrum(psi).coefficients
    return from_spectrum(Spectrum(grid=companion, coefficients=coefficients))


def lemma4_scaling_check(s: float, psi: Field, R: float) -> float:
    """
    Max relative error between (-Delta)^s psi_R at R x and R^{-2s} (-Delta)^s psi at x,
    over the nodes of the base grid.
    """
    if not 0.0 < s <= 1.0:
        raise EstimateError(f"scaling check needs 0 < s <= 1, got {s}")
    if R < 1 or R != int(R) or int(R) & (int(R) - 1):
        raise EstimateError(f"R must be a power-of-two integer, got {R}")
    R = int(R)
    operator = _power(s)
    rhs = R ** (-2.0 * s) * apply_operator(operator, psi).values
    if R == 1:
        lhs = apply_operator(operator, psi).values
    else:
        lhs = apply_operator(operator, dilate(psi, R)).values[(slice(None, None, R),) * psi.grid.dim]
    scale = float(np.max(np.abs(rhs)))
    if scale == 0:
        return float(np.max(np.abs(lhs)))
    return float(np.max(np.abs(lhs - rhs)) / scale)
