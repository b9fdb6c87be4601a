"""
Tests for the test-function estimates: envelopes, scaling and the integral bound.
"""

import numpy as np
import pytest
from pydantic import ValidationError

from mixdiff.estimates import (
    EstimateError,
    TestFunctionSpec,
    dilate,
    dominant_exponent,
    envelope_ratio,
    interior_mask,
    lemma3_envelope,
    lemma4_scaling_check,
    lemma5_bound,
    lemma5_integral,
    lemma5_sweep,
    phi_r,
    sweep_span,
)
from mixdiff.grid import Field, make_grid
from mixdiff.operators import OperatorSpec, apply_operator


@pytest.fixture(scope="module")
def envelope_grid():
    return make_grid(1, 64.0, 2048)


class TestFunctionSpecValidation:
    @pytest.mark.parametrize(
        "q0, R, half_width, message",
        [
            (1.0, 1.0, 64.0, "N < q0"),
            (3.5, 1.0, 64.0, "N < q0"),
            (1.5, 4.0, 16.0, "half-width"),
        ],
    )
    def test_rejects_unfaithful_setups(self, q0, R, half_width, message):
        grid = make_grid(1, half_width, 256)
        with pytest.raises(ValidationError, match=message):
            TestFunctionSpec(q0=q0, R=R, p=2.0, alpha=1.0, grid=grid)

    def test_profile(self):
        grid = make_grid(1, 16.0, 256)
        spec = TestFunctionSpec(q0=2.0, R=2.0, p=2.0, alpha=1.0, grid=grid)
        phi = phi_r(spec)

        assert phi.values[grid.index_of(0.0)] == 1.0
        assert phi.values[grid.index_of(2.0)] == pytest.approx(0.5)
        assert np.all(np.diff(phi.values[grid.axis >= 0]) <= 0)

    def test_integrability_exponent(self):
        grid = make_grid(1, 64.0, 256)
        spec = TestFunctionSpec(q0=1.5, R=1.0, p=2.0, alpha=1.0, grid=grid)

        assert spec.integrability_exponent == pytest.approx(2.5)


class TestLemma5:
    """Integral of Phi^{-1/(p-1)} |L Phi|^{p/(p-1)} against its R-power bound."""

    def test_bound_and_dominant_exponent(self):
        grid = make_grid(1, 64.0, 256)
        spec = TestFunctionSpec(q0=1.5, R=2.0, p=2.0, alpha=1.0, grid=grid)

        assert lemma5_bound(spec) == pytest.approx(2.0**-3 + 2.0**-1)
        assert dominant_exponent(1, 2.0, 1.0) == -1.0
        assert dominant_exponent(1, 3.0, 1.5) == pytest.approx(-1.25)

    def test_span_keeps_boundary_small(self):
        assert sweep_span(1.5) == 128
        assert sweep_span(2.5) == 16
        assert sweep_span(10.0) == 8

    def test_narrow_grid_is_rejected(self):
        grid = make_grid(1, 8.0, 256)
        spec = TestFunctionSpec(q0=1.5, R=1.0, p=2.0, alpha=1.0, grid=grid)

        with pytest.raises(EstimateError, match="widen the grid"):
            lemma5_integral(spec)

    def test_centre_integrand(self):
        grid = make_grid(1, 128.0, 4096)
        spec = TestFunctionSpec(q0=1.5, R=1.0, p=2.0, alpha=1.0, grid=grid)
        report = lemma5_integral(spec)
        applied = apply_operator(OperatorSpec.mixed(1.0), phi_r(spec))

        assert report.center_integrand == pytest.approx(abs(applied.values[grid.index_of(0.0)]) ** 2)
        assert report.boundary_phi <= 1e-3
        assert report.split_integral >= report.integral

    @pytest.mark.parametrize("p, alpha, q0", [(2.0, 1.0, 1.5), (3.0, 1.5, 2.5)])
    def test_sweep_ratio_and_slope(self, p, alpha, q0):
        sweep = lemma5_sweep(p, alpha, q0)

        assert [r.R for r in sweep.reports] == [1, 2, 4, 8, 16, 32, 64]
        assert sweep.ratio_spread < 10.0
        assert sweep.slope_error <= 0.15, sweep.slope
        assert all(r.boundary_phi <= 1e-3 for r in sweep.reports)


class TestLemma3:
    """Decay envelope of (-Delta)^s <x>^{-q0}."""

    def test_laplacian_closed_form(self, envelope_grid):
        x = envelope_grid.axis
        psi = Field(grid=envelope_grid, values=1.0 / (1.0 + x**2))
        applied = apply_operator(OperatorSpec.laplacian(), psi)
        exact = (2.0 - 6.0 * x**2) / (1.0 + x**2) ** 3
        inside = interior_mask(envelope_grid)

        assert np.max(np.abs(applied.values - exact)[inside]) <= 1e-6

    @pytest.mark.parametrize("s, q0", [(0.5, 1.5), (0.25, 2.0), (1.0, 2.0)])
    def test_envelope_is_stable(self, envelope_grid, s, q0):
        report = lemma3_envelope(s, q0, envelope_grid)

        assert report.stable
        assert np.isfinite(report.max_ratio)
        assert report.center_ratio > 0

    def test_envelope_ratio_covers_grid(self, envelope_grid):
        ratio = envelope_ratio(0.5, 1.5, envelope_grid)

        assert ratio.values.shape == envelope_grid.shape

    @pytest.mark.parametrize("s, q0", [(1.5, 2.0), (0.5, 1.0)])
    def test_rejects_invalid_parameters(self, envelope_grid, s, q0):
        with pytest.raises(EstimateError):
            lemma3_envelope(s, q0, envelope_grid)


class TestLemma4:
    """Dilation identity (-Delta)^s psi_R(R x) = R^{-2s} (-Delta)^s psi(x)."""

    def test_unit_dilation_is_exact(self, gaussian):
        assert lemma4_scaling_check(0.5, gaussian, 1) == 0.0

    def test_sine(self):
        grid = make_grid(1, np.pi, 64)
        psi = Field(grid=grid, values=np.sin(grid.axis))

        assert lemma4_scaling_check(0.5, psi, 2) <= 1e-10

    @pytest.mark.parametrize("R", [2, 4])
    @pytest.mark.parametrize("s", [0.5, 0.75, 0.9])
    def test_gaussian(self, R, s):
        grid = make_grid(1, 20.0, 512)
        psi = Field(grid=grid, values=np.exp(-grid.axis**2))

        assert lemma4_scaling_check(s, psi, R) <= 1e-6

    def test_two_dimensional_gaussian(self):
        grid = make_grid(2, 8.0, 64)
        psi = Field(grid=grid, values=np.exp(-grid.radius**2))

        assert lemma4_scaling_check(0.5, psi, 2) <= 1e-6

    def test_dilation_samples(self):
        grid = make_grid(1, 20.0, 512)
        psi = Field(grid=grid, values=np.exp(-grid.axis**2))
        dilated = dilate(psi, 2)

        assert dilated.grid.half_width == 40.0
        np.testing.assert_allclose(dilated.values, np.exp(-(dilated.grid.axis / 2) ** 2), atol=1e-12)

    @pytest.mark.parametrize("R", [2, 4])
    def test_dilation_stretches_low_modes(self, R):
        grid = make_grid(1, np.pi, 64)
        dilated = dilate(Field(grid=grid, values=np.sin(grid.axis)), R)

        assert dilated.grid.points_per_dim == R * 64
        np.testing.assert_allclose(dilated.values, np.sin(dilated.grid.axis / R), atol=1e-12)

    @pytest.mark.parametrize("R", [3, 1.5, 0.5])
    def test_rejects_non_power_of_two(self, gaussian, R):
        with pytest.raises(EstimateError, match="power-of-two"):
            lemma4_scaling_check(0.5, gaussian, R)
