"""
Tests for heat kernels, the semigroup and the decay estimates.
"""

import numpy as np
import pytest
from pydantic import ValidationError

from mixdiff.artifacts import read_csv
from mixdiff.grid import Field, convolve, integrate, make_grid
from mixdiff.kernels import (
    KernelRangeError,
    KernelSpec,
    apply_semigroup,
    discrete_delta,
    first_moment,
    gauss_kernel,
    gradient_slopes,
    kernel_slice,
    mixed_kernel,
    poisson_kernel,
    self_similarity_error,
    smoothing_slopes,
    stable_kernel,
    taylor_bound,
    taylor_discrepancy,
)


@pytest.fixture(scope="module")
def wide_grid():
    return make_grid(1, 40.0, 4096)


@pytest.fixture(scope="module")
def shifted():
    grid = make_grid(1, 200.0, 2048)
    return Field(grid=grid, values=np.exp(-((grid.axis - 3.0) ** 2)))


class TestKernelSpec:
    def test_stable_needs_alpha(self):
        with pytest.raises(ValidationError, match="alpha"):
            KernelSpec(kind="stable")
        with pytest.raises(ValidationError, match="alpha"):
            KernelSpec(kind="mixed", alpha=2.0)

    def test_window_limits(self):
        grid = make_grid(1, 12.0, 64)

        assert KernelSpec(kind="gauss").max_time(grid) == pytest.approx(4.0)
        assert KernelSpec(kind="stable", alpha=1.0).max_time(grid) == pytest.approx(2.0)
        assert KernelSpec(kind="mixed", alpha=0.5).max_time(grid) == pytest.approx(2.0**0.5)


class TestGaussKernel:
    def test_peak_value(self):
        grid = make_grid(1, 10.0, 256)

        slice_ = gauss_kernel(grid, 1.0 / (4.0 * np.pi))
        assert slice_.field.values[grid.index_of(0.0)] == pytest.approx(1.0)

    def test_unit_mass(self):
        assert gauss_kernel(make_grid(1, 40.0, 1024), 1.0).mass == pytest.approx(1.0, abs=1e-10)

    def test_two_dimensional_value(self):
        grid = make_grid(2, 16.0, 64)

        value = gauss_kernel(grid, 1.0).field.values[grid.index_of((2.0, 0.0))]
        assert value == pytest.approx(np.exp(-1.0) / (4.0 * np.pi))

    def test_window_is_enforced(self):
        grid = make_grid(1, 6.0, 64)
        with pytest.raises(KernelRangeError, match="exceeds"):
            gauss_kernel(grid, 2.0)
        with pytest.raises(KernelRangeError, match="positive"):
            gauss_kernel(grid, 0.0)

    def test_lenient_window_logs(self, caplog):
        grid = make_grid(1, 6.0, 64)

        slice_ = gauss_kernel(grid, 2.0, strict=False)
        assert slice_.time == 2.0
        assert "exceeds" in caplog.text

    def test_matches_spectral_construction(self, wide_grid):
        closed = gauss_kernel(wide_grid, 1.0).field.values
        spec = KernelSpec(kind="gauss")
        spectral = apply_semigroup(spec, 1.0, discrete_delta(wide_grid)).values

        np.testing.assert_allclose(spectral, closed, atol=1e-12)


class TestStableKernel:
    def test_cauchy_values_on_wide_torus(self):
        grid = make_grid(1, 400.0, 8192)
        field = stable_kernel(grid, 1.0, 1.0).field

        assert field.values[grid.index_of(0.0)] == pytest.approx(1.0 / np.pi, rel=1e-4)
        assert field.values[grid.index_of(400.0 / 4096 * 10)] == pytest.approx(
            1.0 / (np.pi * (1.0 + (400.0 / 409.6) ** 2)), rel=1e-4
        )

    def test_matches_periodic_poisson_kernel(self, wide_grid):
        field = stable_kernel(wide_grid, 1.0, 1.0).field
        exact = poisson_kernel(wide_grid, 1.0)
        central = np.abs(wide_grid.axis) <= 20.0

        assert np.max(np.abs(field.values - exact.values)[central]) <= 1e-6

    def test_self_similarity(self):
        assert self_similarity_error(1.5, 2.0, make_grid(1, 40.0, 1024)) <= 1e-4

    def test_poisson_kernel_is_one_dimensional(self):
        with pytest.raises(ValueError, match="one-dimensional"):
            poisson_kernel(make_grid(2, 10.0, 16), 1.0)


class TestMixedKernel:
    @pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
    @pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
    def test_unit_mass_and_positivity(self, wide_grid, alpha, t):
        slice_ = mixed_kernel(wide_grid, alpha, t, strict=False)

        assert slice_.mass == pytest.approx(1.0, abs=1e-6)
        assert np.min(slice_.field.values) >= -1e-9

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
    def test_semigroup_property(self, wide_grid, alpha):
        composed = convolve(mixed_kernel(wide_grid, alpha, 0.3).field, mixed_kernel(wide_grid, alpha, 0.7).field)
        direct = mixed_kernel(wide_grid, alpha, 1.0).field

        assert np.max(np.abs(composed.values - direct.values)) <= 1e-10 * direct.sup

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
    def test_factorization(self, wide_grid, alpha):
        factored = convolve(gauss_kernel(wide_grid, 1.0).field, stable_kernel(wide_grid, alpha, 1.0).field)
        direct = mixed_kernel(wide_grid, alpha, 1.0).field

        assert np.max(np.abs(factored.values - direct.values)) <= 1e-10

    def test_kernel_slice_dispatch(self, wide_grid):
        spec = KernelSpec(kind="mixed", alpha=1.0)

        np.testing.assert_array_equal(
            kernel_slice(spec, wide_grid, 1.0).field.values, mixed_kernel(wide_grid, 1.0, 1.0).field.values
        )

    def test_csv_export(self, tmp_path, small_grid):
        path = mixed_kernel(small_grid, 1.0, 1.0).to_csv(tmp_path / "kernel.csv")

        header, data = read_csv(path)
        assert header == ["x", "value"]
        assert data.shape == (256, 2)


class TestSemigroup:
    spec = KernelSpec(kind="mixed", alpha=1.2)

    def test_zero_time_is_identity(self, gaussian):
        assert apply_semigroup(self.spec, 0.0, gaussian) is gaussian

    def test_rejects_negative_time(self, gaussian):
        with pytest.raises(ValueError, match="tau"):
            apply_semigroup(self.spec, -1.0, gaussian)

    def test_constants_are_fixed(self, small_grid):
        out = apply_semigroup(self.spec, 2.0, Field.constant(small_grid, 3.0))

        np.testing.assert_allclose(out.values, 3.0, atol=1e-13)

    @pytest.mark.parametrize("tau", [0.1, 1.0, 5.0])
    def test_mass_positivity_and_contraction(self, rng, tau):
        grid = make_grid(1, 40.0, 1024)
        f = Field(grid=grid, values=rng.uniform(0.0, 1.0, grid.shape))
        out = apply_semigroup(self.spec, tau, f)

        assert integrate(out) == pytest.approx(integrate(f), rel=1e-12)
        assert np.min(out.values) >= -1e-9
        assert out.sup <= f.sup + 1e-9


class TestDecayEstimates:
    """Fitted exponents of the smoothing and gradient estimates from a delta."""

    @pytest.mark.parametrize("r, q", [(1.0, np.inf), (1.0, 2.0), (2.0, np.inf)])
    @pytest.mark.parametrize("alpha", [1.0, 1.5])
    def test_smoothing_slopes(self, alpha, r, q):
        fit = smoothing_slopes(alpha, r=r, q=q)
        gap = 1.0 / r - (0.0 if q == np.inf else 1.0 / q)

        assert fit.small_expected == pytest.approx(-0.5 * gap)
        assert fit.large_expected == pytest.approx(-gap / alpha)
        assert fit.within(0.10), fit

    @pytest.mark.parametrize("alpha", [1.0, 1.5])
    def test_gradient_slopes(self, alpha):
        fit = gradient_slopes(alpha, q=1.0)

        assert fit.small_expected == pytest.approx(-0.5)
        assert fit.large_expected == pytest.approx(-1.0 / alpha)
        assert fit.within(0.10), fit

    def test_delta_has_unit_mass(self, small_grid):
        assert integrate(discrete_delta(small_grid)) == pytest.approx(1.0)


class TestTaylorEstimate:
    """Distance between E * g and M_g E against min(t^-1/2, t^-1/alpha) ||x g||_1."""

    def test_ratio_is_bounded(self, shifted):
        spec = KernelSpec(kind="mixed", alpha=1.5)
        times = [1.0, 3.0, 10.0, 30.0, 100.0]
        discrepancies = [taylor_discrepancy(spec, shifted, t) for t in times]
        ratios = [d / taylor_bound(spec, shifted, t) for d, t in zip(discrepancies, times)]

        assert max(ratios) <= 10.0
        assert np.all(np.diff(discrepancies[2:]) <= 0.0)

    def test_first_moment(self, shifted):
        assert first_moment(shifted) == pytest.approx(3.0 * np.sqrt(np.pi), rel=1e-3)

    def test_zero_mass_data_decays(self, shifted):
        spec = KernelSpec(kind="mixed", alpha=1.5)
        x = shifted.grid.axis
        balanced = shifted.like(shifted.values - np.exp(-((x + 3.0) ** 2)))

        assert taylor_discrepancy(spec, balanced, 100.0) < taylor_discrepancy(spec, balanced, 1.0)
