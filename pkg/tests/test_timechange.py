import numpy as np
import pytest
from pydantic import ValidationError

from mixdiff.timechange import TimeWeight, tau, tau_inverse


class TestTimeChange:
    def test_closed_form_from_zero(self):
        assert tau(2.0, 0.0, 1.0) == pytest.approx(2.0)
        assert tau(3.0, 0.0, 0.0) == 3.0

    def test_unweighted_is_plain_difference(self):
        assert tau(5.0, 2.0, 0.0) == pytest.approx(3.0, rel=1e-14)

    def test_zero_interval(self):
        assert tau(1.5, 1.5, 2.0) == 0.0
        assert tau_inverse(0.0, 1.5, 2.0) == 1.5

    def test_short_interval_far_from_origin(self):
        t0, d = 1024.0, 2.0**-20
        assert tau(t0 + d, t0, 1.0) == pytest.approx(t0 * d + d * d / 2, rel=1e-12)

    def test_roundtrip(self, rng):
        for _ in range(200):
            sigma = rng.uniform(0.1, 10.0)
            t0 = rng.uniform(0.0, 2.0)
            beta = rng.uniform(0.0, 2.0)
            t = tau_inverse(sigma, t0, beta)
            assert t >= t0
            assert tau(t, t0, beta) == pytest.approx(sigma, rel=1e-12)

    def test_additivity(self, rng):
        for _ in range(50):
            t0, t1, t = np.sort(rng.uniform(0.0, 5.0, 3))
            beta = rng.uniform(0.0, 3.0)
            assert tau(t, t0, beta) == pytest.approx(tau(t, t1, beta) + tau(t1, t0, beta), rel=1e-12, abs=1e-14)

    @pytest.mark.parametrize(
        "call, message",
        [
            (lambda: tau(1.0, 2.0, 0.0), "precedes"),
            (lambda: tau(1.0, 0.0, -0.5), "beta"),
            (lambda: tau(1.0, -1.0, 0.0), "t0"),
            (lambda: tau_inverse(-1.0, 0.0, 0.0), "sigma"),
        ],
    )
    def test_rejects_invalid_arguments(self, call, message):
        with pytest.raises(ValueError, match=message):
            call()


class TestTimeWeight:
    def test_methods_delegate(self):
        weight = TimeWeight(beta=1.0)

        assert weight.tau(2.0) == pytest.approx(2.0)
        assert weight.tau_inverse(2.0) == pytest.approx(2.0)
        assert weight.tau(3.0, 1.0) == pytest.approx(4.0)

    def test_rejects_negative_beta(self):
        with pytest.raises(ValidationError):
            TimeWeight(beta=-1.0)
