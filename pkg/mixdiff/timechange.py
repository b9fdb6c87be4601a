"""Time change tau = (t^{b} - t0^{b}) / b with b = beta + 1."""

import numpy as np
import pydantic
from pydantic import BaseModel, ConfigDict


class TimeWeight(BaseModel):
    model_config = ConfigDict(frozen=True)

    beta: float = pydantic.Field(0.0, ge=0.0, description="Exponent of the diffusion weight t^beta")

    def tau(self, t: float, t0: float = 0.0) -> float:
        return tau(t, t0, self.beta)

    def tau_inverse(self, sigma: float, t0: float = 0.0) -> float:
        return tau_inverse(sigma, t0, self.beta)


def _check_beta(beta: float) -> None:
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")


def tau(t: float, t0: float, beta: float) -> float:
    """Effective diffusion time accumulated over [t0, t]."""
    _check_beta(beta)
    if t0 < 0:
        raise ValueError(f"t0 must be >= 0, got {t0}")
    if t < t0:
        raise ValueError(f"t={t} precedes t0={t0}")
    b = beta + 1.0
    if t == t0:
        return 0.0
    if t0 == 0:
        return t**b / b
    # expm1/log1p keep short intervals far from t = 0 accurate.
    return float(t0**b * np.expm1(b * np.log1p((t - t0) / t0)) / b)


def tau_inverse(sigma: float, t0: float, beta: float) -> float:
    """The time t >= t0 with tau(t, t0, beta) == sigma."""
    _check_beta(beta)
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    b = beta + 1.0
    if sigma == 0:
        return float(t0)
    if t0 == 0:
        return float((b * sigma) ** (1.0 / b))
    return float(t0 + t0 * np.expm1(np.log1p(b * sigma / t0**b) / b))
