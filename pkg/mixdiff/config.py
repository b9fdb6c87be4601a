"""
Experiment configuration.

Configs are JSON documents validated by the models below. Unknown keys are
rejected everywhere, and the resolved config (defaults filled in) is written
back into every run manifest.
"""

import os
from typing import Annotated, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from . import grid as lattice
from .solver import ForcingCoefficient, PicardConfig

DEFAULT_SEED = 1234
DEFAULT_OUTPUT_ROOT = "runs"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridConfig(_Strict):
    dim: Literal[1, 2] = 1
    half_width: float = Field(40.0, gt=0, description="Torus half-width L")
    points_per_dim: int = Field(1024, ge=8, description="Lattice points per axis, a power of two")

    @field_validator("points_per_dim")
    @classmethod
    def validate_points(cls, v):
        if v & (v - 1):
            raise ValueError(f"must be a power of two, got {v}")
        return v

    def build(self) -> lattice.Grid:
        return lattice.make_grid(self.dim, self.half_width, self.points_per_dim)


class GaussianPreset(_Strict):
    kind: Literal["gaussian"] = "gaussian"
    amplitude: float = Field(1.0, ge=0)
    width: float = Field(1.0, gt=0)
    center: List[float] = Field(default_factory=lambda: [0.0])

    def sample(self, grid: lattice.Grid) -> lattice.Field:
        center = (list(self.center) + [0.0] * grid.dim)[: grid.dim]
        r2 = sum((x - c) ** 2 for x, c in zip(grid.mesh, center))
        return lattice.Field(grid=grid, values=self.amplitude * np.exp(-r2 / self.width**2))


class ConstantPreset(_Strict):
    kind: Literal["constant"] = "constant"
    c: float = Field(1.0, ge=0)

    def sample(self, grid: lattice.Grid) -> lattice.Field:
        return lattice.Field.constant(grid, self.c)


class DoubleBumpPreset(_Strict):
    kind: Literal["double_bump"] = "double_bump"
    amplitude: float = Field(1.0, ge=0)
    width: float = Field(1.0, gt=0)
    separation: float = Field(4.0, gt=0, description="Distance between the bump centres along x")

    def sample(self, grid: lattice.Grid) -> lattice.Field:
        half = self.separation / 2.0
        rest = sum(x**2 for x in grid.mesh[1:])
        x = grid.mesh[0]
        values = np.exp(-((x - half) ** 2 + rest) / self.width**2) + np.exp(-((x + half) ** 2 + rest) / self.width**2)
        return lattice.Field(grid=grid, values=self.amplitude * values)


InitialPreset = Annotated[
    Union[GaussianPreset, ConstantPreset, DoubleBumpPreset],
    Field(discriminator="kind"),
]


class ProblemConfig(_Strict):
    alpha: float = Field(1.0, gt=0, lt=2)
    beta: float = Field(0.0, ge=0)
    p: float = Field(2.0, gt=1)
    forcing: ForcingCoefficient = Field(default_factory=ForcingCoefficient)
    initial: InitialPreset = Field(default_factory=GaussianPreset)
    absorbing: bool = True


class SolverConfig(_Strict):
    k: float = Field(2.0, gt=1)
    tol: float = Field(1e-10, gt=0)
    max_iters: int = Field(50, ge=2)
    substeps: int = Field(8, ge=1)
    max_step: Optional[float] = Field(None, gt=0)
    t_end: float = Field(1.0, gt=0)
    n_snapshots: int = Field(10, ge=2)

    def picard(self) -> PicardConfig:
        return PicardConfig(
            k=self.k, tol=self.tol, max_iters=self.max_iters, substeps=self.substeps, max_step=self.max_step
        )


class KernelConfig(_Strict):
    kind: Literal["gauss", "stable", "mixed"] = "mixed"
    times: List[float] = Field(default_factory=lambda: [0.1, 1.0, 10.0], min_length=1)
    strict: bool = Field(True, description="Reject times whose kernel scale exceeds L/6")

    @field_validator("times")
    @classmethod
    def validate_times(cls, v):
        if any(t <= 0 for t in v):
            raise ValueError("kernel times must be positive")
        return v


VerifyTarget = Literal[
    "kernel_props",
    "smoothing",
    "taylor",
    "lemma3",
    "lemma4",
    "lemma5",
    "comparison",
    "ode_oracle",
    "operator_oracle",
    "global_bounds",
]


class VerifyConfig(_Strict):
    target: VerifyTarget
    s: float = Field(0.5, gt=0, le=1, description="Order for lemma3")
    q0: float = Field(1.5, gt=0, description="Decay exponent for lemma3")
    radii: List[float] = Field(default_factory=lambda: [1, 2, 4, 8, 16, 32, 64], min_length=2)
    taylor_constant: float = Field(10.0, gt=0, description="Admissible constant for the Taylor ratio")


class SweepConfig(_Strict):
    parameter: Literal["alpha", "beta", "p"]
    values: List[float] = Field(..., min_length=1)


class ExperimentConfig(_Strict):
    command: Literal["solve", "kernel", "verify", "sweep"]
    grid: GridConfig = Field(default_factory=GridConfig)
    problem: ProblemConfig = Field(default_factory=ProblemConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    kernel: KernelConfig = Field(default_factory=KernelConfig)
    verify: Optional[VerifyConfig] = None
    sweep: Optional[SweepConfig] = None
    output: Optional[str] = Field(None, description="Output directory; the environment root is used when absent")
    seed: int = Field(DEFAULT_SEED, description="Seed for random test fields")

    @model_validator(mode="after")
    def validate_sections(self):
        if self.command == "verify" and self.verify is None:
            raise ValueError("verify section required for command 'verify'")
        if self.command == "sweep" and self.sweep is None:
            raise ValueError("sweep section required for command 'sweep'")
        return self

    def output_dir(self) -> str:
        return self.output or os.getenv("MIXDIFF_OUTPUT_ROOT", DEFAULT_OUTPUT_ROOT)
