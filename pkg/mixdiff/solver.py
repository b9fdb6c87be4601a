"""
Mild solutions of u_t + t^beta (-Delta + (-Delta)^{alpha/2}) u = -h(t) |u|^{p-1} u.

Each step solves the Duhamel equation on [t0, t1] by Picard iteration. The
linear part is the mixed semigroup evaluated at the tau-increment, and the
integral term is collocated on nodes that are equispaced in the forcing clock
H(t) = int_0^t h.
"""

import logging
import math
import time
from typing import Dict, List, Literal, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pydantic
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from scipy.optimize import brentq

from .grid import Field, Grid, integrate, lr_norm
from .kernels import KernelSpec, apply_semigroup
from .timechange import tau, tau_inverse

logger = logging.getLogger(__name__)

UNDERFLOW = 1e-12
GROWTH = 1.5
GROW_AFTER = 3
ABORT_FACTOR = 2.0


class PicardToleranceError(RuntimeError):
    """The fixed-point iteration did not contract to tolerance on a step."""

    def __init__(self, message: str, iters: int, distance: float):
        super().__init__(message)
        self.iters = iters
        self.distance = distance


class ForcingCoefficient(BaseModel):
    """h(t) = c for ``constant``, h(t) = c t^gamma for ``power``."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["constant", "power"] = "constant"
    c: float = pydantic.Field(1.0, gt=0, description="Amplitude of h")
    gamma: float = pydantic.Field(0.0, gt=-1, description="Power exponent; h must be locally integrable")

    @model_validator(mode="after")
    def validate_gamma(self):
        if self.kind == "constant" and self.gamma != 0.0:
            raise ValueError("constant forcing takes no gamma")
        return self

    @property
    def exponent(self) -> float:
        return 0.0 if self.kind == "constant" else self.gamma

    def cumulative(self, t: float) -> float:
        g = self.exponent
        return self.c * t ** (g + 1.0) / (g + 1.0)

    def inverse(self, H: float) -> float:
        g = self.exponent
        return ((g + 1.0) * H / self.c) ** (1.0 / (g + 1.0))

    def integral(self, a: float, b: float) -> float:
        return self.cumulative(b) - self.cumulative(a)

    def bound(self, a: float, b: float) -> float:
        """Sup of h on [a, b]; the interval average where that sup is infinite."""
        g = self.exponent
        if g == 0:
            return self.c
        if g > 0:
            return self.c * b**g
        if a > 0:
            return self.c * a**g
        return self.integral(a, b) / (b - a)

    def horizon(self, t0: float, budget: float) -> float:
        """Largest dt with bound(t0, t0 + dt) * dt <= budget."""
        if not math.isfinite(budget):
            return math.inf
        g = self.exponent
        if g == 0 or (g < 0 and t0 > 0):
            # h is nonincreasing here, so bound(t0, t0 + dt) = h(t0) for every dt.
            return budget / self.bound(t0, t0)
        if g < 0:
            return self.inverse(budget)

        def excess(dt):
            return self.bound(t0, t0 + dt) * dt - budget

        hi = budget / self.bound(t0, max(t0, 1.0))
        while excess(hi) < 0:
            hi *= 2.0
        return brentq(excess, 0.0, hi, xtol=1e-14 * hi, rtol=1e-12)


class ProblemSpec(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    alpha: float = pydantic.Field(..., gt=0, lt=2)
    beta: float = pydantic.Field(0.0, ge=0)
    p: float = pydantic.Field(..., gt=1)
    forcing: ForcingCoefficient = ForcingCoefficient()
    initial: Field
    absorbing: bool = pydantic.Field(True, description="Switch for the -h u^p term")

    @field_validator("initial")
    @classmethod
    def validate_initial(cls, v):
        if np.min(v.values) < 0:
            raise ValueError("initial data must be nonnegative")
        return v

    @property
    def grid(self) -> Grid:
        return self.initial.grid

    @property
    def kernel(self) -> KernelSpec:
        return KernelSpec(kind="mixed", alpha=self.alpha)

    def nonlinearity(self, values: np.ndarray) -> np.ndarray:
        return np.abs(values) ** (self.p - 1.0) * values

    def with_initial(self, initial: Field) -> "ProblemSpec":
        return ProblemSpec(**{**dict(self), "initial": initial})


class PicardConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    k: float = pydantic.Field(2.0, gt=1, description="Radius multiplier of the contraction ball")
    tol: float = pydantic.Field(1e-10, gt=0, description="Sup-norm fixed-point tolerance")
    max_iters: int = pydantic.Field(50, ge=2)
    substeps: int = pydantic.Field(8, ge=1, description="Collocation intervals per step")
    max_step: Optional[float] = pydantic.Field(None, gt=0)

    @property
    def contraction_target(self) -> float:
        return (self.k - 1.0) / self.k

    def budget(self, sup: float, p: float) -> float:
        """
        Allowed forcing mass per step so that the map contracts by (k-1)/k.

        This is existence_time_bound with h = 1, divided by p: the map must
        also contract, and |u|^{p-1} u is p (k sup)^{p-1}-Lipschitz on the ball.
        """
        if sup == 0:
            return math.inf
        return existence_time_bound(sup, 1.0, p, self.k) / p


def existence_time_bound(u0_sup: float, M: float, p: float, k: float) -> float:
    """(k - 1) / (M k^p ||u0||^{p-1}), the guaranteed local existence time."""
    if u0_sup <= 0:
        raise ValueError("u0_sup must be positive; zero data gives the zero solution")
    if M <= 0:
        raise ValueError(f"M must be positive, got {M}")
    if p <= 1 or k <= 1:
        raise ValueError(f"need p > 1 and k > 1, got p={p}, k={k}")
    return (k - 1.0) / (M * k**p * u0_sup ** (p - 1.0))


def constant_solution(c: float, p: float, forcing: ForcingCoefficient, t: float) -> float:
    """Exact solution of u' = -h(t) u^p from u(0) = c, the flow of spatially constant data."""
    if c == 0:
        return 0.0
    return (c ** (1.0 - p) + (p - 1.0) * forcing.cumulative(t)) ** (-1.0 / (p - 1.0))


class PicardOutcome(NamedTuple):
    field: Field
    iters: int
    ratios: Tuple[float, ...]


def collocation_nodes(forcing: ForcingCoefficient, t0: float, t1: float, substeps: int) -> np.ndarray:
    clock = np.linspace(forcing.cumulative(t0), forcing.cumulative(t1), substeps + 1)
    nodes = np.array([forcing.inverse(H) for H in clock])
    nodes[0], nodes[-1] = t0, t1
    return np.maximum.accumulate(nodes)


def picard_step(spec: ProblemSpec, cfg: PicardConfig, t0: float, t1: float, u_t0: Field) -> PicardOutcome:
    """
    Fixed point of the discrete Duhamel map on [t0, t1].

    With nodes s_j equispaced in H and G = |u|^{p-1} u, the map sends node
    values U to V with V_0 = u(t0) and
        V_j = S(dtau_j) (V_{j-1} - dH/2 G(U_{j-1})) - dH/2 G(U_j).
    The first iterate is the explicit left-node predictor.
    """
    if t1 <= t0:
        raise ValueError(f"step end {t1} must exceed start {t0}")
    kernel = spec.kernel
    if not spec.absorbing:
        return PicardOutcome(apply_semigroup(kernel, tau(t1, t0, spec.beta), u_t0), 0, ())
    if u_t0.sup == 0:
        return PicardOutcome(u_t0, 0, ())

    nodes = collocation_nodes(spec.forcing, t0, t1, cfg.substeps)
    dtaus = [tau(b, a, spec.beta) for a, b in zip(nodes[:-1], nodes[1:])]
    dH = spec.forcing.integral(t0, t1) / cfg.substeps
    G = spec.nonlinearity
    threshold = cfg.tol * max(1.0, u_t0.sup)
    blowup = 1e3 * max(1.0, u_t0.sup)

    def propagate(values: np.ndarray, j: int) -> np.ndarray:
        return apply_semigroup(kernel, dtaus[j], u_t0.like(values)).values

    try:
        current = [u_t0.values]
        for j in range(cfg.substeps):
            current.append(propagate(current[-1] - dH * G(current[-1]), j))
        iters = 1
        previous = None
        ratios = []
        while True:
            if iters >= cfg.max_iters:
                raise PicardToleranceError(
                    f"no contraction to {threshold:.1e} on [{t0:.6g}, {t1:.6g}] after {iters} iterations "
                    f"(last distance {previous:.3e})",
                    iters,
                    previous,
                )
            forces = [G(v) for v in current]
            update = [u_t0.values]
            for j in range(cfg.substeps):
                update.append(propagate(update[-1] - 0.5 * dH * forces[j], j) - 0.5 * dH * forces[j + 1])
            iters += 1
            distance = max(float(np.max(np.abs(a - b))) for a, b in zip(update, current))
            if not math.isfinite(distance) or distance > blowup:
                raise PicardToleranceError(
                    f"iterates diverge on [{t0:.6g}, {t1:.6g}] (distance {distance:.3e})", iters, distance
                )
            if previous is not None and previous >= threshold:
                ratios.append(distance / previous)
            current = update
            previous = distance
            if distance < threshold:
                break
    except ValueError as exc:
        # Non-finite intermediate values are rejected by Field validation.
        raise PicardToleranceError(f"iterate left the finite range on [{t0:.6g}, {t1:.6g}]: {exc}", 0, math.inf) from exc

    logger.debug(
        f"Picard step [{t0:.6g}, {t1:.6g}]: {iters} iterations, max ratio {max(ratios, default=0.0):.3f}"
    )
    return PicardOutcome(u_t0.like(current[-1]), iters, tuple(ratios))


class StepRecord(NamedTuple):
    t0: float
    t1: float
    iters: int
    max_ratio: float


class SolveResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    times: List[float]
    snapshots: List[Field]
    sup_norms: List[float]
    l1_norms: List[float]
    l2_norms: List[float]
    masses: List[float]
    picard_iters: List[int] = pydantic.Field(..., description="Picard iterations since the previous snapshot")
    steps: List[StepRecord] = []
    status: Literal["completed", "tolerance_failure", "aborted"] = "completed"
    diagnostic: str = ""
    contraction_target: float = 0.5
    elapsed: float = 0.0

    @model_validator(mode="after")
    def validate_lengths(self):
        n = len(self.times)
        for name in ("snapshots", "sup_norms", "l1_norms", "l2_norms", "masses", "picard_iters"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has {len(getattr(self, name))} entries for {n} times")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("snapshot times must increase")
        return self

    @property
    def grid(self) -> Grid:
        return self.snapshots[0].grid

    @property
    def final(self) -> Field:
        return self.snapshots[-1]

    def invariants(self) -> Dict[str, float]:
        """Measured worst cases of the solution-level guarantees."""
        return {
            "min_value": min(float(np.min(s.values)) for s in self.snapshots),
            "sup_increase": float(np.max(np.diff(self.sup_norms), initial=0.0)),
            "mass_increase": float(np.max(np.diff(self.masses), initial=0.0)),
            "max_contraction_ratio": max((s.max_ratio for s in self.steps), default=0.0),
            "max_picard_iters": max((s.iters for s in self.steps), default=0),
        }


class _Recorder:
    def __init__(self):
        self.columns = {name: [] for name in ("times", "snapshots", "sup_norms", "l1_norms", "l2_norms", "masses", "picard_iters")}

    def add(self, t: float, u: Field, iters: int) -> None:
        self.columns["times"].append(float(t))
        self.columns["snapshots"].append(u)
        self.columns["sup_norms"].append(u.sup)
        self.columns["l1_norms"].append(lr_norm(u, 1))
        self.columns["l2_norms"].append(lr_norm(u, 2))
        self.columns["masses"].append(integrate(u))
        self.columns["picard_iters"].append(int(iters))


def solve(
    spec: ProblemSpec,
    cfg: PicardConfig,
    t_end: float,
    n_snapshots: int = 10,
    partition: Optional[Sequence[float]] = None,
) -> SolveResult:
    """
    March picard_step from t = 0 to t_end, recording n_snapshots equispaced
    snapshots (t = 0 and t = t_end included).

    Without a partition the step starts at the contraction horizon, halves on
    tolerance failure and grows by 1.5 after three successes. It is capped by
    ``cfg.max_step``, by the kernel validity window and by snapshot times.
    An explicit partition is merged with the snapshot times and used as is.
    """
    if t_end <= 0:
        raise ValueError(f"t_end must be positive, got {t_end}")
    if n_snapshots < 2:
        raise ValueError(f"n_snapshots must be >= 2, got {n_snapshots}")
    started = time.perf_counter()
    snapshot_times = np.linspace(0.0, t_end, n_snapshots)
    fixed_points = None
    if partition is not None:
        interior = [float(t) for t in partition if 0.0 < t < t_end]
        fixed_points = sorted(set(interior) | set(snapshot_times[1:].tolist()))

    recorder = _Recorder()
    u = spec.initial
    u0_sup = u.sup
    recorder.add(0.0, u, 0)
    logger.info(
        f"Solving alpha={spec.alpha}, beta={spec.beta}, p={spec.p}, h={spec.forcing.kind} "
        f"to t={t_end} on {spec.grid.shape} lattice"
    )

    if u0_sup == 0:
        for t in snapshot_times[1:]:
            recorder.add(t, u, 0)
        return SolveResult(**recorder.columns, contraction_target=cfg.contraction_target)

    tau_cap = spec.kernel.max_time(spec.grid)
    steps: List[StepRecord] = []
    status, diagnostic = "completed", ""
    t, dt, successes, interval_iters = 0.0, math.inf, 0, 0
    next_snapshot = 1
    while next_snapshot < n_snapshots:
        target = float(snapshot_times[next_snapshot])
        if fixed_points is not None:
            t_next = next(p for p in fixed_points if p > t)
        else:
            guaranteed = spec.forcing.horizon(t, cfg.budget(u.sup, spec.p)) if spec.absorbing else math.inf
            window = tau_inverse(tau_cap, t, spec.beta) - t
            step = min(dt, guaranteed, cfg.max_step or math.inf, window, target - t)
            t_next = t + step
            if target - t_next <= UNDERFLOW * max(1.0, target):
                t_next = target

        try:
            outcome = picard_step(spec, cfg, t, t_next, u)
        except PicardToleranceError as exc:
            if fixed_points is not None:
                status, diagnostic = "tolerance_failure", str(exc)
                break
            dt = (t_next - t) / 2.0
            successes = 0
            logger.warning(f"⚠️ Halving step at t={t:.6g} to {dt:.3e}: {exc}")
            if dt < UNDERFLOW:
                status = "tolerance_failure"
                diagnostic = f"step underflow below {UNDERFLOW:g} at t={t:.6g}: {exc}"
                break
            continue

        steps.append(StepRecord(t, t_next, outcome.iters, max(outcome.ratios, default=0.0)))
        interval_iters += outcome.iters
        u, t = outcome.field, t_next
        successes += 1
        if successes >= GROW_AFTER:
            dt *= GROWTH
            successes = 0

        if u.sup > ABORT_FACTOR * u0_sup:
            status = "aborted"
            diagnostic = f"sup norm {u.sup:.6g} exceeded {ABORT_FACTOR:g} x initial {u0_sup:.6g} at t={t:.6g}"
            break
        if t == target:
            recorder.add(t, u, interval_iters)
            interval_iters = 0
            next_snapshot += 1

    if status != "completed":
        logger.error(f"❌ Solve stopped: {diagnostic}")
    elapsed = time.perf_counter() - started
    logger.info(f"Solve finished with status {status}: {len(steps)} steps in {elapsed:.2f}s")
    return SolveResult(
        **recorder.columns,
        steps=steps,
        status=status,
        diagnostic=diagnostic,
        contraction_target=cfg.contraction_target,
        elapsed=elapsed,
    )


class ComparisonReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    max_violation: float = pydantic.Field(..., description="max over snapshots of max(u - v, 0)")
    initial_gap: float
    max_gap: float
    gap_ratio: float = pydantic.Field(..., description="sup_t ||u - v|| / ||u0 - v0||")
    snapshots: int
    passed: bool


def compare_runs(result_u: SolveResult, result_v: SolveResult, tolerance: float = 1e-8) -> ComparisonReport:
    """Ordering and Lipschitz-dependence report for runs from data u0 <= v0."""
    if result_u.grid != result_v.grid:
        raise ValueError("runs live on different grids")
    if len(result_u.times) != len(result_v.times) or not np.allclose(
        result_u.times, result_v.times, rtol=0.0, atol=1e-12
    ):
        raise ValueError("runs have different snapshot times")
    violation, gaps = 0.0, []
    for u, v in zip(result_u.snapshots, result_v.snapshots):
        difference = u.values - v.values
        violation = max(violation, float(np.max(difference)))
        gaps.append(float(np.max(np.abs(difference))))
    initial = gaps[0]
    if initial > 0:
        ratio = max(gaps) / initial
    else:
        ratio = 0.0 if max(gaps) == 0 else math.inf
    return ComparisonReport(
        max_violation=max(violation, 0.0),
        initial_gap=initial,
        max_gap=max(gaps),
        gap_ratio=ratio,
        snapshots=len(gaps),
        passed=violation <= tolerance,
    )
