"""
Verification workflows.

Each target builds its fields from an ``ExperimentConfig``, runs the
library checks and returns ``CheckResult`` rows plus plot-ready tables.
"""

import asyncio
import logging
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict

from . import estimates, kernels, operators, solver
from .config import ConstantPreset, ExperimentConfig
from .grid import Field, Grid, convolve, integrate, make_grid

logger = logging.getLogger(__name__)

MASS_TOLERANCE = 1e-6
SEMIGROUP_TOLERANCE = 1e-10
POISSON_TOLERANCE = 1e-6
SLOPE_FRACTION = 0.10
LEMMA5_SLOPE_FRACTION = 0.15
LEMMA5_SPREAD = 10.0
SCALING_TOLERANCE = 1e-6
ORACLE_TOLERANCE = 1e-2
REFINEMENT_FLOOR = 1e-8
ODE_TOLERANCE = 1e-6
ORDER_TOLERANCE = 1e-8
MONOTONE_TOLERANCE = 1e-9
TAYLOR_TIMES = (1.0, 3.0, 10.0, 30.0, 100.0)
TAYLOR_SHIFT = 3.0
SMOOTHING_PAIRS = (("l1_to_sup", 1.0, np.inf), ("l1_to_l2", 1.0, 2.0), ("l2_to_sup", 2.0, np.inf))


class CheckResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    measured: float
    required: str
    passed: bool


class Table(NamedTuple):
    header: Sequence[str]
    columns: Sequence[Sequence[float]]


class VerifyOutcome(NamedTuple):
    checks: List[CheckResult]
    tables: Dict[str, Table]


def at_most(name: str, measured: float, limit: float) -> CheckResult:
    return CheckResult(name=name, measured=measured, required=f"<= {limit:g}", passed=bool(measured <= limit))


def at_least(name: str, measured: float, limit: float) -> CheckResult:
    return CheckResult(name=name, measured=measured, required=f">= {limit:g}", passed=bool(measured >= limit))


def run_parallel(tasks: Sequence[Callable[[], object]]) -> list:
    """Run independent blocking calls concurrently on worker threads."""

    async def gather():
        return await asyncio.gather(*(asyncio.to_thread(task) for task in tasks))

    return list(asyncio.run(gather()))


def build_problem(cfg: ExperimentConfig, grid: Optional[Grid] = None) -> solver.ProblemSpec:
    grid = grid or cfg.grid.build()
    problem = cfg.problem
    return solver.ProblemSpec(
        alpha=problem.alpha,
        beta=problem.beta,
        p=problem.p,
        forcing=problem.forcing,
        initial=problem.initial.sample(grid),
        absorbing=problem.absorbing,
    )


def _solve(cfg: ExperimentConfig, spec: solver.ProblemSpec) -> solver.SolveResult:
    return solver.solve(spec, cfg.solver.picard(), cfg.solver.t_end, cfg.solver.n_snapshots)


def norms_table(result: solver.SolveResult) -> Table:
    return Table(
        ("t", "sup", "l1", "l2", "mass", "iters"),
        (result.times, result.sup_norms, result.l1_norms, result.l2_norms, result.masses, result.picard_iters),
    )


def solution_checks(result: solver.SolveResult) -> List[CheckResult]:
    measured = result.invariants()
    scale = max(1.0, abs(result.masses[0]))
    return [
        CheckResult(
            name="status",
            measured=float(result.status == "completed"),
            required="completed",
            passed=result.status == "completed",
        ),
        at_least("nonnegativity", measured["min_value"], -MONOTONE_TOLERANCE),
        at_most("sup_norm_increase", measured["sup_increase"], MONOTONE_TOLERANCE),
        at_most("mass_increase", measured["mass_increase"], MONOTONE_TOLERANCE * scale),
        at_most("picard_contraction_ratio", measured["max_contraction_ratio"], result.contraction_target),
    ]


def kernel_props(cfg: ExperimentConfig) -> VerifyOutcome:
    grid = cfg.grid.build()
    alpha = cfg.problem.alpha
    strict = cfg.kernel.strict
    checks, masses, minima = [], [], []
    for t in cfg.kernel.times:
        slice_ = kernels.mixed_kernel(grid, alpha, t, strict=strict)
        masses.append(slice_.mass)
        minima.append(float(np.min(slice_.field.values)))
        checks.append(at_most(f"mass_t={t:g}", abs(slice_.mass - 1.0), MASS_TOLERANCE))

    composed = convolve(kernels.mixed_kernel(grid, alpha, 0.3, strict).field, kernels.mixed_kernel(grid, alpha, 0.7, strict).field)
    direct = kernels.mixed_kernel(grid, alpha, 1.0, strict).field
    checks.append(
        at_most("semigroup_residual", float(np.max(np.abs(composed.values - direct.values))) / direct.sup, SEMIGROUP_TOLERANCE)
    )
    factored = convolve(kernels.gauss_kernel(grid, 1.0, strict).field, kernels.stable_kernel(grid, alpha, 1.0, strict).field)
    checks.append(
        at_most("factorization_residual", float(np.max(np.abs(factored.values - direct.values))), SEMIGROUP_TOLERANCE)
    )

    rng = np.random.default_rng(cfg.seed)
    sample = Field(grid=grid, values=rng.uniform(0.0, 1.0, grid.shape))
    spec = kernels.KernelSpec(kind="mixed", alpha=alpha)
    excess = max(kernels.apply_semigroup(spec, t, sample).sup - sample.sup for t in cfg.kernel.times)
    checks.append(at_most("sup_contraction_excess", excess, MONOTONE_TOLERANCE))

    if alpha == 1.0 and grid.dim == 1:
        stable = kernels.stable_kernel(grid, 1.0, 1.0, strict).field
        exact = kernels.poisson_kernel(grid, 1.0)
        central = np.abs(grid.axis) <= grid.half_width / 2.0
        checks.append(
            at_most("poisson_agreement", float(np.max(np.abs(stable.values - exact.values)[central])), POISSON_TOLERANCE)
        )
    return VerifyOutcome(checks, {"kernel_mass": Table(("t", "mass", "min_value"), (cfg.kernel.times, masses, minima))})


def smoothing(cfg: ExperimentConfig) -> VerifyOutcome:
    alpha = cfg.problem.alpha
    fits = {label: kernels.smoothing_slopes(alpha, r, q, cfg.grid.dim) for label, r, q in SMOOTHING_PAIRS}
    fits["gradient_l1"] = kernels.gradient_slopes(alpha, 1.0, cfg.grid.dim)
    checks = []
    for label, result in fits.items():
        for regime, got, want in (
            ("small", result.small_slope, result.small_expected),
            ("large", result.large_slope, result.large_expected),
        ):
            checks.append(at_most(f"{label}_{regime}_slope_error", abs(got - want) / abs(want), SLOPE_FRACTION))
    first = fits["l1_to_sup"]
    tables = {
        "smoothing": Table(
            ("tau",) + tuple(fits),
            (first.taus_small + first.taus_large,)
            + tuple(fit.values_small + fit.values_large for fit in fits.values()),
        )
    }
    return VerifyOutcome(checks, tables)


def taylor(cfg: ExperimentConfig) -> VerifyOutcome:
    grid = cfg.grid.build()
    spec = kernels.KernelSpec(kind="mixed", alpha=cfg.problem.alpha)
    x = grid.mesh[0]
    rest = sum(y**2 for y in grid.mesh[1:])
    g = Field(grid=grid, values=np.exp(-((x - TAYLOR_SHIFT) ** 2) - rest))
    balanced = Field(grid=grid, values=g.values - np.exp(-((x + TAYLOR_SHIFT) ** 2) - rest))

    discrepancies = [kernels.taylor_discrepancy(spec, g, t) for t in TAYLOR_TIMES]
    bounds = [kernels.taylor_bound(spec, g, t) for t in TAYLOR_TIMES]
    ratios = [d / b for d, b in zip(discrepancies, bounds)]
    late = [d for t, d in zip(TAYLOR_TIMES, discrepancies) if t >= 10.0]
    zero_mass = [kernels.taylor_discrepancy(spec, balanced, t) for t in (TAYLOR_TIMES[0], TAYLOR_TIMES[-1])]
    checks = [
        at_most("taylor_ratio", max(ratios), cfg.verify.taylor_constant),
        at_most("late_discrepancy_increase", float(np.max(np.diff(late))), 0.0),
        at_most("zero_mass_decay", zero_mass[1] / zero_mass[0], 1.0),
    ]
    return VerifyOutcome(checks, {"taylor": Table(("parameter", "measured", "bound", "ratio"), (TAYLOR_TIMES, discrepancies, bounds, ratios))})


def lemma3(cfg: ExperimentConfig) -> VerifyOutcome:
    grid = cfg.grid.build()
    report = estimates.lemma3_envelope(cfg.verify.s, cfg.verify.q0, grid)
    checks = [
        at_most("envelope_refinement_change", report.relative_change, 0.2),
        CheckResult(name="envelope_finite", measured=report.max_ratio, required="finite", passed=bool(np.isfinite(report.max_ratio))),
    ]
    ratio = estimates.envelope_ratio(cfg.verify.s, cfg.verify.q0, grid)
    inside = estimates.interior_mask(grid).ravel()
    columns = [coord.ravel()[inside] for coord in grid.mesh] + [ratio.values.ravel()[inside]]
    return VerifyOutcome(checks, {"lemma3": Table(["x", "y"][: grid.dim] + ["ratio"], columns)})


def lemma4(cfg: ExperimentConfig) -> VerifyOutcome:
    grid = cfg.grid.build()
    psi = Field(grid=grid, values=np.exp(-grid.radius**2))
    rows = []
    checks = []
    for R in (2, 4):
        for s in (0.5, 0.9):
            error = estimates.lemma4_scaling_check(s, psi, R)
            rows.append((R, s, error))
            checks.append(at_most(f"scaling_R={R}_s={s:g}", error, SCALING_TOLERANCE))
    R_col, s_col, err_col = zip(*rows)
    return VerifyOutcome(checks, {"lemma4": Table(("R", "s", "error"), (R_col, s_col, err_col))})


def lemma5(cfg: ExperimentConfig) -> VerifyOutcome:
    sweep = estimates.lemma5_sweep(
        cfg.problem.p,
        cfg.problem.alpha,
        cfg.verify.q0,
        radii=cfg.verify.radii,
        points_per_dim=cfg.grid.points_per_dim,
        dim=cfg.grid.dim,
    )
    checks = [
        at_most("ratio_spread", sweep.ratio_spread, LEMMA5_SPREAD),
        at_most("slope_error", sweep.slope_error, LEMMA5_SLOPE_FRACTION),
        at_most("boundary_phi", max(r.boundary_phi for r in sweep.reports), estimates.BOUNDARY_TOLERANCE),
    ]
    reports = sweep.reports
    table = Table(
        ("parameter", "measured", "bound", "ratio"),
        ([r.R for r in reports], [r.integral for r in reports], [r.bound for r in reports], [r.ratio for r in reports]),
    )
    return VerifyOutcome(checks, {"lemma5": table})


def comparison(cfg: ExperimentConfig) -> VerifyOutcome:
    lower = build_problem(cfg)
    upper = lower.with_initial(lower.initial.like(2.0 * lower.initial.values))
    result_u, result_v = run_parallel([lambda: _solve(cfg, lower), lambda: _solve(cfg, upper)])
    report = solver.compare_runs(result_u, result_v)
    checks = [
        at_most("order_violation", report.max_violation, ORDER_TOLERANCE),
        at_most("lipschitz_gap_ratio", report.gap_ratio, 1.0 + ORDER_TOLERANCE),
        CheckResult(
            name="runs_completed",
            measured=float(result_u.status == result_v.status == "completed"),
            required="completed",
            passed=result_u.status == result_v.status == "completed",
        ),
    ]
    violations = [float(np.max(np.maximum(u.values - v.values, 0.0))) for u, v in zip(result_u.snapshots, result_v.snapshots)]
    gaps = [float(np.max(np.abs(u.values - v.values))) for u, v in zip(result_u.snapshots, result_v.snapshots)]
    return VerifyOutcome(checks, {"comparison": Table(("t", "violation", "gap"), (result_u.times, violations, gaps))})


def ode_oracle(cfg: ExperimentConfig) -> VerifyOutcome:
    preset = cfg.problem.initial if isinstance(cfg.problem.initial, ConstantPreset) else ConstantPreset()
    grid = cfg.grid.build()
    spec = build_problem(cfg, grid).with_initial(preset.sample(grid))
    result = _solve(cfg, spec)
    computed = [float(np.mean(s.values)) for s in result.snapshots]
    exact = [solver.constant_solution(preset.c, spec.p, spec.forcing, t) for t in result.times]
    errors = [float(np.max(np.abs(s.values - e))) for s, e in zip(result.snapshots, exact)]
    checks = [
        at_most("ode_max_deviation", max(errors), ODE_TOLERANCE),
        CheckResult(
            name="status", measured=float(result.status == "completed"), required="completed", passed=result.status == "completed"
        ),
    ]
    return VerifyOutcome(checks, {"ode_oracle": Table(("t", "computed", "exact", "error"), (result.times, computed, exact, errors))})


def oracle_points(grid: Grid, count: int = 16) -> List[tuple]:
    """Distinct lattice nodes along the x axis inside |x| <= L/4."""
    targets = np.linspace(-grid.half_width / 4.0, grid.half_width / 4.0, count)
    nodes = grid.axis[np.rint((targets + grid.half_width) / grid.spacing).astype(int)]
    return [(float(x),) + (0.0,) * (grid.dim - 1) for x in nodes]


def operator_oracle(cfg: ExperimentConfig) -> VerifyOutcome:
    coarse = cfg.grid.build()
    fine = make_grid(coarse.dim, coarse.half_width, 2 * coarse.points_per_dim)
    points = oracle_points(coarse)
    rows, checks = [], []
    for s in (0.25, 0.5, 0.75):
        errors = []
        for grid in (coarse, fine):
            f = Field(grid=grid, values=np.exp(-grid.radius**2))
            multiplier = operators.apply_operator(operators.OperatorSpec.fractional(s), f)
            exact = np.array([multiplier.values[grid.index_of(x)] for x in points])
            quadrature = np.array([operators.fractional_laplacian_quadrature(s, f, x) for x in points])
            errors.append(float(np.max(np.abs(quadrature - exact)) / np.max(np.abs(exact))))
            if grid is coarse:
                rows.extend((s, x[0], m, q) for x, m, q in zip(points, exact, quadrature))
        checks.append(at_most(f"oracle_error_s={s:g}", errors[0], ORACLE_TOLERANCE))
        checks.append(at_most(f"oracle_refinement_s={s:g}", errors[1], max(errors[0], REFINEMENT_FLOOR)))

    rng = np.random.default_rng(cfg.seed)
    sample = Field(grid=coarse, values=rng.standard_normal(coarse.shape))
    applied = operators.apply_operator(operators.OperatorSpec.mixed(cfg.problem.alpha), sample)
    checks.append(at_least("quadratic_form", integrate(sample.like(sample.values * applied.values)), -1e-10))
    s_col, x_col, m_col, q_col = zip(*rows)
    return VerifyOutcome(checks, {"operator_oracle": Table(("s", "x", "multiplier", "quadrature"), (s_col, x_col, m_col, q_col))})


def global_bounds(cfg: ExperimentConfig) -> VerifyOutcome:
    result = _solve(cfg, build_problem(cfg))
    return VerifyOutcome(solution_checks(result), {"norms": norms_table(result)})


TARGETS: Dict[str, Callable[[ExperimentConfig], VerifyOutcome]] = {
    "kernel_props": kernel_props,
    "smoothing": smoothing,
    "taylor": taylor,
    "lemma3": lemma3,
    "lemma4": lemma4,
    "lemma5": lemma5,
    "comparison": comparison,
    "ode_oracle": ode_oracle,
    "operator_oracle": operator_oracle,
    "global_bounds": global_bounds,
}


def run_target(cfg: ExperimentConfig) -> VerifyOutcome:
    target = cfg.verify.target
    logger.info(f"Running verify target {target}")
    outcome = TARGETS[target](cfg)
    for check in outcome.checks:
        level = logging.INFO if check.passed else logging.WARNING
        logger.log(level, f"{'✅' if check.passed else '❌'} {check.name}: {check.measured:.6g} (required {check.required})")
    return outcome
