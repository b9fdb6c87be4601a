"""Run experiment configs end to end and write their artifacts."""

import json
import logging
import time
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import pydantic
from pydantic import BaseModel

from . import __version__, artifacts, kernels, solver, verify
from .config import ConstantPreset, ExperimentConfig
from .verify import CheckResult, at_most

logger = logging.getLogger(__name__)


class RunError(Exception):
    """A run that must end with a non-zero exit status."""

    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code


class RunSummary(BaseModel):
    output: str
    command: str
    checks: List[CheckResult]
    metrics: Dict[str, float] = {}
    files: List[str] = []
    exit_code: int

    @property
    def failed(self) -> List[CheckResult]:
        return [c for c in self.checks if not c.passed]


def describe_validation_error(exc: pydantic.ValidationError) -> str:
    """One-line message naming the offending key."""
    error = exc.errors()[0]
    location = ".".join(str(part) for part in error["loc"])
    if error["type"] == "missing":
        return f"{location} required"
    return f"{location}: {error['msg']}" if location else error["msg"]


def validate_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except pydantic.ValidationError as exc:
        message = describe_validation_error(exc)
        logger.error(f"Config validation failed: {message}")
        raise RunError(message, 1) from exc


def load_config(path: Union[str, Path], out: Optional[str] = None, seed: Optional[int] = None) -> ExperimentConfig:
    """Parse and validate a JSON config; CLI values override the file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise RunError(f"config file {path} not found", 1) from exc
    except json.JSONDecodeError as exc:
        raise RunError(f"config {path} is not valid JSON: {exc}", 1) from exc
    if not isinstance(data, dict):
        raise RunError("config must be a JSON object", 1)
    if out is not None:
        data["output"] = str(out)
    if seed is not None:
        data["seed"] = seed
    return validate_config(data)


def _run_solve(cfg: ExperimentConfig, out: Path) -> Tuple[List[CheckResult], Dict[str, float], List[Path]]:
    spec = verify.build_problem(cfg)
    result = solver.solve(spec, cfg.solver.picard(), cfg.solver.t_end, cfg.solver.n_snapshots)
    table = verify.norms_table(result)
    files = [artifacts.write_csv(out / "norms.csv", table.header, table.columns)]
    for i, snapshot in enumerate(result.snapshots):
        files.append(artifacts.write_field_csv(out / f"snapshot_{i:03d}.csv", snapshot))
    checks = verify.solution_checks(result)
    metrics = {"final_sup": result.sup_norms[-1], "initial_sup": result.sup_norms[0], "steps": float(len(result.steps))}
    if isinstance(cfg.problem.initial, ConstantPreset):
        deviation = max(
            abs(s - solver.constant_solution(cfg.problem.initial.c, spec.p, spec.forcing, t))
            for s, t in zip(result.sup_norms, result.times)
        )
        metrics["ode_max_deviation"] = deviation
        checks.append(at_most("ode_max_deviation", deviation, verify.ODE_TOLERANCE))
    if result.diagnostic:
        logger.warning(f"⚠️ Solver diagnostic: {result.diagnostic}")
    return checks, metrics, files


def _run_kernel(cfg: ExperimentConfig, out: Path) -> Tuple[List[CheckResult], Dict[str, float], List[Path]]:
    grid = cfg.grid.build()
    kind = cfg.kernel.kind
    spec = kernels.KernelSpec(kind=kind, alpha=None if kind == "gauss" else cfg.problem.alpha)
    checks, files, metrics = [], [], {}
    for t in cfg.kernel.times:
        slice_ = kernels.kernel_slice(spec, grid, t, cfg.kernel.strict)
        files.append(slice_.to_csv(out / f"kernel_{kind}_t{t:g}.csv"))
        metrics[f"mass_t={t:g}"] = slice_.mass
        checks.append(at_most(f"mass_t={t:g}", abs(slice_.mass - 1.0), verify.MASS_TOLERANCE))
    return checks, metrics, files


def _run_verify(cfg: ExperimentConfig, out: Path) -> Tuple[List[CheckResult], Dict[str, float], List[Path]]:
    outcome = verify.run_target(cfg)
    files = [artifacts.write_csv(out / f"{name}.csv", table.header, table.columns) for name, table in outcome.tables.items()]
    return outcome.checks, {}, files


def _run_sweep(cfg: ExperimentConfig, out: Path) -> Tuple[List[CheckResult], Dict[str, float], List[Path]]:
    parameter = cfg.sweep.parameter
    base = cfg.model_dump(mode="json")
    runs = []
    for value in cfg.sweep.values:
        data = {**base, "command": "solve", "sweep": None, "output": str(out / f"{parameter}_{value:g}")}
        data["problem"] = {**base["problem"], parameter: value}
        runs.append(validate_config(data))

    summaries = verify.run_parallel([lambda run=run: execute(run) for run in runs])
    checks, measured, bounds = [], [], []
    for value, summary in zip(cfg.sweep.values, summaries):
        checks.append(
            CheckResult(
                name=f"run_{parameter}={value:g}",
                measured=float(len(summary.failed)),
                required="0 failed checks",
                passed=summary.exit_code == 0,
            )
        )
        measured.append(summary.metrics["final_sup"])
        bounds.append(summary.metrics["initial_sup"])
    ratios = [m / b if b else 0.0 for m, b in zip(measured, bounds)]
    files = [
        artifacts.write_csv(
            out / "sweep.csv", ("parameter", "measured", "bound", "ratio"), (cfg.sweep.values, measured, bounds, ratios)
        )
    ]
    return checks, {}, files


WORKFLOWS = {
    "solve": _run_solve,
    "kernel": _run_kernel,
    "verify": _run_verify,
    "sweep": _run_sweep,
}


def summary_lines(cfg: ExperimentConfig, checks: List[CheckResult], metrics: Dict[str, float], elapsed: float) -> List[str]:
    lines = [f"mixdiff {__version__} - {cfg.command}" + (f" ({cfg.verify.target})" if cfg.verify else "")]
    lines.append(f"elapsed: {elapsed:.2f}s")
    for name, value in metrics.items():
        lines.append(f"{name}: {value:.6g}")
    for check in checks:
        mark = "✅" if check.passed else "❌"
        lines.append(f"{mark} {check.name}: measured {check.measured:.6g}, required {check.required}")
    failed = sum(not c.passed for c in checks)
    lines.append("all checks passed" if not failed else f"{failed} check(s) failed")
    return lines


def execute(cfg: ExperimentConfig) -> RunSummary:
    """Run one validated config; failed checks are reported, not raised."""
    out = Path(cfg.output_dir())
    out.mkdir(parents=True, exist_ok=True)
    started_at = datetime.now().isoformat(timespec="seconds")
    started = time.perf_counter()
    logger.info(f"🚀 Starting {cfg.command} run into {out}")

    try:
        checks, metrics, files = WORKFLOWS[cfg.command](cfg, out)
    except ValueError as exc:
        # Grid, kernel-window and estimate setup errors are parameter errors.
        logger.error(f"❌ {cfg.command} run rejected its parameters: {exc}")
        raise RunError(str(exc), 1) from exc
    elapsed = time.perf_counter() - started
    exit_code = 0 if all(c.passed for c in checks) else 2

    manifest = {
        "version": __version__,
        "config": cfg.model_dump(mode="json"),
        "started_at": started_at,
        "timings": {"total_seconds": elapsed},
        "checks": [c.model_dump() for c in checks],
        "metrics": metrics,
        "files": sorted(str(Path(f).relative_to(out)) for f in files),
        "status": "passed" if exit_code == 0 else "failed",
        "exit_code": exit_code,
    }
    files.append(artifacts.write_manifest(out / "manifest.json", manifest))
    files.append(artifacts.write_summary(out / "summary.txt", summary_lines(cfg, checks, metrics, elapsed)))
    logger.info(f"{'✅' if exit_code == 0 else '❌'} {cfg.command} run finished in {elapsed:.2f}s with exit status {exit_code}")
    return RunSummary(
        output=str(out),
        command=cfg.command,
        checks=checks,
        metrics=metrics,
        files=[str(f) for f in files],
        exit_code=exit_code,
    )


def run(config_path: Union[str, Path], out: Optional[str] = None, seed: Optional[int] = None) -> RunSummary:
    """Load, execute and raise RunError(exit_code=2) when any check fails."""
    summary = execute(load_config(config_path, out=out, seed=seed))
    if summary.exit_code:
        failed = "; ".join(f"{c.name}: measured {c.measured:.6g}, required {c.required}" for c in summary.failed)
        raise RunError(f"{len(summary.failed)} check(s) failed: {failed}", summary.exit_code)
    return summary
