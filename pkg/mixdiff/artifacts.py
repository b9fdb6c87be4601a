"""CSV tables, run manifests and summaries written by the runner."""

import json
import logging
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .grid import Field

logger = logging.getLogger(__name__)

CSV_FORMAT = "%.17g"


def write_csv(path: Path, header: Sequence[str], columns: Iterable[Sequence[float]]) -> Path:
    """Write equally long columns under a one-line header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table = np.column_stack([np.asarray(c, dtype=float).ravel() for c in columns])
    if table.shape[1] != len(header):
        raise ValueError(f"{len(header)} header names for {table.shape[1]} columns")
    np.savetxt(path, table, fmt=CSV_FORMAT, delimiter=",", header=",".join(header), comments="")
    logger.debug(f"Wrote {table.shape[0]} rows to {path}")
    return path


def read_csv(path: Path) -> Tuple[List[str], np.ndarray]:
    """Read a table written by ``write_csv``; always returns a 2-D array."""
    path = Path(path)
    with path.open() as handle:
        header = handle.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size and data.shape[1] != len(header):
        raise ValueError(f"{path} has {data.shape[1]} columns but {len(header)} header names")
    return header, data


def write_field_csv(path: Path, field: Field) -> Path:
    """Snapshot schema: x[,y],value."""
    grid = field.grid
    names = ["x", "y"][: grid.dim] + ["value"]
    columns = [coord.ravel() for coord in grid.mesh] + [field.values.ravel()]
    return write_csv(path, names, columns)


def write_manifest(path: Path, manifest: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable))
    return path


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def write_summary(path: Path, lines: Sequence[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path
