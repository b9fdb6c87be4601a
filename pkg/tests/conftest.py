import json

import numpy as np
import pytest

from mixdiff.grid import Field, make_grid


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def unit_circle_grid():
    """L = pi, so xi_k = k."""
    return make_grid(1, np.pi, 64)


@pytest.fixture
def small_grid():
    return make_grid(1, 20.0, 256)


@pytest.fixture
def gaussian(small_grid):
    return Field(grid=small_grid, values=np.exp(-small_grid.radius**2))


@pytest.fixture
def write_config(tmp_path):
    """Dump a config dict to a JSON file and return its path."""

    def _write(data, name="config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data))
        return path

    return _write
