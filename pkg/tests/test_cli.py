"""
Tests for config validation, the run workflows and the command-line entry point.
"""

import json

import numpy as np
import pytest

from main import main
from mixdiff.artifacts import read_csv, write_csv
from mixdiff.runner import RunError, execute, load_config, run

SMALL_GRID = {"half_width": 10.0, "points_per_dim": 16}


def solve_config(out, **problem):
    return {
        "command": "solve",
        "grid": SMALL_GRID,
        "problem": {"initial": {"kind": "constant", "c": 1.0}, **problem},
        "solver": {"t_end": 1.0, "n_snapshots": 3, "max_step": 0.025, "substeps": 32},
        "output": str(out),
    }


class TestConfigValidation:
    """Invalid configs exit with status 1 and a message naming the key."""

    def test_empty_config(self, write_config):
        with pytest.raises(RunError, match="command required") as info:
            run(write_config({}))

        assert info.value.exit_code == 1

    def test_unknown_key(self, write_config):
        with pytest.raises(RunError, match="bogus") as info:
            run(write_config({"command": "solve", "bogus": 1}))

        assert info.value.exit_code == 1

    def test_nested_value_out_of_range(self, write_config):
        with pytest.raises(RunError, match="problem.alpha") as info:
            run(write_config({"command": "solve", "problem": {"alpha": 2.5}}))

        assert info.value.exit_code == 1

    def test_missing_verify_section(self, write_config):
        with pytest.raises(RunError, match="verify section required"):
            run(write_config({"command": "verify"}))

    def test_grid_must_be_power_of_two(self, write_config):
        with pytest.raises(RunError, match="grid.points_per_dim"):
            run(write_config({"command": "solve", "grid": {"points_per_dim": 100}}))

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")

        with pytest.raises(RunError, match="not valid JSON") as info:
            run(path)
        assert info.value.exit_code == 1

    def test_missing_file(self, tmp_path):
        with pytest.raises(RunError, match="not found"):
            run(tmp_path / "absent.json")

    def test_cli_overrides(self, write_config, tmp_path):
        cfg = load_config(write_config({"command": "solve", "seed": 7}), out=str(tmp_path / "x"), seed=99)

        assert cfg.seed == 99
        assert cfg.output_dir() == str(tmp_path / "x")

    def test_output_root_from_environment(self, write_config, monkeypatch, tmp_path):
        monkeypatch.setenv("MIXDIFF_OUTPUT_ROOT", str(tmp_path / "env-root"))
        cfg = load_config(write_config({"command": "solve"}))

        assert cfg.output_dir() == str(tmp_path / "env-root")
        assert cfg.seed == 1234


class TestSolveWorkflow:
    def test_artifacts(self, write_config, tmp_path):
        out = tmp_path / "solve"
        summary = run(write_config(solve_config(out)))

        assert summary.exit_code == 0
        header, data = read_csv(out / "norms.csv")
        assert header == ["t", "sup", "l1", "l2", "mass", "iters"]
        assert data.shape == (3, 6)
        np.testing.assert_allclose(data[:, 0], [0.0, 0.5, 1.0])
        assert data[-1, 1] == pytest.approx(0.5, abs=1e-6)
        for i in range(3):
            assert (out / f"snapshot_{i:03d}.csv").exists()

        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["exit_code"] == 0
        assert manifest["config"]["solver"]["k"] == 2.0
        assert manifest["config"]["seed"] == 1234
        assert "norms.csv" in manifest["files"]
        assert "ode_max_deviation" in manifest["metrics"]

        text = (out / "summary.txt").read_text()
        assert "✅ ode_max_deviation" in text
        assert "all checks passed" in text

    def test_reruns_are_byte_identical(self, write_config, tmp_path):
        first, second = tmp_path / "a", tmp_path / "b"
        run(write_config(solve_config(first), "a.json"))
        run(write_config(solve_config(second), "b.json"))

        assert (first / "norms.csv").read_bytes() == (second / "norms.csv").read_bytes()
        assert (first / "snapshot_002.csv").read_bytes() == (second / "snapshot_002.csv").read_bytes()

    def test_failed_check_exits_with_two(self, write_config, tmp_path):
        data = solve_config(tmp_path / "coarse")
        data["solver"] = {"t_end": 1.0, "n_snapshots": 3, "substeps": 1}

        with pytest.raises(RunError, match="ode_max_deviation") as info:
            run(write_config(data))
        assert info.value.exit_code == 2
        manifest = json.loads((tmp_path / "coarse" / "manifest.json").read_text())
        assert manifest["status"] == "failed"
        assert "❌ ode_max_deviation" in (tmp_path / "coarse" / "summary.txt").read_text()


class TestOtherWorkflows:
    def test_kernel(self, write_config, tmp_path):
        out = tmp_path / "kernel"
        data = {
            "command": "kernel",
            "grid": {"half_width": 40.0, "points_per_dim": 1024},
            "kernel": {"kind": "mixed", "times": [0.1, 1.0]},
            "output": str(out),
        }
        summary = run(write_config(data))

        assert summary.metrics["mass_t=1"] == pytest.approx(1.0, abs=1e-6)
        header, table = read_csv(out / "kernel_mixed_t0.1.csv")
        assert header == ["x", "value"]
        assert table.shape == (1024, 2)

    def test_kernel_window_violation_is_an_error(self, write_config, tmp_path):
        data = {
            "command": "kernel",
            "grid": {"half_width": 6.0, "points_per_dim": 64},
            "kernel": {"kind": "gauss", "times": [10.0]},
            "output": str(tmp_path / "k"),
        }
        with pytest.raises(RunError, match="exceeds") as info:
            run(write_config(data))
        assert info.value.exit_code == 1

    def test_verify(self, write_config, tmp_path):
        out = tmp_path / "verify"
        data = {
            "command": "verify",
            "grid": {"half_width": 20.0, "points_per_dim": 512},
            "verify": {"target": "lemma4"},
            "output": str(out),
        }
        summary = run(write_config(data))

        assert len(summary.checks) == 4
        header, table = read_csv(out / "lemma4.csv")
        assert header == ["R", "s", "error"]
        assert table.shape == (4, 3)

    def test_sweep(self, write_config, tmp_path):
        out = tmp_path / "sweep"
        data = {**solve_config(out), "command": "sweep", "sweep": {"parameter": "alpha", "values": [0.5, 1.5]}}
        summary = execute(load_config(write_config(data)))

        assert summary.exit_code == 0
        assert (out / "alpha_0.5" / "norms.csv").exists()
        assert (out / "alpha_1.5" / "manifest.json").exists()
        header, table = read_csv(out / "sweep.csv")
        assert header == ["parameter", "measured", "bound", "ratio"]
        np.testing.assert_allclose(table[:, 0], [0.5, 1.5])


class TestEntryPoint:
    def test_success(self, write_config, tmp_path, capsys):
        assert main(["run", str(write_config(solve_config(tmp_path / "cli")))]) == 0
        assert "✅ solve run complete" in capsys.readouterr().out

    def test_validation_failure(self, write_config, capsys):
        assert main(["run", str(write_config({}))]) == 1
        assert "command required" in capsys.readouterr().err

    def test_out_flag(self, write_config, tmp_path):
        data = solve_config(tmp_path / "ignored")
        assert main(["run", str(write_config(data)), "--out", str(tmp_path / "flag")]) == 0
        assert (tmp_path / "flag" / "manifest.json").exists()
        assert not (tmp_path / "ignored").exists()


class TestCsv:
    def test_roundtrip(self, tmp_path):
        columns = ([0.1, 0.2], [1.0 / 3.0, np.pi])
        header, data = read_csv(write_csv(tmp_path / "t.csv", ("a", "b"), columns))

        assert header == ["a", "b"]
        np.testing.assert_array_equal(data, np.column_stack(columns))

    def test_header_must_match_columns(self, tmp_path):
        with pytest.raises(ValueError, match="header names"):
            write_csv(tmp_path / "t.csv", ("a",), ([1.0], [2.0]))
