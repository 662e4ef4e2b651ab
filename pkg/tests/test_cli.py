"""CLI tests: config loading, file outputs, determinism, exit codes."""

import json
import os

import numpy as np
import pytest

from aerosurvey import cli
from aerosurvey.cli import ConfigError, default_config, load_config, main, write_grid
from aerosurvey.planner import PlannerKind
from aerosurvey.spatial import GridSpec


def write_config(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


class TestConfigLoading:
    def test_empty_object_gives_default_scenario(self, tmp_path):
        cfg = load_config(write_config(tmp_path, {}))
        assert cfg.grid.rows == 30
        assert cfg.grid.cols == 25
        assert cfg.grid.spacing == 10.0
        assert cfg.grid.altitude == 20.0
        assert cfg.channel.frequency == 2.4e9
        assert cfg.channel.shadow_var == 9.0
        assert cfg.channel.corr_distance == 50.0
        assert cfg.channel.fading_var == 0.0
        assert cfg.channel.noise_var == 0.0
        assert cfg.num_transmitters == 2
        assert cfg.tx_power_dbm == 10.0
        assert cfg.r_min == -65.0
        assert cfg.measurement_spacing == 5.0
        assert cfg.planner is PlannerKind.MIN_COST
        assert cfg.aggregation == "max"
        assert cfg.target == "service"
        assert cfg.max_measurements == 300
        assert cfg.speed == 5.0
        assert cfg.seed == 0

    def test_unknown_key_rejected_by_name(self, tmp_path):
        path = write_config(tmp_path, {"speeed": 4.0})
        with pytest.raises(ConfigError, match="speeed"):
            load_config(path)

    def test_negative_spacing_names_field(self, tmp_path):
        path = write_config(tmp_path, {"spacing": -1})
        with pytest.raises(ConfigError, match="spacing"):
            load_config(path)

    def test_malformed_json_reports_line(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{\n  'single': 1\n}")
        with pytest.raises(ConfigError, match="line 2"):
            load_config(str(path))

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            load_config("/nonexistent/config.json")

    def test_non_object_root_rejected(self, tmp_path):
        path = tmp_path / "arr.json"
        path.write_text("[1, 2]")
        with pytest.raises(ConfigError, match="object"):
            load_config(str(path))

    def test_explicit_transmitters(self, tmp_path):
        path = write_config(
            tmp_path,
            {
                "transmitters": [
                    {"position": [10.0, 20.0, 10.0], "power_dbm": 12.0},
                    {"position": [200.0, 100.0, 10.0]},
                ]
            },
        )
        cfg = load_config(path)
        assert cfg.channel.num_transmitters == 2
        assert cfg.channel.transmitters[0].power_dbm == 12.0
        # unset power falls back to the scenario transmit power
        assert cfg.channel.transmitters[1].power_dbm == 10.0

    def test_bad_transmitter_entry(self, tmp_path):
        path = write_config(tmp_path, {"transmitters": [{"position": [1, 2]}]})
        with pytest.raises(ConfigError, match="transmitters"):
            load_config(path)

    def test_stop_criterion_required(self, tmp_path):
        path = write_config(
            tmp_path, {"max_measurements": None, "uncertainty_threshold": None}
        )
        with pytest.raises(ConfigError):
            load_config(path)

    def test_default_config_override_validation(self):
        with pytest.raises(ConfigError, match="planner"):
            default_config({"planner": "zigzag"})
        with pytest.raises(ConfigError, match="seed"):
            default_config({"seed": -1})
        with pytest.raises(ConfigError, match="rows"):
            default_config({"rows": 0})


class TestWriteGrid:
    def test_csv_layout_and_digits(self, tmp_path):
        g = GridSpec(rows=2, cols=2, spacing=10.0)
        path = str(tmp_path / "field.csv")
        write_grid(np.array([0.0, 1.0, 2.0, 3.0]), g, path, "csv")
        lines = open(path).read().strip().splitlines()
        assert lines == ["0,1", "2,3"]

    def test_csv_roundtrip_six_significant_digits(self, tmp_path):
        g = GridSpec(rows=3, cols=4, spacing=10.0)
        vals = np.random.default_rng(0).normal(-60.0, 10.0, 12)
        path = str(tmp_path / "field.csv")
        write_grid(vals, g, path, "csv")
        back = np.loadtxt(path, delimiter=",").ravel()
        np.testing.assert_allclose(back, vals, rtol=1e-5)

    def test_csv_comment_header(self, tmp_path):
        g = GridSpec(rows=1, cols=2, spacing=10.0)
        path = str(tmp_path / "field.csv")
        write_grid(np.array([1.0, 2.0]), g, path, "csv", comment="power map (dBm)")
        first = open(path).readline()
        assert first.startswith("# ")

    def test_pgm_header_and_scaling(self, tmp_path):
        g = GridSpec(rows=2, cols=3, spacing=10.0)
        path = str(tmp_path / "field.pgm")
        write_grid(np.array([0.0, 1.0, 2.0, 3.0, 4.0, 5.0]), g, path, "pgm")
        lines = open(path).read().split("\n")
        assert lines[0] == "P2"
        assert lines[1] == "3 2"
        assert lines[2] == "255"
        pixels = [int(v) for row in lines[3:5] for v in row.split()]
        assert pixels[0] == 0 and pixels[-1] == 255

    def test_constant_field_pgm_is_zeros(self, tmp_path):
        g = GridSpec(rows=2, cols=2, spacing=10.0)
        path = str(tmp_path / "const.pgm")
        write_grid(np.full(4, 7.0), g, path, "pgm")
        body = open(path).read().split("\n")[3:]
        vals = [int(v) for row in body for v in row.split()]
        assert vals == [0, 0, 0, 0]

    def test_length_mismatch_rejected(self, tmp_path):
        g = GridSpec(rows=2, cols=2, spacing=10.0)
        with pytest.raises(ValueError):
            write_grid(np.zeros(3), g, str(tmp_path / "x.csv"), "csv")

    def test_unknown_format_rejected(self, tmp_path):
        g = GridSpec(rows=2, cols=2, spacing=10.0)
        with pytest.raises(ValueError):
            write_grid(np.zeros(4), g, str(tmp_path / "x.bmp"), "bmp")

    def test_no_partial_files_left_behind(self, tmp_path):
        g = GridSpec(rows=2, cols=2, spacing=10.0)
        path = str(tmp_path / "a.csv")
        write_grid(np.zeros(4), g, path, "csv")
        leftovers = [f for f in os.listdir(tmp_path) if f.endswith(".part")]
        assert leftovers == []


SMALL = {
    "rows": 6,
    "cols": 6,
    "max_measurements": 12,
    "noise_var": 0.25,
}


class TestSurveyCommand:
    def test_writes_metrics_trajectory_and_exits_zero(self, tmp_path, capsys):
        cfg = write_config(tmp_path, SMALL)
        out = str(tmp_path / "out")
        code = main(["survey", "--config", cfg, "--out-dir", out])
        assert code == 0
        header = open(os.path.join(out, "metrics.csv")).readline().strip()
        assert header == "run,t,meters,total_unc_power,total_unc_service,service_error_rate"
        tra = open(os.path.join(out, "trajectory.csv")).read().strip().splitlines()
        assert tra[0] == "t,x,y"
        assert len(tra) == 14  # header + 13 measurements

    def test_snapshot_zero_writes_grid_maps(self, tmp_path):
        cfg = write_config(tmp_path, SMALL)
        out = str(tmp_path / "out")
        code = main(
            ["survey", "--config", cfg, "--out-dir", out, "--snapshots", "0"]
        )
        assert code == 0
        names = sorted(os.listdir(out))
        assert "snapshot_t0000_uncertainty.csv" in names
        assert "snapshot_t0000_uncertainty.pgm" in names
        assert "snapshot_t0000_true_power_tx0.csv" in names
        assert "snapshot_t0000_posterior_mean_tx1.pgm" in names
        assert "snapshot_t0000_service_prob_tx0.csv" in names

    def test_missing_config_file_exits_one(self, tmp_path, capsys):
        code = main(
            ["survey", "--config", "/no/such/file.json", "--out-dir", str(tmp_path)]
        )
        assert code == 1
        assert "config error" in capsys.readouterr().err

    def test_unknown_config_key_exits_one(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"bogus": 1})
        code = main(["survey", "--config", cfg, "--out-dir", str(tmp_path / "o")])
        assert code == 1
        assert "bogus" in capsys.readouterr().err

    def test_runtime_failure_exits_two(self, tmp_path, capsys):
        cfg = write_config(tmp_path, SMALL)
        blocker = tmp_path / "blocked"
        blocker.write_text("i am a file")
        code = main(["survey", "--config", cfg, "--out-dir", str(blocker)])
        assert code == 2

    def test_seed_and_planner_overrides(self, tmp_path):
        cfg = write_config(tmp_path, SMALL)
        out_a = str(tmp_path / "a")
        out_b = str(tmp_path / "b")
        assert main(["survey", "--config", cfg, "--out-dir", out_a, "--seed", "5"]) == 0
        assert (
            main(
                [
                    "survey",
                    "--config",
                    cfg,
                    "--out-dir",
                    out_b,
                    "--seed",
                    "5",
                    "--planner",
                    "spiral",
                ]
            )
            == 0
        )
        a = open(os.path.join(out_a, "trajectory.csv")).read()
        b = open(os.path.join(out_b, "trajectory.csv")).read()
        assert a != b

    def test_bad_planner_override_exits_one(self, tmp_path, capsys):
        cfg = write_config(tmp_path, SMALL)
        code = main(
            [
                "survey",
                "--config",
                cfg,
                "--out-dir",
                str(tmp_path / "o"),
                "--planner",
                "zigzag",
            ]
        )
        assert code == 1


class TestMonteCarloCommand:
    def test_one_csv_per_planner(self, tmp_path):
        cfg = write_config(tmp_path, SMALL)
        out = str(tmp_path / "mc")
        code = main(
            [
                "montecarlo",
                "--config",
                cfg,
                "--runs",
                "2",
                "--planners",
                "min_cost,grid,spiral,random",
                "--out-dir",
                out,
            ]
        )
        assert code == 0
        names = sorted(os.listdir(out))
        assert names == [
            "montecarlo_grid.csv",
            "montecarlo_min_cost.csv",
            "montecarlo_random.csv",
            "montecarlo_spiral.csv",
        ]

    def test_header_layout(self, tmp_path):
        cfg = write_config(tmp_path, SMALL)
        out = str(tmp_path / "mc")
        main(
            ["montecarlo", "--config", cfg, "--runs", "2", "--planners", "grid", "--out-dir", out]
        )
        header = open(os.path.join(out, "montecarlo_grid.csv")).readline().strip()
        assert header == (
            "t,mean_meters,std_meters,mean_total_unc_power,std_total_unc_power,"
            "mean_total_unc_service,std_total_unc_service,"
            "mean_service_error_rate,std_service_error_rate"
        )

    def test_single_run_has_zero_std(self, tmp_path):
        cfg = write_config(tmp_path, SMALL)
        out = str(tmp_path / "mc")
        main(
            ["montecarlo", "--config", cfg, "--runs", "1", "--planners", "grid", "--out-dir", out]
        )
        rows = np.loadtxt(
            os.path.join(out, "montecarlo_grid.csv"), delimiter=",", skiprows=1
        )
        # std columns: 2, 4, 6, 8
        np.testing.assert_array_equal(rows[:, [2, 4, 6, 8]], 0.0)

    def test_identical_invocations_are_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path, SMALL)
        out_a = str(tmp_path / "a")
        out_b = str(tmp_path / "b")
        args = ["montecarlo", "--config", cfg, "--runs", "3", "--planners", "min_cost,random"]
        assert main(args + ["--out-dir", out_a]) == 0
        assert main(args + ["--out-dir", out_b]) == 0
        for name in ("montecarlo_min_cost.csv", "montecarlo_random.csv"):
            a = open(os.path.join(out_a, name), "rb").read()
            b = open(os.path.join(out_b, name), "rb").read()
            assert a == b

    def test_bad_runs_exits_one(self, tmp_path, capsys):
        cfg = write_config(tmp_path, SMALL)
        code = main(
            ["montecarlo", "--config", cfg, "--runs", "0", "--out-dir", str(tmp_path / "o")]
        )
        assert code == 1

    def test_defaults_to_config_planner(self, tmp_path):
        cfg = write_config(tmp_path, dict(SMALL, planner="spiral"))
        out = str(tmp_path / "mc")
        code = main(["montecarlo", "--config", cfg, "--runs", "1", "--out-dir", out])
        assert code == 0
        assert os.listdir(out) == ["montecarlo_spiral.csv"]
