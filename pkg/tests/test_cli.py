import csv
import io
import json

import pytest

from omctrack.cli import EXIT_INFEASIBLE, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, full, main, sci
from omctrack.config import CONFIG_DIR_ENV, Config, ConfigError, bundled_config_names, load_config


def run_cli(*argv):
    out = io.StringIO()
    code = main(list(argv), stdout=out)
    return code, out.getvalue()


@pytest.fixture(autouse=True)
def _in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestConfig:
    def test_bundled_configs_load(self):
        names = bundled_config_names()
        assert {"table1", "table2", "table2_spread", "table3", "fig5", "fig6", "fig7", "fig8"} <= set(names)
        for name in names:
            load_config(name).experiment()

    def test_missing_field_is_named(self):
        cfg = Config.from_text("link:\n  z: 100\n")
        with pytest.raises(ConfigError, match="link.aA"):
            cfg.number("link.aA")

    def test_bad_value_names_field_and_line(self):
        cfg = Config.from_text("link:\n  z: 100\n  aA: -3\n", "bad.yaml")
        with pytest.raises(ConfigError, match=r"bad.yaml:3: field 'link.aA' must be > 0"):
            cfg.number("link.aA", positive=True)

    def test_non_numeric_and_bad_points(self):
        cfg = Config.from_text("a: text\nb: [[1, 2], [3]]\n", "c.yaml")
        with pytest.raises(ConfigError, match="c.yaml:1: field 'a' must be a number"):
            cfg.number("a")
        with pytest.raises(ConfigError, match="c.yaml:2: field 'b.1'"):
            cfg.points("b")

    def test_yaml_syntax_error_has_line(self):
        with pytest.raises(ConfigError, match="x.yaml:2"):
            Config.from_text("a: 1\nb: @x\nc: 2\n", "x.yaml")

    def test_top_level_must_be_mapping(self):
        with pytest.raises(ConfigError):
            Config.from_text("- 1\n- 2\n")

    def test_invalid_xi_is_reported_as_config_error(self):
        cfg = Config.from_text("thresholds: {eta: 1, gamma_th: 1, xi: 1.5}\n")
        with pytest.raises(ConfigError, match="thresholds.xi"):
            cfg.thresholds()

    def test_spreads(self):
        assert Config.from_text("link: {sigma_sum: 2}").spreads() == (1.0, 1.0)
        assert Config.from_text("link: {sigma_t: 0.5, sigma_p: 2}").spreads() == (0.5, 2.0)

    def test_width_grid_errors(self):
        with pytest.raises(ConfigError, match="grid is empty"):
            Config.from_text("sweep: {w_z: {start: 1, stop: 2, num: 0}}").width_grid()
        with pytest.raises(ConfigError, match="sweep.w_z.stop"):
            Config.from_text("sweep: {w_z: {start: 3, stop: 2, num: 5}}").width_grid()

    def test_config_dir_environment(self, tmp_path, monkeypatch):
        sub = tmp_path / "cfgs"
        sub.mkdir()
        (sub / "mine.yaml").write_text("link: {z: 7}\n")
        monkeypatch.setenv(CONFIG_DIR_ENV, str(sub))
        assert load_config("mine").number("link.z") == 7
        with pytest.raises(ConfigError, match="not found"):
            load_config("nowhere")


def test_number_formats():
    assert sci(3.93e-2) == "3.93e-2"
    assert sci(4.7198e-2) == "4.72e-2"
    assert float(full(0.1 + 0.2)) == 0.1 + 0.2


class TestDesign:
    def test_table1_report(self):
        code, out = run_cli("design", "--config", "table1")
        assert code == EXIT_OK
        assert "0 < w_z < 6.55 m" in out
        assert "3.93 < w_z < 4.72" in out
        assert "3.93e-2 < phi < 4.72e-2" in out

    def test_json(self):
        code, out = run_cli("design", "--config", "table1", "--format", "json")
        data = json.loads(out)
        assert code == EXIT_OK and data["feasible"]
        assert data["divergence"] == pytest.approx([3.93e-2, 4.72e-2], abs=1e-4)

    def test_infeasible_prints_minimum_outage(self, tmp_path):
        path = write(tmp_path, "hard.yaml", "link: {z: 100, aA: 80, sigma_sum: 2}\n"
                                            "thresholds: {eta: 1, gamma_th: 1, xi: 0.05}\n")
        code, out = run_cli("design", "--config", path)
        assert code == EXIT_INFEASIBLE
        assert "INFEASIBLE" in out and "Minimum attainable expected outage is 0.0961358" in out

    def test_missing_field(self, tmp_path, capsys):
        path = write(tmp_path, "partial.yaml", "link: {z: 100, sigma_sum: 2}\n")
        code, _ = run_cli("design", "--config", path)
        assert code == EXIT_USAGE
        assert "link.aA" in capsys.readouterr().err

    def test_writes_manifest(self, tmp_path):
        run_cli("design", "--config", "table1")
        manifest = json.loads((tmp_path / "omctrack-design.manifest.json").read_text())
        assert manifest["command"] == "design"
        assert manifest["config"]["link"]["aA"] == 80
        assert manifest["exit_code"] == 0 and "version" in manifest


class TestSweep:
    def test_fig7_csv(self, tmp_path):
        out = tmp_path / "fig7.csv"
        code, _ = run_cli("sweep", "--config", "fig7", "--out", str(out))
        assert code == EXIT_OK
        raw = out.read_bytes()
        assert raw.startswith(b"w_z,value,series,method\r\n")
        rows = list(csv.DictReader(io.StringIO(raw.decode())))
        assert {r["series"] for r in rows} == {"aA=40", "aA=80", "aA=160"}
        assert {r["method"] for r in rows} == {"closed_form", "numeric_oracle"}
        pairs = {}
        for r in rows:
            pairs.setdefault((r["series"], r["w_z"]), {})[r["method"]] = float(r["value"])
        for v in pairs.values():
            assert abs(v["closed_form"] - v["numeric_oracle"]) <= 1e-6
        assert (tmp_path / "fig7.csv.manifest.json").exists()

    def test_full_precision_fields(self, tmp_path):
        out = tmp_path / "fig5.csv"
        run_cli("sweep", "--config", "fig5", "--no-oracle", "--out", str(out))
        row = next(csv.DictReader(out.open(newline="")))
        assert len(row["value"].replace(".", "").lstrip("0")) >= 15

    def test_empty_grid(self, tmp_path):
        path = write(tmp_path, "empty.yaml", "link: {z: 100, aA: 80, sigma_sum: 2}\n"
                                             "thresholds: {eta: 1, gamma_th: 1, xi: 0.1}\n"
                                             "sweep: {curve: avg_power, w_z: {start: 1, stop: 2, num: 0}}\n")
        assert run_cli("sweep", "--config", path)[0] == EXIT_USAGE


class TestTrack:
    def test_noiseless_grid_trial(self, tmp_path):
        text = open(load_config("table2").source).read().replace("sigma_n: 0.01", "sigma_n: 0")
        path = write(tmp_path, "quiet.yaml", text)
        code, out = run_cli("track", "--config", path, "--algorithm", "mle-grid", "--trials", "1",
                            "--format", "json")
        data = json.loads(out)
        assert code == EXIT_OK and data["mean_radial_error"] < 1e-12

    def test_per_trial_csv_and_rerun(self, tmp_path):
        out = tmp_path / "t.csv"
        code, text = run_cli("track", "--config", "table3", "--algorithm", "multilateration",
                             "--target", "2", "-2", "--trials", "200", "--seed", "5", "--out", str(out))
        assert code == EXIT_OK and "mean radial error" in text
        rows = list(csv.reader(out.open(newline="")))
        assert rows[0] == ["trial", "est_x", "est_y", "error"] and len(rows) == 201
        manifest = tmp_path / "t.csv.manifest.json"
        assert json.loads(manifest.read_text())["seed"] == 5
        replay = tmp_path / "replay.csv"
        assert run_cli("rerun", str(manifest), "--out", str(replay))[0] == EXIT_OK
        assert replay.read_bytes() == out.read_bytes()

    def test_unknown_algorithm(self):
        assert run_cli("track", "--config", "table3", "--algorithm", "kalman")[0] == EXIT_USAGE

    def test_missing_target(self):
        code, _ = run_cli("track", "--config", "table3", "--algorithm", "multilateration")
        assert code == EXIT_USAGE

    def test_collinear_beacons(self, tmp_path):
        path = write(tmp_path, "line.yaml", "link: {z: 100, aA: 80}\n"
                                            "beacons: {w_z: 4, centers: [[0, 0], [1, 1], [2, 2]]}\n"
                                            "noise: {sigma_n: 0.01}\n")
        code, _ = run_cli("track", "--config", path, "--algorithm", "multilateration",
                          "--target", "0", "0")
        assert code == EXIT_NUMERIC


class TestErrorBound:
    def test_table5(self):
        code, out = run_cli("error-bound", "--config", "table3")
        assert code == EXIT_OK
        for value in ("0.0114", "0.0118", "0.0130", "0.0132", "0.0232", "0.0120"):
            assert value in out

    def test_doubled_noise(self, tmp_path):
        text = open(load_config("table3").source).read().replace("sigma_n: 0.01", "sigma_n: 0.02")
        path = write(tmp_path, "loud.yaml", text)
        code, out = run_cli("error-bound", "--config", path, "--points", "0,0", "--format", "json")
        assert code == EXIT_OK
        assert json.loads(out)[0]["error"] == pytest.approx(0.0228, abs=1e-4)

    def test_rank_error_per_point(self, tmp_path):
        path = write(tmp_path, "line.yaml", "link: {z: 100, aA: 80}\n"
                                            "beacons: {w_z: 4, centers: [[-1, 0], [0, 0], [1, 0]]}\n"
                                            "noise: {sigma_n: 0.01}\n")
        code, out = run_cli("error-bound", "--config", path, "--points", "0,0", "0.5,0", "0,1")
        assert code == EXIT_NUMERIC
        assert out.count("rank error") == 2
        assert "(0, 1)" in out and out.count("\n") == 5

    def test_bad_point_syntax(self):
        assert run_cli("error-bound", "--config", "table3", "--points", "1;2")[0] == EXIT_USAGE


class TestSimulate:
    def test_summary_and_csv(self, tmp_path):
        out = tmp_path / "traj.csv"
        code, text = run_cli("simulate", "--config", "table1", "--steps", "100", "--out", str(out))
        assert code == EXIT_OK and "outage rate" in text
        rows = list(csv.reader(out.open(newline="")))
        assert rows[0][0] == "interval" and len(rows) == 101

    def test_rerun_is_bitwise(self, tmp_path):
        out = tmp_path / "a.csv"
        run_cli("simulate", "--config", "table1", "--steps", "50", "--seed", "9", "--out", str(out))
        run_cli("rerun", str(tmp_path / "a.csv.manifest.json"), "--out", str(tmp_path / "b.csv"))
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_usage_errors():
    assert run_cli()[0] == EXIT_USAGE
    assert run_cli("design")[0] == EXIT_USAGE
    assert run_cli("design", "--config", "no-such-config")[0] == EXIT_USAGE
