import subprocess
import sys

import numpy as np
import pytest

from stockflow.cli import main
from stockflow.fixtures import calibration_fixture
from stockflow.oilmarket import data_path
from stockflow.tables import (
    CsvError,
    compare_series,
    ingest_csv,
    read_table,
    write_daily_csv,
    write_quarterly_csv,
)


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


# ---------------------------------------------------------------------------
# Ingestion


def test_two_row_daily_file(tmp_path):
    s = ingest_csv(_write(tmp_path, "d.csv", "2011-12-30,99.68\n2012-01-03,102.96"), "daily-price")
    assert len(s) == 2 and s.labels == ("2011-12-30", "2012-01-03")


def test_out_of_order_dates_name_row(tmp_path):
    path = _write(tmp_path, "d.csv", "date,price\n2012-01-03,1\n2011-12-30,2\n")
    with pytest.raises(CsvError, match="row 3"):
        ingest_csv(path, "daily-price")


def test_empty_file_is_distinct(tmp_path):
    with pytest.raises(CsvError, match="empty input"):
        ingest_csv(_write(tmp_path, "e.csv", ""), "daily-price")
    with pytest.raises(CsvError, match="no data rows"):
        ingest_csv(_write(tmp_path, "h.csv", "date,price\n"), "daily-price")


@pytest.mark.parametrize("body, fragment", [
    ("2012-01-03,abc\n", "row 2: column 'price'"),
    ("2012-01-03,\n", "row 2: missing value"),
    ("2012-01-03,1,2\n", "row 2: expected 2 fields"),
    ("2012-13-03,1\n", "bad ISO-8601 date"),
    ("2012-01-03,nan\n", "not finite"),
])
def test_malformed_rows(tmp_path, body, fragment):
    with pytest.raises(CsvError, match=fragment):
        ingest_csv(_write(tmp_path, "d.csv", "date,price\n" + body), "daily-price")


def test_quarter_gap_is_an_error(tmp_path):
    path = _write(tmp_path, "q.csv", "quarter,demand,supply,price\n2010Q1,1,1,1\n2010Q3,1,1,1\n")
    with pytest.raises(CsvError, match="row 3: gap"):
        ingest_csv(path, "quarterly-sdp")


def test_round_trips(tmp_path):
    q = calibration_fixture()
    write_quarterly_csv(q, tmp_path / "q.csv")
    back = ingest_csv(tmp_path / "q.csv", "quarterly-sdp")
    assert back.labels == q.labels
    for name in ("demand", "supply", "price"):
        assert np.array_equal(getattr(back, name), getattr(q, name))
    d = ingest_csv(_write(tmp_path, "d.csv", "2011-12-30,99.68\n2012-01-03,102.96\n"), "daily-price")
    write_daily_csv(d, tmp_path / "d2.csv")
    again = ingest_csv(tmp_path / "d2.csv", "daily-price")
    assert again == d and again.labels == d.labels


# ---------------------------------------------------------------------------
# Comparison


def test_compare_identical():
    t = np.arange(10.0)
    r = compare_series(t, t ** 2, t, t ** 2)
    assert r.rmse == 0 and r.max_abs_error == 0 and r.trend_sign_agreement == 1.0


def test_compare_offset():
    t = np.arange(10.0)
    r = compare_series(t, t + 1, t, t)
    assert r.rmse == 1.0 and r.trend_sign_agreement == 1.0


def test_compare_mirrored():
    t = np.arange(10.0)
    r = compare_series(t, -t, t, t)
    assert r.trend_sign_agreement == 0.0


def test_compare_nearest_preceding_resampling():
    sim_t = np.array([0.0, 0.5, 1.0, 1.5, 2.0])
    r = compare_series(sim_t, np.array([1.0, 1.0, 2.0, 2.0, 3.0]), np.array([0.0, 1.0, 2.0]), np.array([1.0, 2.0, 3.0]))
    assert r.rmse == 0 and r.samples == 5 and r.intervals == 2


def test_compare_no_overlap():
    with pytest.raises(CsvError, match="do not overlap"):
        compare_series(np.arange(3.0), np.zeros(3), np.arange(3.0) + 10, np.zeros(3))


# ---------------------------------------------------------------------------
# Commands


def test_run_scenario_a_first_price_is_100(tmp_path):
    out = tmp_path / "a.csv"
    rc = main(["run", "--scenario", str(data_path("scenario_a.sfs")), "--calibration",
               str(data_path("calibration_fixture.csv")), "--out", str(out)])
    assert rc == 0
    table = read_table(out)
    assert table.header[0] == "t" and "OilPrice" in table.header
    assert table.numeric("OilPrice")[0] == 100.0
    assert len(table.numeric("t")) == 43 * 16 + 1


def test_unknown_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["run", "--bogus"])
    assert info.value.code == 2
    assert "usage:" in capsys.readouterr().err


def test_runtime_error_exit_and_diagnostic(tmp_path, capsys):
    model = _write(tmp_path, "m.sfm", "stock y = 1 { in: f }\nflow f = 1 / (2 - t)\n")
    rc = main(["run", str(model), "--horizon", "4", "--dt", "0.5", "--integrator", "euler"])
    err = capsys.readouterr().err
    assert rc == 1 and "division by zero in 'f' at step 4 (t=2)" in err
    # RK4's last stage of the step from t=1.5 already evaluates at t=2
    assert main(["run", str(model), "--horizon", "4", "--dt", "0.5"]) == 1
    assert "at step 3 (t=1.5)" in capsys.readouterr().err


def test_parse_error_reports_location(tmp_path, capsys):
    model = _write(tmp_path, "m.sfm", "flow f = 1/\n")
    assert main(["run", str(model), "--horizon", "1"]) == 1
    assert f"{model}:1:12: error" in capsys.readouterr().err


def test_missing_file(capsys):
    assert main(["stats", "/nonexistent/file.csv"]) == 1
    assert "No such file" in capsys.readouterr().err


def test_calibrate_reports_coefficients(tmp_path):
    out = tmp_path / "report.csv"
    assert main(["calibrate", str(data_path("calibration_fixture.csv")), "--out", str(out)]) == 0
    values = dict(line.split(",", 1) for line in out.read_text().splitlines()[:8] if "," in line)
    assert float(values["alpha1"]) == pytest.approx(-50, abs=1e-8)
    assert float(values["beta1"]) == pytest.approx(51.45, abs=1e-8)
    assert "r_squared" in values and "residual_std" in values
    assert "Price Change Rate" in out.read_text()


def test_calibrate_two_rows(tmp_path, capsys):
    path = _write(tmp_path, "q.csv", "quarter,demand,supply,price\n2010Q1,1,1,1\n2010Q2,1,1,2\n")
    assert main(["calibrate", str(path)]) == 1
    assert "need >= 3 quarters" in capsys.readouterr().err


def test_plot_polylines_and_determinism(tmp_path):
    csv = _write(tmp_path, "x.csv", "t,a,b\n0,1,2\n1,3,1\n")
    one, two = tmp_path / "1.svg", tmp_path / "2.svg"
    assert main(["plot", str(csv), "--columns", "a", "--out", str(one)]) == 0
    svg = one.read_text()
    assert svg.count("<polyline") == 1
    points = svg.split('points="')[1].split('"')[0].split()
    assert len(points) == 2
    assert main(["plot", str(csv), "--columns", "a,b", "--out", str(two)]) == 0
    svg2 = two.read_text()
    assert svg2.count("<polyline") == 2 and svg2.split('class="legend"')[1].count("<text") == 2
    main(["plot", str(csv), "--columns", "a,b", "--out", str(one)])
    assert one.read_bytes() == two.read_bytes()


def test_plot_unknown_column(tmp_path, capsys):
    csv = _write(tmp_path, "x.csv", "t,a\n0,1\n1,3\n")
    assert main(["plot", str(csv), "--columns", "zz"]) == 1
    assert "no value column 'zz'" in capsys.readouterr().err


def test_golden_pipeline(tmp_path):
    """run -> compare -> plot on each other's files, no edits in between."""
    rk4, euler = tmp_path / "rk4.csv", tmp_path / "euler.csv"
    scen = str(data_path("scenario_a.sfs"))
    assert main(["run", "--scenario", scen, "--vars", "OilPrice", "--out", str(rk4)]) == 0
    assert main(["run", "--scenario", scen, "--vars", "OilPrice", "--integrator", "euler", "--out", str(euler)]) == 0
    report = tmp_path / "cmp.csv"
    assert main(["compare", str(rk4), str(euler), "--out", str(report)]) == 0
    metrics = dict(line.split(",") for line in report.read_text().splitlines()[1:])
    assert float(metrics["rmse"]) < 1e-3 and float(metrics["trend_sign_agreement"]) == 1.0
    svg = tmp_path / "a.svg"
    assert main(["plot", str(rk4), "--out", str(svg), "--title", "Scenario A"]) == 0
    assert svg.read_text().count("<polyline") == 1


def test_compare_against_dated_reference(tmp_path):
    sim = _write(tmp_path, "sim.csv", "t,OilPrice\n0,100\n1,101\n2,102\n3,103\n4,104\n")
    ref = _write(tmp_path, "ref.csv", "date,price\n2011-12-30,100\n2012-01-03,104\n")
    out = tmp_path / "r.csv"
    assert main(["compare", str(sim), str(ref), "--out", str(out)]) == 0
    metrics = dict(line.split(",") for line in out.read_text().splitlines()[1:])
    # reference held at 100 until day 4
    assert float(metrics["max_abs_error"]) == 3.0 and metrics["samples"] == "5"


def test_stats_command(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["stats", str(data_path("calibration_fixture.csv")), "--out", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert rows[0].startswith("statistic,Total Demand") and rows[3].startswith("Mean,")


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "stockflow", "compare", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "nearest-preceding" in out.stdout


def test_bundled_fixture_names_resolve(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["run", "--scenario", "scenario_a.sfs", "--calibration", "calibration_fixture.csv",
                 "--vars", "OilPrice", "--out", "a.csv"]) == 0
    assert read_table(tmp_path / "a.csv").numeric("OilPrice")[0] == 100.0
    assert main(["calibrate", "calibration_fixture.csv", "--out", "r.csv"]) == 0
