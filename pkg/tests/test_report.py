from __future__ import annotations

import json
from pathlib import Path

import pandas as pd
import pytest

from conftest import forward_share
from mobility_app.services import report
from mobility_app.services.errors import ReportError
from mobility_app.services.schemas import ReportConfig

HEADER = "year,r,mu,sigma,a,b,mixing_time_years,mfpt_p50_p75_years,mfpt_p50_p90_years"


def test_report_round_trips_exponents(synthetic_panel: Path, tmp_path: Path):
    out = tmp_path / "out"
    outcome = report.run_report(synthetic_panel, out)
    assert outcome.exit_code == 0
    text = (out / "report.csv").read_text(encoding="utf-8")
    assert text.splitlines()[0] == HEADER
    frame = pd.read_csv(out / "report.csv")
    assert list(frame["year"]) == [2010, 2011, 2012]
    assert list(frame["a"]) == pytest.approx([2.0, 2.5, 3.0], abs=1e-6)
    assert (frame["mixing_time_years"] > 0).all()
    assert frame.loc[0, "mfpt_p50_p75_years"] == pytest.approx(6.06061, abs=1e-5)
    assert (out / "mixing_time.svg").exists() and (out / "mfpt.svg").exists()
    assert not (out / "failures.csv").exists()
    assert not list(out.glob(".staging-*"))


def test_mfpt_chart_has_one_line_per_pair(synthetic_panel: Path, tmp_path: Path):
    out = tmp_path / "out"
    report.run_report(synthetic_panel, out)
    assert (out / "mfpt.svg").read_text(encoding="utf-8").count("<polyline") == 2
    assert (out / "mixing_time.svg").read_text(encoding="utf-8").count("<polyline") == 1


def test_report_is_byte_identical(synthetic_panel: Path, tmp_path: Path):
    first, second = tmp_path / "first", tmp_path / "second"
    report.run_report(synthetic_panel, first, ReportConfig(output_format="json"))
    report.run_report(synthetic_panel, second, ReportConfig(output_format="json", workers=3))
    for name in ["report.csv", "report.json", "mixing_time.svg", "mfpt.svg"]:
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_report_json_rows(synthetic_panel: Path, tmp_path: Path):
    out = tmp_path / "out"
    report.run_report(synthetic_panel, out, ReportConfig(output_format="json"))
    payload = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert [row["year"] for row in payload["rows"]] == [2010, 2011, 2012]
    assert payload["failures"] == []
    assert set(payload["rows"][0]["mfpt_years"]) == {"mfpt_p50_p75_years", "mfpt_p50_p90_years"}
    assert "workers" not in payload["config"]


def test_empty_panel_is_fatal_and_writes_nothing(write_panel, tmp_path: Path):
    out = tmp_path / "out"
    with pytest.raises(ReportError):
        report.run_report(write_panel([]), out)
    assert not out.exists() or not any(out.iterdir())


def test_infeasible_year_is_partial_success(write_panel, tmp_path: Path):
    path = write_panel(
        [
            f"2010,{forward_share(2.0, 0.25, 0.2)!r},150000,600000",
            "2011,0.005,150000,600000",
            f"2012,{forward_share(3.0, 0.25, 0.2)!r},150000,600000",
        ]
    )
    out = tmp_path / "out"
    outcome = report.run_report(path, out)
    assert outcome.exit_code == 2
    assert len(pd.read_csv(out / "report.csv")) == 2
    failures = pd.read_csv(out / "failures.csv")
    assert list(failures["year"]) == [2011]


def test_median_below_reset_level_is_a_year_failure(write_panel, tmp_path: Path):
    # a = 4.5 gives b < a, so the stationary median sits below x0
    path = write_panel(
        [
            f"2010,{forward_share(2.0, 0.25, 0.2)!r},150000,600000",
            f"2011,{forward_share(4.5, 0.25, 0.2)!r},150000,600000",
        ]
    )
    out = tmp_path / "out"
    outcome = report.run_report(path, out)
    assert outcome.exit_code == 2
    assert [failure.year for failure in outcome.failures] == [2011]
    assert outcome.failures[0].error == "DomainError"


def test_sigma_sweep_tables(synthetic_panel: Path, tmp_path: Path):
    out = tmp_path / "out"
    report.run_report(synthetic_panel, out, ReportConfig(sigma_sweep=(0.15, 0.25, 3)))
    sweep = pd.read_csv(out / "sigma_sweep.csv")
    assert list(sweep.columns) == ["year", "sigma", "a", "b", "mu", "share_error", "mixing_time_years"]
    assert (sweep["share_error"].abs() < 1e-6).all()
    assert sorted(sweep["sigma"].unique()) == pytest.approx([0.15, 0.2, 0.25])
    peaks = pd.read_csv(out / "sigma_sweep_peaks.csv")
    assert set(peaks["peak_year"]) <= {2010, 2011, 2012}


def test_run_simulation_payload(set_a):
    from mobility_app.services.schemas import SimConfig

    result = report.run_simulation(set_a, SimConfig(n_paths=5_000, dt=0.05, seed=3), times=[1.0])
    assert result["mfpt"]["analytic"] == pytest.approx(12.0)
    assert result["stationary"]["top_share_p01"]["analytic"] == pytest.approx(0.100965, abs=1e-6)
    assert len(result["tv"]["grid"]) == 1
    text = report.simulation_json(result)
    assert json.loads(text)["mfpt"]["x_target"] == 2.0


def test_diagnostics_are_written_for_csv_output(write_panel, tmp_path: Path):
    # share 0.049 at r = 0.25, sigma = 0.2 crosses the share curve twice
    path = write_panel(["2010,0.049,150000,600000"])
    out = tmp_path / "out"
    outcome = report.run_report(path, out)
    assert outcome.exit_code == 0
    assert outcome.rows[0].warnings
    diagnostics = pd.read_csv(out / "diagnostics.csv", keep_default_na=False)
    assert list(diagnostics.columns) == ["year", "share_error", "warnings"]
    assert list(diagnostics["year"]) == [2010]
    assert "racines" in diagnostics.loc[0, "warnings"]


def test_diagnostics_rows_follow_report_rows(synthetic_panel: Path, tmp_path: Path):
    out = tmp_path / "out"
    report.run_report(synthetic_panel, out)
    diagnostics = pd.read_csv(out / "diagnostics.csv", keep_default_na=False)
    assert list(diagnostics["year"]) == [2010, 2011, 2012]
    assert (diagnostics["share_error"].abs() < 1e-8).all()


def test_rerun_removes_stale_report_artefacts(write_panel, synthetic_panel: Path, tmp_path: Path):
    out = tmp_path / "out"
    partial = write_panel(
        [
            f"2010,{forward_share(2.0, 0.25, 0.2)!r},150000,600000",
            "2011,0.005,150000,600000",
        ],
        "partial.csv",
    )
    report.run_report(partial, out, ReportConfig(output_format="json", sigma_sweep=(0.15, 0.25, 3)))
    for name in ["failures.csv", "report.json", "sigma_sweep.csv", "sigma_sweep_peaks.csv"]:
        assert (out / name).exists()
    (out / "notes.txt").write_text("à garder\n", encoding="utf-8")

    outcome = report.run_report(synthetic_panel, out)
    assert outcome.exit_code == 0
    names = sorted(path.name for path in out.iterdir())
    assert names == ["diagnostics.csv", "mfpt.svg", "mixing_time.svg", "notes.txt", "report.csv"]


def test_write_outputs_keeps_unlisted_files(tmp_path: Path):
    (tmp_path / "failures.csv").write_text("year,error,message\n", encoding="utf-8")
    written = report.write_outputs(tmp_path, {"mixing.csv": "year\n"})
    assert [path.name for path in written] == ["mixing.csv"]
    assert (tmp_path / "failures.csv").exists()
