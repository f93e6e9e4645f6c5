"""Pipeline annuel complet : calibration, temps de mélange, MFPT, fichiers de sortie."""
from __future__ import annotations

import json
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import ValidationError
from scipy import stats

from . import calibration, charts, data_ingest, mfpt, mixing, model_core, montecarlo
from .errors import MobilityError, ParseError, ReportError
from .schemas import (
    MixingConfig,
    MobilityReportRow,
    ModelParams,
    PanelCalibration,
    ReportConfig,
    SimConfig,
    YearCalibration,
    YearFailure,
)
from .utils import format_failures, mfpt_column, round_sig

REPORT_COLUMNS = ["year", "r", "mu", "sigma", "a", "b", "mixing_time_years"]
PARAMETER_COLUMNS = ["year", "r", "mu", "sigma", "a", "b", "share_error", "n_roots"]
FLOAT_FORMAT = "%.6g"
SWEEP_COLUMNS = ["year", "sigma", "a", "b", "mu", "share_error", "mixing_time_years"]
DIAGNOSTIC_COLUMNS = ["year", "share_error", "warnings"]
REPORT_ARTEFACTS = (
    "report.csv",
    "report.json",
    "diagnostics.csv",
    "failures.csv",
    "mixing_time.svg",
    "mfpt.svg",
    "sigma_sweep.csv",
    "sigma_sweep_peaks.csv",
)


@dataclass
class ReportOutcome:
    rows: List[MobilityReportRow] = field(default_factory=list)
    failures: List[YearFailure] = field(default_factory=list)
    files: List[Path] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return 2 if self.failures else 0


def frame_to_csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def _rounded(value: Any) -> Any:
    if isinstance(value, float):
        return round_sig(value)
    if isinstance(value, dict):
        return {key: _rounded(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_rounded(item) for item in value]
    return value


def to_json(payload: Any) -> str:
    return json.dumps(_rounded(payload), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_outputs(output_dir: Path | str, files: Dict[str, str], stale: Iterable[str] = ()) -> List[Path]:
    """Prépare chaque fichier dans un dossier temporaire puis les met en place ensemble.

    Les noms de `stale` absents de `files` sont supprimés du dossier de sortie,
    pour qu'une relance ne laisse pas d'artefact d'un run précédent.
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []
    with tempfile.TemporaryDirectory(dir=output_dir, prefix=".staging-") as staging:
        for name, content in files.items():
            (Path(staging) / name).write_text(content, encoding="utf-8", newline="\n")
        for name in files:
            target = output_dir / name
            os.replace(Path(staging) / name, target)
            written.append(target)
    for name in stale:
        leftover = output_dir / name
        if name not in files and leftover.exists():
            leftover.unlink()
            logger.debug("Artefact obsolète supprimé : {}", leftover)
    return written


def build_row(calibrated: YearCalibration, config: ReportConfig) -> MobilityReportRow:
    params = calibrated.params
    coeffs = model_core.derive_coefficients(params)
    mixing_years = mixing.mixing_time(params, config.mixing)
    mfpt_years = {
        mfpt_column(start, target): mfpt.mfpt_percentiles(params, start, target)
        for start, target in config.percentile_pairs
    }
    logger.info("Année {} : temps de mélange {:.4g} ans.", calibrated.year, mixing_years)
    return MobilityReportRow(
        year=calibrated.year,
        r=params.r,
        mu=params.mu,
        sigma=params.sigma,
        a=coeffs.a,
        b=coeffs.b,
        mixing_time_years=mixing_years,
        mfpt_years=mfpt_years,
        share_error=calibrated.diagnostics.share_error,
        warnings=list(calibrated.diagnostics.warnings),
    )


def _row_or_failure(calibrated: YearCalibration, config: ReportConfig) -> MobilityReportRow | YearFailure:
    try:
        return build_row(calibrated, config)
    except (MobilityError, ValidationError) as exc:
        logger.warning("Année {} ignorée : {}", calibrated.year, exc)
        return YearFailure(year=calibrated.year, error=type(exc).__name__, message=str(exc))


def compute_rows(calibrated: PanelCalibration, config: ReportConfig) -> Tuple[List[MobilityReportRow], List[YearFailure]]:
    if config.workers > 1 and len(calibrated.rows) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as executor:
            outcomes = list(executor.map(lambda row: _row_or_failure(row, config), calibrated.rows))
    else:
        outcomes = [_row_or_failure(row, config) for row in calibrated.rows]
    rows = [outcome for outcome in outcomes if isinstance(outcome, MobilityReportRow)]
    failures = list(calibrated.failures) + [outcome for outcome in outcomes if isinstance(outcome, YearFailure)]
    return rows, sorted(failures, key=lambda failure: failure.year)


def report_frame(rows: Sequence[MobilityReportRow], pairs: Sequence[Tuple[float, float]]) -> pd.DataFrame:
    columns = REPORT_COLUMNS + [mfpt_column(start, target) for start, target in pairs]
    records = []
    for row in rows:
        record: Dict[str, Any] = {column: getattr(row, column) for column in REPORT_COLUMNS}
        record.update(row.mfpt_years)
        records.append(record)
    return pd.DataFrame.from_records(records, columns=columns)


def failures_frame(failures: Sequence[YearFailure]) -> pd.DataFrame:
    return pd.DataFrame.from_records(
        [failure.model_dump() for failure in failures], columns=["year", "error", "message"]
    )


def diagnostics_frame(rows: Sequence[MobilityReportRow]) -> pd.DataFrame:
    records = [
        {"year": row.year, "share_error": row.share_error, "warnings": " | ".join(row.warnings)}
        for row in rows
    ]
    return pd.DataFrame.from_records(records, columns=DIAGNOSTIC_COLUMNS)


def sweep_tables(panel_rows: Sequence[Any], config: ReportConfig) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Sensibilité de la série annuelle à la volatilité retenue pour l'identification."""
    low, high, count = config.sigma_sweep  # type: ignore[misc]
    sigmas = calibration.sigma_grid(low, high, count)
    records = []
    for obs, sigma, outcome in calibration.sigma_sweep(panel_rows, sigmas, config.calibration):
        if isinstance(outcome, YearFailure):
            continue
        try:
            mixing_years = mixing.mixing_time(outcome.params, config.mixing)
        except MobilityError as exc:
            logger.warning("Balayage sigma={:.4g}, année {} ignorée : {}", sigma, obs.year, exc)
            continue
        coeffs = model_core.derive_coefficients(outcome.params)
        records.append(
            {
                "year": obs.year,
                "sigma": sigma,
                "a": coeffs.a,
                "b": coeffs.b,
                "mu": outcome.params.mu,
                "share_error": outcome.diagnostics.share_error,
                "mixing_time_years": mixing_years,
            }
        )
    sweep = pd.DataFrame.from_records(records, columns=SWEEP_COLUMNS)
    peaks = []
    for sigma, group in sweep.groupby("sigma", sort=True):
        best = group.loc[group["mixing_time_years"].idxmax()]
        peaks.append(
            {"sigma": sigma, "peak_year": int(best["year"]), "peak_mixing_time_years": best["mixing_time_years"]}
        )
    peak_frame = pd.DataFrame.from_records(peaks, columns=["sigma", "peak_year", "peak_mixing_time_years"])
    return sweep, peak_frame


def run_report(input_path: Path | str, output_dir: Path | str, config: Optional[ReportConfig] = None) -> ReportOutcome:
    config = config or ReportConfig()
    panel = data_ingest.load_panel(input_path)
    if not panel.rows:
        raise ReportError(f"{input_path} : panel vide, aucun fichier produit.")

    calibrated = calibration.calibrate_panel(panel.rows, config.calibration, workers=config.workers)
    rows, failures = compute_rows(calibrated, config)
    if not rows:
        raise ReportError("Aucune année n'a pu être traitée :\n" + format_failures(failures))

    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    csv_text = frame_to_csv(report_frame(rows, config.percentile_pairs))
    files: Dict[str, str] = {"report.csv": csv_text}

    with tempfile.TemporaryDirectory(dir=output_dir, prefix=".charts-") as scratch:
        csv_path = Path(scratch) / "report.csv"
        csv_path.write_text(csv_text, encoding="utf-8", newline="\n")
        files.update(charts.charts_from_report_csv(csv_path))

    if config.output_format == "json":
        files["report.json"] = to_json(
            {
                "rows": [row.model_dump() for row in rows],
                "failures": [failure.model_dump() for failure in failures],
                "config": config.model_dump(mode="json", exclude={"workers"}),
            }
        )
    files["diagnostics.csv"] = frame_to_csv(diagnostics_frame(rows))
    if failures:
        files["failures.csv"] = frame_to_csv(failures_frame(failures))
    if config.sigma_sweep is not None:
        sweep, peaks = sweep_tables(panel.rows, config)
        files["sigma_sweep.csv"] = frame_to_csv(sweep)
        files["sigma_sweep_peaks.csv"] = frame_to_csv(peaks)

    outcome = ReportOutcome(rows=rows, failures=failures)
    outcome.files = write_outputs(output_dir, files, stale=REPORT_ARTEFACTS)
    if failures:
        logger.warning("Succès partiel, année(s) en échec :\n{}", format_failures(failures))
    return outcome


def parameters_frame(calibrated: PanelCalibration) -> pd.DataFrame:
    records = []
    for row in calibrated.rows:
        coeffs = model_core.derive_coefficients(row.params)
        records.append(
            {
                "year": row.year,
                "r": row.params.r,
                "mu": row.params.mu,
                "sigma": row.params.sigma,
                "a": coeffs.a,
                "b": coeffs.b,
                "share_error": row.diagnostics.share_error,
                "n_roots": len(row.diagnostics.roots),
            }
        )
    return pd.DataFrame.from_records(records, columns=PARAMETER_COLUMNS)


def read_parameters(path: Path | str) -> List[Tuple[int, ModelParams]]:
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError as exc:
        raise ParseError(f"{path} : fichier de paramètres introuvable.") from exc
    missing = {"year", "r", "mu", "sigma"} - set(frame.columns)
    if missing:
        raise ParseError(f"{path} : colonnes manquantes {', '.join(sorted(missing))}.")
    return [
        (int(record.year), ModelParams(mu=float(record.mu), sigma=float(record.sigma), r=float(record.r)))
        for record in frame.itertuples(index=False)
    ]


def mixing_frame(entries: Sequence[Tuple[int, ModelParams]], config: MixingConfig) -> pd.DataFrame:
    records = [{"year": year, "mixing_time_years": mixing.mixing_time(params, config)} for year, params in entries]
    return pd.DataFrame.from_records(records, columns=["year", "mixing_time_years"])


def mfpt_frame(entries: Sequence[Tuple[int, ModelParams]], pairs: Sequence[Tuple[float, float]]) -> pd.DataFrame:
    columns = ["year"] + [mfpt_column(start, target) for start, target in pairs]
    records = []
    for year, params in entries:
        record: Dict[str, Any] = {"year": year}
        for start, target in pairs:
            record[mfpt_column(start, target)] = mfpt.mfpt_percentiles(params, start, target)
        records.append(record)
    return pd.DataFrame.from_records(records, columns=columns)


def run_simulation(
    params: ModelParams,
    config: SimConfig,
    times: Sequence[float],
    x_target: float = 2.0,
    mixing_config: Optional[MixingConfig] = None,
) -> Dict[str, Any]:
    """Oracles Monte Carlo en regard de leurs formes fermées."""
    coeffs = model_core.derive_coefficients(params)
    dist = model_core.stationary_distribution(params)
    burn_in = max(config.horizon, 10.0 / coeffs.r)
    samples = montecarlo.sample_stationary(
        params, config.n_paths, burn_in, config.seed, config.workers, config.block_size
    )
    ks = stats.kstest(samples, lambda x: model_core.stationary_cdf(dist, x))
    stationary: Dict[str, Any] = {"ks_distance": float(ks.statistic), "n": int(samples.size)}
    if dist.a > 1:
        stationary["top_share_p01"] = {
            "analytic": model_core.top_share(dist, 0.01),
            "empirical": montecarlo.empirical_top_share(samples, 0.01),
        }
        stationary["mean_income"] = {
            "analytic": model_core.mean_income(dist),
            "empirical": montecarlo.empirical_mean(samples).model_dump(),
        }

    passage = montecarlo.empirical_mfpt(params, params.x0, x_target * params.x0, config)
    result: Dict[str, Any] = {
        "params": params.model_dump(),
        "coefficients": coeffs.model_dump(),
        "stationary": stationary,
        "mfpt": {
            "x_start": params.x0,
            "x_target": x_target * params.x0,
            "analytic": mfpt.mfpt_levels(params, params.x0, x_target * params.x0),
            "empirical": passage.model_dump(),
        },
    }
    if times:
        empirical = montecarlo.empirical_tv(params, times, config)
        grid = mixing.tv_curve(coeffs, times, mixing_config or MixingConfig())
        result["tv"] = {
            "times": list(times),
            "grid": grid,
            "empirical": empirical.tv,
            "envelope": [math.exp(-coeffs.r * t) for t in times],
            "noise_floor": empirical.noise_floor,
            "bin_count": empirical.bin_count,
        }
    return result


def simulation_json(result: Dict[str, Any]) -> str:
    return to_json(json.loads(json.dumps(result, default=lambda value: float(np.asarray(value)))))
