"""Chargement et validation du panel annuel (parts du top 1% et flux d'emploi)."""
from __future__ import annotations

import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Literal, Optional, Tuple

import pandas as pd
from loguru import logger
from pydantic import ValidationError

from .errors import IngestIOError, MissingSeries, PanelValidationError, ParseError
from .schemas import PanelFile, YearObservation

PANEL_COLUMNS = ["year", "top1_share", "separations", "employment"]
FLOW_COLUMNS = ["year", "separations", "employment"]

WID_COLUMNS = {
    "country": "country",
    "variable": "variable",
    "percentile": "percentile",
    "year": "year",
    "value": "value",
}


def _is_blank(values: Iterable[Any]) -> bool:
    return all(pd.isna(value) or not str(value).strip() for value in values)


def _read_table(path: Path | str, sep: str = ",") -> pd.DataFrame:
    """Lit un CSV en texte brut ; l'index de ligne i correspond à la ligne i + 2 du fichier."""
    path = Path(path)
    try:
        frame = pd.read_csv(
            path, sep=sep, dtype=str, keep_default_na=False, skip_blank_lines=False, encoding="utf-8"
        )
    except FileNotFoundError as exc:
        raise IngestIOError(f"{path} : fichier introuvable.") from exc
    except (OSError, UnicodeDecodeError) as exc:
        raise IngestIOError(f"{path} : lecture impossible ({exc}).") from exc
    except pd.errors.EmptyDataError as exc:
        raise ParseError(f"{path} : fichier vide, en-tête attendu.") from exc
    except pd.errors.ParserError as exc:
        raise ParseError(f"{path} : CSV mal formé ({exc}).") from exc
    # lignes vides finales tolérées
    end = len(frame)
    while end > 0 and _is_blank(frame.iloc[end - 1]):
        end -= 1
    return frame.iloc[:end].copy()


def _reject_blank(record: Iterable[Any], line: int, path: Path | str) -> None:
    if _is_blank(record):
        raise ParseError(f"{path}, ligne {line} : ligne vide.")


def _check_header(frame: pd.DataFrame, expected: List[str], path: Path | str) -> None:
    columns = [column.strip() for column in frame.columns]
    if columns != expected:
        raise ParseError(f"{path} : en-tête {','.join(columns)} invalide, attendu {','.join(expected)}.")
    frame.columns = columns


def _parse_number(raw: Any, column: str, line: int, path: Path | str) -> float:
    text = "" if pd.isna(raw) else str(raw).strip()
    try:
        value = float(text)
    except ValueError as exc:
        raise ParseError(f"{path}, ligne {line}, colonne {column} : valeur non numérique {raw!r}.") from exc
    if not math.isfinite(value):
        raise ParseError(f"{path}, ligne {line}, colonne {column} : valeur non finie {raw!r}.")
    return value


def _parse_year(raw: str, line: int, path: Path | str) -> int:
    value = _parse_number(raw, "year", line, path)
    if not value.is_integer():
        raise ParseError(f"{path}, ligne {line}, colonne year : année non entière {raw!r}.")
    return int(value)


def _observation(values: Dict[str, float], year: int, line: int, path: Path | str) -> YearObservation:
    share = values["top1_share"]
    if 1 < share <= 100:
        raise PanelValidationError(
            f"{path}, ligne {line} : top1_share={share:g} ressemble à un pourcentage ; "
            "une fraction dans (0, 1) est attendue."
        )
    try:
        return YearObservation(year=year, **values)
    except ValidationError as exc:
        detail = "; ".join(error["msg"] for error in exc.errors())
        raise PanelValidationError(f"{path}, ligne {line} : {detail}") from exc


def load_panel(path: Path | str, format: Literal["normalized-csv"] = "normalized-csv") -> PanelFile:
    if format != "normalized-csv":
        raise ParseError(f"Format de panel inconnu : {format}.")
    frame = _read_table(path)
    _check_header(frame, PANEL_COLUMNS, path)

    rows: List[YearObservation] = []
    for index, record in enumerate(frame.itertuples(index=False)):
        line = index + 2
        _reject_blank(record, line, path)
        year = _parse_year(record.year, line, path)
        values = {
            column: _parse_number(getattr(record, column), column, line, path)
            for column in PANEL_COLUMNS[1:]
        }
        obs = _observation(values, year, line, path)
        if any(row.year == obs.year for row in rows):
            raise PanelValidationError(f"{path}, ligne {line} : année dupliquée {obs.year}.")
        if rows and obs.year < rows[-1].year:
            raise PanelValidationError(
                f"{path}, ligne {line} : années non croissantes ({rows[-1].year} puis {obs.year})."
            )
        rows.append(obs)
    logger.info("{} : {} année(s) chargée(s).", path, len(rows))
    return PanelFile(rows=rows, source=str(path), format_tag=format)


def _format_number(value: float) -> str:
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def panel_to_csv(panel: PanelFile) -> str:
    lines = [",".join(PANEL_COLUMNS)]
    for row in panel.rows:
        lines.append(
            ",".join(
                [
                    str(row.year),
                    repr(float(row.top1_share)),
                    _format_number(row.separations),
                    _format_number(row.employment),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def write_panel(panel: PanelFile, path: Path | str) -> Path:
    path = Path(path)
    path.write_text(panel_to_csv(panel), encoding="utf-8", newline="\n")
    return path


def load_labor_flows(path: Path | str) -> Dict[int, Tuple[float, float]]:
    frame = _read_table(path)
    _check_header(frame, FLOW_COLUMNS, path)
    flows: Dict[int, Tuple[float, float]] = {}
    for index, record in enumerate(frame.itertuples(index=False)):
        line = index + 2
        _reject_blank(record, line, path)
        year = _parse_year(record.year, line, path)
        if year in flows:
            raise PanelValidationError(f"{path}, ligne {line} : année dupliquée {year}.")
        separations = _parse_number(record.separations, "separations", line, path)
        employment = _parse_number(record.employment, "employment", line, path)
        if separations < 0 or employment <= 0:
            raise PanelValidationError(
                f"{path}, ligne {line} : départs >= 0 et emploi > 0 sont requis."
            )
        flows[year] = (separations, employment)
    return flows


def adapt_wid_long(
    path: Path | str,
    variable_code: str,
    percentile_code: str,
    country_code: str,
    delimiter: str = ";",
    columns: Optional[Dict[str, str]] = None,
    value_scale: Literal["fraction", "percent"] = "fraction",
) -> Dict[int, float]:
    """Réduit un export WID au format long à une série de parts, en fractions."""
    names = {**WID_COLUMNS, **(columns or {})}
    frame = _read_table(path, sep=delimiter)
    frame.columns = [column.strip() for column in frame.columns]
    missing = [names[key] for key in WID_COLUMNS if names[key] not in frame.columns]
    if missing:
        raise ParseError(f"{path} : colonnes manquantes {', '.join(missing)}.")

    mask = (
        (frame[names["country"]].str.strip() == country_code)
        & (frame[names["variable"]].str.strip() == variable_code)
        & (frame[names["percentile"]].str.strip() == percentile_code)
    )
    selected = frame[mask]
    if selected.empty:
        raise MissingSeries(
            f"{path} : aucune ligne pour pays={country_code}, variable={variable_code}, "
            f"percentile={percentile_code}."
        )

    series: Dict[int, float] = {}
    for index, record in selected.iterrows():
        line = int(index) + 2
        year = _parse_year(record[names["year"]], line, path)
        value = _parse_number(record[names["value"]], "value", line, path)
        if value_scale == "percent":
            value = value / 100.0
        elif value > 1:
            raise PanelValidationError(
                f"{path}, ligne {line} : valeur {value:g} > 1 ; utilisez value_scale='percent' si la série est en %."
            )
        if year in series and series[year] != value:
            raise PanelValidationError(
                f"{path}, ligne {line} : valeurs contradictoires pour {year} ({series[year]:g} et {value:g})."
            )
        series[year] = value
    return dict(sorted(series.items()))


def merge_panel(
    shares: Dict[int, float],
    flows: Dict[int, Tuple[float, float]],
    source: str = "",
) -> PanelFile:
    years = sorted(set(shares) & set(flows))
    dropped = sorted(set(shares) ^ set(flows))
    if dropped:
        logger.warning("Années présentes d'un seul côté, ignorées : {}", ", ".join(map(str, dropped)))
    rows: List[YearObservation] = []
    for year in years:
        separations, employment = flows[year]
        try:
            rows.append(
                YearObservation(
                    year=year,
                    top1_share=shares[year],
                    separations=separations,
                    employment=employment,
                )
            )
        except ValidationError as exc:
            detail = "; ".join(error["msg"] for error in exc.errors())
            raise PanelValidationError(f"{source} année {year} : {detail}") from exc
    return PanelFile(rows=rows, source=source, format_tag="normalized-csv")
