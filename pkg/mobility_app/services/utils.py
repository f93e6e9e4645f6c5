from __future__ import annotations

import math
from typing import Iterable, List, Tuple

from .errors import DomainError
from .schemas import YearFailure

SIGNIFICANT_DIGITS = 6


def format_sig(value: float, digits: int = SIGNIFICANT_DIGITS) -> str:
    return f"{value:.{digits}g}"


def round_sig(value: float, digits: int = SIGNIFICANT_DIGITS) -> float:
    if not math.isfinite(value):
        return value
    return float(format_sig(value, digits))


def percentile_label(p: float) -> str:
    return "p" + format_sig(p * 100.0).replace(".", "_")


def mfpt_column(start: float, target: float) -> str:
    return f"mfpt_{percentile_label(start)}_{percentile_label(target)}_years"


def parse_percentile_pairs(text: str) -> List[Tuple[float, float]]:
    """'50:75,50:90' -> [(0.5, 0.75), (0.5, 0.9)]"""
    pairs: List[Tuple[float, float]] = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            start, target = (float(part) / 100.0 for part in chunk.split(":"))
        except ValueError as exc:
            raise DomainError(f"Paire de percentiles invalide : {chunk!r} (format attendu 50:75).") from exc
        if not 0 < start < target < 1:
            raise DomainError(f"Paire de percentiles invalide : {chunk!r} (0 < départ < cible < 100).")
        pairs.append((start, target))
    if not pairs:
        raise DomainError("Aucune paire de percentiles fournie.")
    return pairs


def parse_sweep(text: str) -> Tuple[float, float, int]:
    """'0.1:0.4:7' -> (0.1, 0.4, 7)"""
    try:
        low, high, count = text.split(":")
        return float(low), float(high), int(count)
    except ValueError as exc:
        raise DomainError(f"Balayage invalide : {text!r} (format attendu bas:haut:n).") from exc


def format_failure(failure: YearFailure) -> str:
    return f"{failure.year} ({failure.error}) : {failure.message}"


def format_failures(failures: Iterable[YearFailure]) -> str:
    return "\n".join(format_failure(failure) for failure in failures)
