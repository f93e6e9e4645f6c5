from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.optimize import brentq

from . import model_core
from .errors import DomainError, HeavyTail, MobilityError, NonPositiveRate, NoRoot
from .schemas import (
    CalibrationConfig,
    CalibrationDiagnostics,
    ModelParams,
    PanelCalibration,
    YearCalibration,
    YearFailure,
    YearObservation,
)

SIGMA_HINT = "essayez d'ajuster sigma_fixed (option --sigma)"


def reset_rate(separations: float, employment: float, config: Optional[CalibrationConfig] = None) -> float:
    config = config or CalibrationConfig()
    if not employment > 0:
        raise DomainError(f"L'emploi doit être strictement positif (reçu {employment}).")
    if not separations >= 0:
        raise DomainError(f"Le nombre de départs doit être positif ou nul (reçu {separations}).")
    ratio = separations / employment
    if config.hazard_transform:
        if ratio >= 1:
            raise DomainError(
                f"Transformation en taux de hasard impossible : départs ({separations}) >= emploi ({employment})."
            )
        rate = -math.log1p(-ratio)
    else:
        rate = ratio
    if rate <= 0:
        raise NonPositiveRate("Aucun départ observé : taux de réinitialisation nul, pas d'état stationnaire.")
    return rate


def share_curve(a: np.ndarray, r: float, D: float, p: float) -> np.ndarray:
    """Part du top le long de la droite d'identification b = r/(D a)."""
    a = np.asarray(a, dtype=float)
    return model_core.top_share_values(a, r / (D * a), p)


def _find_roots(target: float, r: float, D: float, config: CalibrationConfig) -> Tuple[List[float], float]:
    low, high = config.a_bracket
    p = config.share_fraction
    grid = np.geomspace(low, high, config.scan_points)
    gaps = share_curve(grid, r, D, p) - target

    def gap(a: float) -> float:
        return float(share_curve(np.array(a), r, D, p)) - target

    roots: List[float] = []
    for index in range(len(grid) - 1):
        left, right = gaps[index], gaps[index + 1]
        if left == 0.0:
            roots.append(float(grid[index]))
        elif left * right < 0:
            roots.append(brentq(gap, grid[index], grid[index + 1], xtol=1e-14, rtol=4 * np.finfo(float).eps))
    if gaps[-1] == 0.0:
        roots.append(float(grid[-1]))
    return roots, float(gaps[0])


def calibrate_year(obs: YearObservation, config: Optional[CalibrationConfig] = None) -> YearCalibration:
    config = config or CalibrationConfig()
    r = reset_rate(obs.separations, obs.employment, config)
    sigma = config.sigma_fixed
    D = 0.5 * sigma**2
    target = obs.top1_share
    p = config.share_fraction

    if target < p:
        raise NoRoot(
            f"Année {obs.year} : une part de {target:.6g} pour le top {p:.6g} est impossible "
            f"(le haut de la distribution détient au moins sa part de population) ; {SIGMA_HINT}."
        )

    roots, gap_at_low = _find_roots(target, r, D, config)
    if not roots:
        if gap_at_low < 0:
            raise HeavyTail(
                f"Année {obs.year} : la part observée {target:.6g} exigerait a <= {config.a_bracket[0]:.6g} "
                f"(moyenne infinie) ; {SIGMA_HINT}."
            )
        raise NoRoot(
            f"Année {obs.year} : aucun exposant a dans {config.a_bracket} ne reproduit la part {target:.6g} "
            f"avec r={r:.6g} ; {SIGMA_HINT}."
        )

    warnings: List[str] = []
    a = min(roots)
    if len(roots) > 1:
        message = (
            f"Année {obs.year} : {len(roots)} racines trouvées "
            f"({', '.join(f'{root:.6g}' for root in roots)}), la plus petite est retenue."
        )
        warnings.append(message)
        logger.warning(message)

    b = r / (D * a)
    mu = D * (b - a) + D
    params = ModelParams(mu=mu, sigma=sigma, r=r)
    achieved = model_core.top_share(model_core.stationary_distribution(params), p)
    share_error = abs(achieved - target)
    if share_error > config.share_tolerance:
        message = f"Année {obs.year} : écart de part {share_error:.3g} au-dessus de la tolérance."
        warnings.append(message)
        logger.warning(message)

    logger.debug("Année {} calibrée : r={:.6g} a={:.6g} mu={:.6g}", obs.year, r, a, mu)
    diagnostics = CalibrationDiagnostics(
        share_error=share_error,
        roots=roots,
        multiple_roots=len(roots) > 1,
        bracket=config.a_bracket,
        warnings=warnings,
    )
    return YearCalibration(year=obs.year, params=params, diagnostics=diagnostics)


def _calibrate_or_fail(obs: YearObservation, config: CalibrationConfig) -> YearCalibration | YearFailure:
    try:
        return calibrate_year(obs, config)
    except MobilityError as exc:
        logger.warning("Année {} ignorée : {}", obs.year, exc)
        return YearFailure(year=obs.year, error=type(exc).__name__, message=str(exc))


def calibrate_panel(
    panel: Sequence[YearObservation],
    config: Optional[CalibrationConfig] = None,
    workers: int = 1,
) -> PanelCalibration:
    config = config or CalibrationConfig()
    years = [obs.year for obs in panel]
    for previous, current in zip(years, years[1:]):
        if current <= previous:
            raise DomainError(f"Les années doivent être strictement croissantes ({previous} puis {current}).")

    if workers > 1 and len(panel) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            outcomes = list(executor.map(lambda obs: _calibrate_or_fail(obs, config), panel))
    else:
        outcomes = [_calibrate_or_fail(obs, config) for obs in panel]

    result = PanelCalibration()
    for outcome in outcomes:
        if isinstance(outcome, YearFailure):
            result.failures.append(outcome)
        else:
            result.rows.append(outcome)
    logger.info("{} année(s) calibrée(s), {} échec(s).", len(result.rows), len(result.failures))
    return result


def sigma_grid(low: float, high: float, count: int) -> List[float]:
    if count < 1 or not 0 < low <= high:
        raise DomainError(f"Balayage de sigma invalide : {low}:{high}:{count}.")
    if count == 1:
        return [low]
    return [float(value) for value in np.linspace(low, high, count)]


def sigma_sweep(
    observations: Iterable[YearObservation],
    sigmas: Sequence[float],
    config: Optional[CalibrationConfig] = None,
) -> List[Tuple[YearObservation, float, YearCalibration | YearFailure]]:
    """Calibre chaque année une fois par valeur de volatilité."""
    config = config or CalibrationConfig()
    results: List[Tuple[YearObservation, float, YearCalibration | YearFailure]] = []
    for obs in observations:
        for sigma in sigmas:
            swept = config.model_copy(update={"sigma_fixed": sigma})
            results.append((obs, sigma, _calibrate_or_fail(obs, swept)))
    return results
