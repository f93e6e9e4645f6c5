"""Temps de mélange : distance en variation totale entre une cohorte entrée en x0
et la loi stationnaire.

La loi transitoire de y = ln(x/x0) pour une cohorte partie de y = 0 est le
mélange de renouvellement

    P(y, t) = e^{-rt} G(y, t) + r * int_0^t e^{-r tau} G(y, tau) d tau,

où G est le propagateur gaussien de moyenne v*tau et de variance 2*D*tau.
L'intégrale en tau est évaluée avec tau = u**2 : la gaussienne quasi
ponctuelle des petits tau devient un intégrande borné.
"""
from __future__ import annotations

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.integrate import quad_vec, simpson

from . import model_core
from .errors import DomainError, NotConverged
from .schemas import DerivedCoefficients, MixingConfig, ModelParams, StationaryDistribution

EPSILON_PRESETS = {"one-over-e": math.exp(-1.0)}


def config_for_preset(name: str, base: Optional[MixingConfig] = None) -> MixingConfig:
    if name not in EPSILON_PRESETS:
        raise DomainError(f"Préréglage inconnu : {name} (disponibles : {', '.join(EPSILON_PRESETS)}).")
    base = base or MixingConfig()
    return base.model_copy(update={"epsilon": EPSILON_PRESETS[name]})


def _gaussian(coeffs: DerivedCoefficients, y: np.ndarray, t: float) -> np.ndarray:
    variance = 2.0 * coeffs.D * t
    return np.exp(-((y - coeffs.v * t) ** 2) / (2.0 * variance)) / math.sqrt(2.0 * math.pi * variance)


def _tau_cutoff(coeffs: DerivedCoefficients, config: MixingConfig) -> float:
    if coeffs.r <= 0:
        return math.inf
    return math.log(1.0 / config.tau_cutoff_weight) / coeffs.r


def _renewal_slice(
    coeffs: DerivedCoefficients,
    y: np.ndarray,
    t_start: float,
    t_end: float,
    config: MixingConfig,
) -> np.ndarray:
    """r * int_{t_start}^{t_end} e^{-r tau} G(y, tau) d tau sur la grille."""
    if coeffs.r == 0 or t_end <= t_start:
        return np.zeros_like(y)
    scale = math.sqrt(math.pi * coeffs.D)

    def integrand(u: float) -> np.ndarray:
        tau = u * u
        if tau == 0.0:
            return np.zeros_like(y)
        exponent = -coeffs.r * tau - (y - coeffs.v * tau) ** 2 / (4.0 * coeffs.D * tau)
        return np.exp(exponent) / scale

    # tolérance sur la densité, répartie sur une grille d'environ dix unités log
    epsabs = config.quadrature_tolerance * 1e-3
    value, _ = quad_vec(integrand, math.sqrt(t_start), math.sqrt(t_end), epsabs=epsabs, epsrel=1e-10, norm="max")
    return coeffs.r * value


def _assemble(coeffs: DerivedCoefficients, y: np.ndarray, t: float, renewal: np.ndarray, config: MixingConfig) -> np.ndarray:
    if t > _tau_cutoff(coeffs, config):
        return renewal
    return math.exp(-coeffs.r * t) * _gaussian(coeffs, y, t) + renewal


def transient_pdf(
    coeffs: DerivedCoefficients,
    y: np.ndarray | float,
    t: float,
    config: Optional[MixingConfig] = None,
) -> np.ndarray | float:
    if not t > 0:
        raise DomainError(f"Le temps doit être strictement positif (reçu {t}).")
    config = config or MixingConfig()
    scalar = np.ndim(y) == 0
    grid = np.atleast_1d(np.asarray(y, dtype=float))
    horizon = min(t, _tau_cutoff(coeffs, config))
    renewal = _renewal_slice(coeffs, grid, 0.0, horizon, config)
    density = _assemble(coeffs, grid, t, renewal, config)
    return float(density[0]) if scalar else density


def _unit_distribution(coeffs: DerivedCoefficients) -> StationaryDistribution:
    return StationaryDistribution(a=coeffs.a, b=coeffs.b, x0=1.0)


def log_income_grid(coeffs: DerivedCoefficients, config: Optional[MixingConfig] = None) -> np.ndarray:
    """Grille uniforme en y, y = 0 sur un noeud pair : aucun panneau de Simpson ne chevauche le point anguleux."""
    config = config or MixingConfig()
    if coeffs.r <= 0:
        raise DomainError("La grille stationnaire exige r > 0.")
    dist = _unit_distribution(coeffs)
    tail = config.grid_tail_probability
    low = math.log(model_core.quantile(dist, tail))
    high = math.log(model_core.quantile(dist, 1.0 - tail))
    spread = config.grid_spread_sd * math.sqrt(2.0 * coeffs.D / coeffs.r)
    low, high = low - spread, high + spread
    n = config.grid_points
    step = (high - low) / (n - 1)
    below = 2 * math.ceil(-low / step / 2.0)
    grid = step * (np.arange(n) - below)

    covered = model_core.stationary_survival(dist, math.exp(grid[0])) - model_core.stationary_survival(
        dist, math.exp(grid[-1])
    )
    if covered < 1.0 - 1e-5:
        raise DomainError(f"La grille ne couvre que {covered:.8f} de la masse stationnaire.")
    return grid


def _tv_on_grid(density: np.ndarray, stationary: np.ndarray, y: np.ndarray) -> float:
    return float(min(1.0, 0.5 * simpson(np.abs(density - stationary), x=y)))


def tv_distance(coeffs: DerivedCoefficients, t: float, config: Optional[MixingConfig] = None) -> float:
    if t < 0:
        raise DomainError(f"Le temps doit être positif ou nul (reçu {t}).")
    if t == 0:
        return 1.0
    config = config or MixingConfig()
    y = log_income_grid(coeffs, config)
    stationary = np.asarray(model_core.stationary_log_pdf(_unit_distribution(coeffs), y))
    density = np.asarray(transient_pdf(coeffs, y, t, config))
    return _tv_on_grid(density, stationary, y)


def tv_curve(coeffs: DerivedCoefficients, times: Sequence[float], config: Optional[MixingConfig] = None) -> List[float]:
    """Distance TV à chaque instant, l'intégrale de renouvellement cumulée sur les instants triés."""
    config = config or MixingConfig()
    if any(t < 0 for t in times):
        raise DomainError("Les temps doivent être positifs ou nuls.")
    y = log_income_grid(coeffs, config)
    stationary = np.asarray(model_core.stationary_log_pdf(_unit_distribution(coeffs), y))
    cutoff = _tau_cutoff(coeffs, config)
    values = {}
    renewal = np.zeros_like(y)
    previous = 0.0
    for t in sorted(set(times)):
        if t == 0:
            values[t] = 1.0
            continue
        reach = min(t, cutoff)
        renewal = renewal + _renewal_slice(coeffs, y, previous, reach, config)
        previous = max(previous, reach)
        values[t] = _tv_on_grid(_assemble(coeffs, y, t, renewal, config), stationary, y)
    return [values[t] for t in times]


def mixing_time(params: ModelParams, config: Optional[MixingConfig] = None) -> float:
    config = config or MixingConfig()
    coeffs = model_core.derive_coefficients(params)
    epsilon = config.epsilon
    envelope = math.log(1.0 / epsilon) / coeffs.r
    limit = 10.0 * envelope
    cutoff = _tau_cutoff(coeffs, config)

    y = log_income_grid(coeffs, config)
    stationary = np.asarray(model_core.stationary_log_pdf(_unit_distribution(coeffs), y))

    def advance(renewal: np.ndarray, t_from: float, t_to: float) -> Tuple[np.ndarray, float]:
        start, end = min(t_from, cutoff), min(t_to, cutoff)
        updated = renewal + _renewal_slice(coeffs, y, start, end, config)
        return updated, _tv_on_grid(_assemble(coeffs, y, t_to, updated, config), stationary, y)

    renewal = np.zeros_like(y)
    t_low = 0.0
    step_index = 1
    while step_index * config.scan_step <= limit + 1e-12:
        t_high = step_index * config.scan_step
        renewal_high, tv_high = advance(renewal, t_low, t_high)
        logger.debug("Balayage t={:.4g} ans : TV={:.6g}", t_high, tv_high)
        if tv_high <= epsilon:
            # la bissection ancre l'intégrale de renouvellement sur la borne basse
            while t_high - t_low > config.bisection_tolerance:
                t_mid = 0.5 * (t_low + t_high)
                renewal_mid, tv_mid = advance(renewal, t_low, t_mid)
                if tv_mid <= epsilon:
                    t_high = t_mid
                else:
                    t_low, renewal = t_mid, renewal_mid
            if t_high > envelope + config.bisection_tolerance:
                logger.warning(
                    "Temps de mélange {:.6g} au-delà de l'enveloppe analytique {:.6g}.", t_high, envelope
                )
            return t_high
        t_low, renewal = t_high, renewal_high
        step_index += 1
    raise NotConverged(
        f"La distance TV reste au-dessus de {epsilon:.6g} jusqu'à {limit:.6g} ans : "
        "défaut de quadrature probable (essayez d'affiner la grille)."
    )
