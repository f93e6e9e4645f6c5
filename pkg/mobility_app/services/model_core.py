"""Modèle GBM-SR : coefficients dérivés et loi stationnaire en forme fermée.

Les revenus sont exprimés en unités du niveau de réinitialisation x0. En
log-revenu y = ln(x/x0), la loi stationnaire est une densité de Laplace
asymétrique d'exposants a (haut) et b (bas), soit une double Pareto en revenu.
"""
from __future__ import annotations

import math
from typing import Union

import numpy as np

from .errors import DomainError, HeavyTail, InvalidParams
from .schemas import DerivedCoefficients, ModelParams, StationaryDistribution

ArrayLike = Union[float, np.ndarray]


def _as_output(values: np.ndarray, scalar: bool) -> ArrayLike:
    return float(values) if scalar else values


def coefficients_from_log_drift(v: float, D: float, r: float) -> DerivedCoefficients:
    if not D > 0:
        raise InvalidParams(f"Le coefficient de diffusion D doit être strictement positif (reçu {D}).")
    if not r >= 0:
        raise InvalidParams(f"Le taux de réinitialisation doit être positif ou nul (reçu {r}).")
    lam = math.sqrt(v * v + 4.0 * D * r)
    # a = (lam - v)/(2D) perd en précision quand v >> 0 ; on passe par a*b = r/D
    b = (lam + v) / (2.0 * D)
    if v > 0 and r > 0:
        a = (r / D) / b
    else:
        a = (lam - v) / (2.0 * D)
    if v < 0 and r > 0:
        b = (r / D) / a
    return DerivedCoefficients(v=v, D=D, lam=lam, a=a, b=b, r=r)


def derive_coefficients(params: ModelParams) -> DerivedCoefficients:
    if not (params.sigma > 0 and params.r > 0 and params.x0 > 0):
        raise InvalidParams("sigma, r et x0 doivent être strictement positifs.")
    D = 0.5 * params.sigma**2
    v = params.mu - D
    return coefficients_from_log_drift(v, D, params.r)


def stationary_distribution(params: ModelParams) -> StationaryDistribution:
    coeffs = derive_coefficients(params)
    return StationaryDistribution(a=coeffs.a, b=coeffs.b, x0=params.x0)


def _log_income(dist: StationaryDistribution, x: ArrayLike) -> np.ndarray:
    values = np.asarray(x, dtype=float)
    if np.any(~(values > 0)):
        raise DomainError("Le revenu doit être strictement positif.")
    return np.log(values / dist.x0)


def stationary_log_pdf(dist: StationaryDistribution, y: ArrayLike) -> ArrayLike:
    """Densité de Laplace asymétrique de y = ln(x/x0)."""
    scalar = np.ndim(y) == 0
    values = np.asarray(y, dtype=float)
    a, b = dist.a, dist.b
    norm = a * b / (a + b)
    density = np.where(values >= 0, norm * np.exp(-a * np.abs(values)), norm * np.exp(-b * np.abs(values)))
    return _as_output(density, scalar)


def stationary_pdf(dist: StationaryDistribution, x: ArrayLike) -> ArrayLike:
    scalar = np.ndim(x) == 0
    y = _log_income(dist, x)
    density = np.asarray(stationary_log_pdf(dist, y)) / (dist.x0 * np.exp(y))
    return _as_output(density, scalar)


def stationary_survival(dist: StationaryDistribution, x: ArrayLike) -> ArrayLike:
    scalar = np.ndim(x) == 0
    y = _log_income(dist, x)
    a, b = dist.a, dist.b
    q = a + b
    upper = (b / q) * np.exp(-a * np.maximum(y, 0.0))
    lower = 1.0 - (a / q) * np.exp(b * np.minimum(y, 0.0))
    return _as_output(np.where(y >= 0, upper, lower), scalar)


def stationary_cdf(dist: StationaryDistribution, x: ArrayLike) -> ArrayLike:
    scalar = np.ndim(x) == 0
    survival = np.asarray(stationary_survival(dist, x))
    return _as_output(1.0 - survival, scalar)


def quantile(dist: StationaryDistribution, p: ArrayLike) -> ArrayLike:
    scalar = np.ndim(p) == 0
    probs = np.asarray(p, dtype=float)
    if np.any(~((probs > 0) & (probs < 1))):
        raise DomainError(f"La probabilité cumulée doit être dans (0, 1) (reçu {p}).")
    a, b = dist.a, dist.b
    q = a + b
    at_reset = a / q
    # clip garde les deux branches finies ; np.where choisit la bonne
    upper = -np.log(np.clip((1.0 - probs) * q / b, 1e-300, None)) / a
    lower = np.log(np.clip(probs * q / a, 1e-300, None)) / b
    y = np.where(probs >= at_reset, upper, lower)
    return _as_output(dist.x0 * np.exp(y), scalar)


def mean_income(dist: StationaryDistribution) -> float:
    a, b = dist.a, dist.b
    if a <= 1:
        raise HeavyTail(f"Le revenu moyen diverge pour a <= 1 (a={a}).")
    return dist.x0 * a * b / ((a - 1.0) * (b + 1.0))


def top_share_values(a: ArrayLike, b: ArrayLike, p: float) -> np.ndarray:
    """Part du revenu du top p, vectorisée sur des tableaux d'exposants (a > 1 supposé)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    q = a + b
    above_reset = p <= b / q
    # seuil au-dessus de x0
    upper = ((b + 1.0) / q) * np.power(np.clip(p * q / b, 0.0, None), (a - 1.0) / a)
    # seuil sous x0 : e^{b y_p} = (1 - p) q / a, masse du bas retirée
    base = np.clip((1.0 - p) * q / a, 0.0, 1.0)
    lower = 1.0 - ((a - 1.0) / q) * np.power(base, (b + 1.0) / b)
    return np.where(above_reset, upper, lower)


def top_share(dist: StationaryDistribution, p: float) -> float:
    if not 0 < p <= 1:
        raise DomainError(f"La fraction du haut de la distribution doit être dans (0, 1] (reçu {p}).")
    if dist.a <= 1:
        raise HeavyTail(f"La part du haut n'est pas définie pour a <= 1 (a={dist.a}).")
    if p == 1:
        return 1.0
    return float(top_share_values(dist.a, dist.b, p))
