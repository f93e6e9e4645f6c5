"""Temps moyen de premier passage (MFPT) vers le haut sous réinitialisation.

Avec q(s|y) = exp(-kappa(s) * (y_target - y)), transformée de Laplace du
temps de passage vers le haut sans réinitialisation, l'identité de
renouvellement pour des réinitialisations poissonniennes en y = 0 donne

    T(y_start) = (1 - q(r|y_start)) / (r * q(r|0)),

et kappa(r) = a la réduit à T = ((x_t/x0)^a - (x_s/x0)^a) / r.
"""
from __future__ import annotations

import math

from . import model_core
from .errors import DomainError
from .schemas import DerivedCoefficients, ModelParams, PassageQuery


def kappa(coeffs: DerivedCoefficients, s: float) -> float:
    if s < 0:
        raise DomainError(f"La variable de Laplace doit être positive ou nulle (reçu {s}).")
    root = math.sqrt(coeffs.v**2 + 4.0 * coeffs.D * s)
    if coeffs.v > 0 and s > 0:
        # même valeur que (root - v)/(2D), sans compensation
        return 2.0 * s / (root + coeffs.v)
    return (root - coeffs.v) / (2.0 * coeffs.D)


def kappa_derivative(coeffs: DerivedCoefficients, s: float) -> float:
    if s < 0:
        raise DomainError(f"La variable de Laplace doit être positive ou nulle (reçu {s}).")
    return 1.0 / math.sqrt(coeffs.v**2 + 4.0 * coeffs.D * s)


def fpt_laplace_kernel(coeffs: DerivedCoefficients, s: float, delta: float) -> float:
    if delta < 0:
        raise DomainError(f"La distance en log-revenu doit être positive ou nulle (reçu {delta}).")
    return math.exp(-kappa(coeffs, s) * delta)


def renewal_mfpt(coeffs: DerivedCoefficients, y_start: float, y_target: float) -> float:
    if y_target < y_start or y_target < 0:
        raise DomainError("Le passage doit être vers le haut et la cible au-dessus du niveau de réinitialisation.")
    if coeffs.r <= 0:
        raise DomainError("La formule de renouvellement exige r > 0.")
    from_start = fpt_laplace_kernel(coeffs, coeffs.r, y_target - y_start)
    from_reset = fpt_laplace_kernel(coeffs, coeffs.r, y_target)
    return (1.0 - from_start) / (coeffs.r * from_reset)


def mfpt_levels(params: ModelParams, x_start: float, x_target: float) -> float:
    if not x_start > 0:
        raise DomainError(f"Le revenu de départ doit être strictement positif (reçu {x_start}).")
    if x_target < x_start:
        raise DomainError(
            f"Passage vers le bas non pris en charge (départ {x_start:.6g}, cible {x_target:.6g})."
        )
    if x_target < params.x0:
        raise DomainError(
            f"La cible {x_target:.6g} est sous le niveau de réinitialisation x0={params.x0:.6g} : "
            "hors du domaine de validité de la formule."
        )
    a = model_core.derive_coefficients(params).a
    return ((x_target / params.x0) ** a - (x_start / params.x0) ** a) / params.r


def mfpt_percentiles(params: ModelParams, p_start: float, p_target: float) -> float:
    if not 0 < p_start < p_target < 1:
        raise DomainError(
            f"Percentiles invalides ({p_start}, {p_target}) : 0 < départ < cible < 1 est requis."
        )
    dist = model_core.stationary_distribution(params)
    x_start = model_core.quantile(dist, p_start)
    if x_start < params.x0:
        raise DomainError(
            f"Le percentile de départ {p_start:.6g} correspond au revenu {x_start:.6g} < x0={params.x0:.6g} : "
            "hors du domaine de validité de la formule."
        )
    x_target = model_core.quantile(dist, p_target)
    return mfpt_levels(params, x_start, x_target)


def mfpt(params: ModelParams, query: PassageQuery) -> float:
    if query.mode == "percentiles":
        return mfpt_percentiles(params, query.start, query.target)
    return mfpt_levels(params, query.start, query.target)
