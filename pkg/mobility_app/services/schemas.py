from __future__ import annotations

import math
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import InvalidParams


class ModelParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    mu: float
    sigma: float
    r: float
    x0: float = 1.0

    @model_validator(mode="after")
    def check_invariants(self) -> "ModelParams":
        if not math.isfinite(self.mu):
            raise InvalidParams(f"mu doit être fini (reçu {self.mu}).")
        if not self.sigma > 0 or not math.isfinite(self.sigma):
            raise InvalidParams(f"sigma doit être strictement positif (reçu {self.sigma}).")
        if not self.r > 0 or not math.isfinite(self.r):
            raise InvalidParams(
                f"Le taux de réinitialisation r doit être strictement positif (reçu {self.r}) : "
                "sans réinitialisation il n'existe pas d'état stationnaire."
            )
        if not self.x0 > 0 or not math.isfinite(self.x0):
            raise InvalidParams(f"x0 doit être strictement positif (reçu {self.x0}).")
        return self


class DerivedCoefficients(BaseModel):
    """Représentation en log-revenu du modèle GBM-SR."""

    model_config = ConfigDict(frozen=True)

    v: float
    D: float
    lam: float
    a: float
    b: float
    r: float


class StationaryDistribution(BaseModel):
    model_config = ConfigDict(frozen=True)

    a: float
    b: float
    x0: float = 1.0

    @model_validator(mode="after")
    def check_exponents(self) -> "StationaryDistribution":
        if not (self.a > 0 and self.b > 0 and self.x0 > 0):
            raise InvalidParams(
                f"Exposants de queue invalides (a={self.a}, b={self.b}, x0={self.x0}) : "
                "tous doivent être strictement positifs."
            )
        return self


class YearObservation(BaseModel):
    year: int
    top1_share: float
    separations: float
    employment: float

    @field_validator("top1_share")
    @classmethod
    def validate_share(cls, value: float) -> float:
        if not 0 < value < 1:
            raise ValueError(f"La part du top 1% doit être dans (0, 1) (reçu {value}).")
        return value

    @field_validator("separations")
    @classmethod
    def validate_separations(cls, value: float) -> float:
        if not value >= 0 or not math.isfinite(value):
            raise ValueError(f"Le nombre de départs doit être positif ou nul (reçu {value}).")
        return value

    @field_validator("employment")
    @classmethod
    def validate_employment(cls, value: float) -> float:
        if not value > 0 or not math.isfinite(value):
            raise ValueError(f"L'emploi doit être strictement positif (reçu {value}).")
        return value


class PanelFile(BaseModel):
    rows: List[YearObservation] = Field(default_factory=list)
    source: str = ""
    format_tag: str = "normalized-csv"

    @model_validator(mode="after")
    def check_years(self) -> "PanelFile":
        years = [row.year for row in self.rows]
        for previous, current in zip(years, years[1:]):
            if current <= previous:
                raise ValueError(
                    f"Les années doivent être strictement croissantes ({previous} puis {current})."
                )
        return self


class CalibrationConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    sigma_fixed: float = 0.2
    share_fraction: float = 0.01
    a_bracket: Tuple[float, float] = (1.0 + 1e-6, 100.0)
    share_tolerance: float = 1e-10
    hazard_transform: bool = False
    root_selection: Literal["smallest"] = "smallest"
    scan_points: int = 4096

    @field_validator("sigma_fixed")
    @classmethod
    def validate_sigma(cls, value: float) -> float:
        if not value > 0:
            raise ValueError(f"sigma_fixed doit être strictement positif (reçu {value}).")
        return value

    @field_validator("share_fraction")
    @classmethod
    def validate_fraction(cls, value: float) -> float:
        if not 0 < value < 1:
            raise ValueError(f"share_fraction doit être dans (0, 1) (reçu {value}).")
        return value

    @field_validator("a_bracket")
    @classmethod
    def validate_bracket(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        low, high = value
        if not 1 < low < high:
            raise ValueError(f"L'intervalle de recherche doit vérifier 1 < bas < haut (reçu {value}).")
        return value

    @field_validator("scan_points")
    @classmethod
    def validate_scan(cls, value: int) -> int:
        if value < 16:
            raise ValueError("Au moins 16 points de balayage sont requis.")
        return value


class CalibrationDiagnostics(BaseModel):
    share_error: float
    roots: List[float] = Field(default_factory=list)
    multiple_roots: bool = False
    bracket: Tuple[float, float]
    warnings: List[str] = Field(default_factory=list)


class YearCalibration(BaseModel):
    year: int
    params: ModelParams
    diagnostics: CalibrationDiagnostics


class YearFailure(BaseModel):
    year: int
    error: str
    message: str


class PanelCalibration(BaseModel):
    rows: List[YearCalibration] = Field(default_factory=list)
    failures: List[YearFailure] = Field(default_factory=list)


class PassageQuery(BaseModel):
    model_config = ConfigDict(frozen=True)

    start: float
    target: float
    mode: Literal["levels", "percentiles"] = "levels"

    @model_validator(mode="after")
    def check_direction(self) -> "PassageQuery":
        if self.target < self.start:
            raise ValueError("Seuls les passages vers le haut (cible >= départ) sont pris en charge.")
        if self.mode == "percentiles" and not (0 < self.start < 1 and 0 < self.target < 1):
            raise ValueError("En mode percentiles, départ et cible doivent être dans (0, 1).")
        if self.mode == "levels" and self.start <= 0:
            raise ValueError("Le revenu de départ doit être strictement positif.")
        return self


class MixingConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    epsilon: float = 0.05
    grid_points: int = 2001
    grid_tail_probability: float = 1e-6
    grid_spread_sd: float = 6.0
    tau_cutoff_weight: float = 1e-12
    scan_step: float = 0.05
    bisection_tolerance: float = 1e-3
    quadrature_tolerance: float = 1e-6

    @field_validator("epsilon")
    @classmethod
    def validate_epsilon(cls, value: float) -> float:
        if not 0 < value < 1:
            raise ValueError(f"epsilon doit être dans (0, 1) (reçu {value}).")
        return value

    @field_validator("grid_points")
    @classmethod
    def validate_grid_points(cls, value: int) -> int:
        # Simpson exige un nombre pair d'intervalles
        if value < 5 or value % 2 == 0:
            raise ValueError(f"grid_points doit être impair et >= 5 (reçu {value}).")
        return value

    @field_validator("scan_step", "bisection_tolerance", "quadrature_tolerance", "grid_spread_sd")
    @classmethod
    def validate_positive(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("Les pas et tolérances doivent être strictement positifs.")
        return value


class SimConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_paths: int = 100_000
    dt: float = 1e-2
    horizon: float = 100.0
    seed: int = 1995
    bridge_correction: bool = True
    fpt_horizon_cap: Optional[float] = None
    fpt_cap_multiple: float = 50.0
    workers: int = 1
    block_size: int = 16_384

    @field_validator("n_paths", "workers", "block_size")
    @classmethod
    def validate_counts(cls, value: int) -> int:
        if value <= 0:
            raise ValueError(f"Les effectifs doivent être strictement positifs (reçu {value}).")
        return value

    @field_validator("dt", "horizon", "fpt_cap_multiple")
    @classmethod
    def validate_times(cls, value: float) -> float:
        if not value > 0:
            raise ValueError(f"Les durées doivent être strictement positives (reçu {value}).")
        return value

    @field_validator("seed")
    @classmethod
    def validate_seed(cls, value: int) -> int:
        if not 0 <= value < 2**64:
            raise ValueError("La graine doit tenir sur 64 bits non signés.")
        return value


class SimResult(BaseModel):
    estimate: float
    standard_error: float
    n_effective: int
    truncated_fraction: float = 0.0

    @field_validator("standard_error", "truncated_fraction")
    @classmethod
    def validate_non_negative(cls, value: float) -> float:
        if value < 0:
            raise ValueError("Erreur standard et fraction tronquée doivent être positives.")
        return value


class EmpiricalTV(BaseModel):
    times: List[float]
    tv: List[float]
    noise_floor: float
    bin_count: int


class MobilityReportRow(BaseModel):
    year: int
    r: float
    mu: float
    sigma: float
    a: float
    b: float
    mixing_time_years: float
    mfpt_years: Dict[str, float] = Field(default_factory=dict)
    share_error: float = 0.0
    warnings: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_finite(self) -> "MobilityReportRow":
        values = [self.r, self.mu, self.sigma, self.a, self.b, self.mixing_time_years]
        values.extend(self.mfpt_years.values())
        if not all(math.isfinite(value) for value in values):
            raise ValueError(f"Valeur non finie dans la ligne {self.year}.")
        return self


class ReportConfig(BaseModel):
    calibration: CalibrationConfig = Field(default_factory=CalibrationConfig)
    mixing: MixingConfig = Field(default_factory=MixingConfig)
    percentile_pairs: List[Tuple[float, float]] = Field(
        default_factory=lambda: [(0.50, 0.75), (0.50, 0.90)]
    )
    output_format: Literal["csv", "json"] = "csv"
    workers: int = 1
    sigma_sweep: Optional[Tuple[float, float, int]] = None

    @field_validator("percentile_pairs")
    @classmethod
    def validate_pairs(cls, value: List[Tuple[float, float]]) -> List[Tuple[float, float]]:
        for start, target in value:
            if not 0 < start < target < 1:
                raise ValueError(f"Paire de percentiles invalide : {start}:{target}.")
        return value
