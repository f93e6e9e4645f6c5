"""Configuration : valeurs par défaut < fichier clé = valeur < options de la ligne de commande."""
from __future__ import annotations

from pathlib import Path
from typing import Any, Callable, Dict, Mapping, Optional

from dotenv import dotenv_values

from .errors import DomainError
from .mixing import config_for_preset
from .schemas import CalibrationConfig, MixingConfig, ReportConfig, SimConfig
from .utils import parse_percentile_pairs, parse_sweep


def _to_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in {"1", "true", "yes", "oui", "on"}:
        return True
    if text in {"0", "false", "no", "non", "off", ""}:
        return False
    raise DomainError(f"Booléen invalide : {value!r}.")


CONFIG_KEYS: Dict[str, Callable[[Any], Any]] = {
    "sigma": float,
    "share_fraction": float,
    "hazard_transform": _to_bool,
    "epsilon": float,
    "epsilon_preset": str,
    "percentile_pairs": str,
    "sigma_sweep": str,
    "seed": int,
    "format": str,
    "workers": int,
    "grid_points": int,
    "n_paths": int,
    "dt": float,
    "horizon": float,
    "log_level": str,
}


def load_config_file(path: Optional[Path | str]) -> Dict[str, Any]:
    if path is None:
        return {}
    path = Path(path)
    if not path.is_file():
        raise DomainError(f"Fichier de configuration introuvable : {path}.")
    raw = dotenv_values(path)
    unknown = sorted(set(raw) - set(CONFIG_KEYS))
    if unknown:
        raise DomainError(f"{path} : clé(s) inconnue(s) {', '.join(unknown)}.")
    settings: Dict[str, Any] = {}
    for key, value in raw.items():
        if value is None:
            continue
        try:
            settings[key] = CONFIG_KEYS[key](value.strip())
        except ValueError as exc:
            raise DomainError(f"{path} : valeur invalide pour {key} ({value!r}).") from exc
    return settings


def merge_settings(file_settings: Mapping[str, Any], flags: Mapping[str, Any]) -> Dict[str, Any]:
    merged = dict(file_settings)
    merged.update({key: value for key, value in flags.items() if value is not None and key in CONFIG_KEYS})
    return merged


def calibration_config(settings: Mapping[str, Any]) -> CalibrationConfig:
    values: Dict[str, Any] = {}
    if "sigma" in settings:
        values["sigma_fixed"] = settings["sigma"]
    if "share_fraction" in settings:
        values["share_fraction"] = settings["share_fraction"]
    if "hazard_transform" in settings:
        values["hazard_transform"] = _to_bool(settings["hazard_transform"])
    return CalibrationConfig(**values)


def mixing_config(settings: Mapping[str, Any]) -> MixingConfig:
    values: Dict[str, Any] = {}
    if "grid_points" in settings:
        values["grid_points"] = settings["grid_points"]
    config = MixingConfig(**values)
    if settings.get("epsilon_preset"):
        config = config_for_preset(settings["epsilon_preset"], config)
    if "epsilon" in settings:
        config = MixingConfig(**{**config.model_dump(), "epsilon": settings["epsilon"]})
    return config


def sim_config(settings: Mapping[str, Any]) -> SimConfig:
    keys = {"n_paths": "n_paths", "dt": "dt", "horizon": "horizon", "seed": "seed", "workers": "workers"}
    return SimConfig(**{field: settings[key] for key, field in keys.items() if key in settings})


def report_config(settings: Mapping[str, Any]) -> ReportConfig:
    values: Dict[str, Any] = {
        "calibration": calibration_config(settings),
        "mixing": mixing_config(settings),
    }
    if "percentile_pairs" in settings:
        values["percentile_pairs"] = parse_percentile_pairs(settings["percentile_pairs"])
    if "sigma_sweep" in settings:
        values["sigma_sweep"] = parse_sweep(settings["sigma_sweep"])
    if "format" in settings:
        values["output_format"] = settings["format"]
    if "workers" in settings:
        values["workers"] = settings["workers"]
    return ReportConfig(**values)
