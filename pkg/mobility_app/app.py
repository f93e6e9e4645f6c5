from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from loguru import logger
from pydantic import ValidationError

from .services import calibration, config, data_ingest, report
from .services.errors import MobilityError
from .services.mixing import EPSILON_PRESETS
from .services.schemas import ModelParams
from .services.utils import format_failures, parse_percentile_pairs

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2
DEFAULT_TV_TIMES = "0.5,1,2,4,8"


def _configure_logging(level: str) -> None:
    logger.remove()
    logger.add(sys.stderr, level=level.upper(), format="<level>{level: <8}</level> | {message}")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--output-dir", type=Path, default=Path("out"), help="Dossier de sortie.")
    parser.add_argument("--config", type=Path, default=None, help="Fichier clé = valeur (surchargé par les options).")
    parser.add_argument("--log-level", default=None, help="Niveau de log (DEBUG, INFO, WARNING...).")
    parser.add_argument("--workers", type=int, default=None, help="Nombre de threads.")


def _add_calibration(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--sigma", type=float, default=None, help="Volatilité fixée pour l'identification.")
    parser.add_argument(
        "--hazard-transform",
        action="store_true",
        default=None,
        help="r = -ln(1 - départs/emploi) au lieu du ratio brut.",
    )


def _add_mixing(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epsilon", type=float, default=None, help="Seuil de distance en variation totale.")
    parser.add_argument("--epsilon-preset", choices=sorted(EPSILON_PRESETS), default=None)


def _add_params_source(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", type=Path, default=None, help="parameters.csv produit par `calibrate`.")
    parser.add_argument("--mu", type=float, default=None)
    parser.add_argument("--r", type=float, default=None)
    parser.add_argument("--sigma", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mobility",
        description="Mobilité des revenus : mouvement brownien géométrique avec remises à zéro stochastiques.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    calibrate = commands.add_parser("calibrate", help="Panel -> parameters.csv")
    calibrate.add_argument("--input", type=Path, required=True)
    _add_common(calibrate)
    _add_calibration(calibrate)

    mixing = commands.add_parser("mixing", help="Paramètres -> mixing.csv")
    _add_params_source(mixing)
    _add_common(mixing)
    _add_mixing(mixing)
    mixing.add_argument("--grid-points", type=int, default=None)

    mfpt = commands.add_parser("mfpt", help="Paramètres + paires de percentiles -> mfpt.csv")
    _add_params_source(mfpt)
    _add_common(mfpt)
    mfpt.add_argument("--percentile-pairs", default=None, help="ex. 50:75,50:90")

    simulate = commands.add_parser("simulate", help="Oracles Monte Carlo -> simulate.json")
    simulate.add_argument("--mu", type=float, required=True)
    simulate.add_argument("--r", type=float, required=True)
    simulate.add_argument("--sigma", type=float, required=True)
    simulate.add_argument("--target", type=float, default=2.0, help="Niveau cible du MFPT, en multiples de x0.")
    simulate.add_argument("--tv-times", default=DEFAULT_TV_TIMES, help="Instants de la courbe TV (vide : aucun).")
    simulate.add_argument("--seed", type=int, default=None)
    simulate.add_argument("--n-paths", type=int, default=None)
    simulate.add_argument("--dt", type=float, default=None)
    simulate.add_argument("--horizon", type=float, default=None)
    _add_common(simulate)

    full = commands.add_parser("report", help="Pipeline complet -> report.csv + graphiques")
    full.add_argument("--input", type=Path, required=True)
    _add_common(full)
    _add_calibration(full)
    _add_mixing(full)
    full.add_argument("--percentile-pairs", default=None, help="ex. 50:75,50:90")
    full.add_argument("--sigma-sweep", default=None, help="bas:haut:n, table de sensibilité à sigma.")
    full.add_argument("--format", choices=["csv", "json"], default=None)

    wid = commands.add_parser("ingest-wid", help="Export WID + flux d'emploi -> panel normalisé")
    wid.add_argument("--input", type=Path, required=True, help="Export WID au format long.")
    wid.add_argument("--flows", type=Path, required=True, help="CSV year,separations,employment.")
    wid.add_argument("--variable", required=True)
    wid.add_argument("--percentile", required=True)
    wid.add_argument("--country", required=True)
    wid.add_argument("--delimiter", default=";")
    wid.add_argument("--value-scale", choices=["fraction", "percent"], default="fraction")
    wid.add_argument("--output", type=Path, default=Path("panel.csv"))
    wid.add_argument("--log-level", default=None)
    return parser


def _settings(args: argparse.Namespace) -> Dict[str, Any]:
    flags = {key: value for key, value in vars(args).items() if key not in {"command", "config"}}
    return config.merge_settings(config.load_config_file(getattr(args, "config", None)), flags)


def _param_entries(args: argparse.Namespace, settings: Dict[str, Any]) -> List[Tuple[int, ModelParams]]:
    if args.input is not None:
        return report.read_parameters(args.input)
    if args.mu is None or args.r is None or settings.get("sigma") is None:
        raise MobilityError("Fournir --input parameters.csv ou bien --mu, --r et --sigma.")
    return [(0, ModelParams(mu=args.mu, sigma=settings["sigma"], r=args.r))]


def _cmd_calibrate(args: argparse.Namespace, settings: Dict[str, Any]) -> int:
    panel = data_ingest.load_panel(args.input)
    calibrated = calibration.calibrate_panel(
        panel.rows, config.calibration_config(settings), workers=settings.get("workers", 1)
    )
    if not calibrated.rows:
        raise MobilityError("Aucune année calibrée :\n" + format_failures(calibrated.failures))
    files = {"parameters.csv": report.frame_to_csv(report.parameters_frame(calibrated))}
    if calibrated.failures:
        files["failures.csv"] = report.frame_to_csv(report.failures_frame(calibrated.failures))
    report.write_outputs(args.output_dir, files)
    return EXIT_PARTIAL if calibrated.failures else EXIT_OK


def _cmd_mixing(args: argparse.Namespace, settings: Dict[str, Any]) -> int:
    frame = report.mixing_frame(_param_entries(args, settings), config.mixing_config(settings))
    report.write_outputs(args.output_dir, {"mixing.csv": report.frame_to_csv(frame)})
    print(frame.to_string(index=False, float_format=lambda value: f"{value:.6g}"))
    return EXIT_OK


def _cmd_mfpt(args: argparse.Namespace, settings: Dict[str, Any]) -> int:
    pairs = parse_percentile_pairs(settings.get("percentile_pairs", "50:75,50:90"))
    frame = report.mfpt_frame(_param_entries(args, settings), pairs)
    report.write_outputs(args.output_dir, {"mfpt.csv": report.frame_to_csv(frame)})
    print(frame.to_string(index=False, float_format=lambda value: f"{value:.6g}"))
    return EXIT_OK


def _cmd_simulate(args: argparse.Namespace, settings: Dict[str, Any]) -> int:
    params = ModelParams(mu=args.mu, sigma=args.sigma, r=args.r)
    times = [float(chunk) for chunk in args.tv_times.split(",") if chunk.strip()]
    result = report.run_simulation(params, config.sim_config(settings), times, x_target=args.target)
    text = report.simulation_json(result)
    report.write_outputs(args.output_dir, {"simulate.json": text})
    print(text, end="")
    return EXIT_OK


def _cmd_report(args: argparse.Namespace, settings: Dict[str, Any]) -> int:
    outcome = report.run_report(args.input, args.output_dir, config.report_config(settings))
    for path in outcome.files:
        logger.info("Écrit : {}", path)
    return outcome.exit_code


def _cmd_ingest_wid(args: argparse.Namespace, settings: Dict[str, Any]) -> int:
    shares = data_ingest.adapt_wid_long(
        args.input,
        variable_code=args.variable,
        percentile_code=args.percentile,
        country_code=args.country,
        delimiter=args.delimiter,
        value_scale=args.value_scale,
    )
    flows = data_ingest.load_labor_flows(args.flows)
    panel = data_ingest.merge_panel(shares, flows, source=str(args.input))
    if not panel.rows:
        raise MobilityError("Aucune année commune entre la série WID et les flux d'emploi.")
    args.output.parent.mkdir(parents=True, exist_ok=True)
    data_ingest.write_panel(panel, args.output)
    logger.info("Panel écrit : {} ({} années).", args.output, len(panel.rows))
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace, Dict[str, Any]], int]] = {
    "calibrate": _cmd_calibrate,
    "mixing": _cmd_mixing,
    "mfpt": _cmd_mfpt,
    "simulate": _cmd_simulate,
    "report": _cmd_report,
    "ingest-wid": _cmd_ingest_wid,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.log_level or "INFO")
    try:
        settings = _settings(args)
        if settings.get("log_level") and not args.log_level:
            _configure_logging(settings["log_level"])
        return COMMANDS[args.command](args, settings)
    except MobilityError as exc:
        logger.error("{}: {}", type(exc).__name__, exc)
        return EXIT_FATAL
    except ValidationError as exc:
        logger.error("Configuration invalide : {}", "; ".join(error["msg"] for error in exc.errors()))
        return EXIT_FATAL


if __name__ == "__main__":
    raise SystemExit(main())
