"""Oracle Monte Carlo du modèle GBM-SR.

Les trajectoires sont groupées en blocs de taille fixe ; le bloc k tire de
Philox(seed) avancé de k sauts. Chaque estimation ne dépend que de la graine
et de la taille de bloc, jamais du nombre de threads.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
from loguru import logger

from . import model_core
from .errors import DomainError, NotConverged
from .mfpt import mfpt_levels
from .schemas import EmpiricalTV, ModelParams, SimConfig, SimResult, StationaryDistribution

T = TypeVar("T")

TRUNCATION_WARNING = 1e-4


def block_generator(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed).jumped(index))


def derived_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence([seed, stream]).generate_state(1, np.uint64)[0])


def _blocks(n: int, block_size: int) -> List[Tuple[int, int]]:
    return [(index, min(block_size, n - start)) for index, start in enumerate(range(0, n, block_size))]


def _run_blocks(
    task: Callable[[np.random.Generator, int], T],
    n: int,
    seed: int,
    block_size: int,
    workers: int,
) -> List[T]:
    layout = _blocks(n, block_size)

    def run(block: Tuple[int, int]) -> T:
        index, size = block
        return task(block_generator(seed, index), size)

    if workers > 1 and len(layout) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(run, layout))
    return [run(block) for block in layout]


def sample_stationary(
    params: ModelParams,
    n: int,
    burn_in: float,
    seed: int,
    workers: int = 1,
    block_size: int = 16_384,
) -> np.ndarray:
    coeffs = model_core.derive_coefficients(params)
    if n <= 0:
        raise DomainError(f"Le nombre d'échantillons doit être strictement positif (reçu {n}).")
    if burn_in < 10.0 / coeffs.r:
        raise DomainError(
            f"Le temps de chauffe {burn_in:.6g} doit dépasser 10/r = {10.0 / coeffs.r:.6g} ans."
        )
    mean_wait = 1.0 / coeffs.r

    def task(rng: np.random.Generator, size: int) -> np.ndarray:
        last_reset = np.zeros(size)
        pending = np.arange(size)
        while pending.size:
            candidate = last_reset[pending] + rng.exponential(mean_wait, pending.size)
            before = candidate < burn_in
            last_reset[pending[before]] = candidate[before]
            pending = pending[before]
        # une réinitialisation efface l'historique : seul compte le segment depuis la dernière
        age = burn_in - last_reset
        log_income = rng.normal(coeffs.v * age, np.sqrt(2.0 * coeffs.D * age))
        return params.x0 * np.exp(log_income)

    return np.concatenate(_run_blocks(task, n, seed, block_size, workers))


def empirical_top_share(samples: Sequence[float] | np.ndarray, p: float) -> float:
    values = np.asarray(samples, dtype=float)
    if values.size == 0:
        raise DomainError("Aucun échantillon fourni.")
    if not 0 < p <= 1:
        raise DomainError(f"La fraction du haut doit être dans (0, 1] (reçu {p}).")
    count = math.ceil(round(p * values.size, 9))
    ordered = np.sort(values)
    return float(ordered[values.size - count :].sum() / ordered.sum())


def empirical_mean(samples: Sequence[float] | np.ndarray) -> SimResult:
    values = np.asarray(samples, dtype=float)
    if values.size < 2:
        raise DomainError("Au moins deux échantillons sont requis.")
    return SimResult(
        estimate=float(values.mean()),
        standard_error=float(values.std(ddof=1) / math.sqrt(values.size)),
        n_effective=int(values.size),
    )


def empirical_mfpt(params: ModelParams, x_start: float, x_target: float, config: Optional[SimConfig] = None) -> SimResult:
    config = config or SimConfig()
    analytic = mfpt_levels(params, x_start, x_target)
    if x_start == x_target:
        return SimResult(estimate=0.0, standard_error=0.0, n_effective=config.n_paths)

    coeffs = model_core.derive_coefficients(params)
    cap = config.fpt_horizon_cap or config.fpt_cap_multiple * analytic
    barrier = math.log(x_target / params.x0)
    start = math.log(x_start / params.x0)
    dt, mean_wait = config.dt, 1.0 / coeffs.r
    v, D = coeffs.v, coeffs.D

    def task(rng: np.random.Generator, size: int) -> np.ndarray:
        passage = np.full(size, np.nan)
        ids = np.arange(size)
        y = np.full(size, start)
        clock = np.zeros(size)
        next_reset = rng.exponential(mean_wait, size)
        while ids.size:
            until_reset = next_reset - clock
            step = np.minimum(dt, until_reset)
            noise = rng.standard_normal(ids.size)
            uniform = rng.random(ids.size)
            y_next = y + v * step + np.sqrt(2.0 * D * step) * noise
            crossed = y_next >= barrier
            if config.bridge_correction:
                gap_before = np.maximum(barrier - y, 0.0)
                gap_after = np.maximum(barrier - y_next, 0.0)
                with np.errstate(divide="ignore", over="ignore"):
                    hit = np.exp(-gap_before * gap_after / (D * np.maximum(step, 1e-300)))
                crossed |= uniform < hit
            clock = clock + step

            resetting = ~crossed & (until_reset <= dt)
            if resetting.any():
                y_next[resetting] = 0.0
                next_reset[resetting] = clock[resetting] + rng.exponential(mean_wait, int(resetting.sum()))
                if barrier <= 0.0:
                    crossed |= resetting

            passage[ids[crossed]] = clock[crossed]
            keep = ~crossed & (clock < cap)
            ids, y, clock, next_reset = ids[keep], y_next[keep], clock[keep], next_reset[keep]
        return passage

    passage = np.concatenate(_run_blocks(task, config.n_paths, config.seed, config.block_size, config.workers))
    finished = passage[~np.isnan(passage)]
    truncated_fraction = 1.0 - finished.size / passage.size
    if finished.size == 0:
        raise NotConverged(f"Aucune trajectoire n'atteint la cible avant {cap:.6g} ans.")
    if truncated_fraction > TRUNCATION_WARNING:
        logger.warning(
            "{:.3%} des trajectoires tronquées à {:.6g} ans : l'estimation est biaisée vers le bas.",
            truncated_fraction,
            cap,
        )
    error = float(finished.std(ddof=1) / math.sqrt(finished.size)) if finished.size > 1 else 0.0
    logger.debug("MFPT empirique {:.6g} ± {:.3g} (analytique {:.6g})", finished.mean(), error, analytic)
    return SimResult(
        estimate=float(finished.mean()),
        standard_error=error,
        n_effective=int(finished.size),
        truncated_fraction=truncated_fraction,
    )


def empirical_tv(params: ModelParams, times: Sequence[float], config: Optional[SimConfig] = None) -> EmpiricalTV:
    config = config or SimConfig()
    if not times or any(not t > 0 for t in times):
        raise DomainError("Les temps doivent être strictement positifs.")
    coeffs = model_core.derive_coefficients(params)
    dist = StationaryDistribution(a=coeffs.a, b=coeffs.b, x0=1.0)

    burn_in = max(config.horizon, 10.0 / coeffs.r)
    reference_sample = sample_stationary(
        params, config.n_paths, burn_in, derived_seed(config.seed, 1), config.workers, config.block_size
    )
    edges = np.histogram_bin_edges(np.log(reference_sample / params.x0), bins="fd")
    cdf = np.asarray(model_core.stationary_cdf(dist, np.exp(edges)))
    reference = np.concatenate([[cdf[0]], np.diff(cdf), [1.0 - cdf[-1]]])

    ordered = sorted(set(times))
    mean_wait = 1.0 / coeffs.r

    def task(rng: np.random.Generator, size: int) -> np.ndarray:
        counts = np.zeros((len(ordered), edges.size + 1), dtype=np.int64)
        y = np.zeros(size)
        previous = 0.0
        for row, t in enumerate(ordered):
            span = t - previous
            # âge de la dernière réinitialisation dans la tranche, par retournement du temps poissonnien
            age = rng.exponential(mean_wait, size)
            reset = age < span
            elapsed = np.where(reset, age, span)
            y = np.where(reset, 0.0, y) + rng.normal(coeffs.v * elapsed, np.sqrt(2.0 * coeffs.D * elapsed))
            inside, _ = np.histogram(y, bins=edges)
            counts[row, 0] = int((y < edges[0]).sum())
            counts[row, 1:-1] = inside
            counts[row, -1] = int((y > edges[-1]).sum())
            previous = t
        return counts

    totals = np.sum(_run_blocks(task, config.n_paths, config.seed, config.block_size, config.workers), axis=0)
    frequencies = totals / config.n_paths
    tv_sorted = 0.5 * np.abs(frequencies - reference).sum(axis=1)
    by_time = dict(zip(ordered, tv_sorted))
    noise_floor = 0.5 * float(np.sum(np.sqrt(2.0 * reference * (1.0 - reference) / (math.pi * config.n_paths))))
    return EmpiricalTV(
        times=list(times),
        tv=[float(by_time[t]) for t in times],
        noise_floor=noise_floor,
        bin_count=int(edges.size - 1),
    )
