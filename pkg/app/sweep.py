#!/usr/bin/env python3
"""Seeded Monte Carlo sweeps over the noise coefficient k"""

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator
from scipy.stats import spearmanr

from ctrlcore import EigenSolveError, TolerancePolicy, kalman_controllable, min_leaders_ND
from graphgen import (
    GraphKind,
    GraphSpec,
    LeaderPolicy,
    NoiseMode,
    NoiseSpec,
    RngStream,
    StreamPurpose,
    apply_noise,
    choose_partition,
    generate_topology,
)
from netmodel import Representation, build_system

logger = logging.getLogger(__name__)

# Default noise grid and trial count
DEFAULT_K_GRID = (1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0)
DEFAULT_TRIALS_PER_K = 2000

# Relative rank tolerance for the preset experiments
RECIPE_REL_TOL = 2e-12

CSV_HEADER = (
    "family", "representation", "noise_mode", "n_f", "n_l", "k", "trials",
    "uncontrollable", "errors", "pct", "seed", "tol_method", "tol_value",
)
FLOAT_FORMAT = ".17g"

# Failures counted in the errors column rather than as verdicts
NUMERICAL_ERRORS = (np.linalg.LinAlgError, EigenSolveError, ArithmeticError)


class SweepConfig(BaseModel):
    """One Monte Carlo experiment"""

    graph: GraphSpec
    representation: Representation = Representation.ADJACENCY
    noise_mode: NoiseMode = NoiseMode.UNSTRUCTURED
    n_followers: int = Field(ge=1)
    n_leaders: int = Field(1, ge=1)
    leader_policy: LeaderPolicy = LeaderPolicy.LAST_INDICES
    k_grid: list[float] = Field(default_factory=lambda: list(DEFAULT_K_GRID), min_length=1)
    trials_per_k: int = Field(DEFAULT_TRIALS_PER_K, ge=1)
    tol: TolerancePolicy = Field(default_factory=TolerancePolicy)
    master_seed: int = Field(ge=0, lt=2**64)

    @field_validator("k_grid")
    @classmethod
    def _check_k_grid(cls, k_grid: list[float]) -> list[float]:
        if any(not k > 0 for k in k_grid):
            raise ValueError("every k must be positive")
        if any(b <= a for a, b in zip(k_grid, k_grid[1:])):
            raise ValueError("k_grid must be strictly increasing")
        return k_grid

    @model_validator(mode="after")
    def _check_sizes(self):
        if self.n_followers + self.n_leaders != self.graph.n:
            raise ValueError(
                f"n_followers + n_leaders must equal graph.n "
                f"({self.n_followers} + {self.n_leaders} != {self.graph.n})"
            )
        return self


class SweepRow(BaseModel):
    k: float
    trials: int
    uncontrollable: int
    errors: int = 0
    pct: float


class SweepResult(BaseModel):
    rows: list[SweepRow]
    config_echo: SweepConfig


def _k_index(config: SweepConfig, k: float) -> int:
    try:
        return config.k_grid.index(k)
    except ValueError:
        raise ValueError(f"k={k} is not in the configured k grid") from None


def run_trial(config: SweepConfig, k: float, trial_index: int) -> bool:
    """One generated network: True iff its follower pencil is uncontrollable

    Topology, noise and leader choice each draw from their own substream of
    (master_seed, k index, trial_index), so the outcome depends only on the
    arguments.
    """
    k_index = _k_index(config, k)

    def stream(purpose: StreamPurpose) -> RngStream:
        return RngStream.for_trial(config.master_seed, k_index, trial_index, purpose)

    base = generate_topology(config.graph, stream(StreamPurpose.TOPOLOGY))
    noisy = apply_noise(base, NoiseSpec(mode=config.noise_mode, k=k), stream(StreamPurpose.NOISE))
    partition = choose_partition(noisy, config.n_leaders, config.leader_policy, stream(StreamPurpose.PARTITION))
    system = build_system(noisy, partition, config.representation)
    report = kalman_controllable(system.F, system.G, config.tol)
    return not report.controllable


def _run_chunk(config: SweepConfig, k: float, start: int, stop: int) -> tuple[int, int]:
    """Count (uncontrollable, errors) over trials start..stop-1"""
    uncontrollable = errors = 0
    for trial_index in range(start, stop):
        try:
            uncontrollable += run_trial(config, k, trial_index)
        except NUMERICAL_ERRORS as e:
            errors += 1
            logger.warning(f"Trial {trial_index} at k={k} failed: {e}")
    return uncontrollable, errors


def _chunks(trials: int, workers: int) -> list[tuple[int, int]]:
    size = math.ceil(trials / workers)
    return [(start, min(start + size, trials)) for start in range(0, trials, size)]


def run_sweep(config: SweepConfig, workers: int = 1) -> SweepResult:
    """Run trials_per_k trials at every k and aggregate the counts

    Counts are independent of the worker count because every trial owns its
    random substreams.
    """
    logger.info(
        f"Sweep {config.graph.kind.value}/{config.representation.value}/{config.noise_mode.value}: "
        f"{len(config.k_grid)} k values x {config.trials_per_k} trials, {workers} worker(s)"
    )
    counts = {k: [0, 0] for k in config.k_grid}

    if workers <= 1:
        for k in config.k_grid:
            counts[k] = list(_run_chunk(config, k, 0, config.trials_per_k))
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = {
                executor.submit(_run_chunk, config, k, start, stop): k
                for k in config.k_grid
                for start, stop in _chunks(config.trials_per_k, workers)
            }
            for future, k in futures.items():
                uncontrollable, errors = future.result()
                counts[k][0] += uncontrollable
                counts[k][1] += errors

    rows = []
    for k in config.k_grid:
        uncontrollable, errors = counts[k]
        rows.append(SweepRow(
            k=k,
            trials=config.trials_per_k,
            uncontrollable=uncontrollable,
            errors=errors,
            pct=100.0 * uncontrollable / config.trials_per_k,
        ))
        if errors:
            logger.warning(f"{errors} trial(s) failed numerically at k={k}")
    return SweepResult(rows=rows, config_echo=config)


def trend_stat(rows: list[SweepRow]) -> float:
    """Spearman rank correlation between k and the uncontrollable percentage

    A constant percentage series has no trend and returns 0.

    Raises:
        ValueError: With fewer than two rows
    """
    if len(rows) < 2:
        raise ValueError("trend_stat needs at least two rows")
    pct = [row.pct for row in rows]
    if len(set(pct)) == 1:
        return 0.0
    rho, _ = spearmanr([row.k for row in rows], pct)
    return 0.0 if math.isnan(rho) else float(rho)


def aggregate_pct(result: SweepResult) -> float:
    """Uncontrollable percentage over the whole k grid"""
    trials = sum(row.trials for row in result.rows)
    return 100.0 * sum(row.uncontrollable for row in result.rows) / trials if trials else 0.0


def to_csv(result: SweepResult) -> str:
    """Render the sweep as CSV text, one row per k"""
    config = result.config_echo
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in result.rows:
        writer.writerow([
            config.graph.kind.value,
            config.representation.value,
            config.noise_mode.value,
            config.n_followers,
            config.n_leaders,
            format(row.k, FLOAT_FORMAT),
            row.trials,
            row.uncontrollable,
            row.errors,
            format(row.pct, FLOAT_FORMAT),
            config.master_seed,
            config.tol.method.value,
            format(config.tol.value, FLOAT_FORMAT),
        ])
    return buffer.getvalue()


def write_csv(result: SweepResult, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(to_csv(result), encoding='utf-8')
    logger.info(f"Wrote {len(result.rows)} rows to {path}")
    return path


def escape_rate(F, G, k: float, trials: int, master_seed: int,
                tol: TolerancePolicy | None = None) -> float:
    """Fraction of trials in which perturbing every entry of (F, G) by
    epsilon/k yields a controllable pencil"""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    G = np.asarray(G, dtype=float).reshape(F.shape[0], -1)
    noise = NoiseSpec(mode=NoiseMode.UNSTRUCTURED, k=k)
    controllable = 0
    for trial_index in range(trials):
        generator = RngStream.for_trial(master_seed, 0, trial_index, StreamPurpose.NOISE).generator()
        eps_f = generator.uniform(-0.5, 0.5, size=F.shape) / noise.k
        eps_g = generator.uniform(-0.5, 0.5, size=G.shape) / noise.k
        controllable += kalman_controllable(F + eps_f, G + eps_g, tol).controllable
    return controllable / trials


def nd_one_rate(n: int, trials: int, master_seed: int, tol: TolerancePolicy | None = None) -> float:
    """Fraction of random dense n x n follower matrices needing a single leader"""
    single = 0
    for trial_index in range(trials):
        generator = RngStream.for_trial(master_seed, 0, trial_index, StreamPurpose.TOPOLOGY).generator()
        single += min_leaders_ND(generator.standard_normal((n, n)), tol) == 1
    return single / trials


def _family_specs(n: int) -> list[GraphSpec]:
    return [GraphSpec(kind=kind, n=n) for kind in (GraphKind.ER, GraphKind.WS, GraphKind.BA)]


def recipe(name: str, master_seed: int, trials_per_k: int = DEFAULT_TRIALS_PER_K) -> list[SweepConfig]:
    """Preset experiment families

    families-adjacency: ER/WS/BA, 11 followers, adjacency, unstructured noise
    er-noise-structure: ER, 12 followers, structured and unstructured noise
    families-laplacian: ER/WS/BA, 10 followers, Laplacian, unstructured noise
    ws-representation: WS, 11 followers, adjacency and Laplacian

    Every preset decides rank with the coarser rel_tol = RECIPE_REL_TOL.
    """
    common = {
        "master_seed": master_seed,
        "trials_per_k": trials_per_k,
        "tol": TolerancePolicy(rel_tol=RECIPE_REL_TOL),
    }
    if name == "families-adjacency":
        return [SweepConfig(graph=spec, n_followers=11, **common) for spec in _family_specs(12)]
    if name == "er-noise-structure":
        return [
            SweepConfig(graph=GraphSpec(kind=GraphKind.ER, n=13), n_followers=12, noise_mode=mode, **common)
            for mode in (NoiseMode.STRUCTURED, NoiseMode.UNSTRUCTURED)
        ]
    if name == "families-laplacian":
        return [
            SweepConfig(graph=spec, n_followers=10, representation=Representation.LAPLACIAN, **common)
            for spec in _family_specs(11)
        ]
    if name == "ws-representation":
        return [
            SweepConfig(graph=GraphSpec(kind=GraphKind.WS, n=12), n_followers=11, representation=rep, **common)
            for rep in (Representation.ADJACENCY, Representation.LAPLACIAN)
        ]
    raise ValueError(f"unknown recipe {name!r}, expected one of {', '.join(RECIPES)}")


RECIPES = ("families-adjacency", "er-noise-structure", "families-laplacian", "ws-representation")
